#include "plfam/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "plfam/bundle.hpp"
#include "plfam/csv.hpp"
#include "plfam/pipeline.hpp"
#include "plfam/simbench.hpp"
#include "plfam/util.hpp"

namespace plfam {

namespace {

using nlohmann::json;

struct CandidateFile {
  CandidateMode mode = CandidateMode::Nested;
  std::vector<std::string> scalar_pool;  // column names in the scalars CSV
  std::vector<Index> score_pool;         // 1-based component indices
  Index q = 5;
  bool has_q = false;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

CandidateFile read_candidate_file(const std::string& path) {
  CandidateFile out;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    const std::string mode = doc.at("mode").get<std::string>();
    if (mode == "nested")
      out.mode = CandidateMode::Nested;
    else if (mode == "non_nested")
      out.mode = CandidateMode::NonNested;
    else
      throw DataError(path + ": mode must be \"nested\" or \"non_nested\"");
    out.scalar_pool = doc.at("scalar_pool").get<std::vector<std::string>>();
    for (const auto& v : doc.at("score_pool")) {
      const Index k = v.get<Index>();
      if (k < 1)
        throw DataError(path + ": score_pool entries are 1-based, got " +
                        std::to_string(k));
      out.score_pool.push_back(k);
    }
    if (doc.contains("Q")) {
      out.q = doc.at("Q").get<Index>();
      out.has_q = true;
    }
    if (doc.contains("seed")) {
      out.seed = doc.at("seed").get<std::uint64_t>();
      out.has_seed = true;
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (out.scalar_pool.empty() || out.score_pool.empty())
    throw DataError(path + ": scalar_pool and score_pool must be nonempty");
  return out;
}

void check_ids_align(const std::vector<std::string>& a,
                     const std::string& a_file,
                     const std::vector<std::string>& b,
                     const std::string& b_file) {
  if (a.empty() || b.empty()) return;  // files without ids align by order
  if (a.size() != b.size())
    throw DataError(a_file + " has " + std::to_string(a.size()) +
                    " rows but " + b_file + " has " +
                    std::to_string(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i])
      throw DataError("row " + std::to_string(i + 1) + ": id '" + a[i] +
                      "' in " + a_file + " does not match '" + b[i] +
                      "' in " + b_file);
}

void check_row_counts(Index a, const std::string& a_file, Index b,
                      const std::string& b_file) {
  if (a != b)
    throw DataError(a_file + " has " + std::to_string(a) + " rows but " +
                    b_file + " has " + std::to_string(b));
}

std::vector<Index> map_scalar_pool(const std::vector<std::string>& pool,
                                   const CsvTable& scalars,
                                   const std::string& scalars_file) {
  std::vector<Index> indices;
  for (const auto& name : pool) {
    auto it = std::find(scalars.columns.begin(), scalars.columns.end(), name);
    if (it == scalars.columns.end())
      throw DataError("scalar_pool column '" + name + "' not found in " +
                      scalars_file);
    indices.push_back(
        static_cast<Index>(it - scalars.columns.begin()));
  }
  return indices;
}

std::string joined_1based(const std::vector<Index>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i] + 1);
  }
  return out;
}

// weights above 1e-5, heaviest first, candidate order breaking ties
std::string weight_report_csv(const AveragedFit& fit) {
  std::vector<Index> order(fit.specs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return fit.cv_weights.weights[a] > fit.cv_weights.weights[b];
  });
  std::string out = "candidate_id,scalar_cols,score_cols,weight\n";
  for (Index m : order) {
    const double w = fit.cv_weights.weights[m];
    if (!(w > 1e-5)) continue;
    const CandidateSpec& spec = fit.specs[static_cast<std::size_t>(m)];
    out += std::to_string(m + 1) + "," + joined_1based(spec.scalar_columns) +
           "," + joined_1based(spec.score_columns) + "," + format_double(w) +
           "\n";
  }
  return out;
}

struct FitArgs {
  std::string scalars, curves, response, candidates, out;
  Index q = 0;
  std::uint64_t seed = 0;
  bool has_q = false, has_seed = false;
};

int cmd_fit(const FitArgs& args) {
  const CandidateFile cand = read_candidate_file(args.candidates);
  const CsvTable scalars = read_csv_table(args.scalars);
  const FunctionalTable curves = read_functional_csv(args.curves);
  const ResponseTable response = read_response_csv(args.response);

  check_row_counts(scalars.values.rows(), args.scalars,
                   curves.data.values.rows(), args.curves);
  check_row_counts(scalars.values.rows(), args.scalars,
                   response.values.size(), args.response);
  check_ids_align(scalars.ids, args.scalars, curves.ids, args.curves);
  check_ids_align(curves.ids, args.curves, response.ids, args.response);
  check_ids_align(scalars.ids, args.scalars, response.ids, args.response);

  PipelineConfig config;
  config.mode = cand.mode;
  config.scalar_pool = map_scalar_pool(cand.scalar_pool, scalars,
                                       args.scalars);
  for (Index k : cand.score_pool) config.score_pool.push_back(k - 1);
  config.q_folds = args.has_q ? args.q : (cand.has_q ? cand.q : 5);
  config.seed = args.has_seed ? args.seed : (cand.has_seed ? cand.seed : 0);

  AveragedFit fit =
      fit_averaging(scalars.values, curves.data, response.values, config);

  ModelBundle bundle{std::move(fit), scalars.columns};
  save_bundle(args.out, bundle);
  write_file_atomic(args.out + "/weights.csv",
                    weight_report_csv(bundle.fit));

  const AveragedFit& f = bundle.fit;
  std::printf("fitted %zu candidates on %lld rows\n", f.specs.size(),
              static_cast<long long>(response.values.size()));
  std::printf("components used: %lld, basis size: %lld, Q=%lld\n",
              static_cast<long long>(f.fpca.eigenvalues.size()),
              static_cast<long long>(f.basis.n_basis),
              static_cast<long long>(f.config.q_folds));
  std::printf("aic pick: candidate %lld, bic pick: candidate %lld\n",
              static_cast<long long>(f.criteria.aic_index + 1),
              static_cast<long long>(f.criteria.bic_index + 1));
  std::printf("cv objective %s after %lld iterations (%s)\n",
              format_double(f.cv_weights.objective).c_str(),
              static_cast<long long>(f.cv_weights.solver_iterations),
              f.cv_weights.converged ? "converged" : "not converged");
  std::printf("bundle written to %s\n", args.out.c_str());
  return 0;
}

struct PredictArgs {
  std::string bundle, scalars, curves, response, out;
  std::string method = "cvma";
};

int cmd_predict(const PredictArgs& args) {
  const Method method = parse_method(args.method);
  const ModelBundle bundle = load_bundle(args.bundle);
  const CsvTable scalars = read_csv_table(args.scalars);
  const FunctionalTable curves = read_functional_csv(args.curves);

  check_row_counts(scalars.values.rows(), args.scalars,
                   curves.data.values.rows(), args.curves);
  check_ids_align(scalars.ids, args.scalars, curves.ids, args.curves);

  // reorder the new scalar columns into the training layout by name
  Matrix x(scalars.values.rows(),
           static_cast<Index>(bundle.scalar_names.size()));
  for (std::size_t c = 0; c < bundle.scalar_names.size(); ++c) {
    auto it = std::find(scalars.columns.begin(), scalars.columns.end(),
                        bundle.scalar_names[c]);
    if (it == scalars.columns.end())
      throw DataError("bundle requires scalar column '" +
                      bundle.scalar_names[c] + "' missing from " +
                      args.scalars);
    x.col(static_cast<Index>(c)) =
        scalars.values.col(it - scalars.columns.begin());
  }

  const Vector yhat = predict_method(bundle.fit, method, x, curves.data);

  CsvTable out;
  out.columns = {"prediction"};
  out.ids = curves.ids;
  out.values = yhat;
  write_file_atomic(args.out, render_csv_table(out));
  std::printf("wrote %lld predictions to %s\n",
              static_cast<long long>(yhat.size()), args.out.c_str());

  if (!args.response.empty()) {
    const ResponseTable response = read_response_csv(args.response);
    check_row_counts(yhat.size(), args.curves, response.values.size(),
                     args.response);
    check_ids_align(curves.ids, args.curves, response.ids, args.response);
    const double mspe = (yhat - response.values).squaredNorm() /
                        static_cast<double>(yhat.size());
    std::printf("MSPE: %s\n", format_double(mspe).c_str());
  }
  return 0;
}

struct BenchArgs {
  int design = 1;
  std::vector<double> r2 = {0.5};
  Index n = 100;
  Index n_test = 500;
  int reps = 100;
  Index q = 5;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_bench(const BenchArgs& args) {
  const auto start = std::chrono::steady_clock::now();

  PipelineConfig pipeline;
  pipeline.mode = CandidateMode::Nested;
  pipeline.scalar_pool = {0, 1, 2, 3, 4};
  pipeline.score_pool = {0, 1, 2};
  pipeline.q_folds = args.q;
  const std::vector<Method> methods = {Method::Aic, Method::Bic, Method::Saic,
                                       Method::Sbic, Method::Cvma};

  std::vector<ReplicationReport> reports;
  for (double r2 : args.r2) {
    DesignConfig config;
    config.design = args.design;
    config.n_train = args.n;
    config.n_test = args.n_test;
    config.r2 = r2;
    config.seed = args.seed;
    config.replications = args.reps;
    validate(config);
    std::printf("design %d n=%lld R2=%s D=%d seed=%llu\n", args.design,
                static_cast<long long>(args.n), format_double(r2).c_str(),
                args.reps, static_cast<unsigned long long>(args.seed));
    reports.push_back(run_replications(config, pipeline, methods));
    const auto& failed = reports.back().failed_replications;
    if (!failed.empty())
      std::printf("  %zu replications failed and were excluded\n",
                  failed.size());
  }

  write_file_atomic(args.out + "/raw.csv", raw_csv(reports));
  write_file_atomic(args.out + "/summary.csv", summary_csv(reports));
  std::printf("%s", nmspe_table(reports).c_str());
  std::printf("wrote %s/raw.csv and %s/summary.csv\n", args.out.c_str(),
              args.out.c_str());
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  std::printf("runtime: %.1f s\n", elapsed.count());
  return 0;
}

struct StandardizeArgs {
  std::string scalars, out;
};

int cmd_standardize(const StandardizeArgs& args) {
  CsvTable table = read_csv_table(args.scalars);
  const Index n = table.values.rows();
  if (n < 2) throw DataError(args.scalars + ": need at least two rows");

  CsvTable stats;
  stats.columns = {"column", "mean", "sd"};
  std::string stats_csv = "column,mean,sd\n";
  for (Index c = 0; c < table.values.cols(); ++c) {
    const double mean = table.values.col(c).mean();
    const double sd = std::sqrt(
        (table.values.col(c).array() - mean).square().sum() /
        static_cast<double>(n - 1));
    if (!(sd > 0.0))
      throw DataError("column '" + table.columns[static_cast<std::size_t>(c)] +
                      "' has zero standard deviation");
    table.values.col(c) = (table.values.col(c).array() - mean) / sd;
    stats_csv += table.columns[static_cast<std::size_t>(c)] + "," +
                 format_double(mean) + "," + format_double(sd) + "\n";
  }

  write_file_atomic(args.out + "/standardized.csv", render_csv_table(table));
  write_file_atomic(args.out + "/stats.csv", stats_csv);
  std::printf("standardized %lld columns, wrote %s/standardized.csv and "
              "%s/stats.csv\n",
              static_cast<long long>(table.values.cols()), args.out.c_str(),
              args.out.c_str());
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"partially linear functional additive model averaging"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "fit candidates and weights");
  fit->add_option("--scalars", fit_args.scalars, "scalar covariate CSV")
      ->required();
  fit->add_option("--curves", fit_args.curves, "functional data CSV")
      ->required();
  fit->add_option("--response", fit_args.response, "response CSV")->required();
  fit->add_option("--candidates", fit_args.candidates,
                  "candidate set JSON")
      ->required();
  fit->add_option("--out", fit_args.out, "bundle output directory")
      ->required();
  auto* fit_q = fit->add_option("--Q", fit_args.q, "fold count");
  auto* fit_seed = fit->add_option("--seed", fit_args.seed, "fold seed");

  PredictArgs predict_args;
  CLI::App* predict =
      app.add_subcommand("predict", "predict from a fitted bundle");
  predict->add_option("bundle", predict_args.bundle, "bundle directory")
      ->required();
  predict->add_option("--scalars", predict_args.scalars, "scalar CSV")
      ->required();
  predict->add_option("--curves", predict_args.curves, "functional CSV")
      ->required();
  predict->add_option("--response", predict_args.response,
                      "response CSV for MSPE report");
  predict->add_option("--method", predict_args.method,
                      "aic|bic|saic|sbic|cvma");
  predict->add_option("--out", predict_args.out, "prediction CSV path")
      ->required();

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "simulation benchmark");
  bench->add_option("--design", bench_args.design, "design 1, 2 or 3")
      ->required();
  bench->add_option("--r2", bench_args.r2,
                    "target R2 levels (repeatable)");
  bench->add_option("--n", bench_args.n, "training rows");
  bench->add_option("--n-test", bench_args.n_test, "test rows");
  bench->add_option("--reps", bench_args.reps, "replication count");
  bench->add_option("--Q", bench_args.q, "fold count");
  bench->add_option("--seed", bench_args.seed, "base seed");
  bench->add_option("--out", bench_args.out, "report output directory")
      ->required();

  StandardizeArgs std_args;
  CLI::App* standardize =
      app.add_subcommand("standardize", "center and scale CSV columns");
  standardize->add_option("--scalars", std_args.scalars, "input CSV")
      ->required();
  standardize->add_option("--out", std_args.out, "output directory")
      ->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit) {
      fit_args.has_q = fit_q->count() > 0;
      fit_args.has_seed = fit_seed->count() > 0;
      return cmd_fit(fit_args);
    }
    if (*predict) return cmd_predict(predict_args);
    if (*bench) return cmd_bench(bench_args);
    if (*standardize) return cmd_standardize(std_args);
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 3;
  }
  return 1;
}

}  // namespace plfam
