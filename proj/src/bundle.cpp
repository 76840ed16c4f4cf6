#include "plfam/bundle.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "plfam/csv.hpp"

namespace plfam {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "bundle matrix blocks are little-endian");

constexpr int kBundleVersion = 1;

std::string matrix_bytes(const Matrix& m) {
  std::string bytes(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
  std::size_t off = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      std::memcpy(bytes.data() + off, &m(i, j), sizeof(double));
      off += sizeof(double);
    }
  return bytes;
}

json save_matrix(const std::string& dir, const std::string& name,
                 const Matrix& m) {
  const std::string file = name + ".f64";
  write_file_atomic(dir + "/" + file, matrix_bytes(m));
  return json{{"file", file}, {"rows", m.rows()}, {"cols", m.cols()}};
}

Matrix load_matrix(const std::string& dir, const json& entry) {
  const std::string file = entry.at("file").get<std::string>();
  const Index rows = entry.at("rows").get<Index>();
  const Index cols = entry.at("cols").get<Index>();
  const std::string bytes = read_file(dir + "/" + file);
  const std::size_t expected =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) *
      sizeof(double);
  if (rows < 0 || cols < 0 || bytes.size() != expected)
    throw DataError(dir + "/" + file + ": size does not match manifest (" +
                    std::to_string(bytes.size()) + " bytes for " +
                    std::to_string(rows) + "x" + std::to_string(cols) + ")");
  Matrix m(rows, cols);
  std::size_t off = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      std::memcpy(&m(i, j), bytes.data() + off, sizeof(double));
      off += sizeof(double);
    }
  return m;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

template <typename T>
json index_list_json(const std::vector<T>& idx) {
  json arr = json::array();
  for (auto i : idx) arr.push_back(i);
  return arr;
}

std::vector<Index> index_list_from_json(const json& arr) {
  std::vector<Index> out;
  for (const auto& v : arr) out.push_back(v.get<Index>());
  return out;
}

}  // namespace

void save_bundle(const std::string& dir, const ModelBundle& bundle) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create bundle directory '" + dir + "'");

  const AveragedFit& fit = bundle.fit;
  json manifest;
  manifest["format"] = "plfam-model-bundle";
  manifest["version"] = kBundleVersion;
  manifest["mode"] =
      fit.config.mode == CandidateMode::Nested ? "nested" : "non_nested";
  manifest["scalar_names"] = bundle.scalar_names;
  manifest["scalar_pool"] = index_list_json(fit.config.scalar_pool);
  manifest["score_pool"] = index_list_json(fit.config.score_pool);
  manifest["q_folds"] = fit.config.q_folds;
  manifest["seed"] = fit.config.seed;
  manifest["basis"] = {{"order", fit.basis.order},
                       {"interior_knots", fit.basis.interior_knots.size()}};

  json matrices;
  matrices["grid"] = save_matrix(dir, "fpca_grid", fit.fpca.grid);
  matrices["mean"] = save_matrix(dir, "fpca_mean", fit.fpca.mean);
  matrices["eigenvalues"] =
      save_matrix(dir, "fpca_eigenvalues", fit.fpca.eigenvalues);
  matrices["eigenfunctions"] =
      save_matrix(dir, "fpca_eigenfunctions", fit.fpca.eigenfunctions);
  manifest["fpca"] = matrices;

  json candidates = json::array();
  for (std::size_t m = 0; m < fit.specs.size(); ++m) {
    const CandidateSpec& spec = fit.specs[m];
    const FittedCandidate& cand = fit.fits[m];
    json entry;
    entry["scalars"] = index_list_json(spec.scalar_columns);
    entry["scores"] = index_list_json(spec.score_columns);
    entry["intercept"] = spec.include_intercept;
    entry["tau"] = cand.smoothing_tau;
    entry["edf"] = cand.edf;
    entry["sigma2"] = cand.sigma2_hat;
    entry["used_jitter"] = cand.used_jitter;
    entry["coefficients"] = save_matrix(
        dir, "cand_" + std::to_string(m) + "_coefficients",
        Matrix(cand.coefficients));
    candidates.push_back(std::move(entry));
  }
  manifest["candidates"] = std::move(candidates);

  manifest["criteria"] = {{"aic", vector_json(fit.criteria.aic)},
                          {"bic", vector_json(fit.criteria.bic)},
                          {"aic_index", fit.criteria.aic_index},
                          {"bic_index", fit.criteria.bic_index},
                          {"saic", vector_json(fit.criteria.saic)},
                          {"sbic", vector_json(fit.criteria.sbic)}};
  manifest["cv"] = {{"weights", vector_json(fit.cv_weights.weights)},
                    {"objective", fit.cv_weights.objective},
                    {"iterations", fit.cv_weights.solver_iterations},
                    {"converged", fit.cv_weights.converged}};

  // manifest last: its presence marks a complete bundle
  write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

ModelBundle load_bundle(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw DataError(dir + "/manifest.json: " + e.what());
  }

  try {
    if (manifest.at("format").get<std::string>() != "plfam-model-bundle")
      throw DataError(dir + ": not a model bundle");
    if (manifest.at("version").get<int>() != kBundleVersion)
      throw DataError(dir + ": unsupported bundle version " +
                      manifest.at("version").dump());

    ModelBundle bundle;
    AveragedFit& fit = bundle.fit;
    bundle.scalar_names =
        manifest.at("scalar_names").get<std::vector<std::string>>();
    const std::string mode = manifest.at("mode").get<std::string>();
    if (mode != "nested" && mode != "non_nested")
      throw DataError(dir + ": unknown candidate mode '" + mode + "'");
    fit.config.mode = mode == "nested" ? CandidateMode::Nested
                                       : CandidateMode::NonNested;
    fit.config.scalar_pool =
        index_list_from_json(manifest.at("scalar_pool"));
    fit.config.score_pool = index_list_from_json(manifest.at("score_pool"));
    fit.config.q_folds = manifest.at("q_folds").get<Index>();
    fit.config.seed = manifest.at("seed").get<std::uint64_t>();

    const json& basis = manifest.at("basis");
    fit.config.spline_order = basis.at("order").get<int>();
    fit.config.n_interior = basis.at("interior_knots").get<Index>();
    fit.basis = make_basis(fit.config.n_interior, fit.config.spline_order);

    const json& fpca = manifest.at("fpca");
    fit.fpca.grid = load_matrix(dir, fpca.at("grid"));
    fit.fpca.mean = load_matrix(dir, fpca.at("mean"));
    fit.fpca.eigenvalues = load_matrix(dir, fpca.at("eigenvalues"));
    fit.fpca.eigenfunctions = load_matrix(dir, fpca.at("eigenfunctions"));
    fit.fpca.quadrature_weights = trapezoid_weights(fit.fpca.grid);
    if (fit.fpca.eigenfunctions.cols() != fit.fpca.grid.size() ||
        fit.fpca.mean.size() != fit.fpca.grid.size() ||
        fit.fpca.eigenvalues.size() != fit.fpca.eigenfunctions.rows())
      throw DataError(dir + ": inconsistent component shapes in manifest");

    for (const json& entry : manifest.at("candidates")) {
      CandidateSpec spec;
      spec.scalar_columns = index_list_from_json(entry.at("scalars"));
      spec.score_columns = index_list_from_json(entry.at("scores"));
      spec.bases.assign(spec.score_columns.size(), fit.basis);
      spec.include_intercept = entry.at("intercept").get<bool>();

      FittedCandidate cand;
      cand.coefficients = load_matrix(dir, entry.at("coefficients"));
      cand.smoothing_tau = entry.at("tau").get<double>();
      cand.edf = entry.at("edf").get<double>();
      cand.sigma2_hat = entry.at("sigma2").get<double>();
      cand.used_jitter = entry.at("used_jitter").get<bool>();

      fit.specs.push_back(std::move(spec));
      fit.fits.push_back(std::move(cand));
    }
    if (fit.specs.empty()) throw DataError(dir + ": bundle has no candidates");

    const json& crit = manifest.at("criteria");
    fit.criteria.aic = vector_from_json(crit.at("aic"));
    fit.criteria.bic = vector_from_json(crit.at("bic"));
    fit.criteria.aic_index = crit.at("aic_index").get<Index>();
    fit.criteria.bic_index = crit.at("bic_index").get<Index>();
    fit.criteria.saic = vector_from_json(crit.at("saic"));
    fit.criteria.sbic = vector_from_json(crit.at("sbic"));

    const json& cv = manifest.at("cv");
    fit.cv_weights.weights = vector_from_json(cv.at("weights"));
    fit.cv_weights.objective = cv.at("objective").get<double>();
    fit.cv_weights.solver_iterations = cv.at("iterations").get<Index>();
    fit.cv_weights.converged = cv.at("converged").get<bool>();

    const Index m = static_cast<Index>(fit.specs.size());
    if (fit.criteria.aic.size() != m || fit.cv_weights.weights.size() != m ||
        fit.criteria.saic.size() != m)
      throw DataError(dir + ": weight vectors do not match candidate count");
    return bundle;
  } catch (const json::exception& e) {
    throw DataError(dir + "/manifest.json: " + e.what());
  }
}

}  // namespace plfam
