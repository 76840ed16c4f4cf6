#pragma once

#include <string>
#include <vector>

#include "plfam/pipeline.hpp"

namespace plfam {

// On-disk model: a directory holding manifest.json plus raw little-endian
// float64 row-major matrix blocks. Only prediction-relevant state persists;
// training scores and the fold plan are not written back.
struct ModelBundle {
  AveragedFit fit;
  std::vector<std::string> scalar_names;  // training scalar column order
};

void save_bundle(const std::string& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& dir);

}  // namespace plfam
