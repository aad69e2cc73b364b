#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsnca/checkpoint.hpp"
#include "tsnca/metrics.hpp"
#include "tsnca/nn.hpp"

namespace tsnca {

struct EnhanceResult {
  RgbImage output;
  // Enhanced V plane and the recombined RGB image fed to the restorer.
  ImagePlane enhanced_v;
  RgbImage stage2_input;
};

// Full two-stage inference: RGB -> HSV -> enhanced V -> recombined RGB ->
// restorer. Inputs whose sides are not multiples of 2^depth are mirror-padded
// and the results cropped back.
class Enhancer {
 public:
  Enhancer(const Checkpoint& stage1, const Checkpoint& stage2, bool use_hs_input = true);

  EnhanceResult run(const RgbImage& low) const;

  const nn::UNetConfig& enhancer_config() const { return enhancer_config_; }
  const nn::UNetConfig& restorer_config() const { return restorer_config_; }

 private:
  nn::UNetConfig enhancer_config_;
  nn::UNetConfig restorer_config_;
  nn::NetworkParams<float> enhancer_;
  nn::NetworkParams<float> restorer_;
  bool use_hs_input_;
};

struct EvaluationRow {
  std::string name;
  std::optional<metrics::MetricReport> report;
  std::string error;  // set when report is empty
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  // Field-wise mean over successful rows; infinite values are excluded and
  // the mean is +inf only when every value is infinite.
  metrics::MetricReport aggregate;
  std::size_t ok_count = 0;
};

// Pairs every PNG in gt_dir with the same-named file in pred_dir. Failures
// are confined to their own row.
EvaluationReport evaluate_directories(const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& gt_dir);
metrics::MetricReport aggregate_rows(const std::vector<EvaluationRow>& rows, std::size_t* ok = nullptr);

}  // namespace tsnca
