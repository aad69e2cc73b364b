#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsnca/checkpoint.hpp"
#include "tsnca/dataset.hpp"
#include "tsnca/feature_extractor.hpp"
#include "tsnca/nn.hpp"

namespace tsnca {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int stage = 1;
  std::size_t batch_size = 4;
  std::size_t crop_size = 64;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  bool use_hs_input = true;
  bool use_ssim_loss_stage1 = false;
  bool with_channel_attention = true;
  std::size_t base_channels = 8;
  std::size_t depth = 3;
  // Perceptual-loss extractor: seeded stack unless a weights file is given.
  std::uint64_t extractor_seed = 20220101;
  std::optional<std::filesystem::path> perceptual_weights;
  std::optional<std::size_t> perceptual_tap;

  // Throws std::invalid_argument on the first violated constraint.
  void validate() const;
  nn::UNetConfig network_config() const;
  AdamOptions adam_options() const;
};

struct LossLogRow {
  std::size_t step = 0;
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossLogRow> log;
};

// Called after every optimizer step.
using StepObserver = std::function<void(const LossLogRow&)>;

// The perceptual extractor a run with this config uses.
FeatureExtractor<float> make_extractor(const TrainConfig& config);

// Inputs for one step: sample i of the batch is pair (step*B + i) mod n,
// cropped at an offset drawn from a generator keyed by (seed, step, i).
struct BatchSample {
  std::size_t pair_index = 0;
  std::size_t y0 = 0;
  std::size_t x0 = 0;
};
std::vector<BatchSample> plan_batch(const std::vector<ImagePair>& data, const TrainConfig& config,
                                    std::size_t step);

// [B,3,c,c] stage-one input ([H,S,V], or V replicated when use_hs_input is
// false) from low-light RGB crops.
Tensor<float> stage1_input(const std::vector<RgbImage>& low_crops, bool use_hs_input);

// Runs the enhancer without gradient tracking, recombines the predicted V
// with the original H and S, and returns the RGB images ([B,3,h,w]).
Tensor<float> stage1_recombine(const std::vector<RgbImage>& low_crops,
                               const nn::NetworkParams<float>& enhancer,
                               const nn::UNetConfig& enhancer_config, bool use_hs_input,
                               std::vector<ImagePlane>* enhanced_v = nullptr);

// Trains the enhancer (cfg.stage == 1). `resume`, when given, must match the
// configured architecture; training then continues from its step up to
// cfg.max_steps.
TrainResult train_stage1(const std::vector<ImagePair>& data, const TrainConfig& cfg,
                         const Checkpoint* resume = nullptr, const StepObserver& observer = {});

// Trains the restorer (cfg.stage == 2) on top of a frozen enhancer.
TrainResult train_stage2(const std::vector<ImagePair>& data, const Checkpoint& stage1,
                         const TrainConfig& cfg, const Checkpoint* resume = nullptr,
                         const StepObserver& observer = {});

}  // namespace tsnca
