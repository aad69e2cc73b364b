#include "tsnca/train.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "tsnca/adam.hpp"
#include "tsnca/color.hpp"
#include "tsnca/losses.hpp"

namespace tsnca {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_data(const std::vector<ImagePair>& data, const TrainConfig& cfg) {
  if (data.empty()) throw TrainingError("training: dataset is empty");
  for (const auto& p : data) {
    if (p.low.height() < cfg.crop_size || p.low.width() < cfg.crop_size) {
      throw TrainingError("training: crop " + std::to_string(cfg.crop_size) + " larger than image '" +
                          p.name + "' (" + std::to_string(p.low.height()) + "x" +
                          std::to_string(p.low.width()) + ")");
    }
  }
}

struct Batch {
  std::vector<RgbImage> low;
  std::vector<RgbImage> high;
};

Batch gather(const std::vector<ImagePair>& data, const TrainConfig& cfg, std::size_t step) {
  Batch b;
  for (const auto& s : plan_batch(data, cfg, step)) {
    const auto& pair = data[s.pair_index];
    b.low.push_back(crop(pair.low, s.y0, s.x0, cfg.crop_size, cfg.crop_size));
    b.high.push_back(crop(pair.high, s.y0, s.x0, cfg.crop_size, cfg.crop_size));
  }
  return b;
}

// Stacks C planes per sample into [B,C,h,w].
Tensor<float> stack(const std::vector<std::vector<const ImagePlane*>>& samples) {
  const std::size_t batch = samples.size();
  const std::size_t channels = samples.front().size();
  const std::size_t h = samples.front().front()->height, w = samples.front().front()->width;
  std::vector<float> data;
  data.reserve(batch * channels * h * w);
  for (const auto& planes : samples)
    for (const ImagePlane* p : planes) data.insert(data.end(), p->values.begin(), p->values.end());
  return Tensor<float>::from_data({batch, channels, h, w}, std::move(data));
}

Tensor<float> stack_rgb(const std::vector<RgbImage>& images) {
  std::vector<std::vector<const ImagePlane*>> samples;
  for (const auto& img : images) samples.push_back({&img.planes[0], &img.planes[1], &img.planes[2]});
  return stack(samples);
}

LossLogRow log_row(std::size_t step, const losses::LossReport<float>& report) {
  LossLogRow row;
  row.step = step;
  row.terms = report.terms;
  row.total = report.total_value();
  return row;
}

std::string describe(const LossLogRow& row) {
  std::ostringstream os;
  os << "step " << row.step;
  for (const auto& [name, v] : row.terms) os << ' ' << name << '=' << v;
  os << " total=" << row.total;
  return os.str();
}

nn::NetworkParams<float> initial_params(const TrainConfig& cfg, const nn::UNetConfig& net,
                                        const Checkpoint* resume) {
  if (!resume) return nn::init_params<float>(net, cfg.seed);
  return params_from_checkpoint(*resume, net, true);
}

// One optimizer loop shared by both stages; `step_loss` builds the loss for a step.
template <typename LossFn>
TrainResult run_training(const TrainConfig& cfg, nn::NetworkParams<float> params,
                         const Checkpoint* resume, const StepObserver& observer, LossFn step_loss) {
  Adam<float> adam(params.entries(), cfg.adam_options());
  std::size_t start = 0;
  if (resume) {
    restore_optimizer(*resume, adam);
    start = static_cast<std::size_t>(resume->step);
  }
  TrainResult result;
  for (std::size_t step = start; step < cfg.max_steps; ++step) {
    adam.zero_grad();
    losses::LossReport<float> report;
    try {
      report = step_loss(params, step);
    } catch (const NumericError& e) {
      throw TrainingError("training: non-finite value at step " + std::to_string(step + 1) + ": " +
                          e.what());
    }
    auto row = log_row(step + 1, report);
    if (!std::isfinite(row.total)) {
      throw TrainingError("training: non-finite loss, " + describe(row));
    }
    report.total.backward();
    adam.step();
    if (observer) observer(row);
    result.log.push_back(std::move(row));
  }
  result.checkpoint = make_checkpoint(params, &adam, std::max(start, cfg.max_steps));
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw std::invalid_argument("train config: stage must be 1 or 2");
  if (batch_size == 0) throw std::invalid_argument("train config: batch size must be at least 1");
  if (crop_size == 0) throw std::invalid_argument("train config: crop size must be positive");
  if (depth == 0) throw std::invalid_argument("train config: depth must be at least 1");
  if (crop_size % (std::size_t{1} << depth) != 0) {
    throw std::invalid_argument("train config: crop size " + std::to_string(crop_size) +
                                " not divisible by 2^depth = " +
                                std::to_string(std::size_t{1} << depth));
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train config: Adam betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be positive");
  network_config().validate();
}

nn::UNetConfig TrainConfig::network_config() const {
  if (stage == 1) return nn::UNetConfig::enhancer(base_channels, depth);
  return nn::UNetConfig::restorer(base_channels, depth, with_channel_attention);
}

AdamOptions TrainConfig::adam_options() const {
  return {learning_rate, beta1, beta2, epsilon};
}

FeatureExtractor<float> make_extractor(const TrainConfig& config) {
  if (config.perceptual_weights) {
    return FeatureExtractor<float>::load(*config.perceptual_weights, config.perceptual_tap);
  }
  return FeatureExtractor<float>::seeded(config.extractor_seed);
}

std::vector<BatchSample> plan_batch(const std::vector<ImagePair>& data, const TrainConfig& config,
                                    std::size_t step) {
  std::vector<BatchSample> plan;
  for (std::size_t i = 0; i < config.batch_size; ++i) {
    BatchSample s;
    s.pair_index = (step * config.batch_size + i) % data.size();
    const auto& img = data[s.pair_index].low;
    std::mt19937_64 rng(mix(mix(config.seed) ^ mix(step * 1315423911ULL + i)));
    const std::size_t ry = img.height() - config.crop_size + 1;
    const std::size_t rx = img.width() - config.crop_size + 1;
    s.y0 = static_cast<std::size_t>(rng() % ry);
    s.x0 = static_cast<std::size_t>(rng() % rx);
    plan.push_back(s);
  }
  return plan;
}

Tensor<float> stage1_input(const std::vector<RgbImage>& low_crops, bool use_hs_input) {
  if (low_crops.empty()) throw ShapeError("stage1_input: empty batch");
  std::vector<HsvImage> hsv;
  hsv.reserve(low_crops.size());
  for (const auto& img : low_crops) hsv.push_back(color::rgb_to_hsv(img));
  std::vector<std::vector<const ImagePlane*>> samples;
  for (const auto& h : hsv) {
    if (use_hs_input) samples.push_back({&h.h(), &h.s(), &h.v()});
    else samples.push_back({&h.v(), &h.v(), &h.v()});
  }
  return stack(samples);
}

Tensor<float> stage1_recombine(const std::vector<RgbImage>& low_crops,
                               const nn::NetworkParams<float>& enhancer,
                               const nn::UNetConfig& enhancer_config, bool use_hs_input,
                               std::vector<ImagePlane>* enhanced_v) {
  auto input = stage1_input(low_crops, use_hs_input);
  auto v_out = nn::unet_forward(input, enhancer, enhancer_config);
  std::vector<RgbImage> recombined;
  for (std::size_t i = 0; i < low_crops.size(); ++i) {
    ImagePlane v = plane_from_tensor(v_out, i, 0);
    const HsvImage hsv = color::rgb_to_hsv(low_crops[i]);
    recombined.push_back(color::hsv_to_rgb(color::replace_value_channel(hsv, v)));
    if (enhanced_v) enhanced_v->push_back(std::move(v));
  }
  return stack_rgb(recombined);
}

TrainResult train_stage1(const std::vector<ImagePair>& data, const TrainConfig& cfg,
                         const Checkpoint* resume, const StepObserver& observer) {
  if (cfg.stage != 1) throw std::invalid_argument("train_stage1: config is for stage " + std::to_string(cfg.stage));
  cfg.validate();
  check_data(data, cfg);
  const auto net = cfg.network_config();
  const auto extractor = make_extractor(cfg);

  return run_training(cfg, initial_params(cfg, net, resume), resume, observer,
                      [&](const nn::NetworkParams<float>& params, std::size_t step) {
                        const Batch batch = gather(data, cfg, step);
                        auto input = stage1_input(batch.low, cfg.use_hs_input);
                        std::vector<HsvImage> high_hsv;
                        std::vector<std::vector<const ImagePlane*>> targets;
                        for (const auto& img : batch.high) high_hsv.push_back(color::rgb_to_hsv(img));
                        for (const auto& h : high_hsv) targets.push_back({&h.v()});
                        auto v_high = stack(targets);
                        auto v_out = nn::unet_forward(input, params, net);
                        return losses::stage1_loss(v_out, v_high, extractor, cfg.use_ssim_loss_stage1);
                      });
}

TrainResult train_stage2(const std::vector<ImagePair>& data, const Checkpoint& stage1,
                         const TrainConfig& cfg, const Checkpoint* resume,
                         const StepObserver& observer) {
  if (cfg.stage != 2) throw std::invalid_argument("train_stage2: config is for stage " + std::to_string(cfg.stage));
  cfg.validate();
  check_data(data, cfg);
  const auto enhancer_config = config_from_checkpoint(stage1);
  if (enhancer_config.in_channels != 3 || enhancer_config.out_channels != 1) {
    throw FingerprintMismatch("train_stage2: '" + stage1.fingerprint +
                              "' is not a stage-one enhancer architecture");
  }
  if (cfg.crop_size % enhancer_config.size_multiple() != 0) {
    throw std::invalid_argument("train_stage2: crop size not divisible by the enhancer's 2^depth");
  }
  const auto enhancer = params_from_checkpoint(stage1, enhancer_config, false);
  const auto net = cfg.network_config();

  return run_training(cfg, initial_params(cfg, net, resume), resume, observer,
                      [&](const nn::NetworkParams<float>& params, std::size_t step) {
                        const Batch batch = gather(data, cfg, step);
                        auto intermediate = stage1_recombine(batch.low, enhancer, enhancer_config,
                                                             cfg.use_hs_input);
                        auto target = stack_rgb(batch.high);
                        auto restored = nn::unet_forward(intermediate, params, net);
                        return losses::stage2_loss(restored, target);
                      });
}

}  // namespace tsnca
