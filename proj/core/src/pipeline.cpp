#include "tsnca/pipeline.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "tsnca/dataset.hpp"
#include "tsnca/png_io.hpp"
#include "tsnca/train.hpp"

namespace tsnca {
namespace fs = std::filesystem;

namespace {

nn::UNetConfig expect_architecture(const Checkpoint& ckpt, std::size_t out_channels,
                                   const char* role) {
  const auto config = config_from_checkpoint(ckpt);
  if (config.in_channels != 3 || config.out_channels != out_channels) {
    throw FingerprintMismatch(std::string("enhance: '") + ckpt.fingerprint + "' is not a " + role +
                              " architecture");
  }
  return config;
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace

Enhancer::Enhancer(const Checkpoint& stage1, const Checkpoint& stage2, bool use_hs_input)
    : enhancer_config_(expect_architecture(stage1, 1, "stage-one enhancer")),
      restorer_config_(expect_architecture(stage2, 3, "stage-two restorer")),
      enhancer_(params_from_checkpoint(stage1, enhancer_config_)),
      restorer_(params_from_checkpoint(stage2, restorer_config_)),
      use_hs_input_(use_hs_input) {}

EnhanceResult Enhancer::run(const RgbImage& low) const {
  validate_unit_range(low, "enhance");
  if (low.pixels() == 0) throw ShapeError("enhance: empty image");
  const std::size_t m = std::max(enhancer_config_.size_multiple(), restorer_config_.size_multiple());
  const std::size_t h = low.height(), w = low.width();
  const RgbImage padded = reflect_pad(low, round_up(h, m), round_up(w, m));

  std::vector<ImagePlane> v_planes;
  auto intermediate = stage1_recombine({padded}, enhancer_, enhancer_config_, use_hs_input_, &v_planes);
  auto restored = nn::unet_forward(intermediate, restorer_, restorer_config_);

  EnhanceResult result;
  result.output = crop(rgb_from_tensor(restored), 0, 0, h, w);
  result.enhanced_v = crop(v_planes.front(), 0, 0, h, w);
  result.stage2_input = crop(rgb_from_tensor(intermediate), 0, 0, h, w);
  return result;
}

metrics::MetricReport aggregate_rows(const std::vector<EvaluationRow>& rows, std::size_t* ok) {
  constexpr std::size_t kFields = metrics::MetricReport::field_names.size();
  std::array<double, kFields> sums{};
  std::array<std::size_t, kFields> finite{};
  std::array<std::size_t, kFields> total{};
  std::size_t good = 0;
  for (const auto& row : rows) {
    if (!row.report) continue;
    ++good;
    const auto values = row.report->values();
    for (std::size_t f = 0; f < kFields; ++f) {
      ++total[f];
      if (std::isfinite(values[f])) {
        sums[f] += values[f];
        ++finite[f];
      }
    }
  }
  if (ok) *ok = good;
  std::array<double, kFields> mean{};
  for (std::size_t f = 0; f < kFields; ++f) {
    if (finite[f] > 0) mean[f] = sums[f] / static_cast<double>(finite[f]);
    else if (total[f] > 0) mean[f] = std::numeric_limits<double>::infinity();
    else mean[f] = std::numeric_limits<double>::quiet_NaN();
  }
  metrics::MetricReport r;
  r.psnr = mean[0];
  r.ssim = mean[1];
  r.rmse = mean[2];
  r.uqi = mean[3];
  r.srer = mean[4];
  r.sam = mean[5];
  r.angular_mean = mean[6];
  r.angular_median = mean[7];
  r.delta_e = mean[8];
  return r;
}

EvaluationReport evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir) {
  std::map<std::string, fs::path> gt, pred;
  for (const auto& p : list_png_files(gt_dir)) gt.emplace(p.filename().string(), p);
  for (const auto& p : list_png_files(pred_dir)) pred.emplace(p.filename().string(), p);

  EvaluationReport report;
  for (const auto& [name, gt_path] : gt) {
    EvaluationRow row;
    row.name = name;
    auto it = pred.find(name);
    if (it == pred.end()) {
      row.error = "missing prediction";
    } else {
      try {
        row.report = metrics::evaluate_pair(io::read_png(it->second), io::read_png(gt_path));
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
    report.rows.push_back(std::move(row));
  }
  for (const auto& [name, path] : pred) {
    if (!gt.contains(name)) report.rows.push_back({name, std::nullopt, "missing ground truth"});
  }
  report.aggregate = aggregate_rows(report.rows, &report.ok_count);
  return report;
}

}  // namespace tsnca
