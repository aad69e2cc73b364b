#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tsnca/ops.hpp"
#include "tsnca/png_io.hpp"

namespace tsnca::testing {

RgbImage random_image(std::size_t h, std::size_t w, Rng& rng) {
  RgbImage img(h, w);
  for (auto& p : img.planes)
    for (auto& v : p.values) v = static_cast<float>(rng.uniform());
  return img;
}

ImagePlane random_plane(std::size_t h, std::size_t w, Rng& rng) {
  ImagePlane p(h, w);
  for (auto& v : p.values) v = static_cast<float>(rng.uniform());
  return p;
}

ImagePair synthetic_pair(const std::string& name, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  const double phase = rng.uniform(0.0, 6.28);
  const double fx = rng.uniform(2.0, 5.0), fy = rng.uniform(2.0, 5.0);
  ImagePair pair{name, RgbImage(size, size), RgbImage(size, size)};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(size - 1);
      const double v = static_cast<double>(y) / static_cast<double>(size - 1);
      const double rgb[3] = {0.5 + 0.4 * std::sin(fx * u + phase), 0.5 + 0.4 * std::cos(fy * v),
                             0.3 + 0.5 * u * v};
      for (std::size_t c = 0; c < 3; ++c) {
        const double high = std::clamp(rgb[c] + rng.normal(0.0, 0.02), 0.0, 1.0);
        const double low = std::clamp(0.2 * high + rng.normal(0.0, 0.01), 0.0, 1.0);
        pair.high.planes[c].at(y, x) = static_cast<float>(high);
        pair.low.planes[c].at(y, x) = static_cast<float>(low);
      }
    }
  }
  return pair;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                           double step) {
  for (const auto& [name, t] : leaves) Tensor<double>(t).zero_grad();
  loss().backward();
  GradCheckResult result;
  for (const auto& [name, leaf] : leaves) {
    Tensor<double> t = leaf;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss().item();
      data[i] = saved - step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = relative_error(a, numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        std::ostringstream os;
        os << name << '[' << i << "] " << a << " vs " << numeric;
        result.worst = os.str();
      }
    }
  }
  return result;
}

Tensor<double> random_projection(const Tensor<double>& x, std::uint64_t seed) {
  Rng rng(seed);
  auto w = random_tensor<double>(x.shape(), rng, -1.0, 1.0);
  return ops::sum(ops::mul(x, w));
}

nn::NetworkParams<double> to_double(const nn::NetworkParams<float>& params, bool requires_grad) {
  nn::NetworkParams<double> out(params.fingerprint());
  for (const auto& [name, t] : params.entries()) {
    auto d = t.cast<double>();
    d.set_requires_grad(requires_grad);
    out.add(name, d);
  }
  return out;
}

std::string fixture_path(const std::string& name) { return std::string(TSNCA_TEST_DATA_DIR) + "/" + name; }

}  // namespace tsnca::testing

namespace tsnca::testing {

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("tsnca-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_dataset(const std::filesystem::path& root, const std::vector<ImagePair>& pairs) {
  std::filesystem::create_directories(root / "low");
  std::filesystem::create_directories(root / "high");
  for (const auto& p : pairs) {
    io::write_png(root / "low" / (p.name + ".png"), p.low);
    io::write_png(root / "high" / (p.name + ".png"), p.high);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace tsnca::testing
