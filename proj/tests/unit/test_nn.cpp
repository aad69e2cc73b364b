#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "test_support.hpp"
#include "tsnca/errors.hpp"
#include "tsnca/nn.hpp"
#include "tsnca/ops.hpp"

namespace tsnca {
namespace {

using testing::Rng;
using testing::random_tensor;

nn::SeBlockParams<float> make_se(std::size_t c, std::size_t r, float fc2_bias, bool zero_weights, Rng& rng) {
  nn::SeBlockParams<float> se;
  se.channels = c;
  se.reduction = r;
  const std::size_t b = c / r;
  se.fc1_weight = zero_weights ? Tensor<float>::zeros({b, c}) : random_tensor<float>({b, c}, rng, -1, 1);
  se.fc1_bias = Tensor<float>::zeros({b});
  se.fc2_weight = Tensor<float>::zeros({c, b});
  se.fc2_bias = Tensor<float>::full({c}, fc2_bias);
  return se;
}

TEST(SeBlock, SaturatedGateIsIdentity) {
  Rng rng(21);
  auto x = random_tensor<float>({2, 8, 5, 5}, rng, -2, 2);
  auto y = nn::se_block_forward(x, make_se(8, 4, 40.0f, false, rng));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-6);
}

TEST(SeBlock, ZeroParametersHalveFeatures) {
  Rng rng(22);
  auto x = random_tensor<float>({1, 8, 4, 4}, rng, -2, 2);
  auto y = nn::se_block_forward(x, make_se(8, 2, 0.0f, true, rng));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(y.data()[i], 0.5f * x.data()[i]);
}

TEST(SeBlock, SixtyFourChannelsReductionFourShapesAndCount) {
  auto config = nn::UNetConfig::restorer(64, 1, true);
  const auto params = nn::init_params<float>(config, 1);
  const auto se = nn::SeBlockParams<float>::from_network(params, nn::se_prefix(0), 64, 4);
  EXPECT_EQ(se.bottleneck(), 16u);
  EXPECT_EQ(se.fc1_weight.shape(), (Shape{16, 64}));
  EXPECT_EQ(se.fc2_weight.shape(), (Shape{64, 16}));
  const std::size_t counted = se.fc1_weight.numel() + se.fc1_bias.numel() + se.fc2_weight.numel() +
                              se.fc2_bias.numel();
  EXPECT_EQ(counted, 64u * 16u * 2u + 16u + 64u);
  EXPECT_EQ(nn::SeBlockParams<float>::parameter_count(64, 4), counted);
}

TEST(SeBlock, ChannelMismatch) {
  Rng rng(23);
  EXPECT_THROW(nn::se_block_forward(Tensor<float>::zeros({1, 4, 2, 2}), make_se(8, 4, 0, true, rng)),
               ShapeError);
}

TEST(SeBlock, GradientMatchesFiniteDifferences) {
  Rng rng(24);
  auto x = random_tensor<double>({2, 8, 3, 3}, rng, -1, 1, true);
  nn::SeBlockParams<double> se;
  se.channels = 8;
  se.reduction = 4;
  se.fc1_weight = random_tensor<double>({2, 8}, rng, -1, 1, true);
  se.fc1_bias = random_tensor<double>({2}, rng, -0.5, 0.5, true);
  se.fc2_weight = random_tensor<double>({8, 2}, rng, -1, 1, true);
  se.fc2_bias = random_tensor<double>({8}, rng, -0.5, 0.5, true);
  const auto r = testing::grad_check(
      [&] { return testing::random_projection(nn::se_block_forward(x, se), 5); },
      {{"x", x}, {"fc1.w", se.fc1_weight}, {"fc1.b", se.fc1_bias}, {"fc2.w", se.fc2_weight}, {"fc2.b", se.fc2_bias}});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(UNetConfig, FingerprintRoundTrip) {
  for (const auto& c : {nn::UNetConfig::enhancer(8, 3), nn::UNetConfig::restorer(16, 2, true),
                        nn::UNetConfig::restorer(4, 1, false)}) {
    EXPECT_EQ(nn::UNetConfig::from_fingerprint(c.fingerprint()), c);
  }
  EXPECT_NE(nn::UNetConfig::restorer(8, 3, true).fingerprint(), nn::UNetConfig::restorer(8, 3, false).fingerprint());
  EXPECT_THROW(nn::UNetConfig::from_fingerprint("resnet"), std::invalid_argument);
}

TEST(UNetConfig, Validation) {
  auto c = nn::UNetConfig::restorer(6, 2, true);
  EXPECT_THROW(c.validate(), std::invalid_argument);  // 6 channels, reduction 4
  c.depth = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(nn::UNetConfig::restorer(6, 2, false).validate());
}

TEST(InitParams, DeterministicAndSeedSensitive) {
  const auto config = nn::UNetConfig::restorer(8, 2, true);
  const auto a = nn::init_params<float>(config, 7), b = nn::init_params<float>(config, 7);
  const auto c = nn::init_params<float>(config, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ta = a.entries()[i].second;
    const auto& tb = b.entries()[i].second;
    const auto& tc = c.entries()[i].second;
    EXPECT_TRUE(std::equal(ta.data().begin(), ta.data().end(), tb.data().begin()));
    any_diff |= !std::equal(ta.data().begin(), ta.data().end(), tc.data().begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitParams, HeScaling) {
  const auto config = nn::UNetConfig::enhancer(8, 3);
  const auto params = nn::init_params<float>(config, 3);
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& spec : nn::parameter_specs(config)) {
    const auto& t = params.at(spec.name);
    if (spec.is_bias) {
      for (float v : t.data()) EXPECT_EQ(v, 0.0f);
      continue;
    }
    const double target = std::sqrt(2.0 / static_cast<double>(spec.fan_in));
    for (float v : t.data()) {
      sum_sq += (v / target) * (v / target);
      ++n;
    }
  }
  ASSERT_GE(n, 10000u);
  EXPECT_NEAR(std::sqrt(sum_sq / static_cast<double>(n)), 1.0, 0.2);
}

TEST(UNet, ChannelAttentionAddsExactlyTheSeParameters) {
  for (std::size_t depth : {1u, 2u, 3u}) {
    const auto with = nn::init_params<float>(nn::UNetConfig::restorer(8, depth, true), 1).names();
    const auto without = nn::init_params<float>(nn::UNetConfig::restorer(8, depth, false), 1).names();
    std::set<std::string> a(with.begin(), with.end()), b(without.begin(), without.end());
    std::vector<std::string> extra;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(extra));
    EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    EXPECT_EQ(extra.size(), 4 * depth);
    for (const auto& name : extra) EXPECT_EQ(name.rfind("skip", 0), 0u) << name;
  }
}

TEST(UNet, ShapePreservationAndRange) {
  Rng rng(25);
  for (std::size_t depth : {1u, 2u, 3u}) {
    for (bool ca : {false, true}) {
      const auto config = nn::UNetConfig::restorer(4, depth, ca);
      const auto params = nn::init_params<float>(config, 2, false);
      const std::size_t side = 3 * config.size_multiple();
      auto out = nn::unet_forward(random_tensor<float>({2, 3, side, side + config.size_multiple()}, rng), params, config);
      EXPECT_EQ(out.shape(), (Shape{2, 3, side, side + config.size_multiple()}));
    }
  }
  const auto enh = nn::UNetConfig::enhancer(8, 3);
  auto out = nn::unet_forward(random_tensor<float>({1, 3, 64, 64}, rng), nn::init_params<float>(enh, 4, false), enh);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 64, 64}));
  for (float v : out.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(UNet, RejectsBadInputs) {
  const auto config = nn::UNetConfig::enhancer(4, 2);
  const auto params = nn::init_params<float>(config, 1, false);
  EXPECT_THROW(nn::unet_forward(Tensor<float>::zeros({1, 3, 6, 8}), params, config), ShapeError);
  EXPECT_THROW(nn::unet_forward(Tensor<float>::zeros({1, 1, 8, 8}), params, config), ShapeError);
  const auto other = nn::init_params<float>(nn::UNetConfig::enhancer(8, 2), 1, false);
  EXPECT_THROW(nn::unet_forward(Tensor<float>::zeros({1, 3, 8, 8}), other, config), std::invalid_argument);
}

TEST(UNet, FreshEnhancerGradientsAreDense) {
  const auto config = nn::UNetConfig::enhancer(8, 3);
  auto params = nn::init_params<float>(config, 11);
  auto out = nn::unet_forward(Tensor<float>::full({1, 3, 32, 32}, 0.5f), params, config);
  for (float v : out.data()) ASSERT_TRUE(std::isfinite(v));
  ops::sum(out).backward();
  // Counted per named parameter tensor; a constant input leaves whole relu
  // channels inactive, so the per-scalar fraction is lower.
  std::size_t live_tensors = 0, nonzero = 0, total = 0;
  for (const auto& [name, t] : params.entries()) {
    ASSERT_TRUE(t.has_grad()) << name;
    bool live = false;
    for (float g : t.grad()) {
      ASSERT_TRUE(std::isfinite(g)) << name;
      live |= g != 0.0f;
      nonzero += g != 0.0f;
      ++total;
    }
    live_tensors += live;
  }
  EXPECT_GT(static_cast<double>(live_tensors) / static_cast<double>(params.size()), 0.9);
  EXPECT_GT(static_cast<double>(nonzero) / static_cast<double>(total), 0.5);
}

class TinyUNetGradient : public ::testing::TestWithParam<bool> {};

TEST_P(TinyUNetGradient, MatchesFiniteDifferences) {
  const bool restorer = GetParam();
  const auto config = restorer ? nn::UNetConfig::restorer(4, 1, true) : nn::UNetConfig::enhancer(4, 1);
  const auto params = testing::to_double(nn::init_params<float>(config, 5), true);
  Rng rng(26);
  auto x = random_tensor<double>({1, 3, 8, 8}, rng, 0, 1, true);
  std::vector<std::pair<std::string, Tensor<double>>> leaves{{"input", x}};
  for (const auto& e : params.entries()) leaves.push_back(e);
  const auto r = testing::grad_check(
      [&] { return testing::random_projection(nn::unet_forward(x, params, config), 3); }, leaves);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Both, TinyUNetGradient, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "restorer" : "enhancer"; });

}  // namespace
}  // namespace tsnca
