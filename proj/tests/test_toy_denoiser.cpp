#include <gtest/gtest.h>

#include <set>

#include "poci/toy_denoiser.hpp"
#include "support.hpp"

using namespace poci;
using namespace poci::testing;

namespace {

std::shared_ptr<const DepthControl> control_for(const Scene& s) {
  return std::make_shared<const DepthControl>(render_depth(s));
}

Scene box_scene() {
  Scene s;
  s.camera = make_camera(64, 64, 64);
  s.objects.push_back({{"a", {0, 0, 4}, {1, 1, 1}, 0.3}, "a box"});
  return s;
}

}  // namespace

TEST(ToySchedule, DefaultConverges) {
  const auto s = ToySchedule::standard();
  EXPECT_EQ(s.steps(), 50);
  EXPECT_LT(s.residual(), 1e-6);
}

TEST(ToyTarget, SamePromptSameTarget) {
  ToyDenoiser toy;
  Conditioning c{"a red chair", nullptr, std::nullopt};
  EXPECT_TRUE(bit_equal(toy.target_latent(c, {4, 3, 3}), toy.target_latent(c, {4, 3, 3})));
}

TEST(ToyTarget, ThousandPromptsHaveDistinctBases) {
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> base;
    for (int c = 0; c < 4; ++c) base.push_back(toy_prompt_base("prompt number " + std::to_string(i), c));
    for (double b : base) {
      EXPECT_GE(b, -1.0);
      EXPECT_LT(b, 1.0);
    }
    seen.insert(base);
  }
  EXPECT_EQ(seen.size(), 1000u);
  // channel 0 alone also separates them
  std::set<double> ch0;
  for (int i = 0; i < 1000; ++i) ch0.insert(toy_prompt_base("prompt number " + std::to_string(i), 0));
  EXPECT_EQ(ch0.size(), 1000u);
}

TEST(ToyTarget, DepthModulationIsOneTenthOfNormalizedCode) {
  ToyDenoiser toy;
  const auto ctrl = control_for(box_scene());
  Conditioning c{"lamp", ctrl, std::nullopt};
  const auto t = toy.target_latent(c, {4, 8, 8});
  // independent cell means of the exported codes
  const auto codes = png::decode_gray16(ctrl->png()).pixels;
  for (int ch = 0; ch < 4; ++ch)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        double sum = 0;
        for (int yy = 0; yy < 8; ++yy)
          for (int xx = 0; xx < 8; ++xx) sum += codes.at(x * 8 + xx, y * 8 + yy);
        const double expect = toy_prompt_base("lamp", ch) + 0.1 * sum / (64 * 65535.0);
        ASSERT_NEAR(t.at(ch, y, x), expect, 1e-6);
      }
}

TEST(ToyTarget, ReferenceAtFixedPointEqualsBoth) {
  auto store = std::make_shared<ReferenceStore>();
  ToyDenoiser toy(ToySchedule::standard(), store);
  std::vector<float> sig;
  for (int c = 0; c < 4; ++c) sig.push_back(static_cast<float>(toy_prompt_base("cup", c)));
  store->put("r", sig);
  const auto plain = toy.target_latent({"cup", nullptr, std::nullopt}, {4, 2, 2});
  const auto mixed = toy.target_latent({"cup", nullptr, std::string("r")}, {4, 2, 2});
  EXPECT_LT(max_abs_diff(plain, mixed), 1e-7);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(mixed.at(c, 1, 1), sig[c], 1e-7);
}

TEST(ToyTarget, ReferenceMixIsHalfAndHalf) {
  auto store = std::make_shared<ReferenceStore>();
  ToyDenoiser toy(ToySchedule::standard(), store);
  store->put("r", {0.5f, -0.5f, 0.25f, 0.0f});
  const auto ctrl = control_for(box_scene());
  const auto plain = toy.target_latent({"cup", ctrl, std::nullopt}, {4, 8, 8});
  const auto mixed = toy.target_latent({"cup", ctrl, std::string("r")}, {4, 8, 8});
  const float sig[4] = {0.5f, -0.5f, 0.25f, 0.0f};
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) ASSERT_NEAR(mixed.at(c, y, x), 0.5 * plain.at(c, y, x) + 0.5 * sig[c], 1e-6);
}

TEST(ToyTarget, UnknownReferenceIsDenoiserError) {
  ToyDenoiser toy;
  LatentTensor z({4, 2, 2});
  Conditioning c{"cup", nullptr, std::string("missing")};
  EXPECT_THROW(toy.step({"p", 0, z, c, 0}), DenoiserError);
  EXPECT_THROW(toy.target_latent(c, {4, 2, 2}), DenoiserError);
}

TEST(ToyStep, FixedPointIsStable) {
  ToyDenoiser toy;
  Conditioning c{"cup", control_for(box_scene()), std::nullopt};
  const auto target = toy.target_latent(c, {4, 8, 8});
  EXPECT_TRUE(bit_equal(toy.step({"p", 3, target, c, 0}), target));
}

TEST(ToyStep, FullStepLandsOnTarget) {
  ToyDenoiser toy(ToySchedule::constant(4, 1.0));
  Rng rng(67);
  const auto z = random_latent(rng, {4, 8, 8});
  Conditioning c{"cup", control_for(box_scene()), std::nullopt};
  EXPECT_TRUE(bit_equal(toy.step({"p", 0, z, c, 0}), toy.target_latent(c, z.shape())));
}

TEST(ToyStep, GeometricDecay) {
  ToyDenoiser toy(ToySchedule::constant(30, 0.2));
  Rng rng(71);
  auto z = random_latent(rng, {4, 4, 4});
  const auto z0 = z;
  Conditioning c{"cup", nullptr, std::nullopt};
  const auto target = toy.target_latent(c, z.shape());
  for (int n = 1; n <= 30; ++n) {
    z = toy.step({"p", n - 1, z, c, 0});
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d0 = std::fabs(static_cast<double>(z0.values()[i]) - target.values()[i]);
      const double expect = std::pow(0.8, n) * d0;
      const double got = std::fabs(static_cast<double>(z.values()[i]) - target.values()[i]);
      // relative to the initial distance; float storage bounds the absolute error near 3e-7
      ASSERT_NEAR(got, expect, 1e-6 * std::max(d0, 1.0)) << "n=" << n;
    }
  }
}

TEST(ToyStep, TimestepOutOfRange) {
  ToyDenoiser toy;
  LatentTensor z({4, 2, 2});
  Conditioning c{"cup", nullptr, std::nullopt};
  EXPECT_THROW(toy.step({"p", 50, z, c, 0}), DenoiserError);
  EXPECT_THROW(toy.step({"p", -1, z, c, 0}), DenoiserError);
}

TEST(ToyStep, ControlNotTilingLatentIsError) {
  ToyDenoiser toy;
  LatentTensor z({4, 3, 3});
  Conditioning c{"cup", control_for(box_scene()), std::nullopt};
  EXPECT_THROW(toy.step({"p", 0, z, c, 0}), DenoiserError);
}

TEST(ToyStep, ContractionPropertyOnRandomInputs) {
  Rng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = uniform(rng, 0.01, 1.0);
    ToyDenoiser toy(ToySchedule::constant(1, alpha));
    const auto z = random_latent(rng, {4, 8, 8});
    Conditioning c{"p" + std::to_string(trial), control_for(box_scene()), std::nullopt};
    const auto target = toy.target_latent(c, z.shape());
    const auto out = toy.step({"p", 0, z, c, 0});
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d0 = std::fabs(static_cast<double>(z.values()[i]) - target.values()[i]);
      const double d1 = std::fabs(static_cast<double>(out.values()[i]) - target.values()[i]);
      ASSERT_NEAR(d1, (1 - alpha) * d0, 1e-6);
    }
  }
}

TEST(ToyStep, BatchEqualsIndividualSteps) {
  ToyDenoiser toy;
  Rng rng(79);
  const auto z = random_latent(rng, {4, 8, 8});
  const auto ctrl = control_for(box_scene());
  std::vector<Conditioning> conds{{"a", ctrl, std::nullopt}, {"b", ctrl, std::nullopt}, {"c", nullptr, std::nullopt}};
  std::vector<PathStep> calls;
  for (std::size_t i = 0; i < conds.size(); ++i) calls.push_back({"p" + std::to_string(i), 7, z, conds[i], i});
  const auto batch = toy.step_batch(calls);
  for (std::size_t i = 0; i < calls.size(); ++i) EXPECT_TRUE(bit_equal(batch[i], toy.step(calls[i])));
}

TEST(DecodePreview, ZerosAreMidGray) {
  const auto img = png::decode(decode_preview(LatentTensor({4, 2, 3})));
  EXPECT_EQ(img.width, 24);
  EXPECT_EQ(img.height, 16);
  for (std::size_t i = 0; i < img.raw.size(); i += 3) {
    EXPECT_EQ(img.raw[i], 128);
    EXPECT_EQ(img.raw[i + 1], 128);
    EXPECT_EQ(img.raw[i + 2], 128);
  }
}

TEST(DecodePreview, HalfPlanesGiveTwoTonesWithBoundary) {
  LatentTensor z({4, 2, 4});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) z.at(0, y, x) = x < 2 ? -1.0f : 1.0f;
  const auto img = png::decode(decode_preview(z));
  std::set<std::array<int, 3>> left, right;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto* p = &img.raw[(y * img.width + x) * 3];
      (x < 16 ? left : right).insert({p[0], p[1], p[2]});
    }
  EXPECT_EQ(left.size(), 1u);
  EXPECT_EQ(right.size(), 1u);
  EXPECT_NE(*left.begin(), *right.begin());
}

TEST(DecodePreview, Deterministic) {
  Rng rng(83);
  const auto z = random_latent(rng, {4, 5, 5});
  EXPECT_EQ(decode_preview(z), decode_preview(z));
}
