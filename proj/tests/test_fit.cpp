#include <gtest/gtest.h>

#include <chrono>

#include "poci/fit.hpp"
#include "support.hpp"

using namespace poci;
using namespace poci::testing;

namespace {

Camera cam256() { return make_camera(256, 256, 256); }

}  // namespace

TEST(ProjectBoxRect, ZeroSizeBoxIsPrincipalPoint) {
  auto r = project_box_rect(cam256(), {"a", {0, 0, 5}, {0, 0, 0}, 0.0});
  ASSERT_TRUE(r);
  EXPECT_DOUBLE_EQ(r->x_min, 128);
  EXPECT_DOUBLE_EQ(r->x_max, 128);
  EXPECT_DOUBLE_EQ(r->y_min, 128);
  EXPECT_DOUBLE_EQ(r->y_max, 128);
}

TEST(ProjectBoxRect, BehindCameraIsNone) {
  EXPECT_FALSE(project_box_rect(cam256(), {"a", {0, 0, -5}, {1, 1, 1}, 0.0}));
}

TEST(ProjectBoxRect, UnitBoxMatchesCornerProjection) {
  auto r = project_box_rect(cam256(), {"a", {0, 0, 5}, {1, 1, 1}, 0.0});
  ASSERT_TRUE(r);
  // nearest corners at z = 4.5: 128 +- 256 * 0.5 / 4.5
  EXPECT_NEAR(r->x_min, 99.56, 1e-2);
  EXPECT_NEAR(r->x_max, 156.44, 1e-2);
  EXPECT_NEAR(r->y_min, 99.56, 1e-2);
  EXPECT_NEAR(r->y_max, 156.44, 1e-2);
}

TEST(ProjectBoxRect, RandomBoxesMatchIndependentCornerHull) {
  Rng rng(29);
  for (int i = 0; i < 200; ++i) {
    Camera cam = make_camera(200, 150, 180);
    cam.yaw = uniform(rng, -0.3, 0.3);
    cam.pitch = uniform(rng, -0.2, 0.2);
    const auto box = random_box(rng, "b");
    const Mat3 w2c = transpose(camera_to_world(cam));
    const Mat3 l2w = rot_y(box.yaw);
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (int c = 0; c < 8; ++c) {
      const std::array<double, 3> l{(c & 1 ? 0.5 : -0.5) * box.size.x, (c & 2 ? 0.5 : -0.5) * box.size.y,
                                    (c & 4 ? 0.5 : -0.5) * box.size.z};
      const auto w = apply(l2w, l);
      const auto p = apply(w2c, {w[0] + box.center.x - cam.position.x, w[1] + box.center.y - cam.position.y,
                                 w[2] + box.center.z - cam.position.z});
      ASSERT_GT(p[2], 0.01);
      x0 = std::min(x0, cam.cx + cam.fx * p[0] / p[2]);
      x1 = std::max(x1, cam.cx + cam.fx * p[0] / p[2]);
      y0 = std::min(y0, cam.cy - cam.fy * p[1] / p[2]);
      y1 = std::max(y1, cam.cy - cam.fy * p[1] / p[2]);
    }
    auto clampw = [&](double v) { return std::clamp(v, 0.0, 200.0); };
    auto clamph = [&](double v) { return std::clamp(v, 0.0, 150.0); };
    auto r = project_box_rect(cam, box);
    ASSERT_TRUE(r);
    EXPECT_NEAR(r->x_min, clampw(x0), 1e-9);
    EXPECT_NEAR(r->x_max, clampw(x1), 1e-9);
    EXPECT_NEAR(r->y_min, clamph(y0), 1e-9);
    EXPECT_NEAR(r->y_max, clamph(y1), 1e-9);
  }
}

TEST(ProjectBoxRect, StraddlingBoxIsClippedAtNearPlane) {
  auto r = project_box_rect(cam256(), {"a", {0, 0, 0}, {1, 1, 2}, 0.0});
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, (Rect2D{0, 0, 256, 256}));
}

TEST(MeanIou, IdenticalListsScoreOne) {
  std::vector<Rect2D> r{{0, 0, 2, 2}, {5, 5, 9, 7}};
  EXPECT_DOUBLE_EQ(mean_iou(r, r), 1.0);
}

TEST(MeanIou, DisjointPairsScoreZero) {
  EXPECT_DOUBLE_EQ(mean_iou(std::vector<Rect2D>{{0, 0, 1, 1}}, std::vector<Rect2D>{{2, 2, 3, 3}}), 0.0);
}

TEST(MeanIou, HalfOverlapIsOneThirdByFineGridCount) {
  const Rect2D a{0, 0, 2, 2}, b{1, 0, 3, 2};
  // count cell centers of a 1000-per-unit grid over [0, 3] x [0, 2]
  const int n = 1000;
  long inter = 0, uni = 0;
  for (int i = 0; i < 3 * n; ++i)
    for (int j = 0; j < 2 * n; j += 10) {
      const double x = (i + 0.5) / n, y = (j + 0.5) / n;
      const bool ia = x >= a.x_min && x <= a.x_max && y >= a.y_min && y <= a.y_max;
      const bool ib = x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max;
      inter += ia && ib;
      uni += ia || ib;
    }
  const double counted = static_cast<double>(inter) / uni;
  EXPECT_NEAR(counted, 1.0 / 3.0, 1e-3);
  EXPECT_NEAR(rect_iou(a, b), counted, 1e-3);
}

TEST(MeanIou, EmptyIsZeroAndMismatchThrows) {
  EXPECT_EQ(mean_iou(std::vector<Rect2D>{}, std::vector<Rect2D>{}), 0.0);
  EXPECT_THROW(mean_iou(std::vector<Rect2D>{{0, 0, 1, 1}}, std::vector<Rect2D>{}), ShapeError);
}

TEST(MeanIou, NoneScoresZero) {
  std::vector<std::optional<Rect2D>> pred{std::nullopt, Rect2D{0, 0, 1, 1}};
  EXPECT_DOUBLE_EQ(mean_iou(pred, {{0, 0, 1, 1}, {0, 0, 1, 1}}), 0.5);
}

TEST(MeanIouProperty, SymmetricAndBounded) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    auto rect = [&] {
      const double x = uniform(rng, 0, 10), y = uniform(rng, 0, 10);
      return Rect2D{x, y, x + uniform(rng, 0, 5), y + uniform(rng, 0, 5)};
    };
    const auto a = rect(), b = rect();
    const double ab = rect_iou(a, b);
    EXPECT_EQ(ab, rect_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    if (a.area() > 0) {
      EXPECT_DOUBLE_EQ(rect_iou(a, a), 1.0);
    }
  }
}

TEST(NelderMead, MinimizesShiftedQuadratic) {
  auto f = [](const std::array<double, 2>& x) { return (x[0] - 1) * (x[0] - 1) + 10 * (x[1] + 2) * (x[1] + 2); };
  auto r = nelder_mead(f, std::array<double, 2>{5, 5}, {1, 1}, {.diameter_tolerance = 1e-8, .max_iterations = 2000});
  EXPECT_NEAR(r.x[0], 1, 1e-4);
  EXPECT_NEAR(r.x[1], -2, 1e-4);
  EXPECT_TRUE(r.converged);
}

namespace {

struct FitCase {
  std::vector<OrientedBox> boxes;
  std::vector<Rect2D> gt;
  Camera truth;
};

FitCase synthetic_case(Rng& rng, int n) {
  FitCase c;
  c.truth = make_camera(256, 256, 256);
  c.truth.position = {uniform(rng, -0.5, 0.5), uniform(rng, 0.8, 1.6), uniform(rng, -0.5, 0.5)};
  c.truth.yaw = uniform(rng, -0.3, 0.3);
  c.truth.pitch = uniform(rng, -0.15, 0.15);
  while (static_cast<int>(c.boxes.size()) < n) {
    OrientedBox b = random_box(rng, "b" + std::to_string(c.boxes.size()));
    b.center = c.truth.to_world({uniform(rng, -1.2, 1.2), uniform(rng, -1.0, 1.0), uniform(rng, 4.0, 8.0)});
    auto r = project_box_rect(c.truth, b);
    if (!r || r->area() < 100) continue;
    c.boxes.push_back(b);
    c.gt.push_back(*r);
  }
  return c;
}

}  // namespace

TEST(FitCamera, ExactInitStaysOptimal) {
  Rng rng(37);
  auto c = synthetic_case(rng, 3);
  auto r = fit_camera(c.boxes, c.gt, c.truth);
  EXPECT_EQ(r.final_loss, 0.0);
  EXPECT_LT(norm(r.camera.position - c.truth.position), 1e-4);
  EXPECT_LT(std::fabs(r.camera.yaw - c.truth.yaw), 1e-4);
}

TEST(FitCamera, PerturbedThreeBoxSceneRecovers) {
  Rng rng(41);
  auto c = synthetic_case(rng, 3);
  Camera init = c.truth;
  init.position.x += 0.2;
  init.yaw += 0.05;
  auto r = fit_camera(c.boxes, c.gt, init);
  EXPECT_LT(r.final_loss, 0.05);
  EXPECT_LE(r.final_loss, layout_loss(init, c.boxes, c.gt));
  EXPECT_EQ(r.final_loss, layout_loss(r.camera, c.boxes, c.gt));
  EXPECT_EQ(r.restarts_used, 5);
}

TEST(FitCamera, TwoBoxRandomInitsMostlyRecover) {
  Rng rng(43);
  int good = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto c = synthetic_case(rng, 2);
    Camera init = c.truth;
    init.position = {uniform(rng, -0.5, 0.5), uniform(rng, 0.8, 1.6), uniform(rng, -0.5, 0.5)};
    init.yaw = uniform(rng, -0.3, 0.3);
    init.pitch = uniform(rng, -0.15, 0.15);
    auto r = fit_camera(c.boxes, c.gt, init, {.seed = static_cast<std::uint64_t>(trial)});
    EXPECT_LE(r.final_loss, layout_loss(init, c.boxes, c.gt));
    good += r.final_loss < 0.1;
  }
  EXPECT_GE(good, 45);
}

TEST(FitCamera, LossInvariantUnderCommonTranslation) {
  Rng rng(47);
  auto c = synthetic_case(rng, 3);
  Camera init = c.truth;
  init.position.y += 0.15;
  const Vec3 offset{3.5, -1.25, 7.0};
  auto shifted = c.boxes;
  for (auto& b : shifted) b.center = b.center + offset;
  Camera init_shifted = init;
  init_shifted.position = init.position + offset;
  EXPECT_NEAR(layout_loss(init, c.boxes, c.gt), layout_loss(init_shifted, shifted, c.gt), 1e-9);
  const auto a = fit_camera(c.boxes, c.gt, init);
  const auto b = fit_camera(shifted, c.gt, init_shifted);
  EXPECT_NEAR(a.final_loss, b.final_loss, 0.02);
}

TEST(FitCamera, EmptyObjectListIsError) {
  EXPECT_THROW(fit_camera({}, {}, cam256()), Error);
}

TEST(FitCamera, InvalidInitIsError) {
  Camera bad = cam256();
  bad.fx = -1;
  EXPECT_THROW(fit_camera({{"a", {0, 0, 5}, {1, 1, 1}, 0}}, {{0, 0, 1, 1}}, bad), Error);
}

TEST(LiftBox, FullImageUniformDepthCentersOnAxis) {
  const Camera cam = cam256();
  DepthMap d{Grid<double>(256, 256, 6.0), 100.0};
  const auto b = lift_box({0, 0, 256, 256}, d, cam);
  EXPECT_NEAR(b.center.x, 0, 1e-12);
  EXPECT_NEAR(b.center.y, 0, 1e-12);
  EXPECT_NEAR(b.center.z, 6.0, 1e-12);
  EXPECT_NEAR(b.size.x, 6.0, 1e-12);
  EXPECT_EQ(b.yaw, 0.0);
}

TEST(LiftBox, RoundTripRecoversFrontoParallelBox) {
  Rng rng(53);
  const Camera cam = cam256();
  for (int i = 0; i < 50; ++i) {
    OrientedBox box{"a", {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 4, 10)},
                    {uniform(rng, 0.4, 1.5), uniform(rng, 0.4, 1.5), uniform(rng, 0.01, 0.05)}, 0.0};
    Scene s;
    s.camera = cam;
    s.objects.push_back({box, "x"});
    const auto rect = *project_box_rect(cam, box);
    const auto lifted = lift_box(rect, render_depth(s), cam);
    const double d = box.center.z - box.size.z / 2;
    EXPECT_NEAR(lifted.center.z, d, 0.05 * d);
    EXPECT_NEAR(lifted.size.x, box.size.x, 0.05 * box.size.x);
    EXPECT_NEAR(lifted.size.y, box.size.y, 0.05 * box.size.y);
    EXPECT_GE(rect_iou(*project_box_rect(cam, lifted), rect), 0.95);
  }
}

TEST(LiftBox, ErrorPaths) {
  const Camera cam = cam256();
  DepthMap far{Grid<double>(256, 256, 100.0), 100.0};
  DepthMap near{Grid<double>(256, 256, 5.0), 100.0};
  auto message = [&](const Rect2D& r, const DepthMap& d) {
    try {
      lift_box(r, d, cam);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message({10, 10, 10, 20}, near).find("degenerate rect"), std::string::npos);
  EXPECT_NE(message({10, 10, 20, 20}, far).find("all-far"), std::string::npos);
  EXPECT_NE(message({300, 10, 320, 20}, near).find("does not intersect"), std::string::npos);
}
