#include <random>

#include <gtest/gtest.h>

#include "drivedit/compositor.hpp"
#include "drivedit/fixtures.hpp"
#include "drivedit/guidance.hpp"
#include "support/helpers.hpp"

using namespace drivedit;

namespace {

ImageU8 noise_image(int w, int h, std::uint64_t seed) {
  ImageU8 img(w, h, 3);
  std::mt19937_64 rng(seed);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// Square asset patch [x0, x1) x [y0, y1) at constant depth z.
ObjectRender patch(int w, int h, int x0, int y0, int x1, int y1, double z) {
  ObjectRender r = ObjectRender::empty(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      r.mask.at(x, y) = 1;
      r.depth.at(x, y) = z;
      r.color.at(x, y, 0) = 250;
      r.color.at(x, y, 1) = 20;
      r.color.at(x, y, 2) = 90;
    }
  return r;
}

bool pixel_equal(const ImageU8& a, const ImageU8& b, int x, int y) {
  return a.at(x, y, 0) == b.at(x, y, 0) && a.at(x, y, 1) == b.at(x, y, 1) && a.at(x, y, 2) == b.at(x, y, 2);
}

}  // namespace

TEST(CompositeNaive, EmptyMaskIsIdentity) {
  const ImageU8 frame = noise_image(30, 20, 1);
  const DepthMap depth(30, 20, 1, 4.0);
  EXPECT_EQ(composite_naive(frame, ObjectRender::empty(30, 20), nullptr), frame);
  CompositeConfig cfg;
  cfg.feather = 3;
  EXPECT_EQ(composite_naive(frame, ObjectRender::empty(30, 20), &depth, cfg), frame);
}

TEST(CompositeNaive, FullMaskWithoutDepthGivesRenderColor) {
  const ImageU8 frame = noise_image(16, 12, 2);
  ObjectRender r = patch(16, 12, 0, 0, 16, 12, 8.0);
  r.color = noise_image(16, 12, 3);
  EXPECT_EQ(composite_naive(frame, r, nullptr), r.color);
}

TEST(CompositeNaive, OcclusionWall) {
  const ImageU8 frame = noise_image(40, 30, 4);
  // Wall at 5 m over the left half, no depth (sky) on the right half.
  DepthMap depth(40, 30, 1, 5.0);
  for (int y = 0; y < 30; ++y)
    for (int x = 20; x < 40; ++x) depth.at(x, y) = 0.0;
  const ObjectRender r = patch(40, 30, 10, 5, 30, 25, 10.0);
  const ImageU8 out = composite_naive(frame, r, &depth);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      const bool masked = r.mask.at(x, y);
      if (masked && x >= 20) {
        EXPECT_TRUE(pixel_equal(out, r.color, x, y)) << x << "," << y;
      } else {
        EXPECT_TRUE(pixel_equal(out, frame, x, y)) << x << "," << y;
      }
    }
  // Asset in front of the wall is drawn everywhere.
  EXPECT_EQ(drawn_mask(patch(40, 30, 10, 5, 30, 25, 3.0), &depth), patch(40, 30, 10, 5, 30, 25, 3.0).mask);
}

TEST(CompositeNaive, BiasBoundary) {
  DepthMap depth(4, 4, 1, 5.0);
  const ObjectRender r = patch(4, 4, 0, 0, 4, 4, 5.04);
  CompositeConfig cfg;
  EXPECT_EQ(drawn_mask(r, &depth, cfg), r.mask);
  cfg.depth_bias = 0.03;
  EXPECT_EQ(drawn_mask(r, &depth, cfg), Mask(4, 4, 1, 0));
}

TEST(CompositeNaive, FeatherOnlyTouchesDilatedMask) {
  const ImageU8 frame = noise_image(48, 40, 5);
  std::mt19937_64 rng(6);
  DepthMap depth(48, 40, 1);
  std::uniform_real_distribution<double> u(2.0, 12.0);
  for (double& z : depth.data()) z = u(rng);
  const ObjectRender r = patch(48, 40, 12, 8, 36, 30, 7.0);
  for (int f : {0, 1, 3, 6}) {
    CompositeConfig cfg;
    cfg.feather = f;
    const ImageU8 out = composite_naive(frame, r, &depth, cfg);
    const Mask grown = dilate(r.mask, f);
    const Mask drawn = drawn_mask(r, &depth, cfg);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 48; ++x) {
        if (!grown.at(x, y) || !drawn.at(x, y)) ASSERT_TRUE(pixel_equal(out, frame, x, y)) << f << ":" << x << "," << y;
      }
  }
}

TEST(CompositeNaive, FeatherRamp) {
  const ImageU8 frame(20, 20, 3, 0);
  ObjectRender r = patch(20, 20, 5, 5, 15, 15, 4.0);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) r.color.at(x, y, 0) = 240;
  CompositeConfig cfg;
  cfg.feather = 2;
  const ImageU8 out = composite_naive(frame, r, nullptr, cfg);
  // Chebyshev distances 1, 2, 3 to the nearest undrawn pixel -> alpha 1/3, 2/3, 1.
  EXPECT_EQ(out.at(5, 10, 0), 80);
  EXPECT_EQ(out.at(6, 10, 0), 160);
  EXPECT_EQ(out.at(7, 10, 0), 240);
  EXPECT_EQ(out.at(10, 10, 0), 240);
}

TEST(CompositeNaive, BiasMonotone) {
  const ImageU8 frame = noise_image(32, 32, 7);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(3.0, 6.0);
  DepthMap depth(32, 32, 1);
  for (double& z : depth.data()) z = u(rng);
  ObjectRender r = patch(32, 32, 4, 4, 28, 28, 0.0);
  for (double& z : r.depth.data())
    if (std::isfinite(z)) z = u(rng);
  Mask prev = drawn_mask(r, &depth, CompositeConfig{0.0, 0});
  for (double bias : {0.01, 0.05, 0.2, 0.5, 1.0, 4.0}) {
    const Mask cur = drawn_mask(r, &depth, CompositeConfig{bias, 0});
    for (std::size_t i = 0; i < cur.data().size(); ++i) ASSERT_GE(cur.data()[i], prev.data()[i]);
    prev = cur;
  }
  EXPECT_EQ(prev, r.mask);
}

TEST(CompositeNaive, ErrorsOnBadInput) {
  const ImageU8 frame = noise_image(10, 10, 9);
  EXPECT_THROW(composite_naive(frame, ObjectRender::empty(9, 10), nullptr), InputError);
  const DepthMap depth(10, 11, 1, 1.0);
  EXPECT_THROW(composite_naive(frame, ObjectRender::empty(10, 10), &depth), InputError);
  EXPECT_THROW(composite_naive(frame, ObjectRender::empty(10, 10), nullptr, CompositeConfig{-0.1, 0}), InputError);
  EXPECT_THROW(composite_naive(frame, ObjectRender::empty(10, 10), nullptr, CompositeConfig{0.05, -1}), InputError);
}

TEST(CompositeNaive, ForegroundMaskingCoversComposite) {
  const SceneBundle scene = fixtures::make_demo_scene();
  const Mesh car = fixtures::make_toy_car_mesh();
  BBox3D box;
  box.center = Vec3(9.0, -0.8, 0.8);
  box.size = Vec3(1.9, 4.4, 1.6);
  box.yaw = 0.2;
  const AssetTransform t = fit_mesh_to_box(car, box);
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    const ObjectRender r = render_asset(car, t, scene.cameras[c], 0);
    const ImageU8& frame = scene.frames[c][0];
    const ImageU8 edited = composite_naive(frame, r, &scene.depth[c][0]);
    GuidanceParams p;
    const GuidanceSet g = build_guidance_view(edited, scene.depth[c][0], scene.cameras[c].intrinsics, r, p);
    const Mask nulled = dilate(r.mask, p.dilation);
    int changed = 0;
    for (int y = 0; y < frame.height(); ++y)
      for (int x = 0; x < frame.width(); ++x) {
        if (pixel_equal(edited, frame, x, y)) continue;
        ++changed;
        ASSERT_TRUE(nulled.at(x, y));
        EXPECT_EQ(g.depth.at(x, y), kNullDepth);
        EXPECT_EQ(g.edge.at(x, y), kNullEdge);
        EXPECT_EQ(g.normal.at(x, y, 2), kNullNormal);
      }
    EXPECT_GT(changed, 0);
  }
}
