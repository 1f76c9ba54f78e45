#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>

#include "eto/media.hpp"
#include "eto/util.hpp"
#include "support.hpp"

using namespace eto;

namespace {

// Brute-force membership with explicit wraparound, independent of the library.
bool in_view_reference(const HeadPose& p, int h, int v, int rows, int cols) {
  const double yaw = -180.0 + (v + 0.5) * 360.0 / cols;
  const double pitch = 90.0 - (h + 0.5) * 180.0 / rows;
  double dy = 1e9;
  for (int k = -2; k <= 2; ++k) dy = std::min(dy, std::abs(yaw + 360.0 * k - p.yaw_deg));
  return dy <= p.fov_h_deg / 2 && std::abs(pitch - p.pitch_deg) <= p.fov_v_deg / 2;
}

}  // namespace

TEST(ViewportMask, FullSphereCoversEveryTile) {
  auto m = viewport_mask({0, 0, 360, 180}, 4, 8);
  EXPECT_EQ(m.count(), 32);
}

TEST(ViewportMask, QuarterFovSelectsFourCentralTiles) {
  auto m = viewport_mask({0, 0, 90, 90}, 4, 8);
  ASSERT_EQ(m.count(), 4);
  for (int h : {1, 2})
    for (int v : {3, 4}) EXPECT_TRUE(m.at(h, v)) << h << "," << v;
}

TEST(ViewportMask, YawWrapsAroundTheSeam) {
  auto m = viewport_mask({179, 0, 90, 90}, 4, 8);
  EXPECT_TRUE(m.at(1, 7));  // +157.5
  EXPECT_TRUE(m.at(1, 0));  // -157.5
  EXPECT_FALSE(m.at(1, 3));
}

TEST(ViewportMask, MatchesBruteForceOnRandomPoses) {
  uint64_t rng = 42;
  for (int trial = 0; trial < 500; ++trial) {
    HeadPose p{uniform(rng, -180, 180), uniform(rng, -90, 90), uniform(rng, 30, 200),
               uniform(rng, 30, 150)};
    const int rows = 1 + uniform_int(rng, 6), cols = 1 + uniform_int(rng, 12);
    auto m = viewport_mask(p, rows, cols);
    std::vector<uint8_t> ref;
    for (int h = 0; h < rows; ++h)
      for (int v = 0; v < cols; ++v) ref.push_back(in_view_reference(p, h, v, rows, cols));
    if (std::count(ref.begin(), ref.end(), 1) > 0)
      EXPECT_EQ(m.cells, ref);
    else
      EXPECT_EQ(m.count(), 1);
    EXPECT_GE(m.count(), 1);
  }
}

TEST(ViewportMask, InvariantUnderFullTurn) {
  uint64_t rng = 5;
  for (int trial = 0; trial < 100; ++trial) {
    HeadPose p{uniform(rng, -180, 180), uniform(rng, -90, 90), 100, 70};
    HeadPose q = p;
    q.yaw_deg += 360.0;
    EXPECT_EQ(viewport_mask(p, 4, 8).cells, viewport_mask(q, 4, 8).cells);
  }
}

TEST(ViewportMask, NarrowFovFallsBackToContainingTile) {
  auto m = viewport_mask({10, 10, 1, 1}, 4, 8);
  ASSERT_EQ(m.count(), 1);
  EXPECT_TRUE(m.at(1, 4));
}

TEST(ViewportPsnr, PeakMseIsZeroDb) {
  auto man = test::uniform_manifest(1, 1, {1e5, 1e5}, {255.0 * 255.0, 1.0});
  ViewportMask mask{1, 1, {1}};
  EXPECT_NEAR(viewport_psnr(man, 0, mask, 0), 0.0, 1e-12);
  EXPECT_NEAR(viewport_psnr(man, 0, mask, 1), 48.1308036, 1e-6);
}

TEST(ViewportPsnr, AveragesOverViewportTiles) {
  auto man = test::uniform_manifest(1, 2, {1e5}, {1.0});
  man.segments[0].tiles[1].layer_mse = {100.0};
  ViewportMask mask{1, 2, {1, 1}};
  EXPECT_NEAR(viewport_psnr(man, 0, mask, 0), 38.1308036, 1e-6);
}

TEST(ViewportPsnr, EmptyMaskIsRejected) {
  auto man = test::uniform_manifest(1, 1, {1e5}, {1.0});
  ViewportMask mask{1, 1, {0}};
  EXPECT_THROW(viewport_psnr(man, 0, mask, 0), InvalidViewport);
}

TEST(MakeTask, SingleTileSums) {
  auto man = test::uniform_manifest(1, 1, {1e6, 5e5}, {16, 4});
  auto t = make_task(man, 0, {1, 1, {1}}, 1e-5, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(t.sizes[0], 1e6);
  EXPECT_DOUBLE_EQ(t.sizes[1], 1.5e6);
  EXPECT_DOUBLE_EQ(t.result_sizes[1], 1.5e5);
}

TEST(MakeTask, OnlyMaskedEnhancementsCount) {
  auto man = test::uniform_manifest(2, 2, {1e5, 1e5}, {16, 4});
  auto t = make_task(man, 0, {2, 2, {1, 0, 0, 0}}, 1e-5, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(t.sizes[0], 4e5);
  EXPECT_DOUBLE_EQ(t.sizes[1], 5e5);
}

TEST(MakeTask, IntensityIsBetaTimesSize) {
  auto man = test::uniform_manifest(1, 1, {1e6}, {16});
  auto t = make_task(man, 0, {1, 1, {1}}, 1.2e-5, 0.1, 1.0);
  EXPECT_NEAR(t.intensities[0], 12.0, 1e-12);
}

TEST(MakeTask, SegmentOutOfRange) {
  auto man = test::uniform_manifest(1, 1, {1e6}, {16});
  EXPECT_THROW(make_task(man, 3, {1, 1, {1}}, 1e-5, 0.1, 1.0), std::out_of_range);
}

TEST(MakeTask, MonotoneAndBaseIndependentOfMask) {
  uint64_t rng = 9;
  auto man = generate_manifest(3, 4, 8, 7, 6, {}, {});
  double base = -1;
  for (int trial = 0; trial < 50; ++trial) {
    HeadPose p{uniform(rng, -180, 180), uniform(rng, -90, 90), uniform(rng, 20, 180), 90};
    auto t = make_task(man, 2, viewport_mask(p, 4, 8), 1e-5, 0.1, 1.0);
    if (base < 0) base = t.sizes[0];
    EXPECT_EQ(t.sizes[0], base);
    for (int e = 1; e < t.levels(); ++e) {
      EXPECT_GT(t.sizes[e], t.sizes[e - 1]);
      EXPECT_GE(t.psnr[e], t.psnr[e - 1]);
    }
    for (double q : t.psnr) {
      EXPECT_GE(q, 0.0);
      EXPECT_LE(q, 20 * std::log10(255.0) + 1e-9);
    }
  }
}

TEST(GenerateManifest, DeterministicAndValid) {
  auto a = generate_manifest(11, 4, 8, 7, 36, {}, {});
  auto b = generate_manifest(11, 4, 8, 7, 36, {}, {});
  EXPECT_EQ(manifest_to_json(a), manifest_to_json(b));
  EXPECT_NO_THROW(validate(a));
  ASSERT_EQ(a.segments.size(), 36u);
  for (const auto& s : a.segments)
    for (const auto& t : s.tiles) {
      EXPECT_EQ(t.layer_sizes_bits.size(), 8u);
      EXPECT_EQ(t.layer_mse.size(), 8u);
    }
  EXPECT_NE(manifest_to_json(a), manifest_to_json(generate_manifest(12, 4, 8, 7, 36, {}, {})));
}

TEST(GenerateManifest, GeometricMseDecay) {
  QualityProfile q;
  q.base_mse = 64.0;
  q.decay = 0.5;
  auto m = generate_manifest(1, 2, 2, 3, 1, {}, q);
  for (const auto& t : m.segments[0].tiles) EXPECT_DOUBLE_EQ(t.layer_mse[3], 8.0);
}

TEST(Manifest, JsonRoundTrip) {
  auto a = generate_manifest(4, 3, 5, 2, 3, {}, {});
  auto b = manifest_from_json(manifest_to_json(a));
  EXPECT_EQ(manifest_to_json(a), manifest_to_json(b));
}

TEST(Manifest, ValidationCatchesBrokenInvariants) {
  auto m = test::uniform_manifest(1, 1, {1e5, 1e5}, {4.0, 8.0});
  EXPECT_THROW(validate(m), InvalidManifest);
  m = test::uniform_manifest(1, 1, {1e5, 0.0}, {4.0, 2.0});
  EXPECT_THROW(validate(m), InvalidManifest);
  m = test::uniform_manifest(2, 2, {1e5}, {4.0});
  m.segments[0].tiles.pop_back();
  EXPECT_THROW(validate(m), InvalidManifest);
  EXPECT_THROW(manifest_from_json("{\"rows\": 1}"), InvalidManifest);
}

TEST(HeadTrace, FileRoundTrip) {
  test::TempDir dir("head");
  auto h = generate_head_trace(5, 12);
  ASSERT_EQ(h.size(), 12u);
  save_head_trace(h, dir.path / "h.csv");
  auto back = load_head_trace(dir.path / "h.csv");
  ASSERT_EQ(back.size(), h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(back[i].segment_index, h[i].segment_index);
    EXPECT_DOUBLE_EQ(back[i].yaw_deg, h[i].yaw_deg);
    EXPECT_GE(h[i].yaw_deg, -180.0);
    EXPECT_LT(h[i].yaw_deg, 180.0);
    EXPECT_LE(std::abs(h[i].pitch_deg), 90.0);
  }
}
