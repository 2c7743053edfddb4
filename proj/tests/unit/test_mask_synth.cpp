#include <gtest/gtest.h>

#include "oracles.hpp"
#include "voxelpaint/error.hpp"
#include "voxelpaint/mask_synth.hpp"
#include "voxelpaint/phantom.hpp"

using namespace voxelpaint;

namespace {

MaskVolume random_mask(const Dims& d, double density, Rng& rng) {
  MaskVolume m(d, MaskRole::kHealthy);
  for (auto& b : m.bits) b = uniform01(rng) < density;
  return m;
}

}  // namespace

TEST(Morphology, DilateMatchesBruteForce) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims d{2 + uniform_index(rng, 9), 2 + uniform_index(rng, 9), 2 + uniform_index(rng, 9)};
    const auto m = random_mask(d, 0.05 * uniform01(rng), rng);
    const int radius = static_cast<int>(uniform_index(rng, 4));
    EXPECT_EQ(dilate(m, radius).bits, vptest::naive_dilate(m, radius).bits) << trial;
  }
}

TEST(Morphology, DilateSingleVoxelIsBall) {
  MaskVolume m(Dims{9, 9, 9}, MaskRole::kUnhealthy);
  m.at(4, 4, 4) = 1;
  // lattice points with x^2+y^2+z^2 <= 4: 1 + 6 + 12 + 8 + 6
  EXPECT_EQ(dilate(m, 2).count(), 33u);
  EXPECT_EQ(dilate(m, 1).count(), 7u);
  EXPECT_EQ(dilate(m, 0).bits, m.bits);
  EXPECT_THROW(dilate(m, -1), Error);
}

TEST(Morphology, ErodeRemovesFacesAndBorder) {
  MaskVolume cube(Dims{7, 7, 7}, MaskRole::kHealthy);
  for (std::size_t k = 1; k < 6; ++k)
    for (std::size_t j = 1; j < 6; ++j)
      for (std::size_t i = 1; i < 6; ++i) cube.at(i, j, k) = 1;
  EXPECT_EQ(erode(cube).count(), 27u);
  MaskVolume full(Dims{4, 4, 4}, MaskRole::kHealthy, 1);
  EXPECT_EQ(erode(full).count(), 8u);
}

TEST(Augment, MirrorIsInvolution) {
  Rng rng(5);
  for (std::size_t n = 1; n <= 16; ++n) {
    const auto m = random_mask(Dims{n, n + 1, n + 2}, 0.3, rng);
    for (int axis = 0; axis < 3; ++axis) EXPECT_EQ(mirror(mirror(m, axis), axis).bits, m.bits);
  }
}

TEST(Augment, MirrorReversesOneAxis) {
  MaskVolume m(Dims{4, 3, 2}, MaskRole::kHealthy);
  m.at(0, 1, 1) = 1;
  EXPECT_EQ(mirror(m, 0).at(3, 1, 1), 1);
  EXPECT_EQ(mirror(m, 1).at(0, 1, 1), 1);
  EXPECT_EQ(mirror(m, 2).at(0, 1, 0), 1);
  EXPECT_THROW(mirror(m, 3), Error);
}

TEST(Augment, RightAngleRotationsMatchOracle) {
  Rng rng(17);
  for (std::size_t n = 1; n <= 16; ++n) {
    const auto m = random_mask(Dims{n, n, n}, 0.3, rng);
    EXPECT_EQ(rotate_xy(m, 0.0).bits, m.bits) << n;
    EXPECT_EQ(rotate_yz(m, 0.0).bits, m.bits) << n;
    const auto q1 = vptest::quarter_turn_xy(m), q2 = vptest::quarter_turn_xy(q1), q3 = vptest::quarter_turn_xy(q2);
    EXPECT_EQ(rotate_xy(m, 90.0).bits, q1.bits) << n;
    EXPECT_EQ(rotate_xy(m, 180.0).bits, q2.bits) << n;
    EXPECT_EQ(rotate_xy(m, 270.0).bits, q3.bits) << n;
    EXPECT_EQ(rotate_xy(m, 360.0).bits, m.bits) << n;
    const auto r1 = vptest::quarter_turn_yz(m), r2 = vptest::quarter_turn_yz(r1), r3 = vptest::quarter_turn_yz(r2);
    EXPECT_EQ(rotate_yz(m, 90.0).bits, r1.bits) << n;
    EXPECT_EQ(rotate_yz(m, 180.0).bits, r2.bits) << n;
    EXPECT_EQ(rotate_yz(m, 270.0).bits, r3.bits) << n;
  }
}

TEST(Augment, QuarterTurnsCompose) {
  Rng rng(23);
  const auto m = random_mask(Dims{10, 10, 10}, 0.2, rng);
  EXPECT_EQ(rotate_xy(rotate_xy(m, 90.0), 90.0).bits, rotate_xy(m, 180.0).bits);
  EXPECT_EQ(rotate_xy(rotate_xy(m, 90.0), 270.0).bits, m.bits);
  EXPECT_EQ(rotate_yz(rotate_yz(m, 270.0), 180.0).bits, rotate_yz(m, 90.0).bits);
}

TEST(Augment, DrawIsDeterministic) {
  Rng a(7), b(7);
  for (int i = 0; i < 20; ++i) {
    const auto da = draw_augmentation(a), db = draw_augmentation(b);
    EXPECT_EQ(da.mirror, db.mirror);
    EXPECT_EQ(da.theta_xy_deg, db.theta_xy_deg);
    EXPECT_GE(da.theta_xy_deg, 0.0);
    EXPECT_LT(da.theta_yz_deg, 360.0);
  }
}

TEST(Placement, HealthyMasksRespectConstraints) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Dims d = seed % 2 ? Dims{24, 24, 24} : Dims{16, 16, 16};
    const auto phantom = make_phantom(d, seed);
    const auto brain = brain_mask_from(phantom.t1n, phantom.tumor);
    MaskGenParams params;
    params.margin = seed % 2 ? 2 : 1;
    Rng rng(seed);
    const auto masks = generate_mask_set(phantom.t1n, brain, phantom.tumor, params, rng, 5);
    ASSERT_EQ(masks.size(), 5u);
    const auto forbidden = vptest::naive_dilate(phantom.tumor, params.margin);
    for (std::size_t v = 0; v < masks.size(); ++v) {
      const auto& h = masks[v];
      EXPECT_FALSE(h.empty());
      EXPECT_FALSE(masks_overlap(h, forbidden)) << seed << "/" << v;
      EXPECT_TRUE(mask_subset(h, brain));
      const auto sample = make_sample("c", int(v), phantom.t1n, h, phantom.tumor);
      EXPECT_EQ(sample.combined.bits, mask_union(h, phantom.tumor, MaskRole::kCombined).bits);
      for (std::size_t i = 0; i < sample.t1n.voxels.size(); ++i) {
        ASSERT_EQ(sample.t1n_voided.voxels[i], sample.combined.bits[i] ? 0.0f : sample.t1n.voxels[i]);
      }
    }
  }
}

TEST(Placement, SameSeedSameMasks) {
  const auto phantom = make_phantom(Dims{16, 16, 16}, 3);
  const auto brain = brain_mask_from(phantom.t1n, phantom.tumor);
  MaskGenParams params;
  params.margin = 1;
  Rng a(99), b(99);
  const auto ma = generate_mask_set(phantom.t1n, brain, phantom.tumor, params, a);
  const auto mb = generate_mask_set(phantom.t1n, brain, phantom.tumor, params, b);
  for (std::size_t i = 0; i < ma.size(); ++i) EXPECT_EQ(ma[i].bits, mb[i].bits);
}

TEST(Placement, VolumeFractionShrinksShape) {
  const auto phantom = make_phantom(Dims{24, 24, 24}, 1);
  const auto brain = brain_mask_from(phantom.t1n, phantom.tumor);
  MaskGenParams params;
  params.margin = 1;
  params.volume_fraction = 0.3;
  Rng rng(4);
  const auto h = sample_healthy_mask(brain, phantom.tumor, params, rng);
  EXPECT_LE(double(h.count()), 0.3 * double(phantom.tumor.count()));
  EXPECT_FALSE(h.empty());
}

TEST(Placement, NoRoomFails) {
  MaskVolume tumor(Dims{8, 8, 8}, MaskRole::kUnhealthy);
  for (std::size_t k = 2; k < 6; ++k)
    for (std::size_t j = 2; j < 6; ++j)
      for (std::size_t i = 2; i < 6; ++i) tumor.at(i, j, k) = 1;
  MaskVolume brain = dilate(tumor, 1);
  brain.role = MaskRole::kBrain;
  MaskGenParams params;
  params.max_attempts = 5;
  Rng rng(1);
  try {
    sample_healthy_mask(brain, tumor, params, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPlacementFailure);
  }
}

TEST(Placement, RejectsBadParams) {
  MaskGenParams p;
  p.volume_fraction = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.margin = -1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.max_attempts = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Voiding, CheckerboardMask) {
  const Dims d{4, 3, 2};
  Volume t1n(d);
  MaskVolume mask(d, MaskRole::kCombined);
  for (std::size_t k = 0; k < d.z; ++k)
    for (std::size_t j = 0; j < d.y; ++j)
      for (std::size_t i = 0; i < d.x; ++i) {
        t1n.at(i, j, k) = float(1 + i + 10 * j + 100 * k);
        mask.at(i, j, k) = (i + j + k) % 2;
      }
  const auto voided = void_image(t1n, mask);
  for (std::size_t i = 0; i < t1n.voxels.size(); ++i)
    EXPECT_EQ(voided.voxels[i], mask.bits[i] ? 0.0f : t1n.voxels[i]);
  EXPECT_THROW(void_image(t1n, MaskVolume(Dims{4, 3, 3}, MaskRole::kCombined)), Error);
}

TEST(Voiding, OverlappingMasksRejected) {
  const Dims d{3, 3, 3};
  MaskVolume a(d, MaskRole::kHealthy), b(d, MaskRole::kUnhealthy);
  a.at(1, 1, 1) = b.at(1, 1, 1) = 1;
  EXPECT_THROW(make_sample("x", 0, Volume(d), a, b), Error);
}
