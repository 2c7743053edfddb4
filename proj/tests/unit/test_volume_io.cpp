#include <gtest/gtest.h>

#include <cstring>

#include "fixtures.hpp"
#include "voxelpaint/error.hpp"
#include "voxelpaint/nifti.hpp"

using namespace voxelpaint;

namespace {

std::filesystem::path fixture(const std::string& name) { return vptest::data_dir() / "nifti" / name; }

ErrorCode read_error(const std::filesystem::path& path) {
  try {
    read_nifti(path);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "read succeeded: " << path;
  return ErrorCode::kInvalidArgument;
}

Volume random_volume(const Dims& d, Rng& rng) {
  Volume v(d);
  for (auto& x : v.voxels) x = static_cast<float>((uniform01(rng) - 0.3) * 1e4);
  v.voxels[0] = 1e-38f;  // subnormal-adjacent
  v.voxels[1] = -0.0f;
  return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Nifti, ReadsFloatFixture) {
  for (const char* name : {"f32_3x4x5.nii", "f32_3x4x5.nii.gz"}) {
    const auto v = read_nifti(fixture(name));
    EXPECT_EQ(v.dims, (Dims{3, 4, 5})) << name;
    for (std::size_t i = 0; i < 60; ++i) ASSERT_EQ(v.voxels[i], 0.5f * float(i) - 3.0f) << name;
    EXPECT_EQ(v.at(2, 3, 4), 0.5f * 59 - 3.0f);
  }
}

TEST(Nifti, AppliesSlopeAndIntercept) {
  const auto v = read_nifti(fixture("u8_scaled_2x3x4.nii"));
  EXPECT_EQ(v.dims, (Dims{2, 3, 4}));
  for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(v.voxels[i], 2.0f * float(i) - 1.0f);
}

TEST(Nifti, ReadsSignedShortsWithoutScaling) {
  const auto v = read_nifti(fixture("i16_4x2x2.nii.gz"));
  EXPECT_EQ(v.dims, (Dims{4, 2, 2}));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(v.voxels[i], -100.0f * float(i) + 7.0f);
}

TEST(Nifti, FloatRoundTripIsBitExact) {
  const auto dir = vptest::fresh_dir("nifti-roundtrip");
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Dims d{1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9)};
    const auto v = random_volume(d, rng);
    for (const char* ext : {".nii", ".nii.gz"}) {
      const auto path = dir / ("v" + std::to_string(trial) + ext);
      write_nifti(v, path);
      const auto back = read_nifti(path);
      EXPECT_EQ(back.dims, d);
      EXPECT_TRUE(bit_equal(back.voxels, v.voxels)) << path;
    }
  }
}

TEST(Nifti, RewriteKeepsOrientationFields) {
  const auto dir = vptest::fresh_dir("nifti-header");
  auto v = read_nifti(fixture("u8_scaled_2x3x4.nii"));
  auto header = *v.header;
  header[280] = 0x42;  // srow_x bytes
  v.header = header;
  write_nifti(v, dir / "out.nii");
  const auto back = read_nifti(dir / "out.nii");
  EXPECT_EQ((*back.header)[280], 0x42);
  EXPECT_TRUE(bit_equal(back.voxels, v.voxels));
}

TEST(Nifti, GzipChosenBySuffix) {
  const auto dir = vptest::fresh_dir("nifti-gzip");
  const Volume v(Dims{4, 4, 4}, 1.0f);
  write_nifti(v, dir / "a.nii.gz");
  write_nifti(v, dir / "b.nii");
  const auto gz = vptest::read_bytes(dir / "a.nii.gz");
  const auto raw = vptest::read_bytes(dir / "b.nii");
  EXPECT_EQ(gz[0], 0x1f);
  EXPECT_EQ(gz[1], 0x8b);
  EXPECT_EQ(raw.size(), 352u + 64 * 4);
}

TEST(Nifti, MaskRoundTrip) {
  const auto dir = vptest::fresh_dir("nifti-mask");
  MaskVolume m(Dims{5, 3, 2}, MaskRole::kHealthy);
  m.at(1, 2, 1) = 1;
  m.at(4, 0, 0) = 1;
  write_nifti(m, dir / "m.nii.gz");
  const auto back = read_nifti_mask(dir / "m.nii.gz", MaskRole::kHealthy);
  EXPECT_EQ(back.bits, m.bits);
  EXPECT_EQ(back.count(), 2u);
}

TEST(Nifti, MalformedFixturesMapToCodes) {
  EXPECT_EQ(read_error(fixture("bad_big_endian.nii")), ErrorCode::kBadHeaderSize);
  EXPECT_EQ(read_error(fixture("bad_magic.nii")), ErrorCode::kBadMagic);
  EXPECT_EQ(read_error(fixture("bad_datatype.nii")), ErrorCode::kUnsupportedDatatype);
  EXPECT_EQ(read_error(fixture("bad_bitpix.nii")), ErrorCode::kUnsupportedDatatype);
  EXPECT_EQ(read_error(fixture("bad_frames.nii")), ErrorCode::kDimMismatch);
  EXPECT_EQ(read_error(fixture("truncated_voxels.nii")), ErrorCode::kTruncated);
  EXPECT_EQ(read_error(fixture("truncated_header.nii")), ErrorCode::kTruncated);
  EXPECT_EQ(read_error(fixture("does_not_exist.nii")), ErrorCode::kMissingInput);
}

TEST(Nifti, CorruptGzipIsTruncated) {
  const auto dir = vptest::fresh_dir("nifti-corrupt");
  auto bytes = vptest::read_bytes(fixture("f32_3x4x5.nii.gz"));
  bytes.resize(bytes.size() / 2);
  vptest::write_bytes(dir / "c.nii.gz", bytes);
  EXPECT_EQ(read_error(dir / "c.nii.gz"), ErrorCode::kTruncated);
}

TEST(RawSidecar, RoundTripKeepsDomainAndMax) {
  const auto dir = vptest::fresh_dir("raw");
  Rng rng(8);
  auto v = random_volume(Dims{3, 5, 2}, rng);
  for (auto& x : v.voxels) x = std::clamp(x / 1e4f, -1.0f, 1.0f);
  v.domain = Domain::kSignedUnit;
  v.max_intensity = 812.5;
  write_raw(v, dir / "vol");
  EXPECT_TRUE(std::filesystem::exists(dir / "vol.vraw"));
  EXPECT_TRUE(std::filesystem::exists(dir / "vol.vjson"));
  const auto back = read_raw(dir / "vol");
  EXPECT_EQ(back.dims, v.dims);
  EXPECT_EQ(back.domain, Domain::kSignedUnit);
  ASSERT_TRUE(back.max_intensity.has_value());
  EXPECT_EQ(*back.max_intensity, 812.5);
  EXPECT_TRUE(bit_equal(back.voxels, v.voxels));
}

TEST(RawSidecar, DimsDisagreeWithJson) {
  const auto dir = vptest::fresh_dir("raw-dims");
  write_raw(Volume(Dims{2, 2, 2}), dir / "a");
  write_raw(Volume(Dims{2, 2, 3}), dir / "b");
  std::filesystem::copy_file(dir / "b.vjson", dir / "a.vjson",
                             std::filesystem::copy_options::overwrite_existing);
  try {
    read_raw(dir / "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
}

TEST(Components, FileNames) {
  EXPECT_EQ(component_filename("case-1", Component::kT1n), "case-1-t1n.nii.gz");
  EXPECT_EQ(component_filename("c", Component::kT1nVoided), "c-t1n-voided.nii.gz");
  EXPECT_EQ(component_filename("c", Component::kMaskHealthy), "c-mask-healthy.nii.gz");
  EXPECT_EQ(component_filename("c", Component::kMaskUnhealthy), "c-mask-unhealthy.nii.gz");
  EXPECT_EQ(component_filename("c", Component::kMask, ".nii"), "c-mask.nii");
}

TEST(VolumeValidate, RejectsOutOfDomain) {
  Volume v(Dims{2, 1, 1});
  v.domain = Domain::kSignedUnit;
  v.voxels = {-1.0f, 1.0f};
  EXPECT_NO_THROW(v.validate());
  v.voxels[1] = 1.5f;
  EXPECT_THROW(v.validate(), Error);
  v.voxels.pop_back();
  EXPECT_THROW(v.validate(), Error);
}
