#include "voxelpaint/geometry.hpp"

#include "voxelpaint/error.hpp"

namespace voxelpaint {

void CropSpec::validate() const {
  const bool fits = start.x + target.x <= source.x && start.y + target.y <= source.y &&
                    start.z + target.z <= source.z;
  require(fits && target.count() > 0, ErrorCode::kInvalidArgument,
          "crop " + to_string(target) + " at " + to_string(start) + " does not fit in " +
              to_string(source));
}

CropSpec center_crop_spec(const Dims& source, const Dims& target) {
  require(target.x <= source.x && target.y <= source.y && target.z <= source.z,
          ErrorCode::kInvalidArgument,
          "crop target " + to_string(target) + " exceeds source " + to_string(source));
  CropSpec spec{source, target,
                Dims{(source.x - target.x) / 2, (source.y - target.y) / 2, (source.z - target.z) / 2}};
  spec.validate();
  return spec;
}

namespace {

template <typename Fn>
void for_each_crop_voxel(const CropSpec& spec, Fn&& fn) {
  for (std::size_t k = 0; k < spec.target.z; ++k) {
    for (std::size_t j = 0; j < spec.target.y; ++j) {
      for (std::size_t i = 0; i < spec.target.x; ++i) {
        fn(spec.target.index(i, j, k),
           spec.source.index(i + spec.start.x, j + spec.start.y, k + spec.start.z));
      }
    }
  }
}

}  // namespace

Volume crop(const Volume& volume, const CropSpec& spec) {
  require(volume.dims == spec.source, ErrorCode::kDimMismatch,
          "crop: volume " + to_string(volume.dims) + " is not the spec source " + to_string(spec.source));
  spec.validate();
  Volume out(spec.target);
  out.domain = volume.domain;
  out.max_intensity = volume.max_intensity;
  for_each_crop_voxel(spec, [&](std::size_t local, std::size_t global) {
    out.voxels[local] = volume.voxels[global];
  });
  return out;
}

MaskVolume crop(const MaskVolume& mask, const CropSpec& spec) {
  require(mask.dims == spec.source, ErrorCode::kDimMismatch,
          "crop: mask " + to_string(mask.dims) + " is not the spec source " + to_string(spec.source));
  spec.validate();
  MaskVolume out(spec.target, mask.role);
  for_each_crop_voxel(spec, [&](std::size_t local, std::size_t global) {
    out.bits[local] = mask.bits[global];
  });
  return out;
}

std::pair<Volume, CropSpec> crop_center(const Volume& volume, const Dims& target) {
  const CropSpec spec = center_crop_spec(volume.dims, target);
  return {crop(volume, spec), spec};
}

void paste(Volume& destination, const Volume& patch, const CropSpec& spec) {
  require(destination.dims == spec.source && patch.dims == spec.target, ErrorCode::kDimMismatch,
          "paste: dims do not match crop spec");
  spec.validate();
  for_each_crop_voxel(spec, [&](std::size_t local, std::size_t global) {
    destination.voxels[global] = patch.voxels[local];
  });
}

Volume stitch(const Volume& original, const Volume& prediction, const MaskVolume& mask,
              const CropSpec& spec) {
  require(original.dims == spec.source, ErrorCode::kDimMismatch,
          "stitch: original " + to_string(original.dims) + " is not the spec source " +
              to_string(spec.source));
  require(prediction.dims == spec.target, ErrorCode::kDimMismatch,
          "stitch: prediction " + to_string(prediction.dims) + " is not the crop size " +
              to_string(spec.target));
  require(mask.dims == spec.target, ErrorCode::kDimMismatch,
          "stitch: mask " + to_string(mask.dims) + " is not the crop size " + to_string(spec.target));
  spec.validate();
  Volume out = original;
  for_each_crop_voxel(spec, [&](std::size_t local, std::size_t global) {
    if (mask.bits[local]) out.voxels[global] = prediction.voxels[local];
  });
  return out;
}

}  // namespace voxelpaint
