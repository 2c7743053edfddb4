#pragma once

#include <utility>

#include "voxelpaint/volume.hpp"

namespace voxelpaint {

inline constexpr Dims kDefaultCrop{208, 208, 144};

/// Placement of a target-sized box inside a source grid.
struct CropSpec {
  Dims source;
  Dims target = kDefaultCrop;
  Dims start;

  /// Throws kInvalidArgument unless start + target <= source on every axis.
  void validate() const;
};

/// Centered box: start = floor((source - target) / 2) per axis.
CropSpec center_crop_spec(const Dims& source, const Dims& target);

std::pair<Volume, CropSpec> crop_center(const Volume& volume, const Dims& target);

Volume crop(const Volume& volume, const CropSpec& spec);
MaskVolume crop(const MaskVolume& mask, const CropSpec& spec);

/// Writes every voxel of patch back at the spec offsets.
void paste(Volume& destination, const Volume& patch, const CropSpec& spec);

/// Copy of original in which voxels with mask = 1 (crop-local, placed at the
/// spec offsets) take the prediction value. All other voxels are untouched.
Volume stitch(const Volume& original, const Volume& prediction, const MaskVolume& mask,
              const CropSpec& spec);

}  // namespace voxelpaint
