#pragma once

#include <filesystem>

#include "voxelpaint/volume.hpp"

namespace voxelpaint {

/// NIfTI-1 single-file (".nii" / ".nii.gz") reader.
///
/// Supports little-endian, single-frame uint8/int16/float32 images. When
/// scl_slope is nonzero, voxels become slope * v + inter. Failures raise
/// kBadHeaderSize, kBadMagic, kUnsupportedDatatype, kDimMismatch or
/// kTruncated. The header bytes are kept on the volume for write-back.
Volume read_nifti(const std::filesystem::path& path);

/// Reads a NIfTI file as a binary mask (nonzero voxels set).
MaskVolume read_nifti_mask(const std::filesystem::path& path, MaskRole role);

/// Writes float32 with identity scaling. Orientation fields come from the
/// volume's stored header when present. Gzip is used iff the path ends ".gz".
void write_nifti(const Volume& volume, const std::filesystem::path& path);
void write_nifti(const MaskVolume& mask, const std::filesystem::path& path);

/// Raw sidecar pair: "<stem>.vraw" (u32 dx, dy, dz then f32 voxels,
/// little-endian) and "<stem>.vjson" ({dims, domain, max_intensity}).
void write_raw(const Volume& volume, const std::filesystem::path& stem);
Volume read_raw(const std::filesystem::path& stem);

}  // namespace voxelpaint
