#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace voxelpaint {

/// Voxel grid extents. Buffers are x-fastest: index = x + dx * (y + dy * z).
struct Dims {
  std::size_t x = 0, y = 0, z = 0;

  std::size_t count() const { return x * y * z; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + x * (j + y * k); }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& dims);

enum class Domain { kRaw, kUnit, kSignedUnit };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view name);

/// Raw NIfTI-1 header bytes kept so orientation fields survive a rewrite.
using NiftiHeaderBytes = std::array<unsigned char, 348>;

struct Volume {
  Dims dims;
  std::vector<float> voxels;
  Domain domain = Domain::kRaw;
  std::optional<double> max_intensity;  // set by normalization
  std::optional<NiftiHeaderBytes> header;

  Volume() = default;
  Volume(Dims d, float fill = 0.0f) : dims(d), voxels(d.count(), fill) {}

  float& at(std::size_t i, std::size_t j, std::size_t k) { return voxels[dims.index(i, j, k)]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return voxels[dims.index(i, j, k)]; }

  /// Throws kInvalidArgument when the buffer size or domain bounds are violated.
  void validate() const;
};

enum class MaskRole { kHealthy, kUnhealthy, kCombined, kBrain };

std::string_view to_string(MaskRole role);

struct MaskVolume {
  Dims dims;
  std::vector<std::uint8_t> bits;  // 0 or 1
  MaskRole role = MaskRole::kCombined;

  MaskVolume() = default;
  MaskVolume(Dims d, MaskRole r, std::uint8_t fill = 0) : dims(d), bits(d.count(), fill), role(r) {}

  std::uint8_t at(std::size_t i, std::size_t j, std::size_t k) const { return bits[dims.index(i, j, k)]; }
  std::uint8_t& at(std::size_t i, std::size_t j, std::size_t k) { return bits[dims.index(i, j, k)]; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

/// Voxels with value != 0 become 1.
MaskVolume to_mask(const Volume& volume, MaskRole role);
Volume to_volume(const MaskVolume& mask);

MaskVolume mask_union(const MaskVolume& a, const MaskVolume& b, MaskRole role);
MaskVolume mask_intersection(const MaskVolume& a, const MaskVolume& b, MaskRole role);
MaskVolume mask_complement(const MaskVolume& a, MaskRole role);
bool masks_overlap(const MaskVolume& a, const MaskVolume& b);
/// True when every set voxel of inner is set in outer.
bool mask_subset(const MaskVolume& inner, const MaskVolume& outer);

/// File names of the five sample components.
enum class Component { kT1n, kT1nVoided, kMaskHealthy, kMaskUnhealthy, kMask };

std::string component_suffix(Component component);
std::string component_filename(std::string_view case_id, Component component,
                               std::string_view extension = ".nii.gz");

}  // namespace voxelpaint
