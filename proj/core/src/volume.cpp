#include "voxelpaint/volume.hpp"

#include <algorithm>
#include <cmath>

#include "voxelpaint/error.hpp"

namespace voxelpaint {

std::string to_string(const Dims& dims) {
  return std::to_string(dims.x) + "x" + std::to_string(dims.y) + "x" + std::to_string(dims.z);
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kRaw: return "raw";
    case Domain::kUnit: return "unit";
    case Domain::kSignedUnit: return "signed-unit";
  }
  return "raw";
}

Domain domain_from_string(std::string_view name) {
  if (name == "raw") return Domain::kRaw;
  if (name == "unit") return Domain::kUnit;
  if (name == "signed-unit") return Domain::kSignedUnit;
  fail(ErrorCode::kInvalidArgument, "unknown intensity domain '" + std::string(name) + "'");
}

void Volume::validate() const {
  require(voxels.size() == dims.count(), ErrorCode::kInvalidArgument,
          "volume buffer does not match dims " + to_string(dims));
  if (domain == Domain::kRaw) return;
  const float lo = domain == Domain::kUnit ? 0.0f : -1.0f;
  for (float v : voxels) {
    require(v >= lo && v <= 1.0f, ErrorCode::kInvalidArgument,
            "volume value " + std::to_string(v) + " outside its " + std::string(to_string(domain)) +
                " domain");
  }
}

std::string_view to_string(MaskRole role) {
  switch (role) {
    case MaskRole::kHealthy: return "healthy";
    case MaskRole::kUnhealthy: return "unhealthy";
    case MaskRole::kCombined: return "combined";
    case MaskRole::kBrain: return "brain";
  }
  return "combined";
}

std::size_t MaskVolume::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

MaskVolume to_mask(const Volume& volume, MaskRole role) {
  MaskVolume mask(volume.dims, role);
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) mask.bits[i] = volume.voxels[i] != 0.0f;
  return mask;
}

Volume to_volume(const MaskVolume& mask) {
  Volume volume(mask.dims);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) volume.voxels[i] = mask.bits[i] ? 1.0f : 0.0f;
  volume.domain = Domain::kUnit;
  return volume;
}

namespace {

void require_aligned(const MaskVolume& a, const MaskVolume& b, const char* op) {
  require(a.dims == b.dims, ErrorCode::kDimMismatch,
          std::string(op) + ": mask dims " + to_string(a.dims) + " vs " + to_string(b.dims));
}

}  // namespace

MaskVolume mask_union(const MaskVolume& a, const MaskVolume& b, MaskRole role) {
  require_aligned(a, b, "mask_union");
  MaskVolume out(a.dims, role);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] | b.bits[i];
  return out;
}

MaskVolume mask_intersection(const MaskVolume& a, const MaskVolume& b, MaskRole role) {
  require_aligned(a, b, "mask_intersection");
  MaskVolume out(a.dims, role);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
  return out;
}

MaskVolume mask_complement(const MaskVolume& a, MaskRole role) {
  MaskVolume out(a.dims, role);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] ? 0 : 1;
  return out;
}

bool masks_overlap(const MaskVolume& a, const MaskVolume& b) {
  require_aligned(a, b, "masks_overlap");
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i] && b.bits[i]) return true;
  }
  return false;
}

bool mask_subset(const MaskVolume& inner, const MaskVolume& outer) {
  require_aligned(inner, outer, "mask_subset");
  for (std::size_t i = 0; i < inner.bits.size(); ++i) {
    if (inner.bits[i] && !outer.bits[i]) return false;
  }
  return true;
}

std::string component_suffix(Component component) {
  switch (component) {
    case Component::kT1n: return "t1n";
    case Component::kT1nVoided: return "t1n-voided";
    case Component::kMaskHealthy: return "mask-healthy";
    case Component::kMaskUnhealthy: return "mask-unhealthy";
    case Component::kMask: return "mask";
  }
  return "t1n";
}

std::string component_filename(std::string_view case_id, Component component,
                               std::string_view extension) {
  return std::string(case_id) + "-" + component_suffix(component) + std::string(extension);
}

}  // namespace voxelpaint
