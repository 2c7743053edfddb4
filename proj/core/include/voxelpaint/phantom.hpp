#pragma once

#include <cstdint>

#include "voxelpaint/volume.hpp"

namespace voxelpaint {

struct Phantom {
  Volume t1n;
  MaskVolume tumor;
};

/// Smooth synthetic head: an ellipsoidal brain with low-frequency intensity
/// variation (raw scale, max about 1000) and one ellipsoidal lesion. Zero
/// outside the brain. Deterministic in (dims, seed).
Phantom make_phantom(const Dims& dims, std::uint64_t seed);

}  // namespace voxelpaint
