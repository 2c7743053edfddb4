#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include "voxelpaint/unet.hpp"

namespace voxelpaint {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
  int epoch = 0;
  int fold = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

struct LoadedCheckpoint {
  UNetModel<float> model;
  CheckpointMetadata metadata;
};

/// "VXPT" | u32 version | u32 metadata length | JSON metadata | parameter
/// records (u16 name length, name, u8 rank, u32 extents, f32 data), all
/// little-endian.
void save_checkpoint(const UNetModel<float>& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path);

/// Rebuilds the model from the config stored in the file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads against an expected topology; a checkpoint written for another
/// config fails with kShapeMismatch (or kNameMismatch).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const UNetConfig& expected);

}  // namespace voxelpaint
