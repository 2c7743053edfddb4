#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxelpaint/mask_synth.hpp"
#include "voxelpaint/trainer.hpp"

namespace vptest {

// Fresh, empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& tag);

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

// "<dir>/case<i>-t1n.nii.gz" and "-seg.nii.gz" phantom pairs; returns ids.
std::vector<std::string> write_phantom_inputs(const std::filesystem::path& dir, int count,
                                              const voxelpaint::Dims& dims, std::uint64_t seed);

// count phantom scans, one mask variant each.
std::vector<voxelpaint::TrainingSample> phantom_samples(int count, const voxelpaint::Dims& dims,
                                                        std::uint64_t seed,
                                                        const voxelpaint::MaskGenParams& params);

// Small config for 16^3 runs: base 8, crop 16^3, given epochs.
voxelpaint::TrainConfig smoke_config(int epochs, std::uint64_t seed);

// Checked-in test data directory.
std::filesystem::path data_dir();

}  // namespace vptest
