#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxelpaint/mask_synth.hpp"

namespace voxelpaint {

/// One (scan, mask variant) sample on disk.
struct SampleEntry {
  std::string case_id;
  int variant = 0;
  std::uint64_t seed = 0;  // per-case generator seed
  std::string dir;         // relative to the manifest
};

struct SkippedCase {
  std::string case_id;
  std::string reason;
};

struct Manifest {
  std::uint64_t seed = 0;
  int variants = 5;
  MaskGenParams params;
  std::vector<SampleEntry> samples;
  std::vector<SkippedCase> skipped;

  std::vector<std::string> case_ids() const;  // sorted, unique
};

std::string manifest_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// An input scan and its tumor annotation.
struct SourceCase {
  std::string case_id;
  std::filesystem::path t1n;
  std::filesystem::path tumor;
};

/// Finds "<case>-t1n.nii[.gz]" files with a matching "<case>-seg.nii[.gz]",
/// searching `dir` and its immediate subdirectories. Sorted by case id.
std::vector<SourceCase> discover_cases(const std::filesystem::path& dir);

/// All variants for one scan, drawn from a generator seeded with `seed`.
std::vector<TrainingSample> synthesize_case(const std::string& case_id, const Volume& t1n,
                                            const MaskVolume& tumor, const MaskGenParams& params,
                                            std::uint64_t seed, int variants);

/// Writes the five components as "<dir>/<case>-<component>.nii.gz".
void write_sample(const TrainingSample& sample, const std::filesystem::path& dir);
TrainingSample read_sample(const std::filesystem::path& dir, const std::string& case_id, int variant);

/// Per-case output layout: "<out>/<case>/v<k>/".
std::string sample_dir(const std::string& case_id, int variant);

/// Synthesizes every discovered case into out_dir and writes
/// out_dir/manifest.json. Cases whose masks cannot be placed are listed as
/// skipped. Per-case seeds are derived from (seed, case id), so the output
/// does not depend on the thread count.
Manifest prepare_dataset(const std::vector<SourceCase>& cases, const std::filesystem::path& out_dir,
                         const MaskGenParams& params, std::uint64_t seed, int variants = 5);

/// Loads every sample listed in a manifest.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& manifest_path);

}  // namespace voxelpaint
