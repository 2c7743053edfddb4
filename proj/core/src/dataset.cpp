#include "voxelpaint/dataset.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "voxelpaint/error.hpp"
#include "voxelpaint/nifti.hpp"
#include "voxelpaint/parallel.hpp"

namespace voxelpaint {

namespace fs = std::filesystem;

std::vector<std::string> Manifest::case_ids() const {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.case_id);
  return {ids.begin(), ids.end()};
}

std::string manifest_json(const Manifest& manifest) {
  nlohmann::ordered_json j;
  j["seed"] = manifest.seed;
  j["variants"] = manifest.variants;
  j["mask"] = {{"margin", manifest.params.margin},
               {"volume_fraction", manifest.params.volume_fraction},
               {"max_attempts", manifest.params.max_attempts}};
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : manifest.samples) {
    j["samples"].push_back(
        {{"case", s.case_id}, {"variant", s.variant}, {"seed", s.seed}, {"dir", s.dir}});
  }
  j["skipped"] = nlohmann::ordered_json::array();
  for (const auto& s : manifest.skipped) {
    j["skipped"].push_back({{"case", s.case_id}, {"reason", s.reason}});
  }
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.variants = j.at("variants").get<int>();
    const auto& mask = j.at("mask");
    m.params.margin = mask.at("margin").get<int>();
    m.params.volume_fraction = mask.at("volume_fraction").get<double>();
    m.params.max_attempts = mask.at("max_attempts").get<int>();
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at("case").get<std::string>(), s.at("variant").get<int>(),
                           s.at("seed").get<std::uint64_t>(), s.at("dir").get<std::string>()});
    }
    for (const auto& s : j.value("skipped", nlohmann::json::array())) {
      m.skipped.push_back({s.at("case").get<std::string>(), s.at("reason").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return manifest_from_json(buffer.str());
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << manifest_json(manifest);
}

namespace {

std::optional<std::string> strip_suffix(const std::string& name, const std::string& tag) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string suffix = tag + ext;
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      return name.substr(0, name.size() - suffix.size());
    }
  }
  return std::nullopt;
}

std::optional<fs::path> find_with_ext(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

void scan_dir(const fs::path& dir, std::map<std::string, SourceCase>& found) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto id = strip_suffix(entry.path().filename().string(), "-t1n");
    if (!id) continue;
    const auto seg = find_with_ext(dir, *id + "-seg");
    if (!seg) continue;
    require(!found.count(*id), ErrorCode::kConfig, "duplicate case id " + *id);
    found[*id] = SourceCase{*id, entry.path(), *seg};
  }
}

}  // namespace

std::vector<SourceCase> discover_cases(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kMissingInput, "input directory not found: " + dir.string());
  std::map<std::string, SourceCase> found;
  scan_dir(dir, found);
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) scan_dir(sub, found);
  std::vector<SourceCase> out;
  for (auto& [id, c] : found) out.push_back(std::move(c));
  return out;
}

std::vector<TrainingSample> synthesize_case(const std::string& case_id, const Volume& t1n,
                                            const MaskVolume& tumor, const MaskGenParams& params,
                                            std::uint64_t seed, int variants) {
  require(variants >= 1, ErrorCode::kInvalidArgument, "variants must be >= 1");
  Rng rng(seed);
  const MaskVolume brain = brain_mask_from(t1n, tumor);
  const auto masks = generate_mask_set(t1n, brain, tumor, params, rng, variants);
  MaskVolume unhealthy = tumor;
  unhealthy.role = MaskRole::kUnhealthy;
  std::vector<TrainingSample> out;
  for (int v = 0; v < variants; ++v) {
    out.push_back(make_sample(case_id, v, t1n, masks[static_cast<std::size_t>(v)], unhealthy));
  }
  return out;
}

void write_sample(const TrainingSample& sample, const fs::path& dir) {
  fs::create_directories(dir);
  write_nifti(sample.t1n, dir / component_filename(sample.case_id, Component::kT1n));
  write_nifti(sample.t1n_voided, dir / component_filename(sample.case_id, Component::kT1nVoided));
  write_nifti(sample.healthy, dir / component_filename(sample.case_id, Component::kMaskHealthy));
  write_nifti(sample.unhealthy, dir / component_filename(sample.case_id, Component::kMaskUnhealthy));
  write_nifti(sample.combined, dir / component_filename(sample.case_id, Component::kMask));
}

TrainingSample read_sample(const fs::path& dir, const std::string& case_id, int variant) {
  TrainingSample s;
  s.case_id = case_id;
  s.variant = variant;
  s.t1n = read_nifti(dir / component_filename(case_id, Component::kT1n));
  s.t1n_voided = read_nifti(dir / component_filename(case_id, Component::kT1nVoided));
  s.healthy = read_nifti_mask(dir / component_filename(case_id, Component::kMaskHealthy),
                              MaskRole::kHealthy);
  s.unhealthy = read_nifti_mask(dir / component_filename(case_id, Component::kMaskUnhealthy),
                                MaskRole::kUnhealthy);
  s.combined = read_nifti_mask(dir / component_filename(case_id, Component::kMask),
                               MaskRole::kCombined);
  require(s.t1n.dims == s.t1n_voided.dims && s.t1n.dims == s.healthy.dims &&
              s.t1n.dims == s.unhealthy.dims && s.t1n.dims == s.combined.dims,
          ErrorCode::kDimMismatch, "sample " + dir.string() + ": component dims differ");
  require(s.combined.bits == mask_union(s.healthy, s.unhealthy, MaskRole::kCombined).bits,
          ErrorCode::kInvalidArgument, "sample " + dir.string() + ": mask != healthy | unhealthy");
  return s;
}

std::string sample_dir(const std::string& case_id, int variant) {
  return case_id + "/v" + std::to_string(variant);
}

Manifest prepare_dataset(const std::vector<SourceCase>& cases, const fs::path& out_dir,
                         const MaskGenParams& params, std::uint64_t seed, int variants) {
  params.validate();
  fs::create_directories(out_dir);
  struct Outcome {
    std::uint64_t seed = 0;
    std::string error;
    std::exception_ptr failure;
    int produced = 0;
  };
  std::vector<Outcome> outcomes(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const SourceCase& c = cases[i];
    Outcome& o = outcomes[i];
    o.seed = derive_seed(seed, c.case_id);
    try {
      const Volume t1n = read_nifti(c.t1n);
      const MaskVolume tumor = read_nifti_mask(c.tumor, MaskRole::kUnhealthy);
      require(t1n.dims == tumor.dims, ErrorCode::kDimMismatch,
              c.case_id + ": t1n " + to_string(t1n.dims) + " vs seg " + to_string(tumor.dims));
      const auto samples = synthesize_case(c.case_id, t1n, tumor, params, o.seed, variants);
      for (const auto& s : samples) write_sample(s, out_dir / sample_dir(c.case_id, s.variant));
      o.produced = variants;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kPlacementFailure) {
        o.error = e.what();
      } else {
        o.failure = std::current_exception();
      }
    } catch (...) {
      o.failure = std::current_exception();
    }
  });
  for (const auto& o : outcomes) {
    if (o.failure) std::rethrow_exception(o.failure);
  }

  Manifest manifest;
  manifest.seed = seed;
  manifest.variants = variants;
  manifest.params = params;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!outcomes[i].error.empty()) {
      manifest.skipped.push_back({cases[i].case_id, outcomes[i].error});
      continue;
    }
    for (int v = 0; v < outcomes[i].produced; ++v) {
      manifest.samples.push_back({cases[i].case_id, v, outcomes[i].seed, sample_dir(cases[i].case_id, v)});
    }
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

std::vector<TrainingSample> load_dataset(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  std::vector<TrainingSample> out;
  out.reserve(m.samples.size());
  for (const auto& s : m.samples) out.push_back(read_sample(root / s.dir, s.case_id, s.variant));
  return out;
}

}  // namespace voxelpaint
