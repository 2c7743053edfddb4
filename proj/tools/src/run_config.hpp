#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "voxelpaint/mask_synth.hpp"
#include "voxelpaint/trainer.hpp"

namespace voxelpaint::cli {

struct PrepareSection {
  std::filesystem::path input_dir;
  int variants = 5;
  MaskGenParams mask;
};

struct TrainSection {
  std::filesystem::path dataset;  // manifest; defaults to <workdir>/dataset/manifest.json
  std::optional<int> fold;        // train every fold when empty
  TrainConfig config;
};

struct InferSection {
  std::filesystem::path dataset;
  std::filesystem::path input_dir;    // challenge layout: <case>-t1n-voided + <case>-mask
  std::filesystem::path checkpoints;  // defaults to <workdir>/train
  std::string models = "out_of_fold";  // or "ensemble"
};

struct EvaluateSection {
  std::filesystem::path dataset;
  std::filesystem::path predictions;
  SsimParams ssim{7, 1.5, 1.0};
};

struct ReportSection {
  std::filesystem::path summary;
  std::string title = "Validation";
};

/// One file drives every command. Empty paths fall back to the workdir layout:
///   dataset/      prepare output and manifest.json
///   train/        folds.json, fold<k>/best.vxpt, fold<k>/train_log.jsonl
///   predictions/  <case>/v<k>/<case>-t1n-inference.nii.gz
///   evaluation/   metrics.csv, summary.json
///   report/       report.txt
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path workdir = "voxelpaint-run";
  PrepareSection prepare;
  TrainSection train;
  InferSection infer;
  EvaluateSection evaluate;
  ReportSection report;

  std::filesystem::path dataset_dir() const { return workdir / "dataset"; }
  std::filesystem::path manifest() const { return dataset_dir() / "manifest.json"; }
  std::filesystem::path train_dir() const { return workdir / "train"; }
  std::filesystem::path predictions_dir() const { return workdir / "predictions"; }
  std::filesystem::path evaluation_dir() const { return workdir / "evaluation"; }
  std::filesystem::path report_dir() const { return workdir / "report"; }

  /// Fills empty paths from the workdir and propagates the seed.
  void resolve();
};

/// Strict parse: unknown keys and wrong types fail with kConfig. Relative
/// paths are taken relative to base_dir.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);

}  // namespace voxelpaint::cli
