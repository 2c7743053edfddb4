#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "voxelpaint/checkpoint.hpp"
#include "voxelpaint/dataset.hpp"
#include "voxelpaint/error.hpp"
#include "voxelpaint/metrics.hpp"
#include "voxelpaint/nifti.hpp"
#include "voxelpaint/parallel.hpp"

namespace voxelpaint::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) fail(ErrorCode::kMissingInput, what + " not found: " + path.string());
}

fs::path fold_dir(const fs::path& train_dir, int fold) { return train_dir / ("fold" + std::to_string(fold)); }

std::string plan_json(const FoldPlan& plan, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["folds"] = plan.folds;
  return j.dump(2) + "\n";
}

FoldPlan read_plan(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    FoldPlan plan;
    plan.folds = nlohmann::json::parse(text).at("folds").get<std::vector<std::vector<std::string>>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
}

std::vector<fs::path> fold_checkpoints(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kMissingInput, "checkpoint directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const fs::path ckpt = e.path() / "best.vxpt";
    if (e.is_directory() && e.path().filename().string().rfind("fold", 0) == 0 && fs::exists(ckpt)) {
      out.push_back(ckpt);
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorCode::kMissingInput, "no fold*/best.vxpt under " + dir.string());
  return out;
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

std::string inference_filename(const std::string& case_id) { return case_id + "-t1n-inference.nii.gz"; }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingInput:
    case ErrorCode::kIo:
      return 2;
    case ErrorCode::kNumericFailure:
      return 4;
    default:
      return 3;
  }
}

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  write_text(dir / "resolved_config.json", config_to_json(config).dump(2) + "\n");
}

void cmd_prepare(const RunConfig& config, std::ostream& log) {
  if (config.prepare.input_dir.empty()) fail(ErrorCode::kConfig, "prepare.input_dir is not set");
  const auto cases = discover_cases(config.prepare.input_dir);
  if (cases.empty()) {
    fail(ErrorCode::kMissingInput, "no <case>-t1n / <case>-seg pairs in " + config.prepare.input_dir.string());
  }
  log << "prepare: " << cases.size() << " case(s) from " << config.prepare.input_dir.string() << '\n';
  const Manifest m = prepare_dataset(cases, config.dataset_dir(), config.prepare.mask, config.seed,
                                     config.prepare.variants);
  for (const auto& s : m.skipped) log << "warning: skipped " << s.case_id << ": " << s.reason << '\n';
  write_resolved_config(config, config.dataset_dir());
  log << "prepare: " << m.samples.size() << " sample(s) -> " << config.manifest().string() << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const TrainConfig& tc = config.train.config;
  tc.validate();
  require_file(config.train.dataset, "manifest");
  const Manifest manifest = read_manifest(config.train.dataset);
  const auto raw = load_dataset(config.train.dataset);
  if (raw.empty()) fail(ErrorCode::kInvalidArgument, "dataset has no samples");
  std::vector<PreparedSample> samples;
  samples.reserve(raw.size());
  for (const auto& s : raw) {
    require(s.t1n.dims.x >= tc.crop.x && s.t1n.dims.y >= tc.crop.y && s.t1n.dims.z >= tc.crop.z,
            ErrorCode::kDimMismatch,
            "sample " + s.case_id + " " + to_string(s.t1n.dims) + " is smaller than crop " + to_string(tc.crop));
    samples.push_back(prepare_sample(s, tc));
  }

  const auto ids = manifest.case_ids();
  if (ids.size() < static_cast<std::size_t>(tc.folds)) {
    fail(ErrorCode::kConfig, "train: " + std::to_string(tc.folds) + " folds need at least as many cases, have " +
                                 std::to_string(ids.size()));
  }
  const FoldPlan plan = kfold_split(ids, tc.folds, tc.seed);
  fs::create_directories(config.train_dir());
  write_text(config.train_dir() / "folds.json", plan_json(plan, tc.seed));
  write_resolved_config(config, config.train_dir());

  std::vector<int> folds;
  if (config.train.fold) {
    require(*config.train.fold >= 0 && *config.train.fold < tc.folds, ErrorCode::kConfig,
            "train.fold must lie in [0, folds)");
    folds.push_back(*config.train.fold);
  } else {
    for (int k = 0; k < tc.folds; ++k) folds.push_back(k);
  }
  for (int k : folds) {
    FoldOptions options;
    options.out_dir = fold_dir(config.train_dir(), k);
    const int every = std::max(1, tc.epochs / 20);
    options.on_epoch = [&](const EpochRecord& r) {
      if (r.epoch % every == 0 || r.epoch == 1 || r.epoch == tc.epochs) {
        log << "fold " << k << " epoch " << r.epoch << "/" << tc.epochs << " train " << fixed(r.train_loss)
            << " val " << fixed(r.val_loss) << '\n';
      }
    };
    const FoldResult result = train_fold(tc, samples, plan, k, options);
    log << "fold " << k << ": best epoch " << result.best_epoch << ", val " << fixed(result.best_val_loss)
        << " -> " << result.checkpoint.string() << '\n';
  }
}

void cmd_infer(const RunConfig& config, std::ostream& log) {
  const Dims crop = config.train.config.crop;
  std::map<fs::path, LoadedCheckpoint> cache;
  auto model_at = [&](const fs::path& path) -> const UNetModel<float>* {
    auto it = cache.find(path);
    if (it == cache.end()) {
      require_file(path, "checkpoint");
      it = cache.emplace(path, load_checkpoint(path)).first;
    }
    return &it->second.model;
  };

  if (!config.infer.input_dir.empty()) {
    if (config.infer.models != "ensemble") {
      fail(ErrorCode::kConfig, "infer.input_dir has no fold assignment; set infer.models to \"ensemble\"");
    }
    std::vector<const UNetModel<float>*> models;
    for (const auto& p : fold_checkpoints(config.infer.checkpoints)) models.push_back(model_at(p));
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(config.infer.input_dir)) {
      const std::string name = e.path().filename().string();
      const std::string suffix = "-t1n-voided.nii.gz";
      if (name.size() > suffix.size() && name.ends_with(suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    fs::create_directories(config.predictions_dir());
    if (ids.empty()) fail(ErrorCode::kMissingInput, "no <case>-t1n-voided.nii.gz in " + config.infer.input_dir.string());
    for (const auto& id : ids) {
      const fs::path mask_path = config.infer.input_dir / component_filename(id, Component::kMask);
      require_file(mask_path, "mask");
      const Volume voided = read_nifti(config.infer.input_dir / component_filename(id, Component::kT1nVoided));
      const MaskVolume mask = read_nifti_mask(mask_path, MaskRole::kCombined);
      write_nifti(infer_case(models, voided, mask, true, crop), config.predictions_dir() / inference_filename(id));
    }
    write_resolved_config(config, config.predictions_dir());
    log << "infer: " << ids.size() << " case(s) with " << models.size() << " model(s)\n";
    return;
  }

  require_file(config.infer.dataset, "manifest");
  const Manifest manifest = read_manifest(config.infer.dataset);
  const fs::path root = config.infer.dataset.parent_path();
  std::map<std::string, int> fold_of;
  std::vector<const UNetModel<float>*> ensemble;
  if (config.infer.models == "out_of_fold") {
    const FoldPlan plan = read_plan(config.infer.checkpoints / "folds.json");
    for (std::size_t k = 0; k < plan.folds.size(); ++k) {
      for (const auto& id : plan.folds[k]) fold_of[id] = static_cast<int>(k);
    }
  } else {
    for (const auto& p : fold_checkpoints(config.infer.checkpoints)) ensemble.push_back(model_at(p));
  }

  for (const auto& entry : manifest.samples) {
    const TrainingSample s = read_sample(root / entry.dir, entry.case_id, entry.variant);
    std::vector<const UNetModel<float>*> models = ensemble;
    if (models.empty()) {
      const auto it = fold_of.find(entry.case_id);
      if (it == fold_of.end()) fail(ErrorCode::kInvalidArgument, "case " + entry.case_id + " is in no fold");
      models.push_back(model_at(fold_dir(config.infer.checkpoints, it->second) / "best.vxpt"));
    }
    const Volume out = infer_case(models, s.t1n_voided, s.combined, true, crop);
    fs::create_directories(config.predictions_dir() / entry.dir);
    write_nifti(out, config.predictions_dir() / entry.dir / inference_filename(entry.case_id));
  }
  write_resolved_config(config, config.predictions_dir());
  log << "infer: " << manifest.samples.size() << " sample(s) -> " << config.predictions_dir().string() << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  require_file(config.evaluate.dataset, "manifest");
  const Manifest manifest = read_manifest(config.evaluate.dataset);
  if (manifest.samples.empty()) fail(ErrorCode::kInvalidArgument, "manifest lists no samples");
  const fs::path root = config.evaluate.dataset.parent_path();
  for (const auto& e : manifest.samples) {
    require_file(config.evaluate.predictions / e.dir / inference_filename(e.case_id), "prediction");
  }

  std::vector<CaseMetrics> metrics(manifest.samples.size());
  std::vector<std::exception_ptr> errors(manifest.samples.size());
  parallel_for(manifest.samples.size(), [&](std::size_t i) {
    try {
      const auto& e = manifest.samples[i];
      const TrainingSample s = read_sample(root / e.dir, e.case_id, e.variant);
      const Volume pred = read_nifti(config.evaluate.predictions / e.dir / inference_filename(e.case_id));
      const double max = region_max(s.t1n, s.healthy, s.unhealthy);
      metrics[i] = evaluate_case(e.case_id + "/v" + std::to_string(e.variant), pred, s.t1n, s.healthy, max,
                                 config.evaluate.ssim);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const SummaryStats summary = aggregate_stats(metrics);
  write_text(config.evaluation_dir() / "metrics.csv", metrics_csv(metrics));
  write_text(config.evaluation_dir() / "summary.json", summary_json(summary));
  write_resolved_config(config, config.evaluation_dir());
  log << "evaluate: " << metrics.size() << " sample(s), mean SSIM " << format_number(summary.ssim.stats->mean)
      << ", mean MSE " << format_number(summary.mse.stats->mean) << '\n';
}

void cmd_report(const RunConfig& config, std::ostream& out, std::ostream& log) {
  require_file(config.report.summary, "summary");
  const std::string table = format_report(read_summary(config.report.summary), config.report.title);
  out << table;
  write_text(config.report_dir() / "report.txt", table);
  write_resolved_config(config, config.report_dir());
  log << "report: " << (config.report_dir() / "report.txt").string() << '\n';
}

}  // namespace voxelpaint::cli
