#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "voxelpaint/error.hpp"

namespace voxelpaint::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "config: " + where + " must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.count(key)) fail(ErrorCode::kConfig, "config: unknown key \"" + where + key + "\"");
  }
}

template <typename T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kConfig, "config: \"" + where + key + "\" has the wrong type");
  }
}

void read_path(const json& j, const char* key, const std::string& where, const fs::path& base, fs::path& out) {
  std::string text;
  read(j, key, where, text);
  if (!text.empty()) out = fs::path(text).is_absolute() ? fs::path(text) : base / text;
}

void read_crop(const json& j, const std::string& where, Dims& out) {
  if (!j.contains("crop")) return;
  std::vector<std::size_t> v;
  read(j, "crop", where, v);
  if (v.size() != 3) fail(ErrorCode::kConfig, "config: \"" + where + "crop\" needs three extents [x, y, z]");
  out = Dims{v[0], v[1], v[2]};
}

}  // namespace

void RunConfig::resolve() {
  if (train.dataset.empty()) train.dataset = manifest();
  if (infer.dataset.empty() && infer.input_dir.empty()) infer.dataset = manifest();
  if (infer.checkpoints.empty()) infer.checkpoints = train_dir();
  if (evaluate.dataset.empty()) evaluate.dataset = manifest();
  if (evaluate.predictions.empty()) evaluate.predictions = predictions_dir();
  if (report.summary.empty()) report.summary = evaluation_dir() / "summary.json";
  train.config.seed = seed;
}

RunConfig config_from_json(const json& j, const fs::path& base) {
  RunConfig c;
  check_keys(j, "", {"seed", "workdir", "prepare", "train", "infer", "evaluate", "report"});
  read(j, "seed", "", c.seed);
  read_path(j, "workdir", "", base, c.workdir);
  if (c.workdir.is_relative()) c.workdir = base / c.workdir;

  if (j.contains("prepare")) {
    const auto& p = j["prepare"];
    const std::string w = "prepare.";
    check_keys(p, w, {"input_dir", "variants", "margin", "volume_fraction", "max_attempts"});
    read_path(p, "input_dir", w, base, c.prepare.input_dir);
    read(p, "variants", w, c.prepare.variants);
    read(p, "margin", w, c.prepare.mask.margin);
    read(p, "volume_fraction", w, c.prepare.mask.volume_fraction);
    read(p, "max_attempts", w, c.prepare.mask.max_attempts);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    const std::string w = "train.";
    check_keys(t, w, {"dataset", "fold", "epochs", "folds", "lr", "beta1", "beta2", "lambda1", "lambda2",
                      "batch_size", "crop", "base_channels", "dropout", "mae_region", "ssim_window",
                      "ssim_sigma", "ssim_range"});
    auto& tc = c.train.config;
    read_path(t, "dataset", w, base, c.train.dataset);
    if (t.contains("fold") && !t["fold"].is_null()) {
      int fold = 0;
      read(t, "fold", w, fold);
      c.train.fold = fold;
    }
    read(t, "epochs", w, tc.epochs);
    read(t, "folds", w, tc.folds);
    read(t, "lr", w, tc.lr);
    read(t, "beta1", w, tc.beta1);
    read(t, "beta2", w, tc.beta2);
    read(t, "lambda1", w, tc.weights.lambda1);
    read(t, "lambda2", w, tc.weights.lambda2);
    read(t, "batch_size", w, tc.batch_size);
    read_crop(t, w, tc.crop);
    read(t, "base_channels", w, tc.base_channels);
    read(t, "dropout", w, tc.dropout_rate);
    std::string region(to_string(tc.mae_region));
    read(t, "mae_region", w, region);
    tc.mae_region = mae_region_from_string(region);
    read(t, "ssim_window", w, tc.ssim.window);
    read(t, "ssim_sigma", w, tc.ssim.sigma);
    read(t, "ssim_range", w, tc.ssim.dynamic_range);
  }
  if (j.contains("infer")) {
    const auto& i = j["infer"];
    const std::string w = "infer.";
    check_keys(i, w, {"dataset", "input_dir", "checkpoints", "models"});
    read_path(i, "dataset", w, base, c.infer.dataset);
    read_path(i, "input_dir", w, base, c.infer.input_dir);
    read_path(i, "checkpoints", w, base, c.infer.checkpoints);
    read(i, "models", w, c.infer.models);
  }
  if (j.contains("evaluate")) {
    const auto& e = j["evaluate"];
    const std::string w = "evaluate.";
    check_keys(e, w, {"dataset", "predictions", "ssim_window", "ssim_sigma"});
    read_path(e, "dataset", w, base, c.evaluate.dataset);
    read_path(e, "predictions", w, base, c.evaluate.predictions);
    read(e, "ssim_window", w, c.evaluate.ssim.window);
    read(e, "ssim_sigma", w, c.evaluate.ssim.sigma);
  }
  if (j.contains("report")) {
    const auto& r = j["report"];
    const std::string w = "report.";
    check_keys(r, w, {"summary", "title"});
    read_path(r, "summary", w, base, c.report.summary);
    read(r, "title", w, c.report.title);
  }

  if (c.infer.models != "out_of_fold" && c.infer.models != "ensemble") {
    fail(ErrorCode::kConfig, "config: infer.models must be \"out_of_fold\" or \"ensemble\"");
  }
  if (c.prepare.variants < 1) fail(ErrorCode::kConfig, "config: prepare.variants must be >= 1");
  try {
    c.prepare.mask.validate();
    c.evaluate.ssim.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  c.train.config.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "config file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  const auto& tc = c.train.config;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["workdir"] = c.workdir.string();
  j["prepare"] = {{"input_dir", c.prepare.input_dir.string()},
                  {"variants", c.prepare.variants},
                  {"margin", c.prepare.mask.margin},
                  {"volume_fraction", c.prepare.mask.volume_fraction},
                  {"max_attempts", c.prepare.mask.max_attempts}};
  j["train"] = {{"dataset", c.train.dataset.string()},
                {"fold", c.train.fold ? nlohmann::ordered_json(*c.train.fold) : nlohmann::ordered_json()},
                {"epochs", tc.epochs},
                {"folds", tc.folds},
                {"lr", tc.lr},
                {"beta1", tc.beta1},
                {"beta2", tc.beta2},
                {"lambda1", tc.weights.lambda1},
                {"lambda2", tc.weights.lambda2},
                {"batch_size", tc.batch_size},
                {"crop", {tc.crop.x, tc.crop.y, tc.crop.z}},
                {"base_channels", tc.base_channels},
                {"dropout", tc.dropout_rate},
                {"mae_region", std::string(to_string(tc.mae_region))},
                {"ssim_window", tc.ssim.window},
                {"ssim_sigma", tc.ssim.sigma},
                {"ssim_range", tc.ssim.dynamic_range}};
  j["infer"] = {{"dataset", c.infer.dataset.string()},
                {"input_dir", c.infer.input_dir.string()},
                {"checkpoints", c.infer.checkpoints.string()},
                {"models", c.infer.models}};
  j["evaluate"] = {{"dataset", c.evaluate.dataset.string()},
                   {"predictions", c.evaluate.predictions.string()},
                   {"ssim_window", c.evaluate.ssim.window},
                   {"ssim_sigma", c.evaluate.ssim.sigma}};
  j["report"] = {{"summary", c.report.summary.string()}, {"title", c.report.title}};
  return j;
}

}  // namespace voxelpaint::cli
