// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all nine
//   acceptance 2 5        run a subset
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "voxelpaint/checkpoint.hpp"
#include "voxelpaint/dataset.hpp"
#include "voxelpaint/error.hpp"
#include "voxelpaint/geometry.hpp"
#include "voxelpaint/metrics.hpp"
#include "voxelpaint/nifti.hpp"
#include "voxelpaint/ops.hpp"
#include "voxelpaint/parallel.hpp"
#include "voxelpaint/phantom.hpp"

using namespace voxelpaint;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects named checks; the first failure is reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
    ok_ = ok_ && ok;
  }
  void note(const std::string& text) { notes_ += (notes_.empty() ? "" : "; ") + text; }
  Outcome outcome() const { return {ok_, ok_ ? notes_ : "failed: " + failure_ + (notes_.empty() ? "" : " | " + notes_)}; }

 private:
  bool ok_ = true;
  std::string failure_;
  std::string notes_;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ------------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  double worst = 0.0;
  std::string worst_name;
  std::size_t fewest = SIZE_MAX;
  const auto cases = vptest::primitive_cases(2024);
  for (const auto& pc : cases) {
    const auto report = vptest::check_case(pc, 24, 1e-6, 7);
    const double err = vptest::max_relative_error(report.f32, 1e-3);
    fewest = std::min(fewest, report.f32.size());
    c.expect(report.f32.size() >= 20, pc.name + " sampled " + std::to_string(report.f32.size()));
    c.expect(err <= 1e-3, pc.name + " rel err " + sci(err));
    if (err > worst) {
      worst = err;
      worst_name = pc.name;
    }
  }
  const auto unet = vptest::check_unet(60, 1e-6, 3);
  const double unet_err = vptest::max_relative_error(unet.f32, 1e-3);
  c.expect(unet.f32.size() >= 20, "unet sampled " + std::to_string(unet.f32.size()));
  c.expect(unet_err <= 1e-3, "unet rel err " + sci(unet_err));
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 120.0, "runtime " + std::to_string(elapsed) + " s");
  c.note(std::to_string(cases.size()) + " primitives (>= " + std::to_string(fewest) + " samples each), worst " +
         sci(worst) + " (" + worst_name + ")");
  c.note("unet base 8 16^3: " + std::to_string(unet.f32.size()) + " sampled coordinates, worst " + sci(unet_err));
  return c.outcome();
}

// 2 ------------------------------------------------------------------------
Outcome conv_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  Rng rng(20240);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 2), ci = 1 + uniform_index(rng, 5), co = 1 + uniform_index(rng, 5);
    const std::size_t k = uniform_index(rng, 3) ? 3 : 1;
    const std::size_t pad = k == 3 ? uniform_index(rng, 2) : 0;
    const Shape in{n, ci, 3 + uniform_index(rng, 8), 3 + uniform_index(rng, 8), 3 + uniform_index(rng, 8)};
    const Shape w{co, ci, k, k, k};
    const auto x = vptest::random_values(shape_numel(in), rng);
    const auto wt = vptest::random_values(shape_numel(w), rng);
    const auto b = vptest::random_values(co, rng);
    const auto want = vptest::naive_conv3d(x, in, wt, w, b, pad);
    const auto got = conv3d(vptest::make_tensor<float>(in, x, false), vptest::make_tensor<float>(w, wt, false),
                            vptest::make_tensor<float>({co}, b, false), pad);
    c.expect(got.numel() == want.size(), "shape trial " + std::to_string(trial));
    for (std::size_t i = 0; i < want.size() && i < got.numel(); ++i) {
      worst = std::max(worst, std::abs(double(got.values()[i]) - want[i]));
    }
  }
  const double elapsed = seconds_since(t0);
  c.expect(worst <= 1e-5, "max abs diff " + sci(worst));
  c.expect(elapsed < 60.0, "runtime");
  c.note("100 cases, max abs diff " + sci(worst));
  return c.outcome();
}

// 3 ------------------------------------------------------------------------
Outcome ssim_suite() {
  Checks c;
  Rng rng(33);
  const SsimParams train{7, 1.5, 2.0};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 7 + uniform_index(rng, 10), h = 7 + uniform_index(rng, 10), w = 7 + uniform_index(rng, 10);
    const Shape s{1, 1, d, h, w};
    const auto x = vptest::random_values(shape_numel(s), rng, -1, 1);
    auto y = x;
    for (auto& v : y) v = std::clamp(v + 0.3 * (uniform01(rng) - 0.5), -1.0, 1.0);
    const auto a = vptest::make_tensor<double>(s, x, false), b = vptest::make_tensor<double>(s, y, false);
    c.expect(ssim3d(a, a, train).item() == 1.0, "ssim(a, a) != 1");
    c.expect(ssim3d(vptest::make_tensor<float>(s, x, false), vptest::make_tensor<float>(s, x, false), train).item() == 1.0f,
             "f32 ssim(a, a) != 1");
    c.expect(ssim3d(a, b, train).item() == ssim3d(b, a, train).item(), "asymmetric");
    const double got = ssim3d(a, b, train).item();
    worst = std::max(worst, std::abs(got - vptest::brute_force_ssim(x, y, d, h, w, 7, 1.5, 2.0)));
  }
  c.expect(worst <= 1e-6, "brute force diff " + sci(worst));
  const SsimParams unit{7, 1.5, 1.0};
  const Shape s{1, 1, 16, 16, 16};
  const double constant = ssim3d(Tensor<double>::full(s, 0.0), Tensor<double>::full(s, 1.0), unit).item();
  const double expected = unit.c1() / (1.0 + unit.c1());
  c.expect(std::abs(constant - expected) <= 1e-9, "constant case " + sci(std::abs(constant - expected)));
  c.note("identity exact, symmetric, brute force " + sci(worst) + ", constant " + sci(std::abs(constant - expected)));
  return c.outcome();
}

// 4 ------------------------------------------------------------------------
Outcome loss_reductions() {
  Checks c;
  Rng rng(44);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 20000);
    const auto a = vptest::random_values(n, rng, -5, 5), b = vptest::random_values(n, rng, -5, 5);
    double plain = 0.0;
    for (std::size_t i = 0; i < n; ++i) plain += std::abs(a[i] - b[i]);
    plain /= double(n);
    const std::vector<std::uint8_t> full(n, 1);
    const double got =
        masked_mae(vptest::make_tensor<double>({n}, a, false), vptest::make_tensor<double>({n}, b, false), full).item();
    worst = std::max(worst, std::abs(got - plain));
  }
  c.expect(worst <= 1e-12, "full-mask MAE diff " + sci(worst));

  const Shape s{1, 1, 12, 12, 12};
  const auto x = vptest::make_tensor<double>(s, vptest::random_values(shape_numel(s), rng), false);
  const auto y = vptest::make_tensor<double>(s, vptest::random_values(shape_numel(s), rng), false);
  std::vector<std::uint8_t> region(shape_numel(s));
  for (auto& r : region) r = uniform01(rng) < 0.5;
  const SsimParams p{7, 1.5, 2.0};
  c.expect(composite_loss(x, x, region, LossWeights{}, p).item() == 0.0, "composite(pred = gt) != 0");
  const double mae = masked_mae(x, y, region).item(), ssim = ssim3d(x, y, p).item();
  c.expect(composite_loss(x, y, region, LossWeights{1, 0}, p).item() == mae, "lambda2 = 0 does not isolate MAE");
  c.expect(composite_loss(x, y, region, LossWeights{0, 1}, p).item() == 1.0 - ssim, "lambda1 = 0 does not isolate SSIM");
  c.note("full-mask MAE diff " + sci(worst) + ", composite(pred = gt) = 0, each weight isolates its term");
  return c.outcome();
}

// 5 ------------------------------------------------------------------------
Outcome geometry() {
  Checks c;
  const auto spec = center_crop_spec(Dims{240, 240, 155}, Dims{208, 208, 144});
  c.expect(spec.start == Dims{16, 16, 5}, "crop start " + to_string(spec.start));

  Rng rng(55);
  std::size_t changed_outside = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Dims src{1 + uniform_index(rng, 10), 1 + uniform_index(rng, 10), 1 + uniform_index(rng, 10)};
    const Dims tgt{1 + uniform_index(rng, src.x), 1 + uniform_index(rng, src.y), 1 + uniform_index(rng, src.z)};
    const auto cs = center_crop_spec(src, tgt);
    Volume original(src), prediction(tgt);
    for (auto& v : original.voxels) v = float(uniform01(rng));
    for (auto& v : prediction.voxels) v = float(uniform01(rng)) + 5.0f;
    MaskVolume mask(tgt, MaskRole::kCombined);
    for (auto& b : mask.bits) b = uniform01(rng) < 0.3;
    const auto out = stitch(original, prediction, mask, cs);
    for (std::size_t k = 0; k < src.z; ++k)
      for (std::size_t j = 0; j < src.y; ++j)
        for (std::size_t i = 0; i < src.x; ++i) {
          const bool in_box = i >= cs.start.x && i < cs.start.x + tgt.x && j >= cs.start.y &&
                              j < cs.start.y + tgt.y && k >= cs.start.z && k < cs.start.z + tgt.z;
          const bool masked = in_box && mask.at(i - cs.start.x, j - cs.start.y, k - cs.start.z);
          if (!masked && out.at(i, j, k) != original.at(i, j, k)) ++changed_outside;
        }
  }
  c.expect(changed_outside == 0, std::to_string(changed_outside) + " voxels changed outside the mask");

  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Volume v(Dims{6, 5, 4});
    const double scale = std::pow(10.0, 5.0 * uniform01(rng));
    for (auto& x : v.voxels) x = float(scale * uniform01(rng));
    const auto n = normalize_two_stage(v);
    const auto back = denormalize_two_stage(n, *n.max_intensity);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
      worst = std::max(worst, std::abs(double(back.voxels[i]) - double(v.voxels[i])) / *n.max_intensity);
    }
  }
  c.expect(worst <= 1e-6, "normalization round trip " + sci(worst));
  c.note("starts (16,16,5), 1000 stitches exact, round trip " + sci(worst) + " of max");
  return c.outcome();
}

// 6 ------------------------------------------------------------------------
Outcome mask_augmentation() {
  Checks c;
  Rng rng(66);
  std::size_t grids = 0;
  for (std::size_t n = 1; n <= 16; ++n) {
    MaskVolume m(Dims{n, n, n}, MaskRole::kHealthy);
    for (auto& b : m.bits) b = uniform01(rng) < 0.35;
    for (int axis = 0; axis < 3; ++axis) c.expect(mirror(mirror(m, axis), axis).bits == m.bits, "mirror involution");
    MaskVolume qxy = m, qyz = m;
    for (int quarter = 0; quarter < 4; ++quarter) {
      const double deg = 90.0 * quarter;
      c.expect(rotate_xy(m, deg).bits == qxy.bits, "xy rotation " + std::to_string(int(deg)) + " n=" + std::to_string(n));
      c.expect(rotate_yz(m, deg).bits == qyz.bits, "yz rotation " + std::to_string(int(deg)) + " n=" + std::to_string(n));
      qxy = vptest::quarter_turn_xy(qxy);
      qyz = vptest::quarter_turn_yz(qyz);
    }
    ++grids;
  }

  std::size_t samples = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Dims d = seed % 2 ? Dims{24, 24, 24} : Dims{16, 16, 16};
    const auto p = make_phantom(d, 600 + seed);
    MaskGenParams params;
    params.margin = seed % 2 ? 3 : 1;
    const auto generated = synthesize_case("c" + std::to_string(seed), p.t1n, p.tumor, params, seed, 5);
    const auto forbidden = vptest::naive_dilate(p.tumor, params.margin);
    for (const auto& s : generated) {
      c.expect(!masks_overlap(s.healthy, forbidden), "healthy touches dilated tumor");
      c.expect(s.combined.bits == mask_union(s.healthy, s.unhealthy, MaskRole::kCombined).bits,
               "combined != healthy | unhealthy");
      c.expect(!s.healthy.empty(), "empty healthy mask");
      ++samples;
    }
  }
  c.note(std::to_string(grids) + " grids (1^3..16^3) mirror + 0/90/180/270 exact; " + std::to_string(samples) +
         " generated samples satisfy the placement predicates");
  return c.outcome();
}

// 7 ------------------------------------------------------------------------
Outcome parsing() {
  Checks c;
  const auto dir = vptest::fresh_dir("acceptance-parsing");
  Rng rng(77);
  int roundtrips = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Volume v(Dims{1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12)});
    for (auto& x : v.voxels) {
      std::uint32_t bits = static_cast<std::uint32_t>(rng());
      std::memcpy(&x, &bits, 4);
      if (!std::isfinite(x)) x = 1.0f;
    }
    for (const char* ext : {".nii", ".nii.gz"}) {
      const auto path = dir / ("v" + std::to_string(trial) + ext);
      write_nifti(v, path);
      const auto back = read_nifti(path);
      c.expect(back.dims == v.dims && std::memcmp(back.voxels.data(), v.voxels.data(), v.voxels.size() * 4) == 0,
               "round trip " + path.filename().string());
      ++roundtrips;
    }
  }
  const std::pair<const char*, ErrorCode> fixtures[] = {
      {"bad_big_endian.nii", ErrorCode::kBadHeaderSize}, {"bad_magic.nii", ErrorCode::kBadMagic},
      {"bad_datatype.nii", ErrorCode::kUnsupportedDatatype}, {"bad_bitpix.nii", ErrorCode::kUnsupportedDatatype},
      {"bad_frames.nii", ErrorCode::kDimMismatch}, {"truncated_voxels.nii", ErrorCode::kTruncated},
      {"truncated_header.nii", ErrorCode::kTruncated}};
  for (const auto& [name, code] : fixtures) {
    ErrorCode got = ErrorCode::kInvalidArgument;
    bool threw = false;
    try {
      read_nifti(vptest::data_dir() / "nifti" / name);
    } catch (const Error& e) {
      threw = true;
      got = e.code();
    }
    c.expect(threw && got == code, std::string(name) + " gave " + (threw ? std::string(to_string(got)) : "no error"));
  }
  c.note(std::to_string(roundtrips) + " bit-exact f32 round trips, " + std::to_string(std::size(fixtures)) +
         " malformed fixtures mapped");
  return c.outcome();
}

// 8 ------------------------------------------------------------------------
FoldResult smoke_run(const TrainConfig& config, const std::vector<PreparedSample>& samples, const FoldPlan& plan,
                     const fs::path& out) {
  FoldOptions options;
  options.out_dir = out;
  return train_fold(config, samples, plan, 0, options);
}

Outcome training_smoke() {
  Checks c;
  set_num_threads(1);
  TrainConfig config = vptest::smoke_config(200, 7);
  config.folds = 5;
  config.dropout_rate = 0.0;
  MaskGenParams params;
  params.margin = 1;
  std::vector<PreparedSample> samples;
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "case" + std::to_string(i);
    const auto p = make_phantom(Dims{16, 16, 16}, 100 + static_cast<std::uint64_t>(i));
    samples.push_back(prepare_sample(synthesize_case(id, p.t1n, p.tumor, params, derive_seed(7, id), 1)[0], config));
    ids.push_back(id);
  }
  const FoldPlan plan = kfold_split(ids, config.folds, config.seed);
  const auto dir = vptest::fresh_dir("acceptance-smoke");

  const auto t0 = std::chrono::steady_clock::now();
  const FoldResult a = smoke_run(config, samples, plan, dir / "a");
  const double elapsed = seconds_since(t0);
  const double first = a.curve.front().train_loss, last = a.curve.back().train_loss;
  c.expect(last < 0.1 * first, "final/first train loss " + std::to_string(last / first));
  c.expect(elapsed < 300.0, "runtime " + std::to_string(elapsed) + " s");

  double min_val = a.curve.front().val_loss;
  for (const auto& r : a.curve) min_val = std::min(min_val, r.val_loss);
  const auto loaded = load_checkpoint(a.checkpoint, config.unet());
  std::vector<const PreparedSample*> val;
  for (const auto& s : samples) {
    if (std::count(plan.folds[0].begin(), plan.folds[0].end(), s.case_id)) val.push_back(&s);
  }
  const double reloaded = evaluate_loss(loaded.model, val, config);
  c.expect(loaded.metadata.val_loss == min_val && reloaded == min_val, "checkpoint val loss is not the curve minimum");

  const FoldResult b = smoke_run(config, samples, plan, dir / "b");
  bool identical = a.curve.size() == b.curve.size();
  for (std::size_t i = 0; identical && i < a.curve.size(); ++i) {
    identical = a.curve[i].train_loss == b.curve[i].train_loss && a.curve[i].val_loss == b.curve[i].val_loss;
  }
  identical = identical && vptest::read_bytes(a.checkpoint) == vptest::read_bytes(b.checkpoint);
  c.expect(identical, "rerun differs");

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "8 train / 2 val, 200 epochs, train loss %.4f -> %.4f (ratio %.4f), %.1f s; best epoch %d val %.6f; rerun "
                "bit-identical",
                first, last, last / first, elapsed, a.best_epoch, min_val);
  c.note(buf);
  return c.outcome();
}

// 9 ------------------------------------------------------------------------
int run_cli(const std::string& args, const fs::path& dir, std::string* output = nullptr) {
#ifdef VOXELPAINT_CLI_PATH
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = std::string(VOXELPAINT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream buffer;
    buffer << in.rdbuf();
    *output = buffer.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  (void)args;
  (void)dir;
  (void)output;
  return -1;
#endif
}

Outcome end_to_end() {
  Checks c;
  const auto dir = vptest::fresh_dir("acceptance-e2e");
  vptest::write_phantom_inputs(dir / "inputs", 4, Dims{16, 16, 16}, 9);
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"seed": 9, "workdir": "work", "prepare": {"input_dir": "inputs", "margin": 1},
      "train": {"epochs": 3, "folds": 2, "crop": [16, 16, 16], "base_channels": 8}})";
  }
  const std::string cfg = " --config " + (dir / "run.json").string();
  for (const char* cmd : {"prepare", "train", "infer", "evaluate", "report"}) {
    std::string out;
    const int code = run_cli(cmd + cfg, dir, &out);
    c.expect(code == 0, std::string(cmd) + " exited " + std::to_string(code) + ": " + out);
  }

  // pred = gt
  const auto manifest = read_manifest(dir / "work/dataset/manifest.json");
  for (const auto& s : manifest.samples) {
    fs::create_directories(dir / "perfect" / s.dir);
    fs::copy_file(dir / "work/dataset" / s.dir / component_filename(s.case_id, Component::kT1n),
                  dir / "perfect" / s.dir / (s.case_id + "-t1n-inference.nii.gz"));
  }
  {
    std::ofstream cfg2(dir / "perfect.json");
    cfg2 << R"({"workdir": "perfect-run", "evaluate": {"dataset": "work/dataset/manifest.json", "predictions": "perfect"}})";
  }
  c.expect(run_cli("evaluate --config " + (dir / "perfect.json").string(), dir) == 0, "pred = gt evaluate failed");
  double ssim = -1.0, mse = -1.0;
  if (fs::exists(dir / "perfect-run/evaluation/summary.json")) {
    const auto s = read_summary(dir / "perfect-run/evaluation/summary.json");
    ssim = s.ssim.stats->mean;
    mse = s.mse.stats->mean;
    c.expect(s.ssim.stats->p25 == 1.0 && s.mse.stats->p75 == 0.0, "pred = gt quartiles");
  }
  c.expect(ssim == 1.0 && mse == 0.0, "pred = gt gives SSIM " + std::to_string(ssim) + ", MSE " + std::to_string(mse));

  // reference statistics fixture
  {
    std::ofstream cfg3(dir / "reference.json");
    cfg3 << R"({"workdir": "reference-run", "report": {"summary": ")"
         << (vptest::data_dir() / "reference_summary.json").string() << R"(", "title": "Online validation"}})";
  }
  std::string table;
  c.expect(run_cli("report --config " + (dir / "reference.json").string(), dir, &table) == 0, "report failed");
  const char* rows[] = {"Mean", "Standard deviation", "25 quantile", "Median", "75 quantile"};
  std::size_t at = 0;
  for (const char* row : rows) {
    at = table.find(std::string("\n") + row, at);
    c.expect(at != std::string::npos, std::string("row ") + row + " missing or out of order");
  }
  c.expect(table.find("MSE           PSNR          SSIM") != std::string::npos, "column header");
  c.expect(table.find("0.87300897") != std::string::npos, "mean SSIM 0.87300897 not echoed");
  c.note("5 commands exit 0 on 4 phantom scans (20 samples); pred = gt gives SSIM 1, MSE 0; fixture echoes mean SSIM "
         "0.87300897");
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient suite", gradient_suite},     {"convolution oracle", conv_oracle},
      {"SSIM suite", ssim_suite},             {"loss reductions", loss_reductions},
      {"geometry", geometry},                 {"mask augmentation", mask_augmentation},
      {"parsing", parsing},                   {"training smoke", training_smoke},
      {"end-to-end", end_to_end}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (int i = 0; i < 9; ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
