#include "voxelpaint/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "voxelpaint/adam.hpp"
#include "voxelpaint/checkpoint.hpp"
#include "voxelpaint/error.hpp"
#include "voxelpaint/ops.hpp"

namespace voxelpaint {

std::string_view to_string(MaeRegion region) {
  return region == MaeRegion::kNonTumor ? "non_tumor" : "healthy";
}

MaeRegion mae_region_from_string(std::string_view name) {
  if (name == "non_tumor") return MaeRegion::kNonTumor;
  if (name == "healthy") return MaeRegion::kHealthy;
  fail(ErrorCode::kConfig, "mae_region must be \"non_tumor\" or \"healthy\", got \"" +
                               std::string(name) + "\"");
}

void TrainConfig::validate() const {
  require(folds >= 2, ErrorCode::kConfig, "train: folds must be >= 2");
  require(epochs >= 1, ErrorCode::kConfig, "train: epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::kConfig, "train: batch_size must be >= 1");
  require(lr >= 0.0, ErrorCode::kConfig, "train: lr must be non-negative");
  require(crop.x % 8 == 0 && crop.y % 8 == 0 && crop.z % 8 == 0 && crop.count() > 0,
          ErrorCode::kConfig, "train: crop dims must be positive multiples of 8, got " + to_string(crop));
  weights.validate();
  ssim.validate();
  unet().validate();
}

UNetConfig TrainConfig::unet() const {
  UNetConfig c;
  c.base_channels = base_channels;
  c.dropout_rate = dropout_rate;
  return c;
}

FoldPlan kfold_split(std::vector<std::string> ids, int k, std::uint64_t seed) {
  require(!ids.empty(), ErrorCode::kInvalidArgument, "kfold_split: no ids");
  require(k >= 1 && static_cast<std::size_t>(k) <= ids.size(), ErrorCode::kInvalidArgument,
          "kfold_split: k=" + std::to_string(k) + " exceeds " + std::to_string(ids.size()) + " ids");
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorCode::kInvalidArgument,
          "kfold_split: duplicate ids");
  Rng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    std::swap(ids[i], ids[uniform_index(rng, i + 1)]);
  }
  FoldPlan plan;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) plan.folds[i % plan.folds.size()].push_back(ids[i]);
  return plan;
}

Volume normalize_two_stage(const Volume& volume) {
  require(!volume.voxels.empty(), ErrorCode::kInvalidArgument, "normalize: empty volume");
  const double max = *std::max_element(volume.voxels.begin(), volume.voxels.end());
  require(max > 0.0, ErrorCode::kInvalidArgument,
          "normalize: maximum intensity must be positive (all-zero volume?)");
  Volume out = volume;
  for (auto& v : out.voxels) {
    const double unit = static_cast<double>(v) / max;
    v = static_cast<float>(2.0 * unit - 1.0);
  }
  out.domain = Domain::kSignedUnit;
  out.max_intensity = max;
  return out;
}

Volume denormalize_two_stage(const Volume& volume, double max_intensity) {
  require(max_intensity > 0.0, ErrorCode::kInvalidArgument, "denormalize: max must be positive");
  Volume out = volume;
  for (auto& v : out.voxels) {
    const double unit = (static_cast<double>(v) + 1.0) / 2.0;
    v = static_cast<float>(unit * max_intensity);
  }
  out.domain = Domain::kRaw;
  out.max_intensity.reset();
  return out;
}

PreparedSample prepare_sample(const TrainingSample& sample, const TrainConfig& config) {
  const Volume voided = normalize_two_stage(sample.t1n_voided);
  const double max = *voided.max_intensity;
  Volume target = sample.t1n;
  for (auto& v : target.voxels) v = static_cast<float>(2.0 * (static_cast<double>(v) / max) - 1.0);
  target.domain = Domain::kSignedUnit;

  const CropSpec spec = center_crop_spec(sample.t1n.dims, config.crop);
  PreparedSample out;
  out.case_id = sample.case_id;
  out.variant = sample.variant;
  out.voided = volume_tensor<float>(crop(voided, spec));
  out.target = volume_tensor<float>(crop(target, spec));
  out.mask = mask_tensor<float>(crop(sample.combined, spec));
  const MaskVolume region = config.mae_region == MaeRegion::kNonTumor
                                ? mask_complement(crop(sample.unhealthy, spec), MaskRole::kHealthy)
                                : crop(sample.healthy, spec);
  out.mae_region = region.bits;
  return out;
}

std::string to_json_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["fold"] = record.fold;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  j["val_loss"] = record.val_loss;
  j["seconds"] = record.seconds;
  return j.dump();
}

namespace {

Tensor<float> stack(const std::vector<const Tensor<float>*>& parts) {
  Shape shape = parts.front()->shape();
  shape[0] = 0;
  std::vector<float> values;
  for (const auto* p : parts) {
    shape[0] += p->dim(0);
    values.insert(values.end(), p->values().begin(), p->values().end());
  }
  return Tensor<float>(std::move(shape), std::move(values));
}

struct Batch {
  Tensor<float> voided, mask, target;
  std::vector<std::uint8_t> region;
};

Batch make_batch(const std::vector<const PreparedSample*>& members) {
  std::vector<const Tensor<float>*> v, m, t;
  Batch b;
  for (const auto* s : members) {
    v.push_back(&s->voided);
    m.push_back(&s->mask);
    t.push_back(&s->target);
    b.region.insert(b.region.end(), s->mae_region.begin(), s->mae_region.end());
  }
  b.voided = stack(v);
  b.mask = stack(m);
  b.target = stack(t);
  return b;
}

}  // namespace

double evaluate_loss(const UNetModel<float>& model, const std::vector<const PreparedSample*>& samples,
                     const TrainConfig& config) {
  require(!samples.empty(), ErrorCode::kInvalidArgument, "evaluate_loss: no samples");
  NoGradGuard no_grad;
  Rng unused(0);
  double total = 0.0;
  for (const auto* s : samples) {
    const Tensor<float> pred = model.forward(s->voided, s->mask, false, unused);
    total += static_cast<double>(
        composite_loss(pred, s->target, s->mae_region, config.weights, config.ssim).item());
  }
  return total / static_cast<double>(samples.size());
}

FoldResult train_fold(const TrainConfig& config, const std::vector<PreparedSample>& samples,
                      const FoldPlan& plan, int fold_index, const FoldOptions& options) {
  config.validate();
  require(fold_index >= 0 && static_cast<std::size_t>(fold_index) < plan.folds.size(),
          ErrorCode::kInvalidArgument, "train_fold: fold index out of range");
  const auto& held_out = plan.folds[static_cast<std::size_t>(fold_index)];
  const std::set<std::string> val_ids(held_out.begin(), held_out.end());
  std::vector<const PreparedSample*> train, val;
  for (const auto& s : samples) (val_ids.count(s.case_id) ? val : train).push_back(&s);
  require(!train.empty() && !val.empty(), ErrorCode::kInvalidArgument,
          "train_fold: fold " + std::to_string(fold_index) + " has an empty train or validation set");

  const std::string fold_key = "fold" + std::to_string(fold_index);
  Rng init_rng(derive_seed(config.seed, fold_key + "/init"));
  Rng order_rng(derive_seed(config.seed, fold_key + "/order"));
  Rng dropout_rng(derive_seed(config.seed, fold_key + "/dropout"));

  UNetModel<float> model = UNetModel<float>::build(config.unet(), init_rng);
  Adam<float> adam(model.parameters(), AdamOptions{config.lr, config.beta1, config.beta2, 1e-8});

  FoldResult result;
  result.fold = fold_index;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) fail(ErrorCode::kIo, "cannot write " + (options.out_dir / "train_log.jsonl").string());
  }

  std::vector<std::size_t> order(train.size());
  std::vector<double> sample_loss(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[uniform_index(order_rng, i + 1)]);
    }

    for (std::size_t first = 0; first < order.size(); first += batch) {
      const std::size_t last = std::min(order.size(), first + batch);
      std::vector<const PreparedSample*> members;
      for (std::size_t i = first; i < last; ++i) members.push_back(train[order[i]]);
      const Batch b = make_batch(members);

      model.zero_grad();
      const Tensor<float> pred = model.forward(b.voided, b.mask, true, dropout_rng);
      const Tensor<float> loss = composite_loss(pred, b.target, b.region, config.weights, config.ssim);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        fail(ErrorCode::kNumericFailure, "non-finite training loss in fold " +
                                             std::to_string(fold_index) + ", epoch " +
                                             std::to_string(epoch) + ", sample " +
                                             members.front()->case_id + "/v" +
                                             std::to_string(members.front()->variant));
      }
      loss.backward();
      adam.step();
      for (std::size_t i = first; i < last; ++i) sample_loss[order[i]] = value;
    }

    EpochRecord record;
    record.fold = fold_index;
    record.epoch = epoch;
    // Summed in sample order, independent of the shuffle.
    double total = 0.0;
    for (double v : sample_loss) total += v;
    record.train_loss = total / static_cast<double>(sample_loss.size());
    record.val_loss = evaluate_loss(model, val, config);
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best_model = model.cast<float>();
      if (!options.out_dir.empty()) {
        result.checkpoint = options.out_dir / "best.vxpt";
        save_checkpoint(result.best_model,
                        CheckpointMetadata{epoch, fold_index, record.val_loss, config.seed},
                        result.checkpoint);
      }
    }
    result.curve.push_back(record);
    if (log.is_open()) log << to_json_line(record) << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(record);
  }
  return result;
}

Volume infer_with(const Predictor& predictor, const Volume& input, const MaskVolume& combined,
                  bool input_is_voided, const Dims& crop_dims) {
  require(input.dims == combined.dims, ErrorCode::kDimMismatch,
          "infer: volume " + to_string(input.dims) + " vs mask " + to_string(combined.dims));
  require(crop_dims.x <= input.dims.x && crop_dims.y <= input.dims.y && crop_dims.z <= input.dims.z,
          ErrorCode::kDimMismatch,
          "infer: crop " + to_string(crop_dims) + " does not fit volume " + to_string(input.dims));
  const Volume voided = input_is_voided ? input : void_image(input, combined);
  const Volume normalized = normalize_two_stage(voided);
  const double max = *normalized.max_intensity;
  const auto [patch, spec] = crop_center(normalized, crop_dims);
  const MaskVolume patch_mask = crop(combined, spec);

  const Tensor<float> out = predictor(volume_tensor<float>(patch), mask_tensor<float>(patch_mask));
  require(out.numel() == patch.voxels.size(), ErrorCode::kShapeMismatch,
          "infer: prediction has " + std::to_string(out.numel()) + " voxels, crop has " +
              std::to_string(patch.voxels.size()));
  Volume prediction(spec.target);
  prediction.domain = Domain::kSignedUnit;
  for (std::size_t i = 0; i < prediction.voxels.size(); ++i) {
    prediction.voxels[i] = std::clamp(out.values()[i], -1.0f, 1.0f);
  }
  return stitch(input, denormalize_two_stage(prediction, max), patch_mask, spec);
}

Volume infer_case(const std::vector<const UNetModel<float>*>& models, const Volume& input,
                  const MaskVolume& combined, bool input_is_voided, const Dims& crop_dims) {
  require(!models.empty(), ErrorCode::kInvalidArgument, "infer: no models");
  const Predictor ensemble = [&](const Tensor<float>& voided, const Tensor<float>& mask) {
    NoGradGuard no_grad;
    Rng unused(0);
    std::vector<double> acc(voided.numel(), 0.0);
    for (const auto* model : models) {
      const Tensor<float> pred = model->forward(voided, mask, false, unused);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(pred.values()[i]);
    }
    std::vector<float> mean(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
      mean[i] = static_cast<float>(acc[i] / static_cast<double>(models.size()));
    }
    return Tensor<float>(voided.shape(), std::move(mean));
  };
  return infer_with(ensemble, input, combined, input_is_voided, crop_dims);
}

}  // namespace voxelpaint
