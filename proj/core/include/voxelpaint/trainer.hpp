#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "voxelpaint/geometry.hpp"
#include "voxelpaint/loss.hpp"
#include "voxelpaint/mask_synth.hpp"
#include "voxelpaint/unet.hpp"

namespace voxelpaint {

/// Which voxels the MAE term supervises.
enum class MaeRegion {
  kNonTumor,  // every voxel outside the unhealthy mask
  kHealthy,   // the healthy inpainting mask only
};

std::string_view to_string(MaeRegion region);
MaeRegion mae_region_from_string(std::string_view name);

struct TrainConfig {
  int epochs = 500;
  int folds = 5;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  LossWeights weights;
  int batch_size = 1;
  std::uint64_t seed = 0;
  Dims crop = kDefaultCrop;
  int base_channels = 32;
  double dropout_rate = 0.2;
  SsimParams ssim{7, 1.5, 2.0};
  MaeRegion mae_region = MaeRegion::kNonTumor;

  void validate() const;
  UNetConfig unet() const;
};

struct FoldPlan {
  std::vector<std::vector<std::string>> folds;
};

/// Sorts ids, shuffles them with the seeded generator and deals them
/// round-robin into k folds.
FoldPlan kfold_split(std::vector<std::string> ids, int k, std::uint64_t seed);

/// v -> 2 * (v / max) - 1. Records max on the result; rejects max <= 0.
Volume normalize_two_stage(const Volume& volume);

/// Inverse of normalize_two_stage: v -> ((v + 1) / 2) * max.
Volume denormalize_two_stage(const Volume& volume, double max_intensity);

/// A sample cropped, normalized and laid out as [1, 1, z, y, x] tensors.
struct PreparedSample {
  std::string case_id;
  int variant = 0;
  Tensor<float> voided;
  Tensor<float> mask;
  Tensor<float> target;
  std::vector<std::uint8_t> mae_region;
};

/// Both the input and the target are scaled by the voided image's maximum,
/// the only constant available at inference time.
PreparedSample prepare_sample(const TrainingSample& sample, const TrainConfig& config);

struct EpochRecord {
  int fold = 0;
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

std::string to_json_line(const EpochRecord& record);

struct FoldResult {
  int fold = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::filesystem::path checkpoint;  // empty when nothing was written
  std::vector<EpochRecord> curve;
  UNetModel<float> best_model;
};

struct FoldOptions {
  std::filesystem::path out_dir;  // checkpoint + log destination; empty for in-memory runs
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains on every sample whose case is outside plan.folds[fold_index] and
/// validates on the rest, keeping the checkpoint with the strictly lowest
/// validation loss. Throws kNumericFailure on a non-finite training loss.
FoldResult train_fold(const TrainConfig& config, const std::vector<PreparedSample>& samples,
                      const FoldPlan& plan, int fold_index, const FoldOptions& options = {});

/// Mean composite loss over samples in eval mode.
double evaluate_loss(const UNetModel<float>& model, const std::vector<const PreparedSample*>& samples,
                     const TrainConfig& config);

/// Maps a normalized voided crop and its mask ([1, 1, z, y, x]) to a prediction.
using Predictor = std::function<Tensor<float>(const Tensor<float>& voided, const Tensor<float>& mask)>;

/// Void (unless already voided), normalize, center-crop, predict, clamp to
/// [-1, 1], denormalize and stitch into `input`. Only voxels under the mask
/// inside the crop change.
Volume infer_with(const Predictor& predictor, const Volume& input, const MaskVolume& combined,
                  bool input_is_voided, const Dims& crop);

/// infer_with using the mean prediction of one or more models in eval mode.
Volume infer_case(const std::vector<const UNetModel<float>*>& models, const Volume& input,
                  const MaskVolume& combined, bool input_is_voided, const Dims& crop);

}  // namespace voxelpaint
