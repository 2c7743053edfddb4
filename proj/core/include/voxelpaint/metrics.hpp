#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxelpaint/loss.hpp"
#include "voxelpaint/volume.hpp"

namespace voxelpaint {

struct CaseMetrics {
  std::string case_id;
  double ssim = 0.0;
  double psnr = 0.0;  // +inf when mse == 0, see psnr_infinite
  double mse = 0.0;
  double rmse = 0.0;
  bool psnr_infinite = false;
  std::size_t region_voxels = 0;
};

/// PSNR for a unit peak: -10 log10(mse); +inf at mse == 0.
double psnr_from_mse(double mse);

/// Largest ground-truth intensity over the union of the healthy and
/// unhealthy regions; the per-case normalization constant for scoring.
double region_max(const Volume& gt, const MaskVolume& healthy, const MaskVolume& unhealthy);

/// Scores pred against gt on the healthy region. Both are divided by
/// max_value; MSE uses the healthy voxels only, SSIM (L = 1) the healthy
/// bounding box grown to at least one window per axis.
CaseMetrics evaluate_case(std::string case_id, const Volume& pred, const Volume& gt,
                          const MaskVolume& healthy, double max_value,
                          const SsimParams& params = SsimParams{});

struct Statistic {
  double mean = 0.0;
  double std = 0.0;  // population (divisor n)
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
};

/// Mean, population std and linearly interpolated quartiles.
Statistic describe(std::vector<double> values);

/// Linear interpolation between order statistics at position q * (n - 1).
double quantile_sorted(const std::vector<double>& sorted, double q);

struct MetricSummary {
  std::optional<Statistic> stats;  // empty when no finite values
  std::size_t count = 0;
};

/// Table-1 style aggregate. Column order is MSE, PSNR, SSIM; RMSE is carried
/// for the test-set layout.
struct SummaryStats {
  std::size_t cases = 0;
  std::size_t psnr_infinite = 0;  // excluded from the PSNR statistics
  MetricSummary mse, psnr, ssim, rmse;
};

SummaryStats aggregate_stats(std::vector<CaseMetrics> cases);

/// Per-case CSV: case,ssim,psnr,mse,rmse,region_voxels (sorted by case id).
std::string metrics_csv(std::vector<CaseMetrics> cases);

std::string summary_json(const SummaryStats& summary);
SummaryStats summary_from_json(const std::string& text);
SummaryStats read_summary(const std::filesystem::path& path);

/// Five statistics (rows) by MSE, PSNR, SSIM (columns).
std::string format_report(const SummaryStats& summary, const std::string& title = "");

/// Shortest-width general formatting with 9 significant digits.
std::string format_number(double value);

}  // namespace voxelpaint
