#include "voxelpaint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "voxelpaint/error.hpp"

namespace voxelpaint {

double psnr_from_mse(double mse) {
  require(mse >= 0.0, ErrorCode::kInvalidArgument, "psnr: negative mse");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double region_max(const Volume& gt, const MaskVolume& healthy, const MaskVolume& unhealthy) {
  require(gt.dims == healthy.dims && gt.dims == unhealthy.dims, ErrorCode::kDimMismatch,
          "region_max: dims differ");
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < gt.voxels.size(); ++i) {
    if (healthy.bits[i] || unhealthy.bits[i]) {
      best = std::max(best, static_cast<double>(gt.voxels[i]));
      any = true;
    }
  }
  require(any, ErrorCode::kInvalidArgument, "region_max: healthy and unhealthy masks are both empty");
  return best;
}

CaseMetrics evaluate_case(std::string case_id, const Volume& pred, const Volume& gt,
                          const MaskVolume& healthy, double max_value, const SsimParams& params) {
  require(pred.dims == gt.dims && gt.dims == healthy.dims, ErrorCode::kDimMismatch,
          "evaluate_case: pred " + to_string(pred.dims) + ", gt " + to_string(gt.dims) +
              " and mask " + to_string(healthy.dims) + " must agree");
  require(max_value > 0.0 && std::isfinite(max_value), ErrorCode::kInvalidArgument,
          "evaluate_case: normalization max must be positive");
  const double inv = 1.0 / max_value;

  CaseMetrics out;
  out.case_id = std::move(case_id);
  double acc = 0.0;
  const Dims& d = gt.dims;
  std::size_t lo[3] = {d.x, d.y, d.z}, hi[3] = {0, 0, 0};
  for (std::size_t k = 0; k < d.z; ++k) {
    for (std::size_t j = 0; j < d.y; ++j) {
      for (std::size_t i = 0; i < d.x; ++i) {
        const std::size_t at = d.index(i, j, k);
        if (!healthy.bits[at]) continue;
        const double diff = static_cast<double>(pred.voxels[at]) * inv -
                            static_cast<double>(gt.voxels[at]) * inv;
        acc += diff * diff;
        ++out.region_voxels;
        const std::size_t c[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a]);
        }
      }
    }
  }
  require(out.region_voxels > 0, ErrorCode::kInvalidArgument, "evaluate_case: empty healthy mask");
  out.mse = acc / static_cast<double>(out.region_voxels);
  out.rmse = std::sqrt(out.mse);
  out.psnr = psnr_from_mse(out.mse);
  out.psnr_infinite = std::isinf(out.psnr);

  // SSIM box: healthy bounding box, grown symmetrically to at least one window.
  const std::size_t extent[3] = {d.x, d.y, d.z};
  const auto win = static_cast<std::size_t>(params.window);
  Dims box_start, box_size;
  std::size_t* starts[3] = {&box_start.x, &box_start.y, &box_start.z};
  std::size_t* sizes[3] = {&box_size.x, &box_size.y, &box_size.z};
  for (int a = 0; a < 3; ++a) {
    require(extent[a] >= win, ErrorCode::kShapeMismatch,
            "evaluate_case: volume " + to_string(d) + " smaller than the SSIM window");
    std::size_t start = lo[a];
    std::size_t size = hi[a] - lo[a] + 1;
    if (size < win) {
      const std::size_t grow = win - size;
      start = start >= grow / 2 ? start - grow / 2 : 0;
      size = win;
      if (start + size > extent[a]) start = extent[a] - size;
    }
    *starts[a] = start;
    *sizes[a] = size;
  }
  std::vector<double> pv(box_size.count()), gv(box_size.count());
  for (std::size_t k = 0; k < box_size.z; ++k) {
    for (std::size_t j = 0; j < box_size.y; ++j) {
      for (std::size_t i = 0; i < box_size.x; ++i) {
        const std::size_t src = d.index(i + box_start.x, j + box_start.y, k + box_start.z);
        const std::size_t dst = box_size.index(i, j, k);
        pv[dst] = static_cast<double>(pred.voxels[src]) * inv;
        gv[dst] = static_cast<double>(gt.voxels[src]) * inv;
      }
    }
  }
  const Shape shape{1, 1, box_size.z, box_size.y, box_size.x};
  NoGradGuard no_grad;
  SsimParams unit = params;
  unit.dynamic_range = 1.0;
  out.ssim = ssim3d(Tensor<double>(shape, std::move(pv)), Tensor<double>(shape, std::move(gv)), unit)
                 .item();
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorCode::kInvalidArgument, "quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + (sorted[above] - sorted[below]) * frac;
}

Statistic describe(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "describe: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  Statistic s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  s.p25 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.p75 = quantile_sorted(values, 0.75);
  return s;
}

namespace {

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary m;
  m.count = values.size();
  if (!values.empty()) m.stats = describe(values);
  return m;
}

}  // namespace

SummaryStats aggregate_stats(std::vector<CaseMetrics> cases) {
  require(!cases.empty(), ErrorCode::kInvalidArgument, "aggregate_stats: no cases");
  std::sort(cases.begin(), cases.end(),
            [](const CaseMetrics& a, const CaseMetrics& b) { return a.case_id < b.case_id; });
  std::vector<double> mse, psnr, ssim, rmse;
  SummaryStats out;
  out.cases = cases.size();
  for (const auto& c : cases) {
    mse.push_back(c.mse);
    ssim.push_back(c.ssim);
    rmse.push_back(c.rmse);
    if (c.psnr_infinite) {
      ++out.psnr_infinite;
    } else {
      psnr.push_back(c.psnr);
    }
  }
  out.mse = summarize(mse);
  out.psnr = summarize(psnr);
  out.ssim = summarize(ssim);
  out.rmse = summarize(rmse);
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

std::string metrics_csv(std::vector<CaseMetrics> cases) {
  std::sort(cases.begin(), cases.end(),
            [](const CaseMetrics& a, const CaseMetrics& b) { return a.case_id < b.case_id; });
  std::ostringstream out;
  out << "case,ssim,psnr,mse,rmse,region_voxels\n";
  for (const auto& c : cases) {
    out << c.case_id << ',' << format_number(c.ssim) << ',' << format_number(c.psnr) << ','
        << format_number(c.mse) << ',' << format_number(c.rmse) << ',' << c.region_voxels << '\n';
  }
  return out.str();
}

namespace {

const char* const kMetricOrder[] = {"MSE", "PSNR", "SSIM", "RMSE"};

nlohmann::ordered_json metric_json(const MetricSummary& m) {
  nlohmann::ordered_json j;
  j["count"] = m.count;
  if (m.stats) {
    j["mean"] = m.stats->mean;
    j["std"] = m.stats->std;
    j["p25"] = m.stats->p25;
    j["median"] = m.stats->median;
    j["p75"] = m.stats->p75;
  } else {
    for (const char* key : {"mean", "std", "p25", "median", "p75"}) j[key] = nullptr;
  }
  return j;
}

MetricSummary metric_from_json(const nlohmann::json& j) {
  MetricSummary m;
  m.count = j.value("count", std::size_t{0});
  if (!j.at("mean").is_null()) {
    Statistic s;
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.p25 = j.at("p25").get<double>();
    s.median = j.at("median").get<double>();
    s.p75 = j.at("p75").get<double>();
    m.stats = s;
  }
  return m;
}

}  // namespace

std::string summary_json(const SummaryStats& summary) {
  nlohmann::ordered_json j;
  j["cases"] = summary.cases;
  j["psnr_infinite"] = summary.psnr_infinite;
  const MetricSummary* metrics[] = {&summary.mse, &summary.psnr, &summary.ssim, &summary.rmse};
  for (int i = 0; i < 4; ++i) j["metrics"][kMetricOrder[i]] = metric_json(*metrics[i]);
  return j.dump(2) + "\n";
}

SummaryStats summary_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SummaryStats s;
    s.cases = j.value("cases", std::size_t{0});
    s.psnr_infinite = j.value("psnr_infinite", std::size_t{0});
    const auto& m = j.at("metrics");
    s.mse = metric_from_json(m.at("MSE"));
    s.psnr = metric_from_json(m.at("PSNR"));
    s.ssim = metric_from_json(m.at("SSIM"));
    if (m.contains("RMSE")) s.rmse = metric_from_json(m.at("RMSE"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("summary: ") + e.what());
  }
}

SummaryStats read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return summary_from_json(buffer.str());
}

std::string format_report(const SummaryStats& summary, const std::string& title) {
  struct Row {
    const char* label;
    double Statistic::*field;
  };
  const Row rows[] = {{"Mean", &Statistic::mean},
                      {"Standard deviation", &Statistic::std},
                      {"25 quantile", &Statistic::p25},
                      {"Median", &Statistic::median},
                      {"75 quantile", &Statistic::p75}};
  const MetricSummary* columns[] = {&summary.mse, &summary.psnr, &summary.ssim};

  auto cell = [](const MetricSummary& m, double Statistic::*field) {
    return m.stats ? format_number((*m.stats).*field) : std::string("-");
  };
  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };

  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  out << pad("", 20) << pad("MSE", 14) << pad("PSNR", 14) << "SSIM" << '\n';
  for (const auto& row : rows) {
    out << pad(row.label, 20);
    for (int c = 0; c < 3; ++c) {
      const std::string text = cell(*columns[c], row.field);
      out << (c < 2 ? pad(text, 14) : text);
    }
    out << '\n';
  }
  if (summary.psnr_infinite > 0) {
    out << "(" << summary.psnr_infinite << " case(s) with zero error excluded from PSNR)\n";
  }
  return out.str();
}

}  // namespace voxelpaint
