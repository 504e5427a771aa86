#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tempalign/data_model.hpp"
#include "tempalign/errors.hpp"

namespace tempalign {

/// Pearson correlation with its two-sided p-value and the least-squares line
/// of y on x (for confidence bands).
struct CorrelationStat {
  double r = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
  bool perfect_fit = false;  // |r| == 1: p_value is the exact lower bound 0
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_residual = 0.0;  // sqrt(SSE / (n - 2))
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double x_mean = 0.0;
  double x_ss = 0.0;  // sum of squared x deviations
};

struct PValue {
  double value = 1.0;
  bool perfect_fit = false;
};

/// Two-sided Student-t tail at t = r sqrt((n-2)/(1-r^2)) with n-2 df.
PValue pearson_p(double r, std::size_t n);

/// Throws ParameterError (n < 3, length mismatch) or DegenerateError (constant x or y).
CorrelationStat correlate(std::span<const double> x, std::span<const double> y);

struct BandPoint {
  double x, fit, lower, upper;
};
/// Pointwise confidence interval of the regression mean at each x.
std::vector<BandPoint> confidence_band(const CorrelationStat& stat, std::span<const double> xs, double level = 0.95);

enum class TmaxMode { Union, Contiguous };
TmaxMode parse_tmax_mode(std::string_view s);

struct TmaxOptions {
  double threshold = 0.95;
  std::optional<std::pair<double, double>> window;  // inclusive [lo, hi] seconds
  TmaxMode mode = TmaxMode::Union;
};

/// Mean time of the samples whose max-normalised score is >= threshold.
/// Contiguous mode restricts to the run of such samples around the first peak.
double t_max(const AlignmentCurve& curve, const TmaxOptions& opts = {});
double t_max(std::span<const double> times, std::span<const double> scores, const TmaxOptions& opts = {});

using DepthMap = std::map<double, double>;  // relative depth -> value

struct TemporalResult {
  DepthMap per_layer_tmax;
  CorrelationStat stat;
};

/// Pearson of (depth, T_max) over the layers.
TemporalResult temporal_score(const DepthMap& tmaxes);
TemporalResult temporal_score(const std::vector<AlignmentCurve>& curves, const TmaxOptions& opts = {});

/// Lowest to highest predictability. Boundaries are the 25/50/75 percentiles
/// (linear interpolation); a word equal to a boundary joins the lower quartile.
std::array<std::vector<std::size_t>, 4> quartile_split(const WordManifest& manifest,
                                                       const std::vector<std::size_t>& selection);
std::array<std::vector<std::size_t>, 4> quartile_split(const WordManifest& manifest);

/// Raised when the T_max differences do not vary with depth at all; callers
/// report it as "no depth-dependent difference" rather than a failure.
class NoDepthEffect : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

/// Pearson of (depth, tmax_a - tmax_b).
CorrelationStat tmax_diff_correlation(const DepthMap& tmax_a, const DepthMap& tmax_b);

struct ScoreRecord {
  std::string label;
  double temporal_r = 0.0;
  double max_alignment = 0.0;
};

/// Pearson of (max_alignment, temporal_r) across records.
CorrelationStat score_correlation(const std::vector<ScoreRecord>& records);

/// Pearson of (log10 factor or factor, score).
CorrelationStat trend_vs_factor(const std::map<double, double>& scores, bool log_scale);

}  // namespace tempalign
