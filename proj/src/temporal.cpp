#include "tempalign/temporal.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace tempalign {

PValue pearson_p(double r, std::size_t n) {
  if (n < 3) throw ParameterError("pearson_p: need n >= 3");
  if (!(std::abs(r) <= 1.0)) throw ParameterError("pearson_p: |r| must be <= 1");
  if (std::abs(r) == 1.0) return {0.0, true};
  // With t^2 = r^2 df / (1 - r^2), df / (df + t^2) = 1 - r^2, so the two-sided
  // tail is I_{1-r^2}(df/2, 1/2).
  const double df = static_cast<double>(n - 2);
  const double x = (1.0 - r) * (1.0 + r);
  return {boost::math::ibeta(df / 2.0, 0.5, x), false};
}

CorrelationStat correlate(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("correlate: length mismatch");
  if (x.size() < 3) throw ParameterError("correlate: need at least 3 points");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*xmin == *xmax) throw DegenerateError("correlate: x is constant");
  if (*ymin == *ymax) throw DegenerateError("correlate: y is constant");

  const auto n = x.size();
  const double nd = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= nd;
  my /= nd;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }

  CorrelationStat s;
  s.n = n;
  s.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const auto p = pearson_p(s.r, n);
  s.p_value = p.value;
  s.perfect_fit = p.perfect_fit;
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (s.intercept + s.slope * x[i]);
    sse += e * e;
  }
  s.stderr_residual = std::sqrt(sse / (nd - 2.0));
  s.slope_stderr = s.stderr_residual / std::sqrt(sxx);
  s.intercept_stderr = s.stderr_residual * std::sqrt(1.0 / nd + mx * mx / sxx);
  s.x_mean = mx;
  s.x_ss = sxx;
  return s;
}

std::vector<BandPoint> confidence_band(const CorrelationStat& stat, std::span<const double> xs, double level) {
  if (stat.n < 3 || !(stat.x_ss > 0.0)) throw ParameterError("confidence_band: statistic has no regression line");
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("confidence_band: level must lie in (0, 1)");
  const boost::math::students_t dist(static_cast<double>(stat.n - 2));
  const double tcrit = boost::math::quantile(dist, 0.5 + level / 2.0);
  std::vector<BandPoint> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const double fit = stat.intercept + stat.slope * x;
    const double se =
        stat.stderr_residual * std::sqrt(1.0 / static_cast<double>(stat.n) + (x - stat.x_mean) * (x - stat.x_mean) / stat.x_ss);
    out.push_back({x, fit, fit - tcrit * se, fit + tcrit * se});
  }
  return out;
}

TmaxMode parse_tmax_mode(std::string_view s) {
  if (s == "union") return TmaxMode::Union;
  if (s == "contiguous") return TmaxMode::Contiguous;
  throw ParameterError("unknown T_max mode '" + std::string(s) + "'");
}

double t_max(std::span<const double> times, std::span<const double> scores, const TmaxOptions& opts) {
  if (times.size() != scores.size()) throw ShapeError("t_max: times and scores differ in length");
  if (!(opts.threshold > 0.0 && opts.threshold <= 1.0)) throw ParameterError("t_max: threshold must lie in (0, 1]");

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!opts.window || (times[i] >= opts.window->first && times[i] <= opts.window->second)) idx.push_back(i);
  if (idx.empty()) throw ParameterError("t_max: window contains no samples");

  std::size_t peak = 0;
  for (std::size_t j = 1; j < idx.size(); ++j)
    if (scores[idx[j]] > scores[idx[peak]]) peak = j;
  const double max = scores[idx[peak]];
  if (!(max > 0.0)) throw NonPositivePeakError("t_max: peak score " + std::to_string(max) + " is not positive");

  auto above = [&](std::size_t j) { return scores[idx[j]] / max >= opts.threshold; };
  std::size_t lo = 0, hi = idx.size();  // candidate range [lo, hi)
  if (opts.mode == TmaxMode::Contiguous) {
    lo = peak;
    while (lo > 0 && above(lo - 1)) --lo;
    hi = peak + 1;
    while (hi < idx.size() && above(hi)) ++hi;
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    if (above(j)) {
      acc += times[idx[j]];
      ++count;
    }
  }
  if (count == 0) throw InvariantError("t_max: empty supra-threshold set despite a positive peak");
  return acc / static_cast<double>(count);
}

double t_max(const AlignmentCurve& curve, const TmaxOptions& opts) { return t_max(curve.times, curve.scores, opts); }

namespace {

std::pair<std::vector<double>, std::vector<double>> unzip(const std::map<double, double>& m) {
  std::vector<double> k, v;
  for (const auto& [a, b] : m) {
    k.push_back(a);
    v.push_back(b);
  }
  return {k, v};
}

}  // namespace

TemporalResult temporal_score(const DepthMap& tmaxes) {
  if (tmaxes.size() < 3) throw ParameterError("temporal_score: need at least 3 layers");
  const auto [depths, tm] = unzip(tmaxes);
  if (std::all_of(tm.begin(), tm.end(), [&](double v) { return v == tm.front(); }))
    throw DegenerateError("temporal_score: every layer peaks at the same time");
  return {tmaxes, correlate(depths, tm)};
}

TemporalResult temporal_score(const std::vector<AlignmentCurve>& curves, const TmaxOptions& opts) {
  DepthMap m;
  for (const auto& c : curves) m[c.layer_depth] = t_max(c, opts);
  if (m.size() != curves.size()) throw ValidationError("temporal_score: duplicate layer depths");
  return temporal_score(m);
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::array<std::vector<std::size_t>, 4> quartile_split(const WordManifest& manifest,
                                                       const std::vector<std::size_t>& selection) {
  std::vector<double> p;
  for (auto i : selection) {
    if (i >= manifest.size()) throw ShapeError("quartile_split: word index out of range");
    const auto& e = manifest.entries[i];
    if (!e.predictability) throw DataError("quartile_split: word " + std::to_string(i) + " has no predictability");
    p.push_back(*e.predictability);
  }
  if (p.size() < 4) throw DegenerateError("quartile_split: need at least 4 words");
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw DegenerateError("quartile_split: all predictabilities are equal");
  const std::array<double, 3> bounds = {percentile(sorted, 0.25), percentile(sorted, 0.5), percentile(sorted, 0.75)};

  std::array<std::vector<std::size_t>, 4> out;
  for (std::size_t j = 0; j < selection.size(); ++j) {
    std::size_t q = 3;
    for (std::size_t b = 0; b < 3; ++b) {
      if (p[j] <= bounds[b]) {
        q = b;
        break;
      }
    }
    out[q].push_back(selection[j]);
  }
  for (std::size_t q = 0; q < 4; ++q)
    if (out[q].empty()) throw DegenerateError("quartile_split: quartile " + std::to_string(q + 1) + " is empty (ties)");
  return out;
}

std::array<std::vector<std::size_t>, 4> quartile_split(const WordManifest& manifest) {
  std::vector<std::size_t> all(manifest.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return quartile_split(manifest, all);
}

CorrelationStat tmax_diff_correlation(const DepthMap& tmax_a, const DepthMap& tmax_b) {
  if (tmax_a.size() != tmax_b.size()) throw ShapeError("tmax_diff_correlation: depth sets differ");
  if (tmax_a.size() < 3) throw ParameterError("tmax_diff_correlation: need at least 3 layers");
  std::vector<double> depths, diffs;
  for (const auto& [d, ta] : tmax_a) {
    const auto it = tmax_b.find(d);
    if (it == tmax_b.end()) throw ShapeError("tmax_diff_correlation: depth sets differ");
    depths.push_back(d);
    diffs.push_back(ta - it->second);
  }
  if (std::all_of(diffs.begin(), diffs.end(), [&](double v) { return v == diffs.front(); }))
    throw NoDepthEffect("tmax_diff_correlation: T_max differences are identical at every depth");
  return correlate(depths, diffs);
}

CorrelationStat score_correlation(const std::vector<ScoreRecord>& records) {
  if (records.size() < 3) throw ParameterError("score_correlation: need at least 3 records");
  std::vector<double> x, y;
  for (const auto& r : records) {
    x.push_back(r.max_alignment);
    y.push_back(r.temporal_r);
  }
  return correlate(x, y);
}

CorrelationStat trend_vs_factor(const std::map<double, double>& scores, bool log_scale) {
  if (scores.size() < 3) throw ParameterError("trend_vs_factor: need at least 3 factor levels");
  std::vector<double> x, y;
  for (const auto& [f, s] : scores) {
    if (log_scale && !(f > 0.0)) throw ParameterError("trend_vs_factor: log scale needs positive factors");
    x.push_back(log_scale ? std::log10(f) : f);
    y.push_back(s);
  }
  return correlate(x, y);
}

}  // namespace tempalign
