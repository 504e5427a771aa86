#include "tempalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tempalign/errors.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/pca.hpp"
#include "tempalign/rng.hpp"

namespace tempalign {

FoldMode parse_fold_mode(std::string_view s) {
  if (s == "contiguous") return FoldMode::Contiguous;
  if (s == "shuffled") return FoldMode::Shuffled;
  throw ParameterError("unknown fold mode '" + std::string(s) + "'");
}

DimWeighting parse_dim_weighting(std::string_view s) {
  if (s == "uniform") return DimWeighting::Uniform;
  if (s == "variance") return DimWeighting::Variance;
  throw ParameterError("unknown dimension weighting '" + std::string(s) + "'");
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

FoldPlan make_folds(std::size_t n_words, int n_folds, FoldMode mode, std::uint64_t seed) {
  if (n_folds < 2) throw ParameterError("make_folds: need at least 2 folds");
  if (n_words < 2 * static_cast<std::size_t>(n_folds))
    throw ParameterError("make_folds: " + std::to_string(n_words) + " words is fewer than 2 x " +
                         std::to_string(n_folds) + " folds");
  std::vector<std::size_t> order(n_words);
  std::iota(order.begin(), order.end(), 0);
  if (mode == FoldMode::Shuffled) {
    CounterRng rng(seed, 0xF01D);
    for (std::size_t i = n_words - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.assignments.assign(n_words, 0);
  const auto n = static_cast<std::size_t>(n_folds);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t p = k * n_words / n; p < (k + 1) * n_words / n; ++p) plan.assignments[order[p]] = static_cast<int>(k);
  return plan;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson: length mismatch");
  if (a.size() < 3) throw ParameterError("pearson: need at least 3 samples");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (*amin == *amax || *bmin == *bmax) throw DegenerateError("pearson: constant input");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DegenerateError("pearson: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::MatrixXd take_timepoint(const EpochTensor& e, std::size_t t, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(rows.size(), e.n_sensors());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t s = 0; s < e.n_sensors(); ++s) out(static_cast<Eigen::Index>(i), s) = e(rows[i], s, t);
  return out;
}

struct FoldScore {
  double score = 0.0;
  std::size_t skipped = 0;
  bool all_degenerate = false;
};

FoldScore score_fold(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred, DimWeighting weighting) {
  FoldScore out;
  std::vector<std::pair<double, double>> terms;  // (r, weight)
  for (Eigen::Index d = 0; d < truth.cols(); ++d) {
    const Eigen::VectorXd a = truth.col(d);
    const Eigen::VectorXd b = pred.col(d);
    double r = 0.0;
    try {
      r = pearson({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())});
    } catch (const DegenerateError&) {
      ++out.skipped;
      continue;
    }
    double w = 1.0;
    if (weighting == DimWeighting::Variance) w = (a.array() - a.mean()).square().mean();
    terms.emplace_back(r, w);
  }
  // Summing in sorted order makes the mean independent of the column order.
  std::sort(terms.begin(), terms.end());
  double num = 0.0, den = 0.0;
  for (const auto& [r, w] : terms) {
    num += w * r;
    den += w;
  }
  if (den <= 0.0) {
    out.all_degenerate = true;
    return out;
  }
  out.score = num / den;
  return out;
}

}  // namespace

std::vector<AlignmentCurve> alignment_curves(const EpochTensor& epochs, const ActivationSet& activations,
                                             const FoldPlan& plan, const AlphaGrid& grid, const AlignOptions& opts) {
  const auto W = epochs.n_words();
  if (activations.n_words() != W || plan.n_words() != W)
    throw ShapeError("alignment: word counts differ (epochs " + std::to_string(W) + ", activations " +
                     std::to_string(activations.n_words()) + ", folds " + std::to_string(plan.n_words()) + ")");
  const auto T = epochs.n_times();
  const auto K = static_cast<std::size_t>(plan.n_folds);
  const auto L = activations.n_layers();
  if (L == 0) throw ParameterError("alignment: no layers");

  std::vector<std::vector<std::size_t>> train(K), test(K);
  for (std::size_t k = 0; k < K; ++k) {
    train[k] = plan.train_indices(static_cast<int>(k));
    test[k] = plan.test_indices(static_cast<int>(k));
    if (test[k].size() < 3) throw ParameterError("alignment: fold " + std::to_string(k) + " has fewer than 3 words");
  }

  // Targets per (fold, layer), with optional per-fold PCA.
  std::vector<Eigen::MatrixXd> y_train(K * L), y_test(K * L);
  parallel_for(K * L, opts.threads, [&](std::size_t job) {
    const auto k = job / L, l = job % L;
    const auto& y = activations.layers()[l].values;
    y_train[job] = take_rows(y, train[k]);
    y_test[job] = take_rows(y, test[k]);
    if (opts.pca_per_fold) {
      const auto model = fit_pca(y_train[job], *opts.pca_per_fold);
      y_train[job] = transform(model, y_train[job]);
      y_test[job] = transform(model, y_test[job]);
    }
  });

  std::vector<AlignmentCurve> curves(L);
  for (std::size_t l = 0; l < L; ++l) {
    curves[l].layer_depth = activations.layers()[l].depth;
    curves[l].times = epochs.times();
    curves[l].scores.assign(T, 0.0);
    curves[l].fold_scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    curves[l].skipped_dims.assign(T, 0);
  }
  std::vector<std::size_t> skipped(T * K * L, 0);

  parallel_for(T * K, opts.threads, [&](std::size_t job) {
    const auto t = job / K, k = job % K;
    const RidgeCV ridge(take_timepoint(epochs, t, train[k]), grid);
    const auto x_test = take_timepoint(epochs, t, test[k]);
    for (std::size_t l = 0; l < L; ++l) {
      const auto model = ridge.fit(y_train[k * L + l]);
      const auto fs = score_fold(y_test[k * L + l], predict(model, x_test), opts.weighting);
      if (fs.all_degenerate)
        throw DegenerateError("alignment: every target dimension is degenerate at t = " +
                              std::to_string(epochs.times()[t]) + " s (layer depth " +
                              std::to_string(curves[l].layer_depth) + ", fold " + std::to_string(k) + ")");
      curves[l].fold_scores(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = fs.score;
      skipped[(t * K + k) * L + l] = fs.skipped;
    }
  });

  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        acc += curves[l].fold_scores(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
        curves[l].skipped_dims[t] += skipped[(t * K + k) * L + l];
      }
      curves[l].scores[t] = acc / static_cast<double>(K);
    }
  }
  return curves;
}

AlignmentCurve alignment_curve(const EpochTensor& epochs, const Eigen::MatrixXd& layer, double depth,
                               const FoldPlan& plan, const AlphaGrid& grid, const AlignOptions& opts) {
  return alignment_curves(epochs, ActivationSet({{depth, layer}}), plan, grid, opts).front();
}

}  // namespace tempalign
