#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tempalign/data_model.hpp"
#include "tempalign/ridge.hpp"

namespace tempalign {

enum class FoldMode { Contiguous, Shuffled };
FoldMode parse_fold_mode(std::string_view s);

struct FoldPlan {
  int n_folds = 5;
  std::vector<int> assignments;  // word -> fold

  std::size_t n_words() const noexcept { return assignments.size(); }
  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;
};

/// Contiguous mode: fold k holds words [floor(kW/n), floor((k+1)W/n)).
/// Shuffled mode applies the same blocks to a seeded permutation.
FoldPlan make_folds(std::size_t n_words, int n_folds = 5, FoldMode mode = FoldMode::Contiguous,
                    std::uint64_t seed = 0);

/// Sample Pearson correlation. Throws DegenerateError on constant input.
double pearson(std::span<const double> a, std::span<const double> b);

enum class DimWeighting { Uniform, Variance };
DimWeighting parse_dim_weighting(std::string_view s);

struct AlignOptions {
  DimWeighting weighting = DimWeighting::Uniform;
  unsigned threads = 1;  // 0: TA_THREADS or all cores
  /// When set, PCA to this many components is refit on each training fold and
  /// the layer matrices are taken as raw activations.
  std::optional<Eigen::Index> pca_per_fold;
};

/// Time-resolved cross-validated score: at each timepoint and fold, ridge maps
/// the training words' sensors to the layer, the held-out predictions are
/// correlated with the truth per target dimension, and the dimension scores
/// are averaged (then folds are averaged).
AlignmentCurve alignment_curve(const EpochTensor& epochs, const Eigen::MatrixXd& layer, double depth,
                               const FoldPlan& plan, const AlphaGrid& grid, const AlignOptions& opts = {});

/// All layers at once; the ridge decomposition of each (timepoint, fold) is
/// shared across layers.
std::vector<AlignmentCurve> alignment_curves(const EpochTensor& epochs, const ActivationSet& activations,
                                             const FoldPlan& plan, const AlphaGrid& grid,
                                             const AlignOptions& opts = {});

}  // namespace tempalign
