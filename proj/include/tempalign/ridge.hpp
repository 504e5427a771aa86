#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

namespace tempalign {

/// Strictly increasing positive regularisation strengths.
class AlphaGrid {
 public:
  AlphaGrid();  // 10^-4 ... 10^8, one value per decade
  explicit AlphaGrid(std::vector<double> values);
  static AlphaGrid log_spaced(double min_exponent, double max_exponent, int per_decade = 1);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct RidgeModel {
  Eigen::MatrixXd weights;      // features x targets
  Eigen::VectorXd intercepts;   // targets
  Eigen::VectorXd chosen_alpha; // targets, members of the grid
};

/// Ridge regression with per-target alpha chosen by closed-form leave-one-out
/// error. X and Y are column-centred (the intercept is not penalised) and one
/// thin SVD of the centred X serves every alpha and every Y.
class RidgeCV {
 public:
  RidgeCV(const Eigen::MatrixXd& x, AlphaGrid grid);

  const AlphaGrid& grid() const noexcept { return grid_; }
  Eigen::Index n_samples() const noexcept { return u_.rows(); }
  Eigen::Index n_features() const noexcept { return x_mean_.size(); }

  /// targets x alphas matrix of LOO mean squared errors. Alphas at which some
  /// sample has leverage numerically 1 are +inf (unusable) for every target.
  Eigen::MatrixXd loo_errors(const Eigen::MatrixXd& y) const;

  /// Per-target argmin of loo_errors; ties go to the smallest alpha.
  RidgeModel fit(const Eigen::MatrixXd& y) const;

  /// Weights at one alpha for every target.
  RidgeModel fit_fixed(const Eigen::MatrixXd& y, double alpha) const;

 private:
  void check_targets(const Eigen::MatrixXd& y) const;
  RidgeModel solve(const Eigen::MatrixXd& y, const Eigen::VectorXd& alphas) const;

  AlphaGrid grid_;
  Eigen::VectorXd x_mean_;
  Eigen::MatrixXd u_;          // n x k
  Eigen::VectorXd s_;          // k
  Eigen::MatrixXd v_;          // features x k
  Eigen::MatrixXd leverage_;   // n x alphas, diagonal of the hat matrix incl. 1/n
};

RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const AlphaGrid& grid = AlphaGrid());
Eigen::MatrixXd loo_errors(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const AlphaGrid& grid = AlphaGrid());
Eigen::MatrixXd predict(const RidgeModel& model, const Eigen::MatrixXd& x);

}  // namespace tempalign
