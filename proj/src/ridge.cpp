#include "tempalign/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tempalign/errors.hpp"

namespace tempalign {

namespace {
constexpr double kLeverageTolerance = 1e-10;
}

AlphaGrid::AlphaGrid() : AlphaGrid(log_spaced(-4, 8, 1)) {}

AlphaGrid::AlphaGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ParameterError("alpha grid is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) throw ParameterError("alpha grid values must be positive");
    if (i > 0 && !(values_[i] > values_[i - 1])) throw ParameterError("alpha grid must be strictly increasing");
  }
}

AlphaGrid AlphaGrid::log_spaced(double min_exponent, double max_exponent, int per_decade) {
  if (per_decade < 1 || !(max_exponent >= min_exponent)) throw ParameterError("alpha grid: bad exponent range");
  const auto steps = static_cast<int>(std::llround((max_exponent - min_exponent) * per_decade));
  std::vector<double> v;
  for (int i = 0; i <= steps; ++i) v.push_back(std::pow(10.0, min_exponent + static_cast<double>(i) / per_decade));
  return AlphaGrid(std::move(v));
}

RidgeCV::RidgeCV(const Eigen::MatrixXd& x, AlphaGrid grid) : grid_(std::move(grid)) {
  const auto n = x.rows();
  if (n < 3) throw ParameterError("ridge: need at least 3 samples");
  if (x.cols() < 1) throw ParameterError("ridge: need at least one feature");
  if (!x.allFinite()) throw DataError("ridge: non-finite features");

  x_mean_ = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean_.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  s_ = svd.singularValues();
  v_ = svd.matrixV();

  const Eigen::MatrixXd u2 = u_.cwiseAbs2();
  const Eigen::VectorXd s2 = s_.cwiseAbs2();
  leverage_.resize(n, static_cast<Eigen::Index>(grid_.size()));
  for (std::size_t a = 0; a < grid_.size(); ++a) {
    const Eigen::VectorXd shrink = s2.array() / (s2.array() + grid_[a]);
    leverage_.col(a) = (u2 * shrink).array() + 1.0 / static_cast<double>(n);
  }
}

void RidgeCV::check_targets(const Eigen::MatrixXd& y) const {
  if (y.rows() != n_samples())
    throw ShapeError("ridge: targets have " + std::to_string(y.rows()) + " rows, features have " +
                     std::to_string(n_samples()));
  if (!y.allFinite()) throw DataError("ridge: non-finite targets");
}

Eigen::MatrixXd RidgeCV::loo_errors(const Eigen::MatrixXd& y) const {
  check_targets(y);
  const auto n = n_samples();
  const auto n_targets = y.cols();
  const auto n_alphas = static_cast<Eigen::Index>(grid_.size());
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;
  const Eigen::MatrixXd uty = u_.transpose() * yc;
  const Eigen::ArrayXd s2 = s_.array().square();

  Eigen::MatrixXd errors(n_targets, n_alphas);
  // Fitted values for a block of alphas come from one product U * [f_a . U^T Y];
  // blocks keep the n x (alphas * targets) intermediate bounded.
  const Eigen::Index block =
      std::clamp<Eigen::Index>((Eigen::Index{1} << 22) / std::max<Eigen::Index>(1, n * n_targets), 1, n_alphas);
  for (Eigen::Index a0 = 0; a0 < n_alphas; a0 += block) {
    const auto width = std::min(block, n_alphas - a0);
    Eigen::MatrixXd coef(uty.rows(), width * n_targets);
    for (Eigen::Index j = 0; j < width; ++j) {
      const Eigen::VectorXd shrink = s2 / (s2 + grid_[static_cast<std::size_t>(a0 + j)]);
      coef.middleCols(j * n_targets, n_targets) = shrink.asDiagonal() * uty;
    }
    const Eigen::MatrixXd fitted = u_ * coef;
    for (Eigen::Index j = 0; j < width; ++j) {
      const auto col = a0 + j;
      const Eigen::ArrayXd slack = 1.0 - leverage_.col(col).array();
      if ((slack < kLeverageTolerance).any()) {
        errors.col(col).setConstant(std::numeric_limits<double>::infinity());
        continue;
      }
      const Eigen::ArrayXXd loo = (yc - fitted.middleCols(j * n_targets, n_targets)).array().colwise() / slack;
      errors.col(col) = loo.square().colwise().sum().transpose() / static_cast<double>(n);
    }
  }
  return errors;
}

RidgeModel RidgeCV::fit(const Eigen::MatrixXd& y) const {
  const auto errors = loo_errors(y);
  Eigen::VectorXd alphas(y.cols());
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    Eigen::Index best = -1;
    for (Eigen::Index a = 0; a < errors.cols(); ++a) {
      if (!std::isfinite(errors(d, a))) continue;
      if (best < 0 || errors(d, a) < errors(d, best)) best = a;
    }
    if (best < 0) throw DegenerateError("ridge: every alpha in the grid interpolates the training data");
    alphas[d] = grid_[static_cast<std::size_t>(best)];
  }
  return solve(y, alphas);
}

RidgeModel RidgeCV::fit_fixed(const Eigen::MatrixXd& y, double alpha) const {
  check_targets(y);
  if (!(alpha > 0.0)) throw ParameterError("ridge: alpha must be positive");
  return solve(y, Eigen::VectorXd::Constant(y.cols(), alpha));
}

RidgeModel RidgeCV::solve(const Eigen::MatrixXd& y, const Eigen::VectorXd& alphas) const {
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  RidgeModel m;
  m.weights.resize(n_features(), y.cols());
  // One matrix-vector product per target, so a column's weights do not depend
  // on where it sits in y.
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    const Eigen::VectorXd yc = y.col(d).array() - y_mean[d];
    const Eigen::VectorXd uty = u_.transpose() * yc;
    const Eigen::VectorXd gain = s_.array() / (s_.array().square() + alphas[d]);
    m.weights.col(d) = v_ * gain.cwiseProduct(uty);
  }
  m.intercepts = y_mean.transpose() - m.weights.transpose() * x_mean_;
  m.chosen_alpha = alphas;
  return m;
}

RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const AlphaGrid& grid) {
  return RidgeCV(x, grid).fit(y);
}

Eigen::MatrixXd loo_errors(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const AlphaGrid& grid) {
  return RidgeCV(x, grid).loo_errors(y);
}

Eigen::MatrixXd predict(const RidgeModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.rows())
    throw ShapeError("ridge predict: expected " + std::to_string(model.weights.rows()) + " features, got " +
                     std::to_string(x.cols()));
  return (x * model.weights).rowwise() + model.intercepts.transpose();
}

}  // namespace tempalign
