#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(gen);
  return m;
}

struct DenseRidge {
  Eigen::MatrixXd weights;
  Eigen::VectorXd intercepts;
};

/// Centre, then solve (Xc'Xc + alpha I) W = Xc'Yc directly.
inline DenseRidge dense_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha) {
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const Eigen::RowVectorXd ym = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm;
  const Eigen::MatrixXd yc = y.rowwise() - ym;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += alpha;
  DenseRidge r;
  r.weights = a.fullPivLu().solve(xc.transpose() * yc);
  r.intercepts = (ym - xm * r.weights).transpose();
  return r;
}

/// Mean squared leave-one-out error per target from n explicit refits.
inline Eigen::VectorXd brute_loo(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd sse = Eigen::VectorXd::Zero(y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd xt(n - 1, x.cols()), yt(n - 1, y.cols());
    for (Eigen::Index k = 0, r = 0; k < n; ++k) {
      if (k == i) continue;
      xt.row(r) = x.row(k);
      yt.row(r) = y.row(k);
      ++r;
    }
    const auto fit = dense_ridge(xt, yt, alpha);
    const Eigen::RowVectorXd pred = x.row(i) * fit.weights + fit.intercepts.transpose();
    sse += (y.row(i) - pred).array().square().matrix().transpose();
  }
  return sse / static_cast<double>(n);
}

/// Eigenvalues of the sample covariance, descending.
inline Eigen::VectorXd covariance_eigenvalues(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = xc.transpose() * xc / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvalues().reverse();
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd zc = z.rowwise() - z.colwise().mean();
  return zc.transpose() * zc / static_cast<double>(z.rows() - 1);
}

/// Two-sided p of a Pearson r over n pairs by quadrature of the t tail. With
/// t = sqrt(df) tan(theta) the t density becomes proportional to
/// cos(theta)^(df-1) on [0, pi/2], and the tail starts at theta = asin(|r|);
/// normalising by the full integral avoids any special function.
inline double pearson_p_quadrature(double r, int n) {
  const double df = n - 2;
  auto f = [df](double th) { return std::pow(std::cos(th), df - 1); };
  using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double half_pi = std::numbers::pi / 2;
  return gk::integrate(f, std::asin(std::abs(r)), half_pi, 15, 1e-15) / gk::integrate(f, 0.0, half_pi, 15, 1e-15);
}

/// |sum_k h[k] exp(-2 pi i f k / fs)| in long double.
inline double dft_magnitude(const std::vector<double>& taps, double freq, double fs) {
  std::complex<long double> acc = 0;
  const long double w = -2.0L * std::numbers::pi_v<long double> * freq / fs;
  for (std::size_t k = 0; k < taps.size(); ++k)
    acc += static_cast<long double>(taps[k]) * std::polar(1.0L, w * static_cast<long double>(k));
  return static_cast<double>(std::abs(acc));
}

inline double db(double gain) { return 20 * std::log10(gain); }

inline double plain_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double relative_error(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

}  // namespace oracle
