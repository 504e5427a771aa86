#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/pca.hpp"
#include "tmpdir.hpp"

using namespace tempalign;

TEST_CASE("explained variance matches the covariance eigendecomposition") {
  std::mt19937_64 gen(1);
  Eigen::MatrixXd x = oracle::random_matrix(gen, 200, 10) * oracle::random_matrix(gen, 10, 10);
  const auto model = fit_pca(x, 10);
  const auto eig = oracle::covariance_eigenvalues(x);
  for (Eigen::Index k = 0; k < 10; ++k) CHECK(std::abs(model.explained_variance(k) - eig(k)) < 1e-8);
}

TEST_CASE("rank-2 data has a vanishing third component") {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 50, 2) * oracle::random_matrix(gen, 2, 6);
  const auto model = fit_pca(x, 3);
  CHECK(model.explained_variance(2) < 1e-10);
}

TEST_CASE("full-rank round trip reconstructs the data") {
  std::mt19937_64 gen(3);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 30, 5);
  const auto model = fit_pca(x, 5);
  CHECK((inverse_transform(model, transform(model, x)) - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("components: orthonormal, signed, ordered") {
  std::mt19937_64 gen(4);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 80, 7);
  const auto model = fit_pca(x, 4);
  const Eigen::MatrixXd gram = model.components * model.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::Index arg;
    model.components.row(k).cwiseAbs().maxCoeff(&arg);
    CHECK(model.components(k, arg) > 0);
    if (k > 0) CHECK(model.explained_variance(k) <= model.explained_variance(k - 1));
  }
}

TEST_CASE("transformed training columns are uncorrelated with the stated variances") {
  std::mt19937_64 gen(5);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 120, 8) * oracle::random_matrix(gen, 8, 8);
  const auto model = fit_pca(x, 6);
  const auto cov = oracle::sample_covariance(transform(model, x));
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      if (i == j)
        CHECK(std::abs(cov(i, i) - model.explained_variance(i)) < 1e-8);
      else
        CHECK(std::abs(cov(i, j)) < 1e-8);
    }
}

TEST_CASE("transform of the mean row is zero") {
  std::mt19937_64 gen(6);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 20, 4);
  const auto model = fit_pca(x, 2);
  CHECK(transform(model, model.mean.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("row permutation leaves the model unchanged") {
  std::mt19937_64 gen(7);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 40, 5);
  Eigen::VectorXi perm(40);
  for (int i = 0; i < 40; ++i) perm(i) = (i * 17) % 40;
  const Eigen::MatrixXd xp = Eigen::PermutationMatrix<Eigen::Dynamic>(perm) * x;
  const auto a = fit_pca(x, 3), b = fit_pca(xp, 3);
  CHECK((a.components - b.components).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((a.explained_variance - b.explained_variance).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pca errors") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 10, 4);
  CHECK_THROWS_AS(fit_pca(x, 5), ParameterError);
  CHECK_THROWS_AS(fit_pca(x.topRows(4), 4), ParameterError);  // needs W - 1 >= n
  CHECK_THROWS_AS(transform(fit_pca(x, 2), Eigen::MatrixXd::Zero(3, 5)), ShapeError);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(fit_pca(bad, 2), DataError);
}

TEST_CASE("pca bundle round trip") {
  TempDir dir("pca");
  std::mt19937_64 gen(9);
  const Eigen::MatrixXd x = oracle::random_matrix(gen, 30, 6);
  const auto model = fit_pca(x, 3);
  save_pca(dir.path(), model);
  CHECK(std::filesystem::exists(dir / "pca.json"));
  const auto back = load_pca(dir.path());
  CHECK(back.n_components() == 3);
  // Stored as float32.
  CHECK((back.components - model.components).cwiseAbs().maxCoeff() < 1e-6);
}
