#pragma once

#include <filesystem>

#include <Eigen/Core>

namespace tempalign {

struct PcaModel {
  Eigen::VectorXd mean;                 // D_in
  Eigen::MatrixXd components;           // n_components x D_in, orthonormal rows
  Eigen::VectorXd explained_variance;   // non-increasing

  Eigen::Index n_components() const noexcept { return components.rows(); }
  Eigen::Index input_dim() const noexcept { return components.cols(); }
};

/// Top right-singular vectors of the centred matrix. Each component is signed
/// so its largest-magnitude entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& x, Eigen::Index n_components = 50);

/// (x - mean) * components^T
Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& x);
Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& z);

/// `mean.npy`, `components.npy`, `explained_variance.npy` and `pca.json` in `dir`.
void save_pca(const std::filesystem::path& dir, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& dir);

}  // namespace tempalign
