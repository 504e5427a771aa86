#include "tempalign/pca.hpp"

#include <Eigen/SVD>
#include <json.hpp>

#include "tempalign/errors.hpp"
#include "tempalign/tensor_io.hpp"

namespace tempalign {

PcaModel fit_pca(const Eigen::MatrixXd& x, Eigen::Index n_components) {
  const auto w = x.rows(), d = x.cols();
  if (n_components < 1 || n_components > std::min<Eigen::Index>(w - 1, d))
    throw ParameterError("fit_pca: n_components " + std::to_string(n_components) + " exceeds min(W-1, D_in) = " +
                         std::to_string(std::min<Eigen::Index>(w - 1, d)));
  if (!x.allFinite()) throw DataError("fit_pca: non-finite input");

  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  const auto& v = svd.matrixV();
  const auto& s = svd.singularValues();

  m.components.resize(n_components, d);
  m.explained_variance.resize(n_components);
  for (Eigen::Index k = 0; k < n_components; ++k) {
    Eigen::VectorXd c = v.col(k);
    Eigen::Index arg = 0;
    c.cwiseAbs().maxCoeff(&arg);
    if (c[arg] < 0) c = -c;
    m.components.row(k) = c.transpose();
    m.explained_variance[k] = s[k] * s[k] / static_cast<double>(w - 1);
  }
  return m;
}

Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.input_dim())
    throw ShapeError("pca transform: expected " + std::to_string(model.input_dim()) + " columns, got " +
                     std::to_string(x.cols()));
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& z) {
  if (z.cols() != model.n_components()) throw ShapeError("pca inverse_transform: component count mismatch");
  return (z * model.components).rowwise() + model.mean.transpose();
}

void save_pca(const std::filesystem::path& dir, const PcaModel& model) {
  write_tensor(dir / "mean.npy", Tensor::from_vector(model.mean));
  write_tensor(dir / "components.npy", Tensor::from_matrix(model.components));
  write_tensor(dir / "explained_variance.npy", Tensor::from_vector(model.explained_variance));
  const nlohmann::json desc = {{"n_components", model.n_components()},
                               {"input_dim", model.input_dim()},
                               {"files",
                                {{"mean", "mean.npy"},
                                 {"components", "components.npy"},
                                 {"explained_variance", "explained_variance.npy"}}}};
  write_file(dir / "pca.json", desc.dump(1) + "\n");
}

PcaModel load_pca(const std::filesystem::path& dir) {
  PcaModel m;
  m.mean = read_tensor(dir / "mean.npy").to_vector();
  m.components = read_tensor(dir / "components.npy").to_matrix();
  m.explained_variance = read_tensor(dir / "explained_variance.npy").to_vector();
  if (m.mean.size() != m.components.cols() || m.explained_variance.size() != m.components.rows())
    throw ShapeError(dir.string() + ": inconsistent pca bundle");
  return m;
}

}  // namespace tempalign
