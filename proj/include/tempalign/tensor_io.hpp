#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tempalign {

/// Dense C-order float32 array, the unit of exchange for every on-disk tensor.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<float> values_);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t rank() const noexcept { return shape.size(); }

  static Tensor from_matrix(const Eigen::MatrixXd& m);
  static Tensor from_vector(const Eigen::VectorXd& v);
  Eigen::MatrixXd to_matrix() const;  // requires rank 2
  Eigen::VectorXd to_vector() const;  // requires rank 1

  bool operator==(const Tensor&) const = default;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

/// NPY v1.0 encoding with numpy's own header layout ('<f4', C order, padded
/// so the data starts on a 64-byte boundary).
std::string encode_npy(const Tensor& t);

/// Accepts '<f4' and '<f8' payloads; '<f8' is narrowed to float32.
Tensor decode_npy(std::string_view bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace tempalign
