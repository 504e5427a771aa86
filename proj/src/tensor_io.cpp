#include "tempalign/tensor_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tempalign/errors.hpp"

namespace tempalign {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written as little-endian");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kAlign = 64;

std::string shape_repr(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

// Minimal reader for the python-literal dict numpy writes in the header.
struct HeaderFields {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

void skip_ws(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\n' || s[i] == '\t')) ++i;
}

void expect(std::string_view s, std::size_t& i, char c) {
  skip_ws(s, i);
  if (i >= s.size() || s[i] != c)
    throw FormatError(std::string("npy header: expected '") + c + "'");
  ++i;
}

std::string parse_quoted(std::string_view s, std::size_t& i) {
  skip_ws(s, i);
  if (i >= s.size() || (s[i] != '\'' && s[i] != '"'))
    throw FormatError("npy header: expected quoted string");
  const char q = s[i++];
  const auto end = s.find(q, i);
  if (end == std::string_view::npos) throw FormatError("npy header: unterminated string");
  std::string out(s.substr(i, end - i));
  i = end + 1;
  return out;
}

HeaderFields parse_header(std::string_view h) {
  HeaderFields f;
  bool have_descr = false, have_order = false, have_shape = false;
  std::size_t i = 0;
  expect(h, i, '{');
  while (true) {
    skip_ws(h, i);
    if (i < h.size() && h[i] == '}') break;
    const std::string key = parse_quoted(h, i);
    expect(h, i, ':');
    skip_ws(h, i);
    if (key == "descr") {
      f.descr = parse_quoted(h, i);
      have_descr = true;
    } else if (key == "fortran_order") {
      if (h.substr(i, 4) == "True") {
        f.fortran_order = true;
        i += 4;
      } else if (h.substr(i, 5) == "False") {
        i += 5;
      } else {
        throw FormatError("npy header: bad fortran_order");
      }
      have_order = true;
    } else if (key == "shape") {
      expect(h, i, '(');
      while (true) {
        skip_ws(h, i);
        if (i < h.size() && h[i] == ')') {
          ++i;
          break;
        }
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(h.data() + i, h.data() + h.size(), v);
        if (ec != std::errc{}) throw FormatError("npy header: bad shape entry");
        i = static_cast<std::size_t>(p - h.data());
        f.shape.push_back(v);
        skip_ws(h, i);
        if (i < h.size() && h[i] == ',') ++i;
      }
      have_shape = true;
    } else {
      throw FormatError("npy header: unknown key '" + key + "'");
    }
    skip_ws(h, i);
    if (i < h.size() && h[i] == ',') ++i;
  }
  if (!have_descr || !have_order || !have_shape)
    throw FormatError("npy header: missing descr, fortran_order or shape");
  return f;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<float> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (element_count(shape) != values.size())
    throw ShapeError("tensor: shape does not match value count");
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  t.values.resize(m.size());
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.values[k++] = static_cast<float>(m(r, c));
  return t;
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.shape = {static_cast<std::size_t>(v.size())};
  t.values.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) t.values[i] = static_cast<float>(v[i]);
  return t;
}

Eigen::MatrixXd Tensor::to_matrix() const {
  if (rank() != 2) throw ShapeError("tensor: expected rank 2, got rank " + std::to_string(rank()));
  Eigen::MatrixXd m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values[k++];
  return m;
}

Eigen::VectorXd Tensor::to_vector() const {
  if (rank() != 1) throw ShapeError("tensor: expected rank 1, got rank " + std::to_string(rank()));
  Eigen::VectorXd v(shape[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = values[i];
  return v;
}

std::string encode_npy(const Tensor& t) {
  if (element_count(t.shape) != t.values.size())
    throw ShapeError("tensor: shape does not match value count");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_repr(t.shape) + ", }";
  // magic(6) + version(2) + length(2) + dict + padding + '\n'
  const std::size_t unpadded = kMagic.size() + 4 + dict.size() + 1;
  dict.append((kAlign - unpadded % kAlign) % kAlign, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw FormatError("npy header too long for version 1.0");

  std::string out;
  out.reserve(kMagic.size() + 4 + dict.size() + t.values.size() * 4);
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(len & 0xFF));
  out.push_back(static_cast<char>(len >> 8));
  out.append(dict);
  const auto offset = out.size();
  out.resize(offset + t.values.size() * sizeof(float));
  if (!t.values.empty()) std::memcpy(out.data() + offset, t.values.data(), t.values.size() * sizeof(float));
  return out;
}

Tensor decode_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError("npy: bad magic");
  const auto major = static_cast<unsigned char>(bytes[6]);
  if (major != 1) throw FormatError("npy: unsupported version " + std::to_string(major));
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + hlen) throw FormatError("npy: truncated header");
  const auto fields = parse_header(bytes.substr(10, hlen));
  if (fields.fortran_order) throw FormatError("npy: fortran_order arrays are not supported");

  std::size_t width = 0;
  if (fields.descr == "<f4") width = 4;
  else if (fields.descr == "<f8") width = 8;
  else throw FormatError("npy: unsupported dtype '" + fields.descr + "'");

  const auto n = element_count(fields.shape);
  const auto payload = bytes.substr(10 + hlen);
  if (payload.size() != n * width)
    throw CorruptError("npy: header declares " + std::to_string(n) + " elements but payload holds " +
                       std::to_string(payload.size()) + " bytes");

  Tensor t;
  t.shape = fields.shape;
  t.values.resize(n);
  if (width == 4) {
    if (n > 0) std::memcpy(t.values.data(), payload.data(), n * 4);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      std::memcpy(&d, payload.data() + i * 8, 8);
      t.values[i] = static_cast<float>(d);
    }
  }
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode_npy(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const CorruptError& e) {
    throw CorruptError(path.string() + ": " + e.what());
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_npy(t)); }

}  // namespace tempalign
