#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffcn {

using Shape = std::vector<long>;

inline long numel(const Shape& s) {
  long n = 1;
  for (long e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <class S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatMap = Eigen::Map<MatrixRM<S>>;
template <class S>
using ConstMatMap = Eigen::Map<const MatrixRM<S>>;
template <class S>
using VecMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
template <class S>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

/// Dense row-major tensor. Rank-0 (empty shape) denotes a scalar.
/// The leading extent is the row dimension; remaining extents flatten into columns.
template <class S>
struct Tensor {
  Shape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), S(0)) {
    for (long e : shape)
      if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(shape));
  }
  Tensor(Shape s, std::vector<S> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<long>(data.size()) != numel(shape))
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor scalar(S v) {
    Tensor t{Shape{}};
    t.data[0] = v;
    return t;
  }

  static Tensor row(std::initializer_list<S> values) {
    Tensor t;
    t.shape = {1, static_cast<long>(values.size())};
    t.data.assign(values.begin(), values.end());
    return t;
  }

  static Tensor from(Shape s, std::initializer_list<S> values) {
    return Tensor(std::move(s), std::vector<S>(values.begin(), values.end()));
  }

  long size() const { return static_cast<long>(data.size()); }
  bool empty() const { return data.empty(); }
  long rank() const { return static_cast<long>(shape.size()); }
  long rows() const { return shape.empty() ? 1 : shape[0]; }
  long cols() const { return rows() > 0 ? size() / rows() : 0; }

  MatMap<S> mat() { return MatMap<S>(data.data(), rows(), cols()); }
  ConstMatMap<S> mat() const { return ConstMatMap<S>(data.data(), rows(), cols()); }

  MatMap<S> mat(long r, long c) {
    check_view(r, c);
    return MatMap<S>(data.data(), r, c);
  }
  ConstMatMap<S> mat(long r, long c) const {
    check_view(r, c);
    return ConstMatMap<S>(data.data(), r, c);
  }

  VecMap<S> vec() { return VecMap<S>(data.data(), size()); }
  ConstVecMap<S> vec() const { return ConstVecMap<S>(data.data(), size()); }

  S& operator()(long i, long j) { return data[static_cast<std::size_t>(i * cols() + j)]; }
  S operator()(long i, long j) const { return data[static_cast<std::size_t>(i * cols() + j)]; }
  S& operator[](long i) { return data[static_cast<std::size_t>(i)]; }
  S operator[](long i) const { return data[static_cast<std::size_t>(i)]; }

  S item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape));
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }

 private:
  void check_view(long r, long c) const {
    if (r * c != size())
      throw std::invalid_argument("cannot view tensor " + shape_str(shape) + " as " +
                                  std::to_string(r) + "x" + std::to_string(c));
  }
};

}  // namespace ffcn
