#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshloc::num {

/// Dense row-major tensor of arbitrary rank backed by a flat Eigen array.
/// Rank-1/2 views map onto Eigen vectors/matrices without copying.
template <typename Scalar>
class TensorT {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_ = Array::Zero(count(shape_));
  }

  TensorT(std::vector<int> shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string(shape_));
  }

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<int> shape, Scalar v) {
    TensorT t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static TensorT scalar(Scalar v) { return full({1}, v); }

  static TensorT from_values(std::vector<int> shape, std::initializer_list<Scalar> values) {
    TensorT t(std::move(shape));
    if (static_cast<Eigen::Index>(values.size()) != t.size())
      throw std::invalid_argument("Tensor: initializer length mismatch");
    Eigen::Index i = 0;
    for (Scalar v : values) t.data_[i++] = v;
    return t;
  }

  template <typename Derived>
  static TensorT from_matrix(const Eigen::MatrixBase<Derived>& m) {
    TensorT t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    t.matrix() = m.template cast<Scalar>();
    return t;
  }

  template <typename Derived>
  static TensorT from_vector(const Eigen::MatrixBase<Derived>& v) {
    TensorT t({static_cast<int>(v.size())});
    t.vector() = v.template cast<Scalar>();
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar operator[](Eigen::Index i) const { return data_[i]; }
  Scalar& operator[](Eigen::Index i) { return data_[i]; }

  /// Rank-2 element access.
  Scalar at(int r, int c) const { return data_[static_cast<Eigen::Index>(r) * dim(1) + c]; }
  Scalar& at(int r, int c) { return data_[static_cast<Eigen::Index>(r) * dim(1) + c]; }

  /// Rank-2 Eigen map (throws unless rank()==2).
  Eigen::Map<MatrixRM> matrix() {
    require_rank(2, "matrix view");
    return Eigen::Map<MatrixRM>(data_.data(), shape_[0], shape_[1]);
  }
  Eigen::Map<const MatrixRM> matrix() const {
    require_rank(2, "matrix view");
    return Eigen::Map<const MatrixRM>(data_.data(), shape_[0], shape_[1]);
  }

  /// Flat view with explicit dimensions (any rank).
  Eigen::Map<MatrixRM> matrix(Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != size()) throw std::invalid_argument("Tensor: matrix view size mismatch");
    return Eigen::Map<MatrixRM>(data_.data(), rows, cols);
  }
  Eigen::Map<const MatrixRM> matrix(Eigen::Index rows, Eigen::Index cols) const {
    if (rows * cols != size()) throw std::invalid_argument("Tensor: matrix view size mismatch");
    return Eigen::Map<const MatrixRM>(data_.data(), rows, cols);
  }

  Eigen::Map<Vector> vector() { return Eigen::Map<Vector>(data_.data(), data_.size()); }
  Eigen::Map<const Vector> vector() const {
    return Eigen::Map<const Vector>(data_.data(), data_.size());
  }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.allFinite(); }

  TensorT reshaped(std::vector<int> shape) const {
    if (count(shape) != size()) throw std::invalid_argument("Tensor: reshape size mismatch");
    return TensorT(std::move(shape), data_);
  }

  std::string shape_str() const { return shape_string(shape_); }

  static std::string shape_string(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

 private:
  static Eigen::Index count(const std::vector<int>& s) {
    Eigen::Index n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }
  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw std::invalid_argument(std::string("Tensor: ") + what + " requires rank " +
                                  std::to_string(r) + ", tensor is " + shape_str());
  }

  std::vector<int> shape_;
  Array data_;
};

using Tensor = TensorT<double>;

}  // namespace meshloc::num
