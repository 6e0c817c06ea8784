#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hirs {

/// Dense row-major matrix. Every vector and matrix in the model is one of these.
template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Tensor = MatrixR<double>;
using Index = Eigen::Index;

inline std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Tensor& a, const Tensor& b)
      : std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b)) {}
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// Row ranges of a ragged batch: segment n spans rows [offsets[n], offsets[n+1]).
struct Segments {
  std::vector<Index> offsets{0};

  Index count() const { return static_cast<Index>(offsets.size()) - 1; }
  Index begin(Index n) const { return offsets[n]; }
  Index size(Index n) const { return offsets[n + 1] - offsets[n]; }
  Index total() const { return offsets.back(); }

  void push(Index len) { offsets.push_back(offsets.back() + len); }

  static Segments uniform(Index count, Index len) {
    Segments s;
    for (Index i = 0; i < count; ++i) s.push(len);
    return s;
  }
};

}  // namespace hirs
