#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hmmgl {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Numerical breakdown during estimation (degenerate covariance, non-finite
// likelihood, solver failure). `state()` is -1 when no single state is at fault.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, int state = -1)
      : std::runtime_error(what), state_(state) {}

  int state() const noexcept { return state_; }

 private:
  int state_;
};

// Graphical lasso iteration cap reached; carries the last iterate.
class GlassoNotConverged : public NumericError {
 public:
  GlassoNotConverged(const std::string& what, Matrix last_iterate)
      : NumericError(what), last_(std::move(last_iterate)) {}

  const Matrix& last_iterate() const noexcept { return last_; }

 private:
  Matrix last_;
};

// In place (A + A^T) / 2; the temporary avoids Eigen's transpose aliasing.
inline void symmetrize(Matrix& m) { m = (0.5 * (m + m.transpose())).eval(); }

// Tolerance below which a precision entry counts as zero. Shared by edge
// extraction and degrees-of-freedom counting so both see the same graph.
inline constexpr double kEdgeTolerance = 1e-8;

}  // namespace hmmgl
