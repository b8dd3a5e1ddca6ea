#pragma once

#include "hmmgl/common.hpp"

#include <vector>

namespace hmmgl {

/// Emission parameters of one hidden state: N(mean, precision^-1).
///
/// Construction validates symmetry and positive definiteness and caches the
/// covariance and log-determinant; instances are immutable afterwards.
class GaussianState {
 public:
  static GaussianState from_precision(Vector mean, Matrix precision);
  static GaussianState from_covariance(Vector mean, Matrix covariance);

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& precision() const noexcept { return precision_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  double log_det_precision() const noexcept { return log_det_precision_; }
  Index dim() const noexcept { return mean_.size(); }

 private:
  GaussianState() = default;

  Vector mean_;
  Matrix precision_;
  Matrix covariance_;
  double log_det_precision_ = 0.0;
};

/// Full HMM parameter set: K emission states, row-stochastic transition
/// matrix and initial state distribution.
struct HmmModel {
  std::vector<GaussianState> states;
  Matrix transition;
  Vector initial;

  int num_states() const noexcept { return static_cast<int>(states.size()); }
  Index dim() const noexcept { return states.empty() ? 0 : states.front().dim(); }

  // Throws std::invalid_argument when shapes or stochasticity are violated.
  void validate() const;
};

/// Posterior quantities from one E-step.
struct Responsibilities {
  Matrix u;                  // n x K, P(S_t = k | X)
  Matrix pairwise;           // (n-1) x K*K, entry (t, k*K + k'); empty unless requested
  Matrix transition_counts;  // K x K, sum_t P(S_t = k, S_t+1 = k' | X)
  Vector pi;                 // n_k / n
  double log_likelihood = 0.0;

  int num_states() const noexcept { return static_cast<int>(u.cols()); }
  Index length() const noexcept { return u.rows(); }
};

/// Expected sufficient statistics. t1/t2 are accumulated on data shifted by
/// `center` to limit cancellation; the shift does not affect covariances.
struct SufficientStats {
  Vector center;
  Vector weight;            // n_k
  std::vector<Vector> t1;   // sum_t u_k(t) (X_t - center)
  std::vector<Matrix> t2;   // sum_t u_k(t) (X_t - center)(X_t - center)^T
  Matrix t3;                // expected transition counts
};

struct SampledPath {
  Matrix data;              // n x p
  std::vector<int> labels;  // 0-based state indices
};

/// Log-space forward/backward tables, exposed for diagnostics and tests.
struct ForwardBackwardTables {
  Matrix log_emission;  // n x K
  Matrix log_alpha;     // n x K
  Matrix log_beta;      // n x K
  double log_likelihood_forward = 0.0;
  double log_likelihood_backward = 0.0;
};

// Quadratic forms beyond this are treated as zero density.
inline constexpr double kMaxQuadraticForm = 1e12;

double log_emission_density(const Eigen::Ref<const Vector>& x, const GaussianState& state);

// n x K matrix of log emission densities. Throws NumericError naming the
// state if any entry is NaN or +inf.
Matrix log_emission_matrix(const Matrix& data, const HmmModel& model);

ForwardBackwardTables forward_backward_tables(const Matrix& data, const HmmModel& model);

/// Smoothing posteriors and observed-data log-likelihood, computed with
/// log-sum-exp recursions. `keep_pairwise` stores the full (n-1) x K x K
/// pairwise posteriors; transition counts are always accumulated.
Responsibilities forward_backward(const Matrix& data, const HmmModel& model,
                                  bool keep_pairwise = false);

SampledPath sample_path(const HmmModel& model, Index n, std::uint64_t seed);

SufficientStats sufficient_stats(const Matrix& data, const Responsibilities& resp);

Vector stationary_distribution(const Matrix& transition);

double log_sum_exp(const Eigen::Ref<const Vector>& values);

}  // namespace hmmgl
