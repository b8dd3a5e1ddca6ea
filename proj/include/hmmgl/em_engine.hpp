#pragma once

#include "hmmgl/glasso.hpp"
#include "hmmgl/hmm_core.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace hmmgl {

/// How the M-step estimates each state's precision matrix.
enum class CovarianceModel {
  penalized,  // graphical lasso with the state-adaptive penalty (dense inverse when lambda = 0)
  diagonal,   // diagonal of the weighted empirical covariance
};

struct FitConfig {
  std::optional<double> lambda;   // unset: lambda_uni(n, p)
  PenaltyKind penalty = PenaltyKind::parcor;
  double eps = 1e-3;
  std::optional<double> pi_min;   // unset: 5 / n
  int max_iter = 500;
  CovarianceModel covariance = CovarianceModel::penalized;
  GlassoOptions glasso;

  double resolved_lambda(Index n, Index p) const;
  double resolved_pi_min(Index n) const;
  void validate(Index n) const;
};

enum class Termination { converged, state_collapsed, max_iter, objective_increase };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view name);

/// Initial conditions for an EM run: responsibilities u (n x K), transition
/// matrix and scaled state sizes.
struct EmInit {
  Matrix u;
  Matrix transition;
  Vector pi;

  int num_states() const noexcept { return static_cast<int>(u.cols()); }
};

struct FitResult {
  HmmModel model;
  Responsibilities resp;
  std::vector<double> penalized_nll_trace;
  Termination termination = Termination::converged;
  int collapsed_state = -1;   // set when termination == state_collapsed
  int iterations = 0;
  double lambda = 0.0;        // resolved penalty level
  PenaltyKind penalty = PenaltyKind::parcor;
  CovarianceModel covariance = CovarianceModel::penalized;
  int glasso_fallbacks = 0;   // M-steps that used a non-converged glasso iterate

  int num_states() const noexcept { return model.num_states(); }
};

/// sqrt(2 n ln p) / 2.
double lambda_uni(Index n, Index p);

/// Penalised M-step. `warm` (same K) seeds the per-state glasso solves.
/// The transition matrix is re-estimated from stats.t3; the initial
/// distribution from the first row of u.
HmmModel m_step(const SufficientStats& stats, const Responsibilities& resp, const FitConfig& config,
                const HmmModel* warm = nullptr);

/// -loglik + lambda * sum_k sqrt(pi_k) Pen(Omega_k).
double penalized_nll(const HmmModel& model, const Responsibilities& resp, double lambda,
                     PenaltyKind kind);

/// Penalised Baum-Welch (HMMGLasso). Starts with an M-step from init.u and
/// keeps init.transition for the first iteration. Stops when the largest
/// relative change of any covariance entry falls below eps, when some state's
/// scaled size drops below pi_min (returning the last iterate with all states
/// above pi_min), or at max_iter.
FitResult fit_hmmglasso(const Matrix& data, int k, const FitConfig& config, const EmInit& init);

}  // namespace hmmgl
