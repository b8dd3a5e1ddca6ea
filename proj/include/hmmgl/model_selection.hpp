#pragma once

#include "hmmgl/em_engine.hpp"

#include <string_view>
#include <vector>

namespace hmmgl {

enum class Criterion { bic, mmdl };

std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view name);

/// Criterion value split into its terms. total = nll + transition_cost + sum(state_costs).
struct ScoreBreakdown {
  Criterion criterion = Criterion::mmdl;
  double nll = 0.0;
  double transition_cost = 0.0;     // 0.5 log(n) K (K - 1)
  std::vector<double> state_costs;  // 0.5 log(n) Df_k (BIC) or 0.5 log(n pi_k) Df_k (MMDL)
  std::vector<int> degrees_of_freedom;
  double total = 0.0;
};

/// p + number of nonzero precision entries on or above the diagonal.
int degrees_of_freedom(const GaussianState& state, double tol = kEdgeTolerance);

/// Scores a fit with the unpenalised log-likelihood. MMDL requires every
/// pi_k > 0 and throws std::domain_error otherwise.
ScoreBreakdown score(const FitResult& fit, Criterion criterion);

}  // namespace hmmgl
