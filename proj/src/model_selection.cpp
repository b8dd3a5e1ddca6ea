#include "hmmgl/model_selection.hpp"

#include <cmath>

namespace hmmgl {

std::string_view to_string(Criterion c) {
  return c == Criterion::bic ? "bic" : "mmdl";
}

Criterion parse_criterion(std::string_view name) {
  if (name == "bic") return Criterion::bic;
  if (name == "mmdl") return Criterion::mmdl;
  throw std::invalid_argument("unknown criterion '" + std::string(name) + "'");
}

int degrees_of_freedom(const GaussianState& state, double tol) {
  const Matrix& omega = state.precision();
  const Index p = omega.rows();
  int count = static_cast<int>(p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = i; j < p; ++j) {
      if (std::abs(omega(i, j)) > tol) ++count;
    }
  }
  return count;
}

ScoreBreakdown score(const FitResult& fit, Criterion criterion) {
  const double n = static_cast<double>(fit.resp.length());
  const int k = fit.num_states();
  const double log_n = std::log(n);

  ScoreBreakdown out;
  out.criterion = criterion;
  out.nll = -fit.resp.log_likelihood;
  out.transition_cost = 0.5 * log_n * k * (k - 1);
  out.total = out.nll + out.transition_cost;
  for (int s = 0; s < k; ++s) {
    const int df = degrees_of_freedom(fit.model.states[s]);
    double cost = 0.5 * log_n * df;
    if (criterion == Criterion::mmdl) {
      const double pi = fit.resp.pi(s);
      if (!(pi > 0.0)) {
        throw std::domain_error("MMDL undefined: state " + std::to_string(s) + " has zero size");
      }
      cost = 0.5 * std::log(n * pi) * df;
    }
    out.degrees_of_freedom.push_back(df);
    out.state_costs.push_back(cost);
    out.total += cost;
  }
  return out;
}

}  // namespace hmmgl
