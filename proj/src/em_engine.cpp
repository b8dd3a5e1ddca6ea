#include "hmmgl/em_engine.hpp"

#include <cmath>
#include <sstream>

namespace hmmgl {

namespace {

Matrix normalize_rows(Matrix m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).sum();
    if (s > 0.0) {
      m.row(r) /= s;
    } else {
      m.row(r).setConstant(1.0 / static_cast<double>(m.cols()));
    }
  }
  return m;
}

void validate_init(const EmInit& init, Index n, int k) {
  if (init.u.rows() != n || init.u.cols() != k) {
    std::ostringstream msg;
    msg << "initial responsibilities must be " << n << " x " << k << ", got " << init.u.rows()
        << " x " << init.u.cols();
    throw std::invalid_argument(msg.str());
  }
  if (!init.u.allFinite() || (init.u.array() < 0.0).any()) {
    throw std::invalid_argument("initial responsibilities must be finite and nonnegative");
  }
  const Vector sums = init.u.rowwise().sum();
  if ((sums.array() - 1.0).abs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("rows of the initial responsibilities must sum to 1");
  }
  if (init.transition.rows() != k || init.transition.cols() != k) {
    throw std::invalid_argument("initial transition matrix must be K x K");
  }
  if ((init.transition.array() < 0.0).any() || !init.transition.allFinite()) {
    throw std::invalid_argument("initial transition matrix must be finite and nonnegative");
  }
}

struct MStepOutput {
  HmmModel model;
  int fallbacks = 0;
};

MStepOutput m_step_impl(const SufficientStats& stats, const Responsibilities& resp,
                        const FitConfig& config, const HmmModel* warm) {
  const Index n = resp.u.rows();
  const int k = resp.num_states();
  const Index p = stats.center.size();
  const double lambda = config.resolved_lambda(n, p);
  if (warm != nullptr && warm->num_states() != k) warm = nullptr;

  MStepOutput out;
  out.model.states.reserve(k);
  for (int s = 0; s < k; ++s) {
    const double nk = stats.weight(s);
    if (!(nk > 0.0)) {
      throw NumericError("state " + std::to_string(s) + " has zero effective sample size", s);
    }
    const Vector shift = stats.t1[s] / nk;
    Matrix cov = stats.t2[s] / nk - shift * shift.transpose();
    symmetrize(cov);
    const Vector mean = stats.center + shift;

    const bool unpenalized = config.covariance == CovarianceModel::penalized && lambda == 0.0;
    if (unpenalized && p > 1) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
      const double hi = eig.eigenvalues().maxCoeff();
      const double lo = eig.eigenvalues().minCoeff();
      if (!(hi > 0.0) || lo <= 1e-10 * hi) {
        std::ostringstream msg;
        msg << "weighted covariance of state " << s << " is singular (n_k = " << nk << ", p = " << p
            << ")";
        throw NumericError(msg.str(), s);
      }
    }
    cov.diagonal().array() += 1e-8 * cov.diagonal().mean();

    Matrix precision;
    if (config.covariance == CovarianceModel::diagonal) {
      if (!((cov.diagonal().array() > 0.0).all())) {
        throw NumericError("state " + std::to_string(s) + " has a zero-variance coordinate", s);
      }
      precision = cov.diagonal().cwiseInverse().asDiagonal();
    } else {
      const double pi_k = nk / static_cast<double>(n);
      const PenaltySpec pen{config.penalty, 2.0 * lambda * std::sqrt(pi_k) / nk};
      std::optional<Matrix> start;
      if (warm != nullptr) start = warm->states[s].precision();
      try {
        precision = glasso_solve(cov, pen, start, config.glasso).precision;
      } catch (const GlassoNotConverged& e) {
        precision = e.last_iterate();
        if (!precision.allFinite() || Eigen::LLT<Matrix>(precision).info() != Eigen::Success) {
          throw NumericError("M-step for state " + std::to_string(s) + ": " + e.what(), s);
        }
        ++out.fallbacks;
      } catch (const NumericError& e) {
        throw NumericError("M-step for state " + std::to_string(s) + ": " + e.what(), s);
      }
    }
    try {
      out.model.states.push_back(GaussianState::from_precision(mean, precision));
    } catch (const NumericError& e) {
      throw NumericError("M-step for state " + std::to_string(s) + ": " + e.what(), s);
    }
  }
  out.model.transition = normalize_rows(stats.t3);
  Vector initial = resp.u.row(0).transpose();
  out.model.initial = initial / initial.sum();
  return out;
}

double max_relative_cov_change(const HmmModel& next, const HmmModel& prev) {
  double err = 0.0;
  for (int s = 0; s < next.num_states(); ++s) {
    const Matrix& a = next.states[s].covariance();
    const Matrix& b = prev.states[s].covariance();
    err = std::max(err, ((a - b).cwiseAbs().array() / (1.0 + a.cwiseAbs().array())).maxCoeff());
  }
  return err;
}

}  // namespace

double FitConfig::resolved_lambda(Index n, Index p) const {
  return lambda ? *lambda : lambda_uni(n, p);
}

double FitConfig::resolved_pi_min(Index n) const {
  return pi_min ? *pi_min : 5.0 / static_cast<double>(n);
}

void FitConfig::validate(Index n) const {
  if (lambda && !(*lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double pm = resolved_pi_min(n);
  if (!(pm > 0.0 && pm < 1.0)) throw std::invalid_argument("pi_min must lie in (0, 1)");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::state_collapsed: return "state_collapsed";
    case Termination::max_iter: return "max_iter";
    case Termination::objective_increase: return "objective_increase";
  }
  return "unknown";
}

Termination parse_termination(std::string_view name) {
  if (name == "converged") return Termination::converged;
  if (name == "state_collapsed") return Termination::state_collapsed;
  if (name == "max_iter") return Termination::max_iter;
  if (name == "objective_increase") return Termination::objective_increase;
  throw std::invalid_argument("unknown termination '" + std::string(name) + "'");
}

double lambda_uni(Index n, Index p) {
  if (n < 1 || p < 1) throw std::invalid_argument("lambda_uni needs n >= 1 and p >= 1");
  return std::sqrt(2.0 * static_cast<double>(n) * std::log(static_cast<double>(p))) / 2.0;
}

HmmModel m_step(const SufficientStats& stats, const Responsibilities& resp, const FitConfig& config,
                const HmmModel* warm) {
  return m_step_impl(stats, resp, config, warm).model;
}

double penalized_nll(const HmmModel& model, const Responsibilities& resp, double lambda,
                     PenaltyKind kind) {
  double pen = 0.0;
  if (lambda != 0.0) {
    for (int s = 0; s < model.num_states(); ++s) {
      pen += std::sqrt(resp.pi(s)) * penalty_value(model.states[s].precision(), kind);
    }
  }
  return -resp.log_likelihood + lambda * pen;
}

FitResult fit_hmmglasso(const Matrix& data, int k, const FitConfig& config, const EmInit& init) {
  const Index n = data.rows();
  const Index p = data.cols();
  if (k < 1) throw std::invalid_argument("number of states must be at least 1");
  if (n < 1 || p < 1) throw std::invalid_argument("data must be non-empty");
  if (!data.allFinite()) throw std::invalid_argument("data contains non-finite values");
  config.validate(n);
  validate_init(init, n, k);

  const double lambda = config.resolved_lambda(n, p);
  const double pi_min = config.resolved_pi_min(n);
  const bool track_increase = config.covariance == CovarianceModel::penalized && lambda > 0.0 &&
                              config.penalty != PenaltyKind::invcov;

  Responsibilities resp;
  resp.u = normalize_rows(init.u);
  resp.pi = resp.u.colwise().sum().transpose() / static_cast<double>(n);
  resp.transition_counts = Matrix::Zero(k, k);
  const Matrix first_transition = normalize_rows(init.transition);

  FitResult out;
  out.lambda = lambda;
  out.penalty = config.penalty;
  out.covariance = config.covariance;

  bool have_valid = false;
  int increases = 0;
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    const SufficientStats stats = sufficient_stats(data, resp);
    MStepOutput ms = m_step_impl(stats, resp, config, have_valid ? &out.model : nullptr);
    if (iter == 1) ms.model.transition = first_transition;

    Responsibilities next;
    try {
      next = forward_backward(data, ms.model);
    } catch (const NumericError& e) {
      throw NumericError("E-step at iteration " + std::to_string(iter) + ": " + e.what(), e.state());
    }
    if (!std::isfinite(next.log_likelihood)) {
      throw NumericError("non-finite log-likelihood at iteration " + std::to_string(iter));
    }

    Index smallest = 0;
    const double min_pi = next.pi.minCoeff(&smallest);
    if (min_pi < pi_min) {
      out.termination = Termination::state_collapsed;
      out.collapsed_state = static_cast<int>(smallest);
      if (!have_valid) {
        out.model = std::move(ms.model);
        out.resp = std::move(next);
        out.iterations = iter;
        out.glasso_fallbacks += ms.fallbacks;
        out.penalized_nll_trace.push_back(penalized_nll(out.model, out.resp, lambda, config.penalty));
      }
      return out;
    }

    const double obj = penalized_nll(ms.model, next, lambda, config.penalty);
    const double err = have_valid ? max_relative_cov_change(ms.model, out.model)
                                  : std::numeric_limits<double>::infinity();
    if (track_increase && !out.penalized_nll_trace.empty() && obj > out.penalized_nll_trace.back()) {
      ++increases;
    } else {
      increases = 0;
    }

    out.model = std::move(ms.model);
    out.resp = std::move(next);
    out.iterations = iter;
    out.glasso_fallbacks += ms.fallbacks;
    out.penalized_nll_trace.push_back(obj);
    resp = out.resp;
    have_valid = true;

    if (err < config.eps) {
      out.termination = Termination::converged;
      return out;
    }
    if (increases >= 3) {
      out.termination = Termination::objective_increase;
      return out;
    }
  }
  out.termination = Termination::max_iter;
  return out;
}

}  // namespace hmmgl
