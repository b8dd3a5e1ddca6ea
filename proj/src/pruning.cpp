#include "hmmgl/pruning.hpp"

#include <cmath>
#include <future>
#include <limits>

namespace hmmgl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

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

Vector sizes_of(const Matrix& u) {
  return u.colwise().sum().transpose() / static_cast<double>(u.rows());
}

void check_index(int k, int num_states) {
  if (k < 0 || k >= num_states) {
    throw std::out_of_range("state index " + std::to_string(k) + " out of range");
  }
}

std::optional<FitResult> try_fit(const Matrix& data, int k, const FitConfig& config,
                                 const EmInit& init) {
  try {
    return fit_hmmglasso(data, k, config, init);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

double criterion_value(const std::optional<FitResult>& fit, Criterion c) {
  if (!fit) return kInf;
  try {
    return score(*fit, c).total;
  } catch (const std::domain_error&) {
    return kInf;
  }
}

}  // namespace

double sym_kl(const GaussianState& a, const GaussianState& b, DivergenceForm form) {
  if (a.dim() != b.dim()) throw std::invalid_argument("states differ in dimension");
  const Matrix dsigma = a.covariance() - b.covariance();
  const Matrix domega = b.precision() - a.precision();
  const double trace_term = dsigma.cwiseProduct(domega.transpose()).sum();
  const Vector dmu = a.mean() - b.mean();
  const Matrix weight = form == DivergenceForm::standard ? Matrix(a.precision() + b.precision())
                                                         : Matrix(a.precision() - b.precision());
  return trace_term + dmu.dot(weight * dmu);
}

std::pair<int, int> closest_pair(const HmmModel& model, DivergenceForm form) {
  const int k = model.num_states();
  if (k < 2) throw std::invalid_argument("closest_pair needs at least two states");
  std::pair<int, int> best{0, 1};
  double best_d = kInf;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double d = sym_kl(model.states[i], model.states[j], form);
      if (d < best_d) {
        best_d = d;
        best = {i, j};
      }
    }
  }
  return best;
}

EmInit merge_init(const FitResult& fit, int k1, int k2) {
  const int k = fit.num_states();
  check_index(k1, k);
  check_index(k2, k);
  if (k1 == k2) throw std::invalid_argument("merge_init needs two distinct states");
  const int lo = std::min(k1, k2);
  const int hi = std::max(k1, k2);
  const int m = k - 1;
  auto old_of = [hi](int j) { return j < hi ? j : j + 1; };  // new index -> old index

  EmInit init;
  const Matrix& u = fit.resp.u;
  init.u.resize(u.rows(), m);
  for (int j = 0; j < m; ++j) init.u.col(j) = u.col(old_of(j));
  init.u.col(lo) = u.col(lo) + u.col(hi);

  const Matrix& pi_hat = fit.model.transition;
  init.transition.resize(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      if (c == lo) {
        init.transition(r, c) = 1.0 / static_cast<double>(m);
      } else if (r == lo) {
        init.transition(r, c) = pi_hat(lo, old_of(c)) + pi_hat(hi, old_of(c));
      } else {
        init.transition(r, c) = pi_hat(old_of(r), old_of(c));
      }
    }
  }
  init.transition = normalize_rows(init.transition);
  init.pi = sizes_of(init.u);
  return init;
}

EmInit delete_init(const FitResult& fit, int k) {
  const int num = fit.num_states();
  if (num < 2) throw std::invalid_argument("delete_init needs at least two states");
  check_index(k, num);
  const int m = num - 1;
  auto old_of = [k](int j) { return j < k ? j : j + 1; };

  EmInit init;
  const Matrix& u = fit.resp.u;
  init.u.resize(u.rows(), m);
  for (int j = 0; j < m; ++j) init.u.col(j) = u.col(old_of(j));
  init.u = normalize_rows(init.u);

  init.transition.resize(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) init.transition(r, c) = fit.model.transition(old_of(r), old_of(c));
  }
  init.transition = normalize_rows(init.transition);
  init.pi = sizes_of(init.u);
  return init;
}

const PruneStep& PruneTrace::selected() const {
  for (const auto& s : steps) {
    if (s.num_states == selected_k) return s;
  }
  throw std::logic_error("selected K not present in prune trace");
}

PruneTrace backward_prune(const Matrix& data, int k_min, int k_max, const FitConfig& config,
                          Criterion criterion, const Initializer& initializer,
                          const PruneOptions& options) {
  if (k_min < 1 || k_min >= k_max) {
    throw std::invalid_argument("backward_prune needs 1 <= k_min < k_max");
  }
  if (!initializer) throw std::invalid_argument("backward_prune needs an initializer");

  PruneTrace trace;
  trace.criterion = criterion;

  auto record = [&](int k, FitResult fit, PruneAction action, double merge_score, double delete_score) {
    PruneStep step;
    step.num_states = k;
    step.bic = score(fit, Criterion::bic);
    step.mmdl = score(fit, Criterion::mmdl);
    step.fit = std::move(fit);
    step.action = action;
    step.merge_score = merge_score;
    step.delete_score = delete_score;
    trace.steps.push_back(std::move(step));
  };

  const EmInit first = initializer(data, k_max);
  record(k_max, fit_hmmglasso(data, k_max, config, first), PruneAction{}, kInf, kInf);

  for (int kappa = k_max; kappa > k_min; --kappa) {
    const FitResult& current = trace.steps.back().fit;
    const auto [k1, k2] = closest_pair(current.model, options.divergence);
    Index smallest = 0;
    current.resp.pi.minCoeff(&smallest);
    const int victim = static_cast<int>(smallest);

    const EmInit merged = merge_init(current, k1, k2);
    const EmInit deleted = delete_init(current, victim);

    std::optional<FitResult> merge_fit;
    std::optional<FitResult> delete_fit;
    if (options.threads > 1) {
      auto pending = std::async(std::launch::async, try_fit, std::cref(data), kappa - 1,
                                std::cref(config), std::cref(deleted));
      merge_fit = try_fit(data, kappa - 1, config, merged);
      delete_fit = pending.get();
    } else {
      merge_fit = try_fit(data, kappa - 1, config, merged);
      delete_fit = try_fit(data, kappa - 1, config, deleted);
    }
    if (!merge_fit && !delete_fit) {
      throw NumericError("both merge and delete refits failed at K = " + std::to_string(kappa - 1));
    }

    const double ms = criterion_value(merge_fit, criterion);
    const double ds = criterion_value(delete_fit, criterion);
    const bool take_merge = merge_fit && (!delete_fit || ms <= ds);
    if (take_merge) {
      record(kappa - 1, std::move(*merge_fit), {PruneAction::Kind::merge, k1, k2}, ms, ds);
    } else {
      record(kappa - 1, std::move(*delete_fit), {PruneAction::Kind::remove, victim, -1}, ms, ds);
    }
  }

  double best = kInf;
  for (const auto& step : trace.steps) {
    const double v = step.score_for(criterion).total;
    if (v <= best) {
      best = v;
      trace.selected_k = step.num_states;
    }
  }
  if (trace.selected_k == 0) trace.selected_k = trace.steps.back().num_states;
  return trace;
}

}  // namespace hmmgl
