#include "hmmgl/hmm_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace hmmgl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + " must be square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument(std::string(what) + " must be symmetric");
  }
}

void check_distribution(const Eigen::Ref<const Vector>& row, const char* what) {
  if ((row.array() < 0.0).any() || !row.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has negative or non-finite entries");
  }
  if (std::abs(row.sum() - 1.0) > 1e-10) {
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
  }
}

}  // namespace

GaussianState GaussianState::from_precision(Vector mean, Matrix precision) {
  check_symmetric(precision, "precision");
  if (mean.size() != precision.rows()) {
    throw std::invalid_argument("mean and precision dimensions differ");
  }
  Matrix sym = 0.5 * (precision + precision.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericError("precision matrix is not positive definite");
  }
  GaussianState s;
  s.mean_ = std::move(mean);
  s.covariance_ = llt.solve(Matrix::Identity(sym.rows(), sym.cols()));
  symmetrize(s.covariance_);
  s.log_det_precision_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  s.precision_ = std::move(sym);
  return s;
}

GaussianState GaussianState::from_covariance(Vector mean, Matrix covariance) {
  check_symmetric(covariance, "covariance");
  if (mean.size() != covariance.rows()) {
    throw std::invalid_argument("mean and covariance dimensions differ");
  }
  Matrix sym = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericError("covariance matrix is not positive definite");
  }
  GaussianState s;
  s.mean_ = std::move(mean);
  s.precision_ = llt.solve(Matrix::Identity(sym.rows(), sym.cols()));
  symmetrize(s.precision_);
  s.log_det_precision_ = -2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  s.covariance_ = std::move(sym);
  return s;
}

void HmmModel::validate() const {
  const int k = num_states();
  if (k < 1) throw std::invalid_argument("model needs at least one state");
  const Index p = states.front().dim();
  for (const auto& s : states) {
    if (s.dim() != p) throw std::invalid_argument("states differ in dimension");
  }
  if (transition.rows() != k || transition.cols() != k) {
    throw std::invalid_argument("transition matrix must be K x K");
  }
  if (initial.size() != k) throw std::invalid_argument("initial distribution must have K entries");
  for (int r = 0; r < k; ++r) check_distribution(transition.row(r).transpose(), "transition row");
  check_distribution(initial, "initial distribution");
}

double log_sum_exp(const Eigen::Ref<const Vector>& values) {
  const double m = values.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((values.array() - m).exp().sum());
}

double log_emission_density(const Eigen::Ref<const Vector>& x, const GaussianState& state) {
  if (x.size() != state.dim()) {
    throw std::invalid_argument("observation dimension does not match state dimension");
  }
  const Vector d = x - state.mean();
  const double q = d.dot(state.precision() * d);
  if (q > kMaxQuadraticForm) return kNegInf;
  const double p = static_cast<double>(state.dim());
  return 0.5 * state.log_det_precision() - 0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * q;
}

Matrix log_emission_matrix(const Matrix& data, const HmmModel& model) {
  const Index n = data.rows();
  const int k = model.num_states();
  if (data.cols() != model.dim()) {
    throw std::invalid_argument("data has " + std::to_string(data.cols()) +
                                " columns but model dimension is " + std::to_string(model.dim()));
  }
  const double p = static_cast<double>(model.dim());
  const double log_norm = -0.5 * p * std::log(2.0 * std::numbers::pi);
  Matrix out(n, k);
  for (int s = 0; s < k; ++s) {
    const auto& st = model.states[s];
    const Matrix centered = data.rowwise() - st.mean().transpose();
    const Vector q = (centered * st.precision()).cwiseProduct(centered).rowwise().sum();
    const double c = log_norm + 0.5 * st.log_det_precision();
    for (Index t = 0; t < n; ++t) {
      const double v = q(t) > kMaxQuadraticForm ? kNegInf : c - 0.5 * q(t);
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        std::ostringstream msg;
        msg << "non-finite emission log-density for state " << s << " at t=" << t;
        throw NumericError(msg.str(), s);
      }
      out(t, s) = v;
    }
  }
  return out;
}

ForwardBackwardTables forward_backward_tables(const Matrix& data, const HmmModel& model) {
  const Index n = data.rows();
  const int k = model.num_states();
  if (n < 1) throw std::invalid_argument("forward_backward needs at least one observation");

  ForwardBackwardTables fb;
  fb.log_emission = log_emission_matrix(data, model);
  const Matrix log_trans = model.transition.array().log().matrix();
  const Vector log_init = model.initial.array().log().matrix();

  fb.log_alpha.resize(n, k);
  fb.log_alpha.row(0) = (log_init + fb.log_emission.row(0).transpose()).transpose();
  Vector tmp(k);
  for (Index t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      tmp = fb.log_alpha.row(t - 1).transpose() + log_trans.col(j);
      fb.log_alpha(t, j) = log_sum_exp(tmp) + fb.log_emission(t, j);
    }
  }

  fb.log_beta.resize(n, k);
  fb.log_beta.row(n - 1).setZero();
  for (Index t = n - 1; t > 0; --t) {
    const Vector next = fb.log_emission.row(t).transpose() + fb.log_beta.row(t).transpose();
    for (int i = 0; i < k; ++i) {
      tmp = log_trans.row(i).transpose() + next;
      fb.log_beta(t - 1, i) = log_sum_exp(tmp);
    }
  }

  fb.log_likelihood_forward = log_sum_exp(fb.log_alpha.row(n - 1).transpose());
  fb.log_likelihood_backward =
      log_sum_exp(log_init + fb.log_emission.row(0).transpose() + fb.log_beta.row(0).transpose());
  if (!std::isfinite(fb.log_likelihood_forward)) {
    throw NumericError("observed-data log-likelihood is not finite");
  }
  return fb;
}

Responsibilities forward_backward(const Matrix& data, const HmmModel& model, bool keep_pairwise) {
  const ForwardBackwardTables fb = forward_backward_tables(data, model);
  const Index n = data.rows();
  const int k = model.num_states();
  const double ll = fb.log_likelihood_forward;

  Responsibilities r;
  r.log_likelihood = ll;
  r.u = (fb.log_alpha + fb.log_beta).array() - ll;
  r.u = r.u.array().exp();
  for (Index t = 0; t < n; ++t) {
    // Absorb round-off so rows sum to one exactly (to machine precision).
    r.u.row(t) /= r.u.row(t).sum();
  }

  const Matrix log_trans = model.transition.array().log().matrix();
  r.transition_counts = Matrix::Zero(k, k);
  if (keep_pairwise) r.pairwise.resize(std::max<Index>(n - 1, 0), static_cast<Index>(k) * k);
  Matrix v(k, k);
  for (Index t = 0; t + 1 < n; ++t) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        v(i, j) = fb.log_alpha(t, i) + log_trans(i, j) + fb.log_emission(t + 1, j) +
                  fb.log_beta(t + 1, j) - ll;
      }
    }
    v = v.array().exp();
    const double total = v.sum();
    if (total > 0.0) v /= total;
    r.transition_counts += v;
    if (keep_pairwise) {
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) r.pairwise(t, static_cast<Index>(i) * k + j) = v(i, j);
      }
    }
  }
  r.pi = r.u.colwise().sum().transpose() / static_cast<double>(n);
  return r;
}

SampledPath sample_path(const HmmModel& model, Index n, std::uint64_t seed) {
  model.validate();
  if (n < 1) throw std::invalid_argument("sample_path needs n >= 1");
  const int k = model.num_states();
  const Index p = model.dim();

  std::vector<Matrix> chol;
  chol.reserve(k);
  for (const auto& s : model.states) chol.push_back(s.covariance().llt().matrixL());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const Eigen::Ref<const Vector>& probs) {
    const double r = unif(rng);
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += probs(j);
      if (r < acc) return j;
    }
    // Round-off in the cumulative sum; take the last state with mass.
    for (int j = k - 1; j >= 0; --j) {
      if (probs(j) > 0.0) return j;
    }
    return k - 1;
  };

  SampledPath out;
  out.data.resize(n, p);
  out.labels.resize(static_cast<std::size_t>(n));
  Vector z(p);
  int state = draw(model.initial);
  for (Index t = 0; t < n; ++t) {
    if (t > 0) state = draw(model.transition.row(state).transpose());
    out.labels[static_cast<std::size_t>(t)] = state;
    for (Index j = 0; j < p; ++j) z(j) = normal(rng);
    out.data.row(t) = (model.states[state].mean() + chol[state] * z).transpose();
  }
  return out;
}

SufficientStats sufficient_stats(const Matrix& data, const Responsibilities& resp) {
  const Index n = data.rows();
  const int k = resp.num_states();
  if (resp.u.rows() != n) throw std::invalid_argument("responsibilities and data lengths differ");

  SufficientStats s;
  s.center = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - s.center.transpose();
  s.weight = resp.u.colwise().sum().transpose();
  s.t1.reserve(k);
  s.t2.reserve(k);
  for (int j = 0; j < k; ++j) {
    const auto w = resp.u.col(j);
    s.t1.push_back(centered.transpose() * w);
    const Matrix weighted = centered.array().colwise() * w.array();
    Matrix t2 = centered.transpose() * weighted;
    s.t2.push_back(0.5 * (t2 + t2.transpose()));
  }
  s.t3 = resp.transition_counts.size() == 0 ? Matrix::Zero(k, k) : resp.transition_counts;
  return s;
}

Vector stationary_distribution(const Matrix& transition) {
  const Index k = transition.rows();
  // Solve pi^T (P - I) = 0 with sum(pi) = 1 as a least-squares system.
  Matrix a(k + 1, k);
  a.topRows(k) = (transition - Matrix::Identity(k, k)).transpose();
  a.row(k).setOnes();
  Vector b = Vector::Zero(k + 1);
  b(k) = 1.0;
  Vector pi = a.colPivHouseholderQr().solve(b);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

}  // namespace hmmgl
