#include "hmmgl/glasso.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hmmgl {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void validate_cov(const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw std::invalid_argument("covariance must be a non-empty square matrix");
  }
  if (!cov.allFinite()) throw NumericError("covariance has non-finite entries");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  for (Index i = 0; i < cov.rows(); ++i) {
    if (!(cov(i, i) > 0.0)) {
      std::ostringstream msg;
      msg << "covariance diagonal entry " << i << " is not positive (" << cov(i, i) << ")";
      throw NumericError(msg.str());
    }
  }
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Matrix spd_inverse(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

// Minimises 0.5 b^T A b - b^T s + sum_i w_i |b_i| by cyclic coordinate
// descent, starting from `beta`. `scale_i * |db_i|` measures convergence.
void lasso_cd(const Matrix& a, const Vector& s, const Vector& w, const Vector& scale,
              Vector& beta, const GlassoOptions& opt) {
  const Index m = a.rows();
  Vector g = a * beta;
  for (int pass = 0; pass < opt.max_lasso_passes; ++pass) {
    double max_change = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double old = beta(i);
      const double r = s(i) - g(i) + a(i, i) * old;
      const double next = soft_threshold(r, w(i)) / a(i, i);
      const double delta = next - old;
      if (delta != 0.0) {
        beta(i) = next;
        g.noalias() += a.col(i) * delta;
        max_change = std::max(max_change, std::abs(delta) * scale(i));
      }
    }
    if (max_change < opt.lasso_tol) return;
  }
}

std::vector<Index> others(Index p, Index j) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(p - 1));
  for (Index i = 0; i < p; ++i) {
    if (i != j) idx.push_back(i);
  }
  return idx;
}

}  // namespace

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::invcov: return "invcov";
    case PenaltyKind::parcor: return "parcor";
    case PenaltyKind::invcor: return "invcor";
  }
  return "unknown";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "invcov") return PenaltyKind::invcov;
  if (name == "parcor") return PenaltyKind::parcor;
  if (name == "invcor") return PenaltyKind::invcor;
  throw std::invalid_argument("unknown penalty kind '" + std::string(name) + "'");
}

double penalty_value(const Matrix& precision, PenaltyKind kind) {
  const Index p = precision.rows();
  double total = 0.0;
  switch (kind) {
    case PenaltyKind::invcov:
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
          if (i != j) total += std::abs(precision(i, j));
      break;
    case PenaltyKind::parcor:
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
          if (i != j) total += std::abs(precision(i, j)) / std::sqrt(precision(i, i) * precision(j, j));
      break;
    case PenaltyKind::invcor: {
      const Matrix cov = spd_inverse(precision, "precision");
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
          if (i != j) total += std::abs(precision(i, j)) * std::sqrt(cov(i, i) * cov(j, j));
      break;
    }
  }
  return total;
}

double glasso_objective(const Matrix& cov, const Matrix& precision, const PenaltySpec& penalty) {
  return -log_det_spd(precision) + (precision.cwiseProduct(cov)).sum() +
         penalty.rho * penalty_value(precision, penalty.kind);
}

GlassoResult weighted_glasso(const Matrix& cov, const Matrix& weights,
                             const std::optional<Matrix>& warm_start, const GlassoOptions& opt) {
  validate_cov(cov);
  const Index p = cov.rows();
  if (weights.rows() != p || weights.cols() != p) {
    throw std::invalid_argument("penalty weights must match covariance dimensions");
  }
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("penalty weights must be nonnegative");

  auto objective = [&](const Matrix& omega) {
    double pen = 0.0;
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j)
        if (i != j) pen += weights(i, j) * std::abs(omega(i, j));
    return -log_det_spd(omega) + omega.cwiseProduct(cov).sum() + pen;
  };

  Matrix off = weights;
  off.diagonal().setZero();
  if (p == 1 || off.maxCoeff() == 0.0) {
    GlassoResult r;
    r.precision = spd_inverse(cov, "covariance");
    r.objective = objective(r.precision);
    return r;
  }

  const Vector scale = cov.diagonal().cwiseSqrt();

  // Working covariance. W = C is dual feasible (|W - C| <= weights) and every
  // block update keeps it so; starting W from a warm precision can break that
  // and make the sweeps cycle. The warm start only seeds the regressions.
  Matrix w = cov;
  Matrix beta = Matrix::Zero(p, p);  // column j holds the regression of j on the rest
  if (warm_start) {
    const Matrix& omega0 = *warm_start;
    if (omega0.rows() != p || omega0.cols() != p) {
      throw std::invalid_argument("warm start has wrong dimensions");
    }
    if (omega0.allFinite() && (omega0.diagonal().array() > 0.0).all()) {
      for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < p; ++i) {
          if (i != j) beta(i, j) = -omega0(i, j) / omega0(j, j);
        }
      }
    }
  }

  Matrix a(p - 1, p - 1);
  Vector s(p - 1), wv(p - 1), sc(p - 1), b(p - 1);
  int sweep = 0;
  bool converged = false;
  while (sweep < opt.max_sweeps) {
    ++sweep;
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const auto idx = others(p, j);
      for (Index r = 0; r < p - 1; ++r) {
        for (Index c = 0; c < p - 1; ++c) a(r, c) = w(idx[r], idx[c]);
        s(r) = cov(idx[r], j);
        wv(r) = weights(idx[r], j);
        sc(r) = scale(idx[r]) / scale(j);
        b(r) = beta(idx[r], j);
      }
      lasso_cd(a, s, wv, sc, b, opt);
      const Vector w12 = a * b;
      for (Index r = 0; r < p - 1; ++r) {
        const Index i = idx[r];
        max_change = std::max(max_change, std::abs(w12(r) - w(i, j)) / (scale(i) * scale(j)));
        w(i, j) = w12(r);
        w(j, i) = w12(r);
        beta(i, j) = b(r);
      }
    }
    if (max_change < opt.tol) {
      converged = true;
      break;
    }
  }

  Matrix omega(p, p);
  for (Index j = 0; j < p; ++j) {
    double dot = 0.0;
    for (Index i = 0; i < p; ++i) {
      if (i != j) dot += w(i, j) * beta(i, j);
    }
    const double diag = 1.0 / (w(j, j) - dot);
    omega(j, j) = diag;
    for (Index i = 0; i < p; ++i) {
      if (i != j) omega(i, j) = -beta(i, j) * diag;
    }
  }
  symmetrize(omega);

  if (!converged) {
    throw GlassoNotConverged("graphical lasso did not converge within " +
                                 std::to_string(opt.max_sweeps) + " sweeps",
                             omega);
  }
  if (!omega.allFinite() || Eigen::LLT<Matrix>(omega).info() != Eigen::Success) {
    throw NumericError("graphical lasso produced a non positive definite precision");
  }
  GlassoResult r;
  r.precision = std::move(omega);
  r.objective = objective(r.precision);
  r.iterations = sweep;
  return r;
}

GlassoResult glasso_solve(const Matrix& cov, const PenaltySpec& penalty,
                          const std::optional<Matrix>& warm_start, const GlassoOptions& opt) {
  if (!(penalty.rho >= 0.0)) throw std::invalid_argument("penalty rho must be nonnegative");
  validate_cov(cov);
  const Index p = cov.rows();

  if (penalty.kind == PenaltyKind::invcov || penalty.rho == 0.0 || p == 1) {
    Matrix weights = Matrix::Constant(p, p, penalty.rho);
    weights.diagonal().setZero();
    GlassoResult r = weighted_glasso(cov, weights, warm_start, opt);
    r.objective = glasso_objective(cov, r.precision, penalty);
    return r;
  }

  // Both scale-free penalties are solved on the correlation-scaled problem:
  // with R = D^-1 C D^-1, Omega = D^-1 Omega_R D^-1.
  const Vector d = cov.diagonal().cwiseSqrt();
  const Vector dinv = d.cwiseInverse();
  Matrix corr = dinv.asDiagonal() * cov * dinv.asDiagonal();
  symmetrize(corr);
  corr.diagonal().setOnes();

  Matrix omega_r = warm_start ? Matrix(d.asDiagonal() * (*warm_start) * d.asDiagonal())
                              : Matrix::Identity(p, p);
  if (Eigen::LLT<Matrix>(omega_r).info() != Eigen::Success) omega_r = Matrix::Identity(p, p);

  double prev = std::numeric_limits<double>::infinity();
  Matrix weights(p, p);
  for (int round = 1; round <= opt.max_outer; ++round) {
    if (penalty.kind == PenaltyKind::parcor) {
      const Vector dg = omega_r.diagonal().cwiseSqrt();
      weights = penalty.rho * (dg * dg.transpose()).cwiseInverse();
    } else {
      const Vector sg = spd_inverse(omega_r, "precision iterate").diagonal().cwiseSqrt();
      weights = penalty.rho * (sg * sg.transpose());
    }
    weights.diagonal().setZero();
    try {
      omega_r = weighted_glasso(corr, weights, omega_r, opt).precision;
    } catch (const GlassoNotConverged& e) {
      Matrix last = dinv.asDiagonal() * e.last_iterate() * dinv.asDiagonal();
      symmetrize(last);
      throw GlassoNotConverged(e.what(), last);
    }
    const double obj = glasso_objective(corr, omega_r, penalty);
    if (std::abs(obj - prev) < opt.outer_tol) {
      GlassoResult r;
      r.precision = dinv.asDiagonal() * omega_r * dinv.asDiagonal();
      symmetrize(r.precision);
      r.objective = glasso_objective(cov, r.precision, penalty);
      r.iterations = round;
      return r;
    }
    prev = obj;
  }
  Matrix last = dinv.asDiagonal() * omega_r * dinv.asDiagonal();
  throw GlassoNotConverged("reweighted graphical lasso did not converge within " +
                               std::to_string(opt.max_outer) + " rounds",
                           0.5 * (last + last.transpose()));
}

Matrix partial_correlation(const Matrix& precision) {
  const Index p = precision.rows();
  if (precision.cols() != p) throw std::invalid_argument("precision must be square");
  for (Index i = 0; i < p; ++i) {
    if (!(precision(i, i) > 0.0)) {
      throw NumericError("precision diagonal entry " + std::to_string(i) + " is not positive");
    }
  }
  const Vector d = precision.diagonal().cwiseSqrt().cwiseInverse();
  return -(d.asDiagonal() * precision * d.asDiagonal());
}

EdgeSet graph_of(const Matrix& precision, double tol) {
  EdgeSet edges;
  const Index p = precision.rows();
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (std::abs(precision(i, j)) > tol) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return edges;
}

}  // namespace hmmgl
