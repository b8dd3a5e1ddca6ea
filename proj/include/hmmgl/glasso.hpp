#pragma once

#include "hmmgl/common.hpp"

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace hmmgl {

/// Which l1 norm is applied to the off-diagonal of the precision matrix.
///  - invcov: |Omega_ll'|
///  - parcor: |Omega_ll'| / sqrt(Omega_ll Omega_l'l')   (partial correlations)
///  - invcor: |Omega_ll'| * sqrt(Sigma_ll Sigma_l'l')   (inverse correlation matrix)
enum class PenaltyKind { invcov, parcor, invcor };

std::string_view to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view name);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::parcor;
  double rho = 0.0;
};

struct GlassoOptions {
  // Block coordinate descent stops when the largest change of the working
  // covariance, in correlation units, falls below `tol`.
  double tol = 1e-6;
  int max_sweeps = 1000;
  // Inner lasso coordinate descent.
  double lasso_tol = 1e-10;
  int max_lasso_passes = 10000;
  // Reweighting loop for parcor / invcor.
  double outer_tol = 1e-6;
  int max_outer = 50;
};

struct GlassoResult {
  Matrix precision;
  double objective = 0.0;
  int iterations = 0;  // sweeps (invcov) or reweighting rounds (parcor/invcor)
};

using Edge = std::pair<int, int>;
using EdgeSet = std::vector<Edge>;  // sorted, l < l'

/// Minimise -log|Omega| + tr(Omega C) + rho * Pen(Omega) over SPD Omega.
///
/// The diagonal is never penalised. invcov is solved exactly by blockwise
/// coordinate descent; parcor and invcor iterate weighted invcov problems
/// with scale factors frozen at the current iterate, working on the
/// correlation-scaled problem so results are equivariant under diagonal
/// rescaling of C. `warm_start` seeds the iteration with a previous solution.
///
/// Throws NumericError for a non-positive diagonal of C and
/// GlassoNotConverged when an iteration cap is reached.
GlassoResult glasso_solve(const Matrix& cov, const PenaltySpec& penalty,
                          const std::optional<Matrix>& warm_start = std::nullopt,
                          const GlassoOptions& options = {});

/// Weighted invcov problem: penalty sum_{l != l'} weights(l,l') |Omega_ll'|.
/// The diagonal of `weights` is ignored.
GlassoResult weighted_glasso(const Matrix& cov, const Matrix& weights,
                             const std::optional<Matrix>& warm_start = std::nullopt,
                             const GlassoOptions& options = {});

double penalty_value(const Matrix& precision, PenaltyKind kind);

double glasso_objective(const Matrix& cov, const Matrix& precision, const PenaltySpec& penalty);

/// Psi_ll' = -Omega_ll' / sqrt(Omega_ll Omega_l'l'), diagonal included (-1).
Matrix partial_correlation(const Matrix& precision);

/// Undirected edges (l, l') with l < l' and |Omega_ll'| > tol.
EdgeSet graph_of(const Matrix& precision, double tol = kEdgeTolerance);

}  // namespace hmmgl
