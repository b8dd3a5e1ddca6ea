#pragma once

#include "hmmgl/em_engine.hpp"
#include "hmmgl/model_selection.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace hmmgl {

/// Mean term of the symmetric KL divergence.
///  - standard: (mu_a - mu_b)^T (Sigma_a^-1 + Sigma_b^-1) (mu_a - mu_b)
///  - printed:  (mu_a - mu_b)^T (Sigma_a^-1 - Sigma_b^-1) (mu_a - mu_b)
enum class DivergenceForm { standard, printed };

/// tr{(Sigma_a - Sigma_b)(Sigma_b^-1 - Sigma_a^-1)} + mean term.
double sym_kl(const GaussianState& a, const GaussianState& b,
              DivergenceForm form = DivergenceForm::standard);

/// Pair (k1 < k2) minimising sym_kl; ties go to the lexicographically smallest pair.
std::pair<int, int> closest_pair(const HmmModel& model,
                                 DivergenceForm form = DivergenceForm::standard);

/// Initial conditions for K-1 states after merging k1 and k2. The merged
/// state takes index min(k1, k2); the other index is removed.
EmInit merge_init(const FitResult& fit, int k1, int k2);

/// Initial conditions for K-1 states after removing state k.
EmInit delete_init(const FitResult& fit, int k);

struct PruneAction {
  enum class Kind { initial, merge, remove };
  Kind kind = Kind::initial;
  int first = -1;   // merged pair or deleted state, indices at the previous K
  int second = -1;
};

struct PruneStep {
  int num_states = 0;
  FitResult fit;
  ScoreBreakdown bic;
  ScoreBreakdown mmdl;
  PruneAction action;
  // Criterion values of both candidates (infinite when the refit failed).
  double merge_score = 0.0;
  double delete_score = 0.0;

  const ScoreBreakdown& score_for(Criterion c) const { return c == Criterion::bic ? bic : mmdl; }
};

struct PruneTrace {
  Criterion criterion = Criterion::mmdl;
  std::vector<PruneStep> steps;  // K_max, K_max - 1, ..., K_min
  int selected_k = 0;

  const PruneStep& selected() const;
};

using Initializer = std::function<EmInit(const Matrix& data, int k)>;

struct PruneOptions {
  DivergenceForm divergence = DivergenceForm::standard;
  int threads = 1;  // > 1 runs the merge and delete refits concurrently
};

/// Greedy backward pruning from k_max down to k_min states. The initializer
/// is called exactly once, for k_max; every later fit is warm-started from
/// merged or deleted initial conditions, keeping whichever refit scores
/// better under `criterion` (merge wins ties).
PruneTrace backward_prune(const Matrix& data, int k_min, int k_max, const FitConfig& config,
                          Criterion criterion, const Initializer& initializer,
                          const PruneOptions& options = {});

}  // namespace hmmgl
