#pragma once

#include "hmmgl/em_engine.hpp"
#include "hmmgl/glasso.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hmmgl {

/// Unpenalised MLE: lambda = 0, dense covariance, pi_min = p / n.
FitResult fit_unpenalized(const Matrix& data, int k, FitConfig config, const EmInit& init);

/// MLE with diagonal covariance matrices (lambda ignored).
FitResult fit_diagcov(const Matrix& data, int k, FitConfig config, const EmInit& init);

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;                      // K x p
  double objective = 0.0;              // within-cluster sum of squares
  std::vector<double> objective_trace; // after each assignment step
};

/// One run of Lloyd's algorithm from k distinct data rows drawn with `rng`.
/// Empty clusters are re-seeded with the point farthest from its center.
KMeansResult kmeans(const Matrix& data, int k, std::uint64_t seed, int max_iter = 100);

/// Best of `restarts` K-means runs, converted to hard responsibilities with
/// a uniform transition matrix.
EmInit kmeans_init(const Matrix& data, int k, int restarts, std::uint64_t seed);

/// Hard 0/1 responsibilities from labels in [0, k).
EmInit init_from_labels(std::span<const int> labels, int k);

/// Weighted covariance sum_t w_t (x_t - m)(x_t - m)^T / sum_t w_t.
Matrix weighted_covariance(const Matrix& data, const Eigen::Ref<const Vector>& weights);

/// Graphical lasso on the pooled sample covariance, ignoring states.
Matrix pooled_glasso(const Matrix& data, const PenaltySpec& penalty);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct GraphMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  int true_edges = 0;
  int estimated_edges = 0;
};

GraphMetrics graph_metrics(const EdgeSet& estimated, const EdgeSet& truth, int p);

/// For each true state, the estimated state with which it is paired so the
/// total label overlap is maximal (each estimated state used at most once),
/// or -1 when unmatched.
std::vector<int> match_states(std::span<const int> truth, int k_true, std::span<const int> estimate,
                              int k_est);

std::vector<int> argmax_labels(const Matrix& u);

}  // namespace hmmgl
