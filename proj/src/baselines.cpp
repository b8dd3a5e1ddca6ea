#include "hmmgl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace hmmgl {

FitResult fit_unpenalized(const Matrix& data, int k, FitConfig config, const EmInit& init) {
  config.lambda = 0.0;
  config.covariance = CovarianceModel::penalized;
  config.pi_min = static_cast<double>(data.cols()) / static_cast<double>(data.rows());
  return fit_hmmglasso(data, k, config, init);
}

FitResult fit_diagcov(const Matrix& data, int k, FitConfig config, const EmInit& init) {
  config.lambda = 0.0;
  config.covariance = CovarianceModel::diagonal;
  return fit_hmmglasso(data, k, config, init);
}

KMeansResult kmeans(const Matrix& data, int k, std::uint64_t seed, int max_iter) {
  const Index n = data.rows();
  if (k < 1) throw std::invalid_argument("kmeans needs k >= 1");
  if (n < k) throw std::invalid_argument("kmeans needs at least k observations");

  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  KMeansResult r;
  r.centers.resize(k, data.cols());
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(order[j], order[static_cast<std::size_t>(pick(rng))]);
    r.centers.row(j) = data.row(order[j]);
  }

  r.labels.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double total = 0.0;
    for (Index t = 0; t < n; ++t) {
      Index best = 0;
      dist(t) = (r.centers.rowwise() - data.row(t)).rowwise().squaredNorm().minCoeff(&best);
      total += dist(t);
      if (r.labels[t] != static_cast<int>(best)) {
        r.labels[t] = static_cast<int>(best);
        changed = true;
      }
    }
    r.objective_trace.push_back(total);
    r.objective = total;
    if (!changed) break;

    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    r.centers.setZero();
    for (Index t = 0; t < n; ++t) {
      r.centers.row(r.labels[t]) += data.row(t);
      ++counts[r.labels[t]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        r.centers.row(j) /= static_cast<double>(counts[j]);
        continue;
      }
      Index far = 0;
      dist.maxCoeff(&far);
      r.centers.row(j) = data.row(far);
      dist(far) = 0.0;
    }
  }
  return r;
}

EmInit init_from_labels(std::span<const int> labels, int k) {
  const Index n = static_cast<Index>(labels.size());
  EmInit init;
  init.u = Matrix::Zero(n, k);
  for (Index t = 0; t < n; ++t) {
    const int l = labels[static_cast<std::size_t>(t)];
    if (l < 0 || l >= k) throw std::invalid_argument("label out of range");
    init.u(t, l) = 1.0;
  }
  init.transition = Matrix::Constant(k, k, 1.0 / k);
  init.pi = init.u.colwise().sum().transpose() / static_cast<double>(n);
  return init;
}

EmInit kmeans_init(const Matrix& data, int k, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("kmeans_init needs at least one restart");
  std::mt19937_64 seeder(seed);
  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult run = kmeans(data, k, seeder());
    if (run.objective < best.objective) best = std::move(run);
  }
  return init_from_labels(best.labels, k);
}

Matrix weighted_covariance(const Matrix& data, const Eigen::Ref<const Vector>& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must have positive sum");
  const Vector mean = data.transpose() * weights / total;
  const Matrix centered = data.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * (centered.array().colwise() * weights.array()).matrix() / total;
  return 0.5 * (cov + cov.transpose());
}

Matrix pooled_glasso(const Matrix& data, const PenaltySpec& penalty) {
  const Matrix cov = weighted_covariance(data, Vector::Ones(data.rows()));
  return glasso_solve(cov, penalty).precision;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : cells) index += choose2(c);
  for (const auto& [key, c] : rows) sum_a += choose2(c);
  for (const auto& [key, c] : cols) sum_b += choose2(c);
  const double expected = sum_a * sum_b / choose2(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

GraphMetrics graph_metrics(const EdgeSet& estimated, const EdgeSet& truth, int p) {
  const std::set<Edge> est(estimated.begin(), estimated.end());
  const std::set<Edge> tru(truth.begin(), truth.end());
  int hits = 0;
  for (const auto& e : est) hits += static_cast<int>(tru.count(e));
  GraphMetrics m;
  m.true_edges = static_cast<int>(tru.size());
  m.estimated_edges = static_cast<int>(est.size());
  const double all_pairs = 0.5 * p * (p - 1);
  const double negatives = all_pairs - m.true_edges;
  m.tpr = m.true_edges > 0 ? static_cast<double>(hits) / m.true_edges : 1.0;
  m.fpr = negatives > 0 ? (m.estimated_edges - hits) / negatives : 0.0;
  return m;
}

std::vector<int> match_states(std::span<const int> truth, int k_true, std::span<const int> estimate,
                              int k_est) {
  if (truth.size() != estimate.size()) throw std::invalid_argument("label vectors differ in length");
  Eigen::MatrixXi overlap = Eigen::MatrixXi::Zero(k_true, k_est);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] < 0 || truth[t] >= k_true || estimate[t] < 0 || estimate[t] >= k_est) {
      throw std::invalid_argument("label out of range");
    }
    ++overlap(truth[t], estimate[t]);
  }

  std::vector<int> match(static_cast<std::size_t>(k_true), -1);
  if (k_est > 16) {
    // Greedy on the largest remaining overlap.
    std::vector<bool> used_t(k_true, false), used_e(k_est, false);
    for (int round = 0; round < std::min(k_true, k_est); ++round) {
      int bt = -1, be = -1, bv = -1;
      for (int i = 0; i < k_true; ++i)
        for (int j = 0; j < k_est; ++j)
          if (!used_t[i] && !used_e[j] && overlap(i, j) > bv) bt = i, be = j, bv = overlap(i, j);
      used_t[bt] = used_e[be] = true;
      match[bt] = be;
    }
    return match;
  }

  // Exact assignment by dynamic programming over subsets of estimated states.
  const std::size_t subsets = std::size_t{1} << k_est;
  constexpr int kUnset = std::numeric_limits<int>::min();
  std::vector<std::vector<int>> best(k_true + 1, std::vector<int>(subsets, kUnset));
  std::vector<std::vector<int>> choice(k_true + 1, std::vector<int>(subsets, -2));
  best[0][0] = 0;
  for (int i = 0; i < k_true; ++i) {
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (best[i][mask] == kUnset) continue;
      // Leave true state i unmatched.
      if (best[i][mask] > best[i + 1][mask]) {
        best[i + 1][mask] = best[i][mask];
        choice[i + 1][mask] = -1;
      }
      for (int j = 0; j < k_est; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        const std::size_t next = mask | (std::size_t{1} << j);
        const int v = best[i][mask] + overlap(i, j);
        if (v > best[i + 1][next]) {
          best[i + 1][next] = v;
          choice[i + 1][next] = j;
        }
      }
    }
  }
  std::size_t mask = 0;
  for (std::size_t m = 0; m < subsets; ++m) {
    if (best[k_true][m] > best[k_true][mask]) mask = m;
  }
  for (int i = k_true; i > 0; --i) {
    const int j = choice[i][mask];
    match[i - 1] = j;
    if (j >= 0) mask &= ~(std::size_t{1} << j);
  }
  return match;
}

std::vector<int> argmax_labels(const Matrix& u) {
  std::vector<int> labels(static_cast<std::size_t>(u.rows()));
  for (Index t = 0; t < u.rows(); ++t) {
    Index best = 0;
    u.row(t).maxCoeff(&best);
    labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace hmmgl
