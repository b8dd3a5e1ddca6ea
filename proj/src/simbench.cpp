#include "hmmgl/simbench.hpp"

#include "hmmgl/pruning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace hmmgl {

namespace {

constexpr double kEdgeMagnitude = 0.5;
constexpr double kMinEigenvalue = 0.1;

Matrix precision_from_pairs(Index p, const std::vector<Edge>& pairs) {
  Matrix a = Matrix::Identity(p, p);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const double v = (j % 2 == 0 ? 1.0 : -1.0) * kEdgeMagnitude;
    a(pairs[j].first, pairs[j].second) = v;
    a(pairs[j].second, pairs[j].first) = v;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (lo < kMinEigenvalue) a.diagonal().array() += kMinEigenvalue - lo;
  const Vector d = a.diagonal().cwiseSqrt().cwiseInverse();
  Matrix omega = d.asDiagonal() * a * d.asDiagonal();
  omega.diagonal().setOnes();
  return 0.5 * (omega + omega.transpose());
}

std::vector<Edge> shuffled_pairs(Index p, std::mt19937_64& rng) {
  std::vector<Edge> pairs;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  // Fisher-Yates with an explicit distribution so the order only depends on the engine.
  for (std::size_t i = pairs.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pairs[i - 1], pairs[pick(rng)]);
  }
  return pairs;
}

Matrix sticky_transition(int k, bool uniform_last) {
  const double gamma = 1.0 / (0.9 + 0.1 * (k - 1));
  Matrix t = Matrix::Constant(k, k, 0.1 * gamma);
  t.diagonal().setConstant(0.9 * gamma);
  if (uniform_last) t.row(k - 1).setConstant(1.0 / k);
  return t;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

FitConfig resolved(const FitConfig& base, const Matrix& data) {
  FitConfig c = base;
  c.lambda = base.resolved_lambda(data.rows(), data.cols());
  c.pi_min = base.resolved_pi_min(data.rows());
  return c;
}

template <typename Row, typename Fn>
std::vector<Row> run_replicates(const std::vector<SimSpec>& specs, int replicates, int threads,
                                Fn&& one) {
  if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  const std::size_t jobs = specs.size() * static_cast<std::size_t>(replicates);
  std::vector<std::vector<Row>> results(jobs);
  auto work = [&](std::size_t job) {
    const std::size_t s = job / static_cast<std::size_t>(replicates);
    const int r = static_cast<int>(job % static_cast<std::size_t>(replicates));
    results[job] = one(specs[s], r);
  };
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs; ++j) work(j);
  } else {
    std::mutex m;
    std::size_t next = 0;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t job;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next >= jobs || error) return;
            job = next++;
          }
          try {
            work(job);
          } catch (...) {
            std::lock_guard<std::mutex> lock(m);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  std::vector<Row> rows;
  for (auto& chunk : results) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

// Per-true-state graph metrics for an estimate given as labels + precisions.
std::vector<GraphMetrics> score_graphs(const SimData& sim, const std::vector<int>& est_labels,
                                       const std::vector<Matrix>& est_precisions) {
  const int k_true = sim.truth.num_states();
  const int p = static_cast<int>(sim.truth.dim());
  const auto match =
      match_states(sim.labels, k_true, est_labels, static_cast<int>(est_precisions.size()));
  std::vector<GraphMetrics> out;
  for (int s = 0; s < k_true; ++s) {
    const EdgeSet truth = graph_of(sim.truth.states[s].precision());
    const EdgeSet est = match[s] >= 0 ? graph_of(est_precisions[match[s]]) : EdgeSet{};
    out.push_back(graph_metrics(est, truth, p));
  }
  return out;
}

std::vector<Matrix> precisions_of(const HmmModel& m) {
  std::vector<Matrix> out;
  for (const auto& s : m.states) out.push_back(s.precision());
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SimSpec SimSpec::defaults(int model_id, int k_true, double alpha, std::uint64_t seed) {
  SimSpec s;
  s.model_id = model_id;
  s.k_true = k_true;
  s.alpha = alpha;
  s.seed = seed;
  switch (model_id) {
    case 1: s.n = 2000; s.p = 10; break;
    case 2: s.n = 2000; s.p = 75; break;
    case 3: s.n = 1000; s.p = 100; break;
    case 4: s.n = 5000; s.p = 50; break;
    default: throw std::invalid_argument("model id must be 1, 2, 3 or 4");
  }
  return s;
}

HmmModel build_truth(const SimSpec& spec) {
  const int k = spec.k_true;
  const Index p = spec.p;
  if (spec.model_id < 1 || spec.model_id > 4) throw std::invalid_argument("model id must be 1..4");
  if (k < 1) throw std::invalid_argument("k_true must be at least 1");
  if (p < 2) throw std::invalid_argument("p must be at least 2");
  if (spec.n < 1) throw std::invalid_argument("n must be at least 1");

  std::mt19937_64 rng(derive_seed(spec.seed, 101));
  std::vector<Edge> pool = shuffled_pairs(p, rng);
  std::vector<Vector> means(k, Vector::Zero(p));
  std::vector<std::vector<Edge>> support(k);
  HmmModel model;

  if (spec.model_id <= 3) {
    if (p % k != 0 && !spec.uneven_mean_blocks) {
      throw std::invalid_argument("p = " + std::to_string(p) + " is not divisible by K_true = " +
                                  std::to_string(k));
    }
    const Index block = p / k;
    if (block == 0) throw std::invalid_argument("p must be at least K_true");
    const double magnitude = spec.alpha / std::sqrt(static_cast<double>(block));
    for (int s = 0; s < k; ++s) {
      // States are 1-based in the (-1)^k sign rule: the first state is negative.
      const double sign = (s % 2 == 0) ? -1.0 : 1.0;
      means[s].segment(s * block, block).setConstant(sign * magnitude);
    }
    const std::size_t shared = static_cast<std::size_t>(p / 2);
    const std::size_t own = static_cast<std::size_t>(p) - shared;
    if (pool.size() < shared + own * static_cast<std::size_t>(k)) {
      throw std::invalid_argument("p too small to place disjoint state-specific edges");
    }
    for (int s = 0; s < k; ++s) {
      support[s].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(shared));
      const auto first = pool.begin() + static_cast<std::ptrdiff_t>(shared + own * s);
      support[s].insert(support[s].end(), first, first + static_cast<std::ptrdiff_t>(own));
    }
    model.transition = sticky_transition(k, false);
  } else {
    for (int s = 0; s < std::min(k, 2); ++s) means[s](s) = spec.alpha;
    const std::size_t needed = 2 * static_cast<std::size_t>(std::max(k - 2, 0));
    if (pool.size() < needed) throw std::invalid_argument("p too small for model 4 edges");
    for (int s = 2; s < k; ++s) {
      const auto first = pool.begin() + static_cast<std::ptrdiff_t>(2 * (s - 2));
      support[s].assign(first, first + 2);
    }
    model.transition = sticky_transition(k, k > 1);
  }

  for (int s = 0; s < k; ++s) {
    model.states.push_back(GaussianState::from_precision(means[s], precision_from_pairs(p, support[s])));
  }
  model.initial = stationary_distribution(model.transition);
  model.validate();
  return model;
}

SimData generate(const SimSpec& spec) {
  SimData out;
  out.truth = build_truth(spec);
  SampledPath path = sample_path(out.truth, spec.n, derive_seed(spec.seed, 202));
  out.data = std::move(path.data);
  out.labels = std::move(path.labels);
  return out;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::bwprun: return "bwprun";
    case Method::hmmgl: return "hmmgl";
    case Method::unpen: return "unpen";
    case Method::diagcov: return "diagcov";
    case Method::kmeans_glasso: return "kmeans_glasso";
    case Method::pooled_glasso: return "pooled_glasso";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::bwprun, Method::hmmgl, Method::unpen, Method::diagcov,
                   Method::kmeans_glasso, Method::pooled_glasso}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::vector<Exp1Row> run_experiment_1(const std::vector<SimSpec>& specs,
                                      const std::vector<Method>& methods,
                                      const std::vector<Criterion>& criteria, int replicates,
                                      std::uint64_t seed, const ExperimentOptions& options) {
  for (Method m : methods) {
    if (m == Method::kmeans_glasso || m == Method::pooled_glasso) {
      throw std::invalid_argument("method " + std::string(to_string(m)) +
                                  " does not estimate state assignments");
    }
  }
  auto one = [&](const SimSpec& base, int r) {
    SimSpec spec = base;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const SimData sim = generate(spec);
    const FitConfig config = resolved(options.fit, sim.data);
    const std::uint64_t init_seed = derive_seed(spec.seed, 303);
    std::vector<Exp1Row> rows;

    std::map<int, EmInit> inits;
    auto init_for = [&](int k) -> const EmInit& {
      auto it = inits.find(k);
      if (it == inits.end()) {
        it = inits.emplace(k, kmeans_init(sim.data, k, options.restarts, derive_seed(init_seed, k))).first;
      }
      return it->second;
    };

    for (Method method : methods) {
      if (method == Method::bwprun) {
        for (Criterion c : criteria) {
          Timer timer;
          Exp1Row row{spec, r, method, c};
          const int k_max = std::max(options.k_max, 2);
          const PruneTrace trace = backward_prune(
              sim.data, 1, k_max, config, c,
              [&](const Matrix& data, int k) {
                return kmeans_init(data, k, options.restarts, derive_seed(init_seed, k));
              });
          row.selected_k = trace.selected_k;
          row.ari = adjusted_rand_index(sim.labels, argmax_labels(trace.selected().fit.resp.u));
          row.runtime_s = timer.seconds();
          rows.push_back(row);
        }
        continue;
      }

      // Brute force over K with one K-means initialisation per K.
      Timer timer;
      std::vector<std::optional<FitResult>> fits;
      for (int k = 1; k <= spec.k_true + options.k_extra; ++k) {
        try {
          const EmInit& init = init_for(k);
          if (method == Method::hmmgl) {
            fits.emplace_back(fit_hmmglasso(sim.data, k, config, init));
          } else if (method == Method::unpen) {
            fits.emplace_back(fit_unpenalized(sim.data, k, config, init));
          } else {
            fits.emplace_back(fit_diagcov(sim.data, k, config, init));
          }
        } catch (const NumericError&) {
          fits.emplace_back(std::nullopt);
        }
      }
      const double elapsed = timer.seconds();
      for (Criterion c : criteria) {
        Exp1Row row{spec, r, method, c};
        double best = std::numeric_limits<double>::infinity();
        const FitResult* chosen = nullptr;
        for (const auto& f : fits) {
          if (!f) continue;
          const double v = score(*f, c).total;
          if (v < best) {
            best = v;
            chosen = &*f;
          }
        }
        if (chosen != nullptr) {
          row.selected_k = chosen->num_states();
          row.ari = adjusted_rand_index(sim.labels, argmax_labels(chosen->resp.u));
        } else {
          row.ari = std::numeric_limits<double>::quiet_NaN();
        }
        row.runtime_s = elapsed;
        rows.push_back(row);
      }
    }
    return rows;
  };
  return run_replicates<Exp1Row>(specs, replicates, options.threads, one);
}

std::vector<Exp2Row> run_experiment_2(const std::vector<SimSpec>& specs,
                                      const std::vector<Method>& methods, int replicates,
                                      std::uint64_t seed, const ExperimentOptions& options) {
  for (Method m : methods) {
    if (m == Method::unpen || m == Method::diagcov) {
      throw std::invalid_argument("method " + std::string(to_string(m)) +
                                  " is not part of the graph recovery experiment");
    }
  }
  auto one = [&](const SimSpec& base, int r) {
    SimSpec spec = base;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const SimData sim = generate(spec);
    const FitConfig config = resolved(options.fit, sim.data);
    const std::uint64_t init_seed = derive_seed(spec.seed, 303);
    const Index n = sim.data.rows();
    const double lambda = *config.lambda;
    std::vector<Exp2Row> rows;

    auto emit = [&](Method m, const std::vector<GraphMetrics>& metrics) {
      for (std::size_t s = 0; s < metrics.size(); ++s) {
        rows.push_back(Exp2Row{spec, r, m, static_cast<int>(s), metrics[s]});
      }
    };

    for (Method method : methods) {
      switch (method) {
        case Method::bwprun: {
          const PruneTrace trace = backward_prune(
              sim.data, 1, std::max(options.k_max, 2), config, Criterion::mmdl,
              [&](const Matrix& data, int k) {
                return kmeans_init(data, k, options.restarts, derive_seed(init_seed, k));
              });
          const FitResult& fit = trace.selected().fit;
          emit(method, score_graphs(sim, argmax_labels(fit.resp.u), precisions_of(fit.model)));
          break;
        }
        case Method::hmmgl: {
          const EmInit init = kmeans_init(sim.data, spec.k_true, options.restarts,
                                          derive_seed(init_seed, spec.k_true));
          const FitResult fit = fit_hmmglasso(sim.data, spec.k_true, config, init);
          emit(method, score_graphs(sim, argmax_labels(fit.resp.u), precisions_of(fit.model)));
          break;
        }
        case Method::kmeans_glasso: {
          const EmInit init = kmeans_init(sim.data, spec.k_true, options.restarts,
                                          derive_seed(init_seed, spec.k_true));
          std::vector<Matrix> precisions;
          for (int k = 0; k < spec.k_true; ++k) {
            const Vector w = init.u.col(k);
            const double nk = w.sum();
            Matrix cov = weighted_covariance(sim.data, w);
            cov.diagonal().array() += 1e-8 * cov.diagonal().mean();
            const PenaltySpec pen{config.penalty, 2.0 * lambda * std::sqrt(nk / n) / nk};
            precisions.push_back(glasso_solve(cov, pen, std::nullopt, config.glasso).precision);
          }
          emit(method, score_graphs(sim, argmax_labels(init.u), precisions));
          break;
        }
        case Method::pooled_glasso: {
          const PenaltySpec pen{config.penalty, 2.0 * lambda / static_cast<double>(n)};
          const Matrix omega = pooled_glasso(sim.data, pen);
          std::vector<GraphMetrics> metrics;
          const EdgeSet est = graph_of(omega);
          for (int s = 0; s < spec.k_true; ++s) {
            metrics.push_back(graph_metrics(est, graph_of(sim.truth.states[s].precision()),
                                            static_cast<int>(spec.p)));
          }
          emit(method, metrics);
          break;
        }
        default:
          break;
      }
    }
    return rows;
  };
  return run_replicates<Exp2Row>(specs, replicates, options.threads, one);
}

}  // namespace hmmgl
