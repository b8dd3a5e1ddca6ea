#include "hmmgl/simbench.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace hmmgl;

namespace {

std::set<Edge> edges_of(const GaussianState& s) {
  const EdgeSet e = graph_of(s.precision());
  return {e.begin(), e.end()};
}

}  // namespace

TEST_CASE("derive_seed is splitmix64") {
  // First splitmix64 output from state 0.
  CHECK(derive_seed(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(7, 4));
  CHECK(derive_seed(7, 3) != derive_seed(8, 3));
}

TEST_CASE("model 1 truth: transitions and block means") {
  const HmmModel m = build_truth(SimSpec::defaults(1, 2, 2.0, 1));
  Matrix t(2, 2);
  t << 0.9, 0.1, 0.1, 0.9;
  CHECK((m.transition - t).cwiseAbs().maxCoeff() <= 1e-15);
  const double a = 2.0 / std::sqrt(5.0);
  for (int j = 0; j < 10; ++j) {
    CHECK(m.states[0].mean()(j) == doctest::Approx(j < 5 ? -a : 0.0));
    CHECK(m.states[1].mean()(j) == doctest::Approx(j < 5 ? 0.0 : a));
  }
  CHECK((m.initial.array() - 0.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("models 1-3 precisions: unit diagonal, SPD, p edges with p/2 shared") {
  for (int model : {1, 2, 3}) {
    for (int k : {2, 4}) {
      SimSpec spec = SimSpec::defaults(model, k, 2.0, 3);
      spec.uneven_mean_blocks = true;
      const HmmModel m = build_truth(spec);
      const Index p = spec.p;
      std::vector<std::set<Edge>> g;
      for (const auto& s : m.states) {
        CHECK((s.precision().diagonal().array() == 1.0).all());
        CHECK(Eigen::LLT<Matrix>(s.precision()).info() == Eigen::Success);
        g.push_back(edges_of(s));
        CHECK(static_cast<Index>(g.back().size()) == p);
      }
      for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
          std::vector<Edge> common;
          std::set_intersection(g[a].begin(), g[a].end(), g[b].begin(), g[b].end(), std::back_inserter(common));
          CHECK(static_cast<Index>(common.size()) == p / 2);
        }
      }
    }
  }
}

TEST_CASE("sticky transitions for K = 4") {
  SimSpec spec = SimSpec::defaults(1, 4, 2.0, 1);
  spec.p = 12;
  const HmmModel m = build_truth(spec);
  const double gamma = 1.0 / 1.2;
  for (int r = 0; r < 4; ++r) {
    CHECK(m.transition.row(r).sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.transition(r, r) == doctest::Approx(0.9 * gamma));
    CHECK(m.transition(r, (r + 1) % 4) == doctest::Approx(0.1 * gamma));
  }
}

TEST_CASE("p not divisible by K") {
  SimSpec spec = SimSpec::defaults(1, 3, 2.0, 1);
  CHECK_THROWS_AS(build_truth(spec), std::invalid_argument);
  spec.uneven_mean_blocks = true;
  const HmmModel m = build_truth(spec);
  CHECK((m.states[2].mean().tail(1).array() == 0.0).all());
  CHECK(m.states[2].mean()(6) == doctest::Approx(-2.0 / std::sqrt(3.0)));
  CHECK_THROWS_AS(build_truth(SimSpec::defaults(7)), std::invalid_argument);
}

TEST_CASE("model 4 structure") {
  const HmmModel m = build_truth(SimSpec::defaults(4, 4, 3.0, 2));
  CHECK(m.states[0].mean()(0) == 3.0);
  CHECK(m.states[1].mean()(1) == 3.0);
  CHECK(m.states[0].mean().cwiseAbs().sum() == 3.0);
  CHECK(m.states[2].mean().isZero());
  CHECK(m.states[3].mean().isZero());
  CHECK(edges_of(m.states[0]).empty());
  CHECK(edges_of(m.states[1]).empty());
  CHECK(edges_of(m.states[2]).size() == 2);
  CHECK(edges_of(m.states[3]).size() == 2);
  CHECK((m.transition.row(3).array() == 0.25).all());
  CHECK(m.transition(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("generate is deterministic in the seed") {
  const SimData a = generate(SimSpec::defaults(1, 2, 2.0, 9));
  const SimData b = generate(SimSpec::defaults(1, 2, 2.0, 9));
  const SimData c = generate(SimSpec::defaults(1, 2, 2.0, 10));
  CHECK(a.data == b.data);
  CHECK(a.labels == b.labels);
  CHECK(a.data != c.data);
  CHECK(a.data.rows() == 2000);
  CHECK(a.data.cols() == 10);
}

TEST_CASE("sampled paths match the truth in frequency and covariance") {
  SimSpec spec = SimSpec::defaults(1, 2, 2.0, 4);
  spec.n = 100000;
  const SimData sim = generate(spec);
  const double freq = std::count(sim.labels.begin(), sim.labels.end(), 0) / 1e5;
  CHECK(std::abs(freq - 0.5) <= 0.02);
  for (int s = 0; s < 2; ++s) {
    Vector w(spec.n);
    for (Index t = 0; t < spec.n; ++t) w(t) = sim.labels[t] == s;
    const Matrix cov = weighted_covariance(sim.data, w);
    CHECK((cov - sim.truth.states[s].covariance()).cwiseAbs().maxCoeff() <= 0.05);
  }
}

TEST_CASE("experiment 1 on a tiny grid") {
  SimSpec spec = SimSpec::defaults(1, 2, 3.0, 1);
  spec.n = 300;
  ExperimentOptions opt;
  opt.k_max = 3;
  opt.k_extra = 1;
  opt.restarts = 2;
  const std::vector<Method> methods = {Method::bwprun, Method::hmmgl, Method::diagcov};
  const auto rows = run_experiment_1({spec}, methods, {Criterion::mmdl, Criterion::bic}, 2, 5, opt);
  CHECK(rows.size() == 2 * 3 * 2);
  for (const auto& r : rows) {
    CHECK(r.selected_k >= 1);
    CHECK(r.selected_k <= 3);
    CHECK(r.ari <= 1.0);
  }
  opt.threads = 2;
  const auto again = run_experiment_1({spec}, methods, {Criterion::mmdl, Criterion::bic}, 2, 5, opt);
  REQUIRE(again.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].selected_k == rows[i].selected_k);
    CHECK(again[i].ari == rows[i].ari);
    CHECK(again[i].replicate == rows[i].replicate);
  }
  CHECK_THROWS_AS(run_experiment_1({spec}, {Method::pooled_glasso}, {Criterion::mmdl}, 1, 1, opt),
                  std::invalid_argument);
}

TEST_CASE("experiment 2 on a tiny grid") {
  SimSpec spec = SimSpec::defaults(1, 2, 3.0, 1);
  spec.n = 400;
  ExperimentOptions opt;
  opt.k_max = 3;
  opt.restarts = 2;
  const std::vector<Method> methods = {Method::bwprun, Method::hmmgl, Method::kmeans_glasso,
                                       Method::pooled_glasso};
  const auto rows = run_experiment_2({spec}, methods, 2, 8, opt);
  CHECK(rows.size() == 2 * 4 * 2);
  for (const auto& r : rows) {
    CHECK(r.metrics.tpr >= 0.0);
    CHECK(r.metrics.tpr <= 1.0);
    CHECK(r.metrics.fpr >= 0.0);
    CHECK(r.metrics.fpr <= 1.0);
    CHECK(r.metrics.true_edges == 10);
  }
}

TEST_CASE("method names") {
  for (Method m : {Method::bwprun, Method::hmmgl, Method::unpen, Method::diagcov, Method::kmeans_glasso,
                   Method::pooled_glasso}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("em"), std::invalid_argument);
}
