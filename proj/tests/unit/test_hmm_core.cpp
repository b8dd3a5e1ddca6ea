#include "hmmgl/baselines.hpp"
#include "hmmgl/hmm_core.hpp"
#include "hmmgl/simbench.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace hmmgl;

namespace {

HmmModel two_state_1d() {
  HmmModel m;
  m.states.push_back(GaussianState::from_covariance(Vector::Constant(1, -1.0), Matrix::Constant(1, 1, 0.5)));
  m.states.push_back(GaussianState::from_covariance(Vector::Constant(1, 1.5), Matrix::Constant(1, 1, 2.0)));
  m.transition.resize(2, 2);
  m.transition << 0.8, 0.2, 0.3, 0.7;
  m.initial = Vector(2);
  m.initial << 0.4, 0.6;
  return m;
}

}  // namespace

TEST_CASE("log emission density: closed forms") {
  const auto s1 = GaussianState::from_precision(Vector::Zero(1), Matrix::Identity(1, 1));
  CHECK(log_emission_density(Vector::Zero(1), s1) == doctest::Approx(-0.9189385).epsilon(1e-7));
  const auto s2 = GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(log_emission_density(Vector::Zero(2), s2) == doctest::Approx(-1.8378771).epsilon(1e-7));
}

TEST_CASE("log emission density: dense formula with correlated precision") {
  Vector mu(2);
  mu << 1.0, -1.0;
  Matrix omega(2, 2);
  omega << 1.0, 0.3, 0.3, 1.0;
  const auto s = GaussianState::from_precision(mu, omega);
  // Direct evaluation: det = 1 - 0.09, d = (-1, 1), d' W d = 1 + 1 - 2 * 0.3.
  const double det = 1.0 - 0.09;
  const double quad = 2.0 - 0.6;
  const double expect = 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi) - 0.5 * quad;
  CHECK(log_emission_density(Vector::Zero(2), s) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(static_cast<double>(oracle::log_density(Vector::Zero(2), mu, s.covariance())) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("log emission density: dimension mismatch is an error") {
  const auto s = GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK_THROWS_AS(log_emission_density(Vector::Zero(3), s), std::invalid_argument);
}

TEST_CASE("GaussianState invariants") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const HmmModel m = oracle::random_model(rng, 1, 1 + rep % 5);
    const auto& s = m.states[0];
    const Index p = s.dim();
    CHECK((s.covariance() * s.precision() - Matrix::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((s.precision() - s.precision().transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(s.log_det_precision() ==
          doctest::Approx(std::log(Eigen::PartialPivLU<Matrix>(s.precision()).determinant())).epsilon(1e-10));
  }
  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.1, 1.0;
  CHECK_THROWS_AS(GaussianState::from_precision(Vector::Zero(2), asym), std::invalid_argument);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianState::from_precision(Vector::Zero(2), indefinite), NumericError);
}

TEST_CASE("HmmModel validation") {
  HmmModel m = two_state_1d();
  CHECK_NOTHROW(m.validate());
  m.transition(0, 0) = 0.9;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = two_state_1d();
  m.initial(0) = -0.1;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("forward_backward: single state") {
  HmmModel m;
  m.states.push_back(GaussianState::from_precision(Vector::Constant(2, 0.5), Matrix::Identity(2, 2) * 2.0));
  m.transition = Matrix::Ones(1, 1);
  m.initial = Vector::Ones(1);
  Matrix x(5, 2);
  x << 0, 1, 2, 3, -1, 0.5, 0.25, 0.75, 4, -2;
  const Responsibilities r = forward_backward(x, m);
  CHECK((r.u.array() == 1.0).all());
  double expect = 0.0;
  for (Index t = 0; t < x.rows(); ++t) expect += log_emission_density(x.row(t).transpose(), m.states[0]);
  CHECK(r.log_likelihood == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("forward_backward: n=4, K=2, p=1 against path enumeration") {
  const HmmModel m = two_state_1d();
  Matrix x(4, 1);
  x << -0.7, 0.3, 2.2, -1.1;
  const Responsibilities r = forward_backward(x, m, true);
  const oracle::Posterior bf = oracle::brute_force(x, m);
  CHECK((r.u - bf.u).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((r.pairwise - bf.pairwise).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::abs(r.log_likelihood - bf.log_likelihood) <= 1e-10);
}

TEST_CASE("forward_backward: identical states and uniform transitions give flat posteriors") {
  HmmModel m;
  for (int k = 0; k < 3; ++k) m.states.push_back(GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2)));
  m.transition = Matrix::Constant(3, 3, 1.0 / 3.0);
  m.initial = Vector::Constant(3, 1.0 / 3.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix x(20, 2);
  for (Index t = 0; t < 20; ++t) x.row(t) << normal(rng), normal(rng);
  const Responsibilities r = forward_backward(x, m);
  CHECK((r.u.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward_backward: posterior invariants on random instances") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 25; ++rep) {
    const int k = 1 + rep % 4;
    const int p = 1 + rep % 3;
    const HmmModel m = oracle::random_model(rng, k, p);
    const Index n = 1 + rep * 7;
    const SampledPath path = sample_path(m, n, 100 + rep);
    const Responsibilities r = forward_backward(path.data, m, true);
    CHECK((r.u.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
    CHECK(std::abs(r.pi.sum() - 1.0) <= 1e-10);
    CHECK((r.pi - r.u.colwise().sum().transpose() / static_cast<double>(n)).cwiseAbs().maxCoeff() <= 1e-12);
    for (Index t = 0; t + 1 < n; ++t) {
      for (int a = 0; a < k; ++a) {
        double marg = 0.0;
        for (int b = 0; b < k; ++b) marg += r.pairwise(t, a * k + b);
        CHECK(std::abs(marg - r.u(t, a)) <= 1e-8);
      }
    }
    const ForwardBackwardTables tab = forward_backward_tables(path.data, m);
    CHECK(std::abs(tab.log_likelihood_forward - tab.log_likelihood_backward) <= 1e-8);
    CHECK(std::abs(r.transition_counts.sum() - static_cast<double>(n - 1)) <= 1e-8);
  }
}

TEST_CASE("forward_backward: long sequences stay finite") {
  std::mt19937_64 rng(8);
  const HmmModel m = oracle::random_model(rng, 3, 2);
  const SampledPath path = sample_path(m, 200000, 1);
  const Responsibilities r = forward_backward(path.data, m);
  CHECK(std::isfinite(r.log_likelihood));
  CHECK(r.u.allFinite());
}

TEST_CASE("forward_backward: a point no state can explain is a numeric failure") {
  HmmModel m;
  m.states.push_back(GaussianState::from_precision(Vector::Zero(1), Matrix::Constant(1, 1, 1e6)));
  m.transition = Matrix::Ones(1, 1);
  m.initial = Vector::Ones(1);
  Matrix x(2, 1);
  x << 0.0, 1e4;  // quadratic form 1e14 exceeds the guard
  CHECK(log_emission_matrix(x, m)(1, 0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(forward_backward(x, m), NumericError);
}

TEST_CASE("forward_backward at the truth recovers well separated states") {
  const SimData sim = generate(SimSpec::defaults(1, 2, 2.0, 17));
  const Responsibilities r = forward_backward(sim.data, sim.truth);
  CHECK(adjusted_rand_index(argmax_labels(r.u), sim.labels) > 0.9);
}

TEST_CASE("sample_path: single state, determinism, transition frequencies") {
  HmmModel one;
  one.states.push_back(GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2)));
  one.transition = Matrix::Ones(1, 1);
  one.initial = Vector::Ones(1);
  const SampledPath a = sample_path(one, 50, 9);
  CHECK(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == 0; }));

  HmmModel m = two_state_1d();
  m.transition << 0.9, 0.1, 0.1, 0.9;
  const SampledPath p1 = sample_path(m, 100000, 42);
  const SampledPath p2 = sample_path(m, 100000, 42);
  CHECK(p1.labels == p2.labels);
  CHECK(p1.data == p2.data);
  double stay = 0, total = 0;
  for (std::size_t t = 1; t < p1.labels.size(); ++t) {
    total += 1;
    stay += p1.labels[t] == p1.labels[t - 1];
  }
  CHECK(std::abs(stay / total - 0.9) <= 0.01);
}

TEST_CASE("sufficient statistics") {
  std::mt19937_64 rng(21);
  const HmmModel m = oracle::random_model(rng, 3, 3);
  const SampledPath path = sample_path(m, 400, 2);
  const Responsibilities r = forward_backward(path.data, m);
  const SufficientStats s = sufficient_stats(path.data, r);
  CHECK(std::abs(s.t3.sum() - 399.0) <= 1e-8);
  CHECK(std::abs(s.weight.sum() - 400.0) <= 1e-8);
  for (const Matrix& t2 : s.t2) {
    CHECK((t2 - t2.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(t2).eigenvalues().minCoeff() >= -1e-9);
  }
  // The centring shift must not change the weighted covariance.
  for (int k = 0; k < 3; ++k) {
    const Vector w = r.u.col(k);
    const Matrix direct = weighted_covariance(path.data, w);
    const Vector mu = s.t1[k] / s.weight(k);
    const Matrix via = s.t2[k] / s.weight(k) - mu * mu.transpose();
    CHECK((direct - via).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("stationary distribution and log-sum-exp") {
  Matrix t(2, 2);
  t << 0.9, 0.1, 0.3, 0.7;
  const Vector pi = stationary_distribution(t);
  CHECK(pi(0) == doctest::Approx(0.75));
  CHECK(pi(1) == doctest::Approx(0.25));
  Vector v(3);
  v << -1000.0, -1000.0, -1000.0;
  CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(3.0)));
}
