#include "hmmgl/glasso.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hmmgl;

namespace {

Matrix random_cov(std::mt19937_64& rng, int p, int m) {
  std::normal_distribution<double> normal;
  Matrix z(m, p);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
  Matrix s = z.transpose() * z / m;
  symmetrize(s);
  return s;
}

int off_diagonal_edges(const Matrix& omega) { return static_cast<int>(graph_of(omega).size()); }

bool is_pd(const Matrix& m) { return Eigen::LLT<Matrix>(m).info() == Eigen::Success; }

}  // namespace

TEST_CASE("identity input gives identity precision") {
  for (double rho : {0.0, 0.1, 1.0, 10.0}) {
    const auto r = glasso_solve(Matrix::Identity(4, 4), {PenaltyKind::invcov, rho});
    CHECK((r.precision - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("rho = 0 gives the inverse") {
  std::mt19937_64 rng(1);
  const Matrix s = random_cov(rng, 5, 30);
  for (auto kind : {PenaltyKind::invcov, PenaltyKind::parcor, PenaltyKind::invcor}) {
    const auto r = glasso_solve(s, {kind, 0.0});
    CHECK((r.precision - s.inverse()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("invcov objective matches an independent proximal-gradient minimizer") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 8; ++rep) {
    const int p = 3 + rep % 3;
    const Matrix s = random_cov(rng, p, p + 4);
    for (double rho : {0.05, 0.2, 0.5}) {
      const auto r = glasso_solve(s, {PenaltyKind::invcov, rho});
      const auto ref = oracle::prox_glasso(s, rho);
      const double attained = static_cast<double>(
          oracle::glasso_objective(s.cast<long double>(), r.precision.cast<long double>(), rho));
      CHECK(std::abs(attained - ref.objective) <= 1e-6);
      CHECK(r.objective == doctest::Approx(attained).epsilon(1e-10));
    }
  }
}

TEST_CASE("output is symmetric and positive definite") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix s = random_cov(rng, 6, 8 + rep);
    for (auto kind : {PenaltyKind::invcov, PenaltyKind::parcor, PenaltyKind::invcor}) {
      const auto r = glasso_solve(s, {kind, 0.15});
      CHECK((r.precision - r.precision.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(is_pd(r.precision));
    }
  }
}

TEST_CASE("edge count is non-increasing in rho (invcov)") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix s = random_cov(rng, 6, 12);
    int prev = 1000;
    for (double rho : {0.01, 0.05, 0.1, 0.3, 0.6}) {
      const int edges = off_diagonal_edges(glasso_solve(s, {PenaltyKind::invcov, rho}).precision);
      CHECK(edges <= prev);
      prev = edges;
    }
  }
}

TEST_CASE("rho above every off-diagonal magnitude gives a diagonal solution") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix s = random_cov(rng, 5, 9);
    Matrix off = s.cwiseAbs();
    off.diagonal().setZero();
    const auto r = glasso_solve(s, {PenaltyKind::invcov, off.maxCoeff() * 1.001});
    CHECK(off_diagonal_edges(r.precision) == 0);
    CHECK((r.precision.diagonal() - s.diagonal().cwiseInverse()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("parcor zero pattern is scale equivariant") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int p = 2 + rep % 4;
    const Matrix s = random_cov(rng, p, p + 6);
    Vector d(p);
    for (int j = 0; j < p; ++j) d(j) = scale(rng);
    Matrix scaled = d.asDiagonal() * s * d.asDiagonal();
    symmetrize(scaled);
    const auto a = glasso_solve(s, {PenaltyKind::parcor, 0.2});
    const auto b = glasso_solve(scaled, {PenaltyKind::parcor, 0.2});
    CHECK(graph_of(a.precision) == graph_of(b.precision));
    // Omega transforms as D^-1 Omega D^-1.
    const Matrix back = d.asDiagonal() * b.precision * d.asDiagonal();
    CHECK((back - a.precision).cwiseAbs().maxCoeff() <= 1e-6 * a.precision.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("reweighted solutions are fixed points of the reweighting") {
  std::mt19937_64 rng(7);
  for (auto kind : {PenaltyKind::parcor, PenaltyKind::invcor}) {
    for (int rep = 0; rep < 5; ++rep) {
      const Matrix s = random_cov(rng, 5, 12);
      const PenaltySpec pen{kind, 0.1};
      const auto r = glasso_solve(s, pen);
      const auto again = glasso_solve(s, pen, r.precision);
      CHECK((again.precision - r.precision).cwiseAbs().maxCoeff() <= 1e-5 * r.precision.cwiseAbs().maxCoeff());
      CHECK(graph_of(again.precision) == graph_of(r.precision));
    }
  }
}

TEST_CASE("parcor solution is stationary along off-diagonal directions") {
  // Frozen weights are exact for off-diagonal entries, so no small move on a
  // nonzero off-diagonal entry lowers the objective. (Diagonal directions are
  // not covered: the frozen scale ignores the penalty's dependence on them.)
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  const Matrix s = random_cov(rng, 4, 12);
  const PenaltySpec pen{PenaltyKind::parcor, 0.1};
  const auto r = glasso_solve(s, pen);
  const double f0 = glasso_objective(s, r.precision, pen);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix e = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        if (r.precision(i, j) != 0.0) e(i, j) = e(j, i) = 1e-4 * normal(rng);
      }
    CHECK(glasso_objective(s, r.precision + e, pen) >= f0 - 1e-9);
  }
}

TEST_CASE("warm start reaches the same convex minimum") {
  std::mt19937_64 rng(8);
  const Matrix s1 = random_cov(rng, 5, 20);
  const Matrix s2 = random_cov(rng, 5, 20);
  const auto cold = glasso_solve(s2, {PenaltyKind::invcov, 0.1});
  const auto warm = glasso_solve(s2, {PenaltyKind::invcov, 0.1}, glasso_solve(s1, {PenaltyKind::invcov, 0.1}).precision);
  CHECK(std::abs(cold.objective - warm.objective) <= 1e-8);
}

TEST_CASE("input validation") {
  Matrix s = Matrix::Identity(3, 3);
  s(1, 1) = 0.0;
  CHECK_THROWS_AS(glasso_solve(s, {PenaltyKind::invcov, 0.1}), NumericError);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(glasso_solve(asym, {PenaltyKind::invcov, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(glasso_solve(Matrix::Identity(2, 2), {PenaltyKind::invcov, -1.0}), std::invalid_argument);
}

TEST_CASE("iteration cap raises an error carrying the last iterate") {
  std::mt19937_64 rng(9);
  const Matrix s = random_cov(rng, 6, 8);
  GlassoOptions opt;
  opt.max_sweeps = 1;
  opt.tol = 1e-15;
  try {
    glasso_solve(s, {PenaltyKind::invcov, 0.05}, std::nullopt, opt);
    FAIL("expected GlassoNotConverged");
  } catch (const GlassoNotConverged& e) {
    CHECK(e.last_iterate().rows() == 6);
    CHECK(e.last_iterate().allFinite());
  }
}

TEST_CASE("penalty values") {
  Matrix omega(2, 2);
  omega << 4.0, -1.0, -1.0, 1.0;
  CHECK(penalty_value(omega, PenaltyKind::invcov) == doctest::Approx(2.0));
  CHECK(penalty_value(omega, PenaltyKind::parcor) == doctest::Approx(2.0 * 1.0 / 2.0));
  // Sigma = inverse = [[1, 1], [1, 4]] / 3.
  CHECK(penalty_value(omega, PenaltyKind::invcor) == doctest::Approx(2.0 * std::sqrt(1.0 / 3.0 * 4.0 / 3.0)));
}

TEST_CASE("partial correlation") {
  CHECK(partial_correlation(Matrix::Identity(3, 3)).isApprox(-Matrix::Identity(3, 3)));
  Matrix omega(2, 2);
  omega << 1.0, -0.5, -0.5, 1.0;
  const Matrix psi = partial_correlation(omega);
  CHECK(psi(0, 1) == doctest::Approx(0.5));
  CHECK(psi(0, 0) == doctest::Approx(-1.0));
  Vector d(2);
  d << 3.0, 0.2;
  const Matrix scaled = d.asDiagonal() * omega * d.asDiagonal();
  CHECK((partial_correlation(scaled) - psi).cwiseAbs().maxCoeff() <= 1e-14);
  Matrix bad = omega;
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(partial_correlation(bad), NumericError);
}

TEST_CASE("graph_of") {
  CHECK(graph_of(Matrix::Identity(4, 4)).empty());
  Matrix omega = Matrix::Identity(3, 3);
  omega(0, 1) = omega(1, 0) = 0.3;
  CHECK(graph_of(omega, 1e-8) == EdgeSet{{0, 1}});
  CHECK(graph_of(omega, 0.5).empty());
}

TEST_CASE("penalty kind names") {
  for (auto kind : {PenaltyKind::invcov, PenaltyKind::parcor, PenaltyKind::invcor}) {
    CHECK(parse_penalty_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_penalty_kind("lasso"), std::invalid_argument);
}
