#include "hmmgl/model_selection.hpp"

#include <doctest.h>

#include <cmath>

using namespace hmmgl;

namespace {

// n = 100, K = 2, p = 2. State 0 has a diagonal precision, state 1 a full one.
FitResult hand_fit(double pi0 = 0.3) {
  FitResult f;
  Matrix full(2, 2);
  full << 2.0, -0.5, -0.5, 1.0;
  f.model.states.push_back(GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2)));
  f.model.states.push_back(GaussianState::from_precision(Vector::Ones(2), full));
  f.model.transition = Matrix::Constant(2, 2, 0.5);
  f.model.initial = Vector::Constant(2, 0.5);
  f.resp.u = Matrix::Constant(100, 2, 0.5);
  f.resp.pi = Vector(2);
  f.resp.pi << pi0, 1.0 - pi0;
  f.resp.log_likelihood = -250.0;
  return f;
}

}  // namespace

TEST_CASE("degrees of freedom") {
  CHECK(degrees_of_freedom(GaussianState::from_precision(Vector::Zero(3), Matrix::Identity(3, 3))) == 6);
  Matrix full(3, 3);
  full << 2, 0.3, 0.2, 0.3, 2, 0.1, 0.2, 0.1, 2;
  CHECK(degrees_of_freedom(GaussianState::from_precision(Vector::Zero(3), full)) == 9);
  Matrix two(2, 2);
  two << 1.0, 0.4, 0.4, 1.0;
  CHECK(degrees_of_freedom(GaussianState::from_precision(Vector::Zero(2), two)) == 5);
  Matrix tiny = Matrix::Identity(2, 2);
  tiny(0, 1) = tiny(1, 0) = 1e-12;
  CHECK(degrees_of_freedom(GaussianState::from_precision(Vector::Zero(2), tiny)) == 4);
}

TEST_CASE("hand-evaluated BIC and MMDL") {
  const FitResult f = hand_fit();
  const double ln100 = std::log(100.0);
  const ScoreBreakdown bic = score(f, Criterion::bic);
  CHECK(bic.degrees_of_freedom == std::vector<int>{4, 5});
  CHECK(bic.nll == 250.0);
  CHECK(bic.transition_cost == doctest::Approx(ln100));
  CHECK(bic.total == doctest::Approx(250.0 + 5.5 * ln100).epsilon(1e-14));
  CHECK(bic.total == doctest::Approx(275.32844).epsilon(1e-7));

  const ScoreBreakdown mmdl = score(f, Criterion::mmdl);
  const double expect = 250.0 + ln100 + 0.5 * std::log(30.0) * 4 + 0.5 * std::log(70.0) * 5;
  CHECK(mmdl.total == doctest::Approx(expect).epsilon(1e-14));
  CHECK(mmdl.total == doctest::Approx(272.02881).epsilon(1e-7));
  double sum = mmdl.nll + mmdl.transition_cost;
  for (double c : mmdl.state_costs) sum += c;
  CHECK(sum == doctest::Approx(mmdl.total).epsilon(1e-15));
}

TEST_CASE("MMDL never exceeds BIC for K >= 2 and equals it for K = 1") {
  for (double pi0 : {0.01, 0.2, 0.5, 0.9}) {
    const FitResult f = hand_fit(pi0);
    CHECK(score(f, Criterion::mmdl).total < score(f, Criterion::bic).total);
  }
  FitResult one;
  one.model.states.push_back(GaussianState::from_precision(Vector::Zero(2), Matrix::Identity(2, 2)));
  one.model.transition = Matrix::Ones(1, 1);
  one.model.initial = Vector::Ones(1);
  one.resp.u = Matrix::Ones(50, 1);
  one.resp.pi = Vector::Ones(1);
  one.resp.log_likelihood = -80.0;
  CHECK(score(one, Criterion::mmdl).total == score(one, Criterion::bic).total);
}

TEST_CASE("scores are invariant to relabelling the states") {
  const FitResult f = hand_fit(0.3);
  FitResult g = f;
  std::swap(g.model.states[0], g.model.states[1]);
  g.resp.pi = f.resp.pi.reverse();
  for (auto c : {Criterion::bic, Criterion::mmdl}) CHECK(score(f, c).total == doctest::Approx(score(g, c).total).epsilon(1e-15));
}

TEST_CASE("MMDL with an empty state is a domain error") {
  FitResult f = hand_fit(0.0);
  CHECK_THROWS_AS(score(f, Criterion::mmdl), std::domain_error);
  CHECK_NOTHROW(score(f, Criterion::bic));
}

TEST_CASE("criterion names") {
  CHECK(parse_criterion(to_string(Criterion::bic)) == Criterion::bic);
  CHECK(parse_criterion(to_string(Criterion::mmdl)) == Criterion::mmdl);
  CHECK_THROWS_AS(parse_criterion("aic"), std::invalid_argument);
}
