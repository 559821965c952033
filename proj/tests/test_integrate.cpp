#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lmg/integrate.hpp"

using namespace lmg;
using doctest::Approx;
using V2 = ode::Vec<2>;

namespace {

const Rhs<2> rotation = [](double, const V2& x) { return V2(-x[1], x[0]); };

// x = 0.5 sin(w t)
Rhs<2> sinusoid(double w) {
  return [w](double, const V2& x) { return V2(w * x[1], -w * x[0]); };
}

ModelParams pole_flip(double lp) {
  ModelParams p;
  p.kappa = 5.0;
  p.omega = 0.0;
  p.omega0 = 1.0;
  p.lambda_minus = 0.5;
  p.lambda_plus = lp;
  return p;
}

}  // namespace

TEST_CASE("rotation field returns after one period") {
  const V2 x0(1.0, 0.0);
  const auto tr = integrate<2>(rotation, x0, {0.0, 2.0 * std::numbers::pi});
  CHECK(tr.status == IntegrationStatus::Completed);
  CHECK((tr.final_state() - x0).norm() < 1e-10);
  CHECK(tr.t_end == 2.0 * std::numbers::pi);
}

TEST_CASE("dense output tracks the exact solution") {
  IntegrateOptions<2> opt;
  opt.tol = {1e-12, 1e-14};
  const auto tr = integrate<2>(rotation, V2(1.0, 0.0), {0.0, 20.0}, opt);
  double worst = 0.0;
  for (double t = 0.0; t <= 20.0; t += 0.0137) {
    const V2 y = tr.at(t);
    worst = std::max(worst, std::hypot(y[0] - std::cos(t), y[1] - std::sin(t)));
  }
  CHECK(worst < 1e-10);
  const auto jet = tr.steps[3].jet(0.5 * (tr.times[3] + tr.times[4]));
  CHECK(jet.dy[0] == Approx(-jet.y[1]).epsilon(1e-9));
  CHECK(jet.d2y[0] == Approx(-jet.y[0]).epsilon(1e-7));
}

TEST_CASE("times strictly increase and integration is deterministic") {
  const auto a = integrate<2>(rotation, V2(1.0, 0.0), {0.0, 50.0});
  const auto b = integrate<2>(rotation, V2(1.0, 0.0), {0.0, 50.0});
  for (std::size_t i = 1; i < a.times.size(); ++i) CHECK(a.times[i] > a.times[i - 1]);
  REQUIRE(a.times.size() == b.times.size());
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.times[i] == b.times[i]);
    CHECK(a.states[i] == b.states[i]);
  }
}

TEST_CASE("reverse-time integration") {
  const auto tr = integrate<2>(rotation, V2(1.0, 0.0), {0.0, -std::numbers::pi / 2});
  CHECK(tr.final_state()[0] == Approx(0.0).epsilon(1e-10));
  CHECK(std::abs(tr.final_state()[0]) < 1e-10);
  CHECK(tr.final_state()[1] == Approx(-1.0).epsilon(1e-10));
  CHECK(tr.at(-0.3)[1] == Approx(std::sin(-0.3)).epsilon(1e-10));
}

TEST_CASE("error decreases at high order as the tolerance tightens") {
  // Oracle: closed-form solution of the rotation field.
  auto err = [](double tol) {
    IntegrateOptions<2> opt;
    opt.tol = {tol, tol};
    const auto tr = integrate<2>(rotation, V2(1.0, 0.0), {0.0, 30.0}, opt);
    return std::hypot(tr.final_state()[0] - std::cos(30.0), tr.final_state()[1] - std::sin(30.0));
  };
  const double e1 = err(1e-6);
  const double e2 = err(1e-9);
  CHECK(e2 < e1);
  CHECK(e2 < 1e-7);
}

TEST_CASE("non-finite right-hand side is reported") {
  const Rhs<2> blowup = [](double, const V2& x) { return V2(x[0] * x[0], 0.0); };
  const auto tr = integrate<2>(blowup, V2(1.0, 0.0), {0.0, 2.0});
  CHECK_FALSE(tr.ok());
  CHECK(tr.t_end == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("extrema of a sinusoid") {
  for (double w : {1.0, 2.0, 3.7}) {
    const double T = 40.0;
    const auto tr = integrate<2>(sinusoid(w), V2(0.0, 0.5), {0.0, T});
    const auto ext = extrema_events(tr, 0, 0.2);
    // Extrema sit at (pi/2 + k pi)/w.
    const auto expected = static_cast<std::size_t>(std::floor(w * T / std::numbers::pi + 0.5));
    REQUIRE(ext.size() == expected);
    for (std::size_t k = 0; k < ext.size(); ++k) {
      CHECK(ext[k].symbol() == (k % 2 == 0 ? 1 : 0));
      CHECK(std::abs(ext[k].t - (std::numbers::pi / 2 + k * std::numbers::pi) / w) < 1e-10);
      CHECK(std::abs(std::abs(ext[k].value) - 0.5) < 1e-10);
    }
  }
  // Extrema inside the exclusion band are discarded.
  const auto tr = integrate<2>(sinusoid(1.0), V2(0.0, 0.15), {0.0, 40.0});
  CHECK(extrema_events(tr, 0, 0.2).empty());
  CHECK(extrema_events(tr, 0, 0.1).size() == 13);
}

TEST_CASE("monotone trajectory has no extrema") {
  const Rhs<2> drift = [](double, const V2&) { return V2(1.0, 0.5); };
  const auto tr = integrate<2>(drift, V2(-1.0, 0.0), {0.0, 10.0});
  CHECK(extrema_events(tr, 0, 0.2).empty());
}

TEST_CASE("terminal events stop the run") {
  IntegrateOptions<2> opt;
  auto spec = EventSpec<2>::extremum(0, -1);
  spec.terminal_count = 3;
  opt.events.push_back(spec);
  const auto tr = integrate<2>(sinusoid(1.0), V2(0.0, 0.5), {0.0, 100.0}, opt);
  CHECK(tr.status == IntegrationStatus::StoppedByEvent);
  REQUIRE(tr.events.size() == 3);
  CHECK(tr.events[2].kind == EventKind::Minimum);
  CHECK(std::abs(tr.events[2].t - 5.5 * std::numbers::pi) < 1e-9);
  CHECK(tr.t_end < 30.0);
}

TEST_CASE("plane crossings of a circular orbit") {
  const double w0 = 0.7;
  const Rhs<2> circle = [w0](double, const V2& x) { return V2(-w0 * x[1], w0 * x[0]); };
  const double period = 2.0 * std::numbers::pi / w0;
  const auto tr = integrate<2>(circle, V2(0.3, 0.1), {0.0, 10.0 * period});
  const auto up = poincare_crossings(tr, Plane{1, 0.0, +1});
  const auto down = poincare_crossings(tr, Plane{1, 0.0, -1});
  CHECK(up.size() == 10);
  CHECK(down.size() == 10);
  for (std::size_t i = 1; i < up.size(); ++i) CHECK(std::abs(up[i].t - up[i - 1].t - period) < 1e-10);
  for (const auto& e : up) CHECK(std::abs(e.state[1]) < 1e-12);
  CHECK(poincare_crossings(tr, Plane{1, 0.0, 0}).size() == 20);
}

TEST_CASE("trajectory inside the section plane is degenerate") {
  const Rhs<2> along = [](double, const V2&) { return V2(1.0, 0.0); };
  const auto tr = integrate<2>(along, V2(0.0, 0.0), {0.0, 1.0});
  CHECK_THROWS_AS(poincare_crossings(tr, Plane{1, 0.0, 0}), DegenerateEventError);
  CHECK_THROWS_AS(poincare_crossings(tr, Plane{4, 0.0, 0}), std::invalid_argument);
}

TEST_CASE("Bloch radius drift over a long run") {
  ModelParams p = pole_flip(0.6);
  p.omega = 0.5;
  IntegrateOptions<3> opt;
  opt.tol = {1e-10, 1e-10};
  const Vec3 s0(0.3, -0.2, 0.1);
  const auto tr = integrate_lmg(p, s0, {0.0, 1000.0}, opt);
  double drift = 0.0;
  for (const auto& s : tr.states) drift = std::max(drift, std::abs(s.norm() - s0.norm()));
  CHECK(drift < 1e-8);
}

TEST_CASE("pole flip settles on the poles") {
  const Vec3 equator(0.5, 0.0, 0.0);
  const auto down = integrate_lmg(pole_flip(0.45), equator, {0.0, 3000.0});
  CHECK(std::abs(down.final_state()[2] + 0.5) < 1e-6);
  const auto up = integrate_lmg(pole_flip(0.8), equator, {0.0, 3000.0});
  CHECK(std::abs(up.final_state()[2] - 0.5) < 1e-6);
}

TEST_CASE("counter-lasing crossings repeat with the atomic period") {
  ModelParams p = pole_flip(0.6);
  p.gamma_down = 0.01;
  const Vec3 s0 = to_cartesian({0.5, std::numbers::pi + 0.001, 0.0}).vec();
  const auto tr = integrate_lmg(p, s0, {0.0, 600.0});
  const auto up = poincare_crossings(tr, Plane{1, 0.0, +1});
  REQUIRE(up.size() > 50);
  for (std::size_t i = up.size() - 20; i < up.size(); ++i) {
    CHECK(std::abs(up[i].t - up[i - 1].t - 2.0 * std::numbers::pi) < 1e-6);
  }
}

TEST_CASE("largest Lyapunov exponent of a sink is negative") {
  ModelParams p;
  p.kappa = 4.0;
  p.omega = 0.5;
  p.omega0 = 0.2;
  p.gamma_down = 0.02;
  p.lambda_minus = 0.3;
  p.lambda_plus = 0.2;
  const auto est = lyapunov_max(p, Vec3(0.05, 0.0, -0.45), 2000.0, 10.0);
  CHECK(est.exponent < 0.0);
  CHECK(est.converged_to_equilibrium);
  CHECK_THROWS_AS(lyapunov_max(p, Vec3(0.05, 0.0, -0.45), 5.0, 10.0), std::invalid_argument);
}
