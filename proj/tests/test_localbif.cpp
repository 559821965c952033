#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "lmg/integrate.hpp"
#include "lmg/localbif.hpp"

using namespace lmg;
using doctest::Approx;

namespace {

ModelParams plane_params(double lm, double lp) {
  ModelParams p;
  p.kappa = 4.0;
  p.omega = 0.5;
  p.omega0 = 0.2;
  p.gamma_down = 0.02;
  p.lambda_minus = lm;
  p.lambda_plus = lp;
  return p;
}

ModelParams strong(double lm, double lp, double gdown) {
  ModelParams p;
  p.kappa = 5.0;
  p.omega = 0.0;
  p.omega0 = 1.0;
  p.gamma_down = gdown;
  p.lambda_minus = lm;
  p.lambda_plus = lp;
  return p;
}

// Independent oracle: beta != 0 equilibria need det of the (b_x, b_y) block to vanish, which is a
// quadratic in gamma; the kernel gives the direction and the gamma equation the modulus.
std::vector<Vec3> closed_form_superradiant(const ModelParams& p) {
  const LmgField f(p);
  const double a = f.mu * f.mu + f.rot_minus * f.rot_plus;
  const double b = 2.0 * f.mu * f.sigma + f.omega0 * (f.rot_minus + f.rot_plus);
  const double c = f.sigma * f.sigma + f.omega0 * f.omega0;
  const double disc = b * b - 4.0 * a * c;
  std::vector<Vec3> out;
  std::vector<double> gammas;
  if (std::abs(a) < 1e-14) {
    gammas.push_back(-c / b);
  } else if (disc >= 0.0) {
    gammas = {(-b - std::sqrt(disc)) / (2.0 * a), (-b + std::sqrt(disc)) / (2.0 * a)};
  }
  for (double g : gammas) {
    const double d = f.mu * g + f.sigma;
    const double A = f.omega0 + f.rot_minus * g;
    Eigen::Vector2d dir(-A, d);
    dir.normalize();
    const double rho2 = (2.0 * f.sigma * g - f.delta) / (f.mu - 2.0 * f.cross * dir[0] * dir[1]);
    if (rho2 <= 0.0) continue;
    const double rho = std::sqrt(rho2);
    Vec3 x(rho * dir[0], rho * dir[1], g);
    if (x[0] < 0) x = -x + Vec3(0, 0, 2 * g);
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("normal equilibrium") {
  ModelParams p = plane_params(1.0, 1.0);
  CHECK(normal_equilibrium(p).state[2] == -0.5);
  p.gamma_up = 0.02;
  CHECK(normal_equilibrium(p).state[2] == 0.0);
  p.gamma_up = 0.03;
  p.gamma_down = 0.01;
  CHECK(normal_equilibrium(p).state[2] == Approx(0.25).epsilon(1e-15));
  p.gamma_up = p.gamma_down = 0.0;
  CHECK_THROWS_AS(normal_equilibrium(p), DegenerateEquilibriumError);
}

TEST_CASE("strong-dissipative eigenvalues") {
  for (double lp : {0.3, 0.5, 0.9}) {
    const ModelParams p = strong(0.5, lp, 0.01);
    const auto r = derive_params(p);
    const auto e = normal_equilibrium(p);
    const double g = e.state[2];
    const double re = -r.mu * g - r.sigma;
    for (const cplx expected : {cplx(re, 1.0), cplx(re, -1.0), cplx(-2.0 * r.sigma, 0.0)}) {
      double best = 1.0;
      for (const auto& v : e.eigenvalues) best = std::min(best, std::abs(v - expected));
      CHECK(best < 1e-10);
    }
  }
  // Without atomic rates every gamma-axis point has eigenvalues -mu g +- i w0 and 0.
  const ModelParams p = strong(0.5, 0.7, 0.0);
  const auto r = derive_params(p);
  const auto e = analyze_equilibrium(Vec3(0.0, 0.0, -0.3), p, EquilibriumLabel::Normal);
  CHECK(std::abs(e.eigenvalues[0] - cplx(0.3 * r.mu, 1.0)) < 1e-12);
  CHECK(std::abs(e.eigenvalues[2]) < 1e-12);
  CHECK(e.stability == Stability::NonHyperbolic);
}

TEST_CASE("superradiant equilibria match the closed form") {
  struct Case {
    double lm, lp;
    std::size_t pairs;
  };
  for (const auto& c : {Case{1.5, 1.45, 1}, Case{1.5, 1.5, 1}, Case{2.0, 1.9, 1}, Case{3.0, 2.70, 2},
                        Case{1.5, 1.0, 0}, Case{0.1, 0.1, 0}, Case{3.0, 3.0, 1}}) {
    CAPTURE(c.lm);
    CAPTURE(c.lp);
    const ModelParams p = plane_params(c.lm, c.lp);
    const auto eq = superradiant_equilibria(p);
    const auto oracle = closed_form_superradiant(p);
    REQUIRE(oracle.size() == c.pairs);
    REQUIRE(eq.size() == 2 * c.pairs);
    const LmgField f(p);
    for (std::size_t k = 0; k < eq.size(); k += 2) {
      CHECK(eq[k].label == EquilibriumLabel::SuperradiantPlus);
      CHECK(eq[k + 1].label == EquilibriumLabel::SuperradiantMinus);
      CHECK(eq[k + 1].state == parity(SpinState::from(eq[k].state)).vec());
      CHECK(f(eq[k].state).lpNorm<Eigen::Infinity>() < 1e-12);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(eq[k].eigenvalues[j] - eq[k + 1].eigenvalues[j]) < 1e-12);
      double best = 1.0;
      for (const auto& o : oracle) best = std::min(best, (o - eq[k].state).norm());
      CHECK(best < 1e-10);
    }
  }
}

TEST_CASE("superradiant phase at an SR probe point") {
  const auto eq = superradiant_equilibria(plane_params(1.5, 1.45));
  REQUIRE(eq.size() == 2);
  CHECK(eq[0].stable());
  CHECK(eq[1].stable());
  CHECK_FALSE(normal_equilibrium(plane_params(1.5, 1.45)).stable());
}

TEST_CASE("coexistence wedge has two superradiant pairs") {
  const ModelParams p = plane_params(3.0, 2.70);
  const auto eq = superradiant_equilibria(p);
  REQUIRE(eq.size() == 4);
  int stable = 0, saddles = 0;
  for (const auto& e : eq) {
    stable += e.stable();
    saddles += e.stability == Stability::Saddle;
  }
  CHECK(stable == 2);
  CHECK(saddles == 2);
  CHECK(normal_equilibrium(p).stable());
  std::vector<SeedOutcome> report;
  superradiant_equilibria(p, &report);
  CHECK(report.size() == 24);
}

TEST_CASE("Hopf curve") {
  const ModelParams p = strong(0.5, 0.0, 0.01);
  const auto lp = hopf_lambda_plus(p);
  REQUIRE(lp);
  CHECK(*lp == Approx(std::sqrt(0.30)).epsilon(1e-14));
  const auto lp0 = hopf_lambda_plus(p.with_lambda_minus(0.0));
  REQUIRE(lp0);
  CHECK(*lp0 == Approx(0.01 / std::sqrt(0.2 * 0.01)).epsilon(1e-14));

  std::vector<double> grid;
  for (double lm = 0.0; lm <= 2.0; lm += 0.1) grid.push_back(lm);
  for (const auto& pt : hopf_curve(p, grid)) {
    const auto e = normal_equilibrium(p.with_lambda_minus(pt.lambda_minus).with_lambda_plus(pt.lambda_plus));
    CHECK(std::abs(e.eigenvalues[0] - cplx(0.0, 1.0)) < 1e-10);
    CHECK(std::abs(e.eigenvalues[1] - cplx(0.0, -1.0)) < 1e-10);
  }
  // xi != 0: the pair is still purely imaginary at the crossing.
  for (const auto& pt : hopf_curve(plane_params(0.0, 0.0), grid)) {
    const auto e = normal_equilibrium(plane_params(pt.lambda_minus, pt.lambda_plus));
    CHECK(std::abs(e.eigenvalues[0].real()) < 1e-12);
    CHECK(e.eigenvalues[0].imag() > 1e-3);
    CHECK(std::abs(bialternate_test(jacobian(SpinState::from(e.state), plane_params(pt.lambda_minus, pt.lambda_plus)))) <
          1e-9);
  }
  ModelParams q = p;
  q.gamma_down = q.gamma_up = 0.01;
  CHECK_FALSE(hopf_lambda_plus(q).has_value());
}

TEST_CASE("pitchfork curve") {
  const auto roots = pitchfork_lambda_plus(plane_params(1.5, 0.0));
  REQUIRE(roots.size() == 2);
  CHECK(roots[0] == Approx(1.38012).epsilon(1e-5));
  CHECK(roots[1] == Approx(1.71909).epsilon(1e-5));
  std::vector<double> grid;
  for (double lm = 0.0; lm <= 3.0; lm += 0.25) grid.push_back(lm);
  for (const auto& pt : pitchfork_curve(plane_params(0.0, 0.0), grid)) {
    const ModelParams p = plane_params(pt.lambda_minus, pt.lambda_plus);
    const Mat3 J = jacobian(SpinState::from(normal_equilibrium(p).state), p);
    CHECK(std::abs(J.determinant()) < 1e-10);
  }

  // Oracle: bisection on the stability of the normal equilibrium.
  // Below lambda_minus ~ 1.25 the normal state loses stability through the Hopf curve instead.
  CHECK(pitchfork_lambda_plus(plane_params(1.0, 0.0)).empty());
  for (double lm : {1.5, 2.0, 3.0}) {
    const auto lps = pitchfork_lambda_plus(plane_params(lm, 0.0));
    REQUIRE(lps.size() == 2);
    for (double root : lps) {
      double lo = root - 0.02, hi = root + 0.02;
      auto stable = [&](double lp) { return normal_equilibrium(plane_params(lm, lp)).stable(); };
      auto saddle1 = [&](double lp) { return normal_equilibrium(plane_params(lm, lp)).unstable_dim; };
      const int d_lo = saddle1(lo);
      REQUIRE(d_lo != saddle1(hi));
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (saddle1(mid) == d_lo ? lo : hi) = mid;
      }
      CHECK(std::abs(0.5 * (lo + hi) - root) < 1e-7);
      if (root == lps[0] && lm == 1.5) {
        CHECK(stable(root - 1e-4));
        CHECK_FALSE(stable(root + 1e-4));
      }
    }
  }

  // xi = 0 with delta < 0: pitchfork and Hopf root sets are disjoint.
  const ModelParams s = strong(0.5, 0.0, 0.01);
  const auto h = hopf_lambda_plus(s);
  for (double r : pitchfork_lambda_plus(s)) CHECK(std::abs(r - *h) > 1e-3);
}

TEST_CASE("saddle-node slopes") {
  const auto s = saddlenode_lines(plane_params(0.0, 0.0));
  CHECK(s.inner_minus > 0.0);
  CHECK(s.inner_plus > 0.0);
  CHECK(s.inner_minus == Approx(0.8933253).epsilon(1e-6));
  CHECK(s.inner_plus == Approx(1.1477526).epsilon(1e-6));

  ModelParams p = plane_params(0.0, 0.0);
  p.omega0 = 1e-10;
  const auto lim = saddlenode_lines(p);
  CHECK(lim.inner_minus == Approx(1.0).epsilon(1e-5));
  CHECK(lim.inner_plus == Approx(1.0).epsilon(1e-5));

  // Oracle: the two gamma roots of the closed form merge on the fold lines.
  for (double slope : {s.inner_minus, s.inner_plus}) {
    const ModelParams q = plane_params(2.0, 2.0 * slope);
    const LmgField f(q);
    const double a = f.mu * f.mu + f.rot_minus * f.rot_plus;
    const double b = 2.0 * f.mu * f.sigma + f.omega0 * (f.rot_minus + f.rot_plus);
    const double c = f.sigma * f.sigma + f.omega0 * f.omega0;
    CHECK(std::abs(b * b - 4.0 * a * c) < 1e-12);
  }

  ModelParams degenerate = plane_params(0.0, 0.0);
  const auto r = derive_params(degenerate);
  degenerate.omega0 = r.xi * r.sigma / r.eta;
  CHECK_THROWS_AS(saddlenode_lines(degenerate), std::domain_error);
}

TEST_CASE("bialternate product") {
  Mat3 J;
  J << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0;
  CHECK(std::abs(bialternate_test(J)) < 1e-15);
  const Mat3 D = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
  CHECK(bialternate_test(D) == Approx(60.0));
  // Pairwise-sum property on a random non-normal matrix.
  Mat3 R;
  R << 0.3, -1.2, 0.5, 0.7, -0.4, 0.9, -0.2, 0.6, 0.1;
  Eigen::EigenSolver<Mat3> a(R), b(bialternate_product(R));
  std::vector<cplx> sums;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) sums.push_back(a.eigenvalues()[i] + a.eigenvalues()[j]);
  for (int k = 0; k < 3; ++k) {
    double best = 1.0;
    for (const auto& s : sums) best = std::min(best, std::abs(s - b.eigenvalues()[k]));
    CHECK(best < 1e-12);
  }
}

TEST_CASE("periodic orbit geometry") {
  const ModelParams p = strong(0.5, 1.0, 0.01);
  const auto g = po_geometry(p);
  CHECK(derive_params(p).mu == Approx(0.3));
  CHECK(std::cos(g.theta_po) == Approx(-0.18570).epsilon(1e-4));
  CHECK(g.r_po == Approx(0.17951).epsilon(1e-4));
  CHECK(g.gamma_po == Approx(-1.0 / 30.0).epsilon(1e-12));
  CHECK(g.max_bx == Approx(0.17638).epsilon(1e-4));
  CHECK(g.period == Approx(2.0 * std::numbers::pi));

  // Relative equilibrium of the rotating-frame equations.
  const auto d = spherical_rhs({g.r_po, g.theta_po, 0.3}, p);
  CHECK(std::abs(d.r) < 1e-12);
  CHECK(std::abs(d.theta) < 1e-12);

  // At the Hopf point the orbit collapses onto the normal equilibrium.
  const auto lp_h = *hopf_lambda_plus(p);
  const auto gh = po_geometry(p.with_lambda_plus(lp_h));
  CHECK(gh.max_bx < 1e-6);
  CHECK(gh.gamma_po == Approx(normal_equilibrium(p).state[2]).epsilon(1e-12));
  CHECK_THROWS_AS(po_geometry(p.with_lambda_plus(0.52)), NoOrbitError);
  CHECK_THROWS_AS(po_geometry(plane_params(0.5, 1.0)), std::invalid_argument);

  // Every orbit of a mu-sweep lies on the spheroid centred at gamma_eq / 2.
  const auto [a, b] = spheroid_axes(p);
  CHECK(std::abs(a) == Approx(0.25));
  CHECK(std::abs(b) == Approx(0.35355).epsilon(1e-4));
  const double centre = normal_equilibrium(p).state[2] / 2.0;
  for (double lp = 0.56; lp < 3.0; lp += 0.1) {
    const auto o = po_geometry(p.with_lambda_plus(lp));
    const double gz = o.gamma_po - centre;
    CHECK(std::abs(o.max_bx * o.max_bx / (b * b) + gz * gz / (a * a) - 1.0) < 1e-10);
  }
  ModelParams sym = p;
  sym.gamma_up = 0.01;
  const auto [a0, b0] = spheroid_axes(sym);
  CHECK(a0 == 0.0);
  CHECK(b0 == 0.0);
}

TEST_CASE("orbit geometry against integration") {
  const ModelParams p = strong(0.5, 1.0, 0.01);
  const auto g = po_geometry(p);
  const Vec3 s0 = to_cartesian({0.5, std::numbers::pi - 0.2, 0.0}).vec();
  IntegrateOptions<3> opt;
  opt.keep_dense = false;
  opt.keep_states = false;
  const auto pre = integrate_lmg(p, s0, {0.0, 3000.0}, opt);
  IntegrateOptions<3> win;
  win.events = {EventSpec<3>::extremum(0, +1)};
  const auto tr = integrate_lmg(p, pre.final_state(), {3000.0, 3000.0 + 4 * g.period}, win);
  REQUIRE(tr.events.size() >= 3);
  const auto& last = tr.events.back();
  CHECK(last.value == Approx(g.max_bx).epsilon(1e-6));
  CHECK(last.state[2] == Approx(g.gamma_po).epsilon(1e-6));
  CHECK((last.t - tr.events[tr.events.size() - 2].t) == Approx(g.period).epsilon(1e-8));
}

TEST_CASE("phase classification basics") {
  CHECK(classify_phase(plane_params(0.1, 0.1)).label == PhaseLabel::N);
  CHECK(classify_phase(plane_params(1.5, 1.45)).label == PhaseLabel::SR);
  CHECK(classify_phase(plane_params(3.0, 2.70)).label == PhaseLabel::NSR);
  const auto lp = *hopf_lambda_plus(plane_params(0.5, 0.0));
  const auto cl = classify_phase(plane_params(0.5, lp + 0.1));
  CHECK(cl.label == PhaseLabel::CL);
  CHECK_FALSE(cl.inconclusive);
  ModelParams lasing = plane_params(0.5, 0.0);
  lasing.gamma_down = 0.0;
  lasing.gamma_up = 0.02;
  lasing.lambda_minus = *hopf_lambda_plus(lasing.with_lambda_minus(0.0)) + 0.3;
  lasing.lambda_plus = 0.0;
  CHECK(classify_phase(lasing).label == PhaseLabel::L);
  ModelParams none = plane_params(0.5, 0.5);
  none.gamma_down = 0.0;
  CHECK(classify_phase(none).inconclusive);
}
