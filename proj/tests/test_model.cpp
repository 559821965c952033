#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lmg/model.hpp"
#include "lmg/params_io.hpp"

using namespace lmg;
using doctest::Approx;

namespace {

ModelParams cut_params() {
  ModelParams p;
  p.kappa = 4.0;
  p.omega = 0.5;
  p.omega0 = 0.2;
  p.gamma_down = 0.02;
  p.gamma_up = 0.0;
  p.lambda_minus = 1.5;
  p.lambda_plus = 1.53;
  return p;
}

SpinState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  return {u(rng), u(rng), u(rng)};
}

double max_diff(const SpinState& a, const SpinState& b) {
  return std::max({std::abs(a.bx - b.bx), std::abs(a.by - b.by), std::abs(a.gamma - b.gamma)});
}

}  // namespace

TEST_CASE("reduced parameters") {
  ModelParams p;
  p.kappa = 5.0;
  p.omega = 0.0;
  auto r = derive_params(p);
  CHECK(r.xi == 0.0);
  CHECK(r.eta == Approx(0.2).epsilon(1e-15));

  p.kappa = 4.0;
  p.omega = 0.5;
  r = derive_params(p);
  CHECK(r.xi == Approx(0.5 / 16.25).epsilon(1e-15));
  CHECK(r.eta == Approx(4.0 / 16.25).epsilon(1e-15));

  p.gamma_up = p.gamma_down = 0.01;
  r = derive_params(p);
  CHECK(r.sigma == Approx(0.02));
  CHECK(r.delta == 0.0);
}

TEST_CASE("parameter validation") {
  ModelParams p;
  p.kappa = 0.0;
  p.omega = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.kappa = 1.0;
  p.gamma_down = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("lmg field fixtures") {
  ModelParams p = cut_params();
  p.gamma_down = p.gamma_up = 0.0;
  const auto d0 = lmg_rhs({0.0, 0.0, 0.3}, p);
  CHECK(d0.bx == 0.0);
  CHECK(d0.by == 0.0);
  CHECK(d0.gamma == 0.0);

  p.gamma_down = 0.02;
  const auto d1 = lmg_rhs({0.0, 0.0, -0.3}, p);
  CHECK(d1.bx == 0.0);
  CHECK(d1.by == 0.0);
  CHECK(d1.gamma == Approx(-0.008).epsilon(1e-14));
}

TEST_CASE("lmg field matches the complex form") {
  // Oracle: the beta/gamma equations evaluated in complex arithmetic.
  std::mt19937_64 rng(7);
  const ModelParams p = cut_params();
  const auto r = derive_params(p);
  const cplx I(0.0, 1.0);
  const double lm = p.lambda_minus, lp = p.lambda_plus;
  for (int i = 0; i < 100; ++i) {
    const SpinState s = random_state(rng);
    const cplx b = s.beta();
    const double g = s.gamma;
    const cplx db = -I * p.omega0 * b - r.mu * b * g - 2.0 * I * r.xi * (lp * lp + lm * lm) * b * g -
                    4.0 * I * r.xi * lm * lp * std::conj(b) * g - r.sigma * b;
    const cplx dg = r.mu * std::norm(b) + 2.0 * I * r.xi * lm * lp * (std::conj(b) * std::conj(b) - b * b) +
                    r.delta - 2.0 * r.sigma * g;
    const auto d = lmg_rhs(s, p);
    CHECK(d.bx == Approx(db.real()).epsilon(1e-13));
    CHECK(-d.by == Approx(db.imag()).epsilon(1e-13));
    CHECK(d.gamma == Approx(dg.real()).epsilon(1e-13));
    CHECK(std::abs(dg.imag()) < 1e-15);
  }
}

TEST_CASE("Bloch radius is conserved without atomic rates") {
  std::mt19937_64 rng(11);
  ModelParams p = cut_params();
  p.gamma_down = p.gamma_up = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SpinState s = random_state(rng);
    const auto d = lmg_rhs(s, p);
    CHECK(std::abs(s.bx * d.bx + s.by * d.by + s.gamma * d.gamma) < 1e-15);
  }
}

TEST_CASE("Z2 and U(1) equivariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  ModelParams p = cut_params();
  double worst_z2 = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SpinState s = random_state(rng);
    worst_z2 = std::max(worst_z2, max_diff(lmg_rhs(parity(s), p), parity(lmg_rhs(s, p))));
  }
  CHECK(worst_z2 < 1e-12);

  double worst_xi = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SpinState s = random_state(rng);
    const double phi = ang(rng);
    worst_xi = std::max(worst_xi, max_diff(lmg_rhs(u1_rotate(s, phi), p), u1_rotate(lmg_rhs(s, p), phi)));
  }
  CHECK(worst_xi > 1e-6);

  p.omega = 0.0;
  double worst_u1 = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SpinState s = random_state(rng);
    const double phi = ang(rng);
    worst_u1 = std::max(worst_u1, max_diff(lmg_rhs(u1_rotate(s, phi), p), u1_rotate(lmg_rhs(s, p), phi)));
  }
  CHECK(worst_u1 < 1e-12);
}

TEST_CASE("parity and rotation") {
  const SpinState s{0.1, -0.2, 0.3};
  CHECK(max_diff(parity(parity(s)), s) == 0.0);
  CHECK(max_diff(u1_rotate(s, 0.0), s) == 0.0);
  CHECK(max_diff(u1_rotate(s, std::numbers::pi), parity(s)) < 1e-16);
  // beta -> e^{-i phi} beta
  const cplx rotated = u1_rotate(s, 0.7).beta();
  const cplx expected = std::exp(cplx(0.0, -0.7)) * s.beta();
  CHECK(std::abs(rotated - expected) < 1e-15);
}

TEST_CASE("Jacobian matches central differences") {
  std::mt19937_64 rng(5);
  const ModelParams p = cut_params();
  const LmgField f(p);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_state(rng).vec();
    const Mat3 J = f.jacobian(x);
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = 1e-6;
      const Vec3 col = (f(x + e) - f(x - e)) / 2e-6;
      CHECK((J.col(k) - col).cwiseAbs().maxCoeff() < 1e-8);
    }
    const double h = 1e-6;
    const Vec3 dl = (LmgField(p.with_lambda_plus(p.lambda_plus + h))(x) -
                     LmgField(p.with_lambda_plus(p.lambda_plus - h))(x)) / (2 * h);
    CHECK((f.d_lambda_plus(x) - dl).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("spherical chart") {
  ModelParams p = cut_params();
  CHECK_THROWS_AS(spherical_rhs({0.3, 1.0, 0.0}, p), ChartError);
  p.omega = 0.0;
  CHECK_THROWS_AS(spherical_rhs({0.0, 1.0, 0.0}, p), ChartError);
  CHECK_THROWS_AS(to_spherical({0.0, 0.0, 0.0}), ChartError);

  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const SpinState s = random_state(rng);
    const auto sph = to_spherical(s);
    CHECK(max_diff(to_cartesian(sph), s) < 1e-14);
    CHECK(sph.phi >= 0.0);
    CHECK(sph.phi < 2.0 * std::numbers::pi);

    // Chain rule: push lmg_rhs forward through the chart.
    const auto d = lmg_rhs(s, p);
    const double r = sph.r;
    const double rho2 = s.bx * s.bx + s.by * s.by;
    const double dr = (s.bx * d.bx + s.by * d.by + s.gamma * d.gamma) / r;
    const double dtheta = -(d.gamma * r - s.gamma * dr) / (r * r * std::sin(sph.theta));
    const double dphi = (s.bx * d.by - s.by * d.bx) / rho2;
    const auto ds = spherical_rhs(sph, p);
    CHECK(ds.r == Approx(dr).epsilon(1e-12));
    CHECK(std::abs(ds.theta - dtheta) < 1e-12);
    CHECK(ds.phi == Approx(dphi).epsilon(1e-12));
    CHECK(ds.phi == p.omega0);
  }

  p.gamma_down = p.gamma_up = 0.0;
  const auto d = spherical_rhs({0.4, 1.1, 2.0}, p);
  const auto r = derive_params(p);
  CHECK(d.r == 0.0);
  CHECK(d.theta == Approx(-r.mu * 0.4 * std::sin(1.1)).epsilon(1e-14));
  CHECK(spherical_rhs({0.4, 0.0, 2.0}, p).theta == 0.0);
}

TEST_CASE("pole flip conserves energy when the couplings balance") {
  ModelParams p;
  p.kappa = 5.0;
  p.omega0 = 1.0;
  p.lambda_minus = p.lambda_plus = 0.5;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const SpinState s = random_state(rng);
    CHECK(lmg_rhs(s, p).gamma == 0.0);
  }
}

TEST_CASE("Dicke equations and slaving") {
  ModelParams p = cut_params();
  p.gamma_down = p.gamma_up = 0.0;
  const auto zero = dicke_rhs(DickeState{0.0, 0.0, 0.0, 0.0, 0.17}, p);
  CHECK(zero.vec().cwiseAbs().maxCoeff() == 0.0);

  const double bx = 0.3;
  const auto d = dicke_rhs(DickeState{0.0, 0.0, bx, 0.0, -0.2}, p);
  CHECK(d.alpha_re == Approx(0.0));
  CHECK(d.alpha_im == Approx(-(p.lambda_minus + p.lambda_plus) * bx).epsilon(1e-15));

  ModelParams q;
  q.lambda_minus = q.lambda_plus = 1.0;
  q.kappa = 1.0;
  q.omega = 0.0;
  const cplx a = slave_field(cplx(1.0, 0.0), q);
  CHECK(std::abs(a - cplx(0.0, -2.0)) < 1e-15);
  CHECK(slave_field(cplx(0.0, 0.0), q) == cplx(0.0, 0.0));

  std::mt19937_64 rng(13);
  p = cut_params();
  double worst = 0.0;
  double worst_photon = 0.0;
  double worst_z2 = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SpinState s = random_state(rng);
    const cplx alpha = slave_field(s.beta(), p);
    // Oracle: the slaved field annihilates the cavity equation.
    const DickeState ds{alpha.real(), alpha.imag(), s.bx, s.by, s.gamma};
    const auto dd = dicke_rhs(ds, p);
    CHECK(std::hypot(dd.alpha_re, dd.alpha_im) < 1e-14);
    worst = std::max(worst, max_diff(dd.spin(), lmg_rhs(s, p)));
    worst_photon = std::max(worst_photon, std::abs(std::norm(alpha) - photon_number(s, p)));
    worst_z2 = std::max(worst_z2, (dicke_rhs(parity(ds), p).vec() - parity(dd).vec()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK(worst_photon < 1e-14);
  CHECK(worst_z2 < 1e-15);
}

TEST_CASE("photon number") {
  ModelParams p;
  p.kappa = 5.0;
  p.lambda_minus = 1.0;
  p.lambda_plus = 0.0;
  CHECK(photon_number({0.0, 0.0, 0.1}, p) == 0.0);
  CHECK(photon_number({0.5, 0.0, 0.0}, p) == Approx(0.01).epsilon(1e-14));
  CHECK(photon_number({0.3, 0.4, 0.0}, p) == Approx(0.01).epsilon(1e-14));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    ModelParams q;
    q.kappa = std::abs(u(rng)) + 0.01;
    q.omega = u(rng);
    q.lambda_minus = u(rng);
    q.lambda_plus = u(rng);
    CHECK(photon_number(random_state(rng), q) >= 0.0);
  }
  const auto obs = observables({0.0, 0.0, -0.25}, cut_params());
  CHECK(obs.energy_per_atom == Approx(-0.05));
}

TEST_CASE("parameter text round trip") {
  const ModelParams p = cut_params();
  const ModelParams q = parse_params(format_params(p));
  CHECK(q == p);

  std::map<std::string, std::string> extra;
  const auto r = parse_params("# comment\nkappa = 2\nlambda_plus=0.7  # trailing\nhorizon = 50\n", &extra);
  CHECK(r.kappa == 2.0);
  CHECK(r.lambda_plus == 0.7);
  CHECK(extra.at("horizon") == "50");
  CHECK_THROWS_AS(parse_params("bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_params("kappa = x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_params("gamma_down = -1\n"), std::invalid_argument);
}
