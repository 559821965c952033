#include "lmg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lmg {

void ModelParams::validate() const {
  if (!(kappa * kappa + omega * omega > 0.0)) {
    throw std::invalid_argument("kappa^2 + omega^2 must be positive");
  }
  if (gamma_down < 0.0 || gamma_up < 0.0) {
    throw std::invalid_argument("atomic rates gamma_down and gamma_up must be non-negative");
  }
}

ReducedParams derive_params(const ModelParams& p) {
  const double denom = p.kappa * p.kappa + p.omega * p.omega;
  ReducedParams r;
  r.xi = p.omega / denom;
  r.eta = p.kappa / denom;
  // The 1/N Lamb-type shift vanishes in the semiclassical limit.
  r.omega0_prime = p.omega0;
  r.mu = 2.0 * r.eta * (p.lambda_plus * p.lambda_plus - p.lambda_minus * p.lambda_minus);
  r.sigma = p.gamma_up + p.gamma_down;
  r.delta = p.gamma_up - p.gamma_down;
  return r;
}

LmgField::LmgField(const ModelParams& p) : params(p) {
  const ReducedParams r = derive_params(p);
  const double lm = p.lambda_minus;
  const double lp = p.lambda_plus;
  mu = r.mu;
  sigma = r.sigma;
  delta = r.delta;
  omega0 = p.omega0;
  rot_minus = 2.0 * r.xi * (lp - lm) * (lp - lm);
  rot_plus = 2.0 * r.xi * (lp + lm) * (lp + lm);
  cross = 4.0 * r.xi * lm * lp;
}

// Real/imaginary split of
//   d beta/dt  = -i w0 b - mu b g - 2i xi (lp^2+lm^2) b g - 4i xi lm lp b* g - sigma b
//   d gamma/dt = mu |b|^2 + 2i xi lm lp (b*^2 - b^2) + delta - 2 sigma g
// with beta = bx - i by.
Vec3 LmgField::operator()(const Vec3& s) const {
  const double bx = s[0], by = s[1], g = s[2];
  const double damp = mu * g + sigma;
  return {-damp * bx - (omega0 + rot_minus * g) * by,
          (omega0 + rot_plus * g) * bx - damp * by,
          mu * (bx * bx + by * by) - 2.0 * cross * bx * by + delta - 2.0 * sigma * g};
}

Mat3 LmgField::jacobian(const Vec3& s) const {
  const double bx = s[0], by = s[1], g = s[2];
  const double damp = mu * g + sigma;
  Mat3 J;
  J << -damp, -(omega0 + rot_minus * g), -mu * bx - rot_minus * by,
      omega0 + rot_plus * g, -damp, rot_plus * bx - mu * by,
      2.0 * mu * bx - 2.0 * cross * by, 2.0 * mu * by - 2.0 * cross * bx, -2.0 * sigma;
  return J;
}

Vec3 LmgField::d_lambda_plus(const Vec3& s) const {
  const ReducedParams r = derive_params(params);
  const double lm = params.lambda_minus;
  const double lp = params.lambda_plus;
  const double dmu = 4.0 * r.eta * lp;
  const double drot_minus = 4.0 * r.xi * (lp - lm);
  const double drot_plus = 4.0 * r.xi * (lp + lm);
  const double dcross = 4.0 * r.xi * lm;
  const double bx = s[0], by = s[1], g = s[2];
  return {-dmu * g * bx - drot_minus * g * by,
          drot_plus * g * bx - dmu * g * by,
          dmu * (bx * bx + by * by) - 2.0 * dcross * bx * by};
}

SpinState lmg_rhs(const SpinState& s, const ModelParams& p) {
  return SpinState::from(LmgField(p)(s.vec()));
}

SphericalState spherical_rhs(const SphericalState& s, const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.xi != 0.0) {
    throw ChartError("spherical chart requires the strong dissipative limit (xi = 0)");
  }
  if (s.r < 1e-12) {
    throw ChartError("spherical chart is singular at r = 0");
  }
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  SphericalState d;
  d.r = r.delta * c - r.sigma * s.r * c * c - r.sigma * s.r;
  d.theta = -(r.mu * s.r - r.sigma * c + r.delta / s.r) * sn;
  d.phi = p.omega0;
  return d;
}

SphericalState to_spherical(const SpinState& s) {
  SphericalState out;
  out.r = std::sqrt(s.bx * s.bx + s.by * s.by + s.gamma * s.gamma);
  if (out.r < 1e-12) {
    throw ChartError("spherical chart is singular at r = 0");
  }
  out.theta = std::acos(std::clamp(s.gamma / out.r, -1.0, 1.0));
  double phi = std::atan2(s.by, s.bx);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  out.phi = phi;
  return out;
}

SpinState to_cartesian(const SphericalState& s) {
  const double st = std::sin(s.theta);
  return {s.r * st * std::cos(s.phi), s.r * st * std::sin(s.phi), s.r * std::cos(s.theta)};
}

DickeState dicke_rhs(const DickeState& s, const ModelParams& p) {
  const cplx I(0.0, 1.0);
  const cplx a = s.alpha();
  const cplx b = s.beta();
  const double g = s.gamma;
  const double lm = p.lambda_minus;
  const double lp = p.lambda_plus;
  const double sigma = p.gamma_up + p.gamma_down;
  const cplx da = -(p.kappa + I * p.omega) * a - I * lm * b - I * lp * std::conj(b);
  const cplx db = -I * p.omega0 * b + 2.0 * I * lm * a * g + 2.0 * I * lp * std::conj(a) * g - sigma * b;
  const cplx dg = I * lm * (std::conj(a) * b - a * std::conj(b)) + I * lp * (a * b - std::conj(a) * std::conj(b));
  DickeState d;
  d.alpha_re = da.real();
  d.alpha_im = da.imag();
  d.bx = db.real();
  d.by = -db.imag();
  d.gamma = dg.real() - 2.0 * p.gamma_down * (0.5 + g) + 2.0 * p.gamma_up * (0.5 - g);
  return d;
}

Vec5 dicke_rhs(const Vec5& s, const ModelParams& p) {
  return dicke_rhs(DickeState::from(s), p).vec();
}

cplx slave_field(cplx beta, const ModelParams& p) {
  const cplx I(0.0, 1.0);
  return -I * (p.lambda_minus * beta + p.lambda_plus * std::conj(beta)) / cplx(p.kappa, p.omega);
}

double photon_number(const SpinState& s, const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  const cplx b = s.beta();
  const double lm = p.lambda_minus;
  const double lp = p.lambda_plus;
  const double value = (r.xi * r.xi + r.eta * r.eta) *
                       ((lm * lm + lp * lp) * std::norm(b) + lm * lp * 2.0 * (b * b).real());
  // Algebraically |lm b + lp b*|^2 times a positive factor; clip round-off below zero.
  return std::max(0.0, value);
}

Observables observables(const SpinState& s, const ModelParams& p) {
  return {photon_number(s, p), p.omega0 * s.gamma};
}

SpinState parity(const SpinState& s) { return {-s.bx, -s.by, s.gamma}; }

SpinState u1_rotate(const SpinState& s, double angle) {
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  return {c * s.bx - sn * s.by, sn * s.bx + c * s.by, s.gamma};
}

DickeState parity(const DickeState& s) { return {-s.alpha_re, -s.alpha_im, -s.bx, -s.by, s.gamma}; }

}  // namespace lmg
