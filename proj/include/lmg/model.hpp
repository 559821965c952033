#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Core>

namespace lmg {

using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat3 = Eigen::Matrix3d;
using cplx = std::complex<double>;

/// Physical rates and couplings of the unbalanced Dicke model.
struct ModelParams {
  double omega = 0.0;         // cavity frequency
  double omega0 = 1.0;        // atomic splitting
  double kappa = 1.0;         // cavity decay
  double lambda_minus = 0.0;  // co-rotating coupling
  double lambda_plus = 0.0;   // counter-rotating coupling
  double gamma_down = 0.0;    // spontaneous emission
  double gamma_up = 0.0;      // incoherent pumping

  /// Throws std::invalid_argument when the rates are negative or kappa = omega = 0.
  void validate() const;

  ModelParams with_lambda_plus(double lp) const {
    ModelParams p = *this;
    p.lambda_plus = lp;
    return p;
  }
  ModelParams with_lambda_minus(double lm) const {
    ModelParams p = *this;
    p.lambda_minus = lm;
    return p;
  }

  bool operator==(const ModelParams&) const = default;
};

/// Derived parameters of the adiabatically eliminated (LMG) model.
struct ReducedParams {
  double xi = 0.0;            // omega / (kappa^2 + omega^2)
  double eta = 0.0;           // kappa / (kappa^2 + omega^2)
  double omega0_prime = 0.0;  // omega0 - xi (lm^2 - lp^2); finite-N shift, informational only
  double mu = 0.0;            // 2 eta (lp^2 - lm^2)
  double sigma = 0.0;         // gamma_up + gamma_down
  double delta = 0.0;         // gamma_up - gamma_down
};

ReducedParams derive_params(const ModelParams& p);

/// Cartesian point (b_x, b_y, gamma) with beta = b_x - i b_y.
struct SpinState {
  double bx = 0.0;
  double by = 0.0;
  double gamma = 0.0;

  Vec3 vec() const { return {bx, by, gamma}; }
  static SpinState from(const Vec3& v) { return {v[0], v[1], v[2]}; }
  cplx beta() const { return {bx, -by}; }
};

struct SphericalState {
  double r = 0.0;
  double theta = 0.0;  // polar angle from +gamma, [0, pi]
  double phi = 0.0;    // azimuth from +b_x, [0, 2 pi)
};

/// Five-dimensional semiclassical Dicke state (alpha, beta, gamma).
struct DickeState {
  double alpha_re = 0.0;
  double alpha_im = 0.0;
  double bx = 0.0;
  double by = 0.0;
  double gamma = 0.0;

  Vec5 vec() const {
    Vec5 v;
    v << alpha_re, alpha_im, bx, by, gamma;
    return v;
  }
  static DickeState from(const Vec5& v) { return {v[0], v[1], v[2], v[3], v[4]}; }
  cplx alpha() const { return {alpha_re, alpha_im}; }
  cplx beta() const { return {bx, -by}; }
  SpinState spin() const { return {bx, by, gamma}; }
};

struct Observables {
  double photon_number = 0.0;
  double energy_per_atom = 0.0;
};

class ChartError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Precomputed coefficients of the LMG vector field. Cheap to copy; used on hot paths.
struct LmgField {
  explicit LmgField(const ModelParams& p);

  // d/dt (bx, by, gamma)
  Vec3 operator()(const Vec3& s) const;
  Mat3 jacobian(const Vec3& s) const;
  // Partial derivative of the field with respect to lambda_plus.
  Vec3 d_lambda_plus(const Vec3& s) const;

  ModelParams params;
  double mu, sigma, delta, omega0;
  double rot_minus;  // 2 xi (lp - lm)^2, gamma-dependent rotation on the b_y -> b_x coupling
  double rot_plus;   // 2 xi (lp + lm)^2
  double cross;      // 4 xi lm lp
};

SpinState lmg_rhs(const SpinState& s, const ModelParams& p);

/// Rotating-frame field in spherical coordinates; only defined when xi = 0.
SphericalState spherical_rhs(const SphericalState& s, const ModelParams& p);

SphericalState to_spherical(const SpinState& s);
SpinState to_cartesian(const SphericalState& s);

DickeState dicke_rhs(const DickeState& s, const ModelParams& p);
Vec5 dicke_rhs(const Vec5& s, const ModelParams& p);

/// Steady state of the cavity equation for a given atomic coherence.
cplx slave_field(cplx beta, const ModelParams& p);

double photon_number(const SpinState& s, const ModelParams& p);
Observables observables(const SpinState& s, const ModelParams& p);

SpinState parity(const SpinState& s);
SpinState u1_rotate(const SpinState& s, double angle);
DickeState parity(const DickeState& s);

}  // namespace lmg
