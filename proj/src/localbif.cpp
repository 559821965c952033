#include "lmg/localbif.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "lmg/integrate.hpp"

namespace lmg {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Sink: return "sink";
    case Stability::Saddle: return "saddle";
    case Stability::Source: return "source";
    case Stability::NonHyperbolic: return "non-hyperbolic";
  }
  return "?";
}

const char* to_string(EquilibriumLabel l) {
  switch (l) {
    case EquilibriumLabel::Normal: return "normal";
    case EquilibriumLabel::SuperradiantPlus: return "superradiant-plus";
    case EquilibriumLabel::SuperradiantMinus: return "superradiant-minus";
  }
  return "?";
}

const char* to_string(PhaseLabel l) {
  switch (l) {
    case PhaseLabel::N: return "N";
    case PhaseLabel::SR: return "SR";
    case PhaseLabel::NSR: return "N+SR";
    case PhaseLabel::CL: return "CL";
    case PhaseLabel::L: return "L";
    case PhaseLabel::Transitional: return "transitional";
  }
  return "?";
}

double zero_threshold(const std::array<cplx, 3>& ev) {
  double radius = 0.0;
  for (const auto& v : ev) radius = std::max(radius, std::abs(v));
  return 1e-9 * std::max(1.0, radius);
}

Mat3 jacobian(const SpinState& s, const ModelParams& p) { return LmgField(p).jacobian(s.vec()); }

Equilibrium analyze_equilibrium(const Vec3& x, const ModelParams& p, EquilibriumLabel label) {
  Equilibrium e;
  e.state = x;
  e.label = label;
  Eigen::EigenSolver<Mat3> es(LmgField(p).jacobian(x));
  std::array<int, 3> order{0, 1, 2};
  const auto& vals = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (vals[a].real() != vals[b].real()) return vals[a].real() > vals[b].real();
    return vals[a].imag() > vals[b].imag();
  });
  for (int k = 0; k < 3; ++k) {
    e.eigenvalues[k] = vals[order[k]];
    e.eigenvectors.col(k) = es.eigenvectors().col(order[k]);
  }
  const double thr = zero_threshold(e.eigenvalues);
  int unstable = 0;
  bool zero = false;
  for (const auto& v : e.eigenvalues) {
    if (std::abs(v.real()) <= thr) zero = true;
    else if (v.real() > 0.0) ++unstable;
  }
  e.unstable_dim = unstable;
  if (zero) e.stability = Stability::NonHyperbolic;
  else if (unstable == 0) e.stability = Stability::Sink;
  else if (unstable == 3) e.stability = Stability::Source;
  else e.stability = Stability::Saddle;
  return e;
}

Equilibrium normal_equilibrium(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.sigma <= 0.0) {
    throw DegenerateEquilibriumError("sigma = 0: the whole gamma-axis is a manifold of equilibria");
  }
  return analyze_equilibrium(Vec3(0.0, 0.0, r.delta / (2.0 * r.sigma)), p, EquilibriumLabel::Normal);
}

namespace {

constexpr double kNewtonTol = 1e-14;
constexpr double kResidualTol = 1e-12;
constexpr double kNormalBeta = 1e-7;
constexpr double kSameRoot = 1e-8;

SeedOutcome damped_newton(const LmgField& f, const Vec3& seed) {
  SeedOutcome out;
  out.seed = seed;
  Vec3 x = seed;
  Vec3 fx = f(x);
  double res = fx.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 200; ++it) {
    out.iterations = it;
    if (res < kNewtonTol) break;
    const Eigen::FullPivLU<Mat3> lu(f.jacobian(x));
    if (!lu.isInvertible()) break;
    const Vec3 dx = lu.solve(-fx);
    double step = 1.0;
    Vec3 xn = x + dx;
    Vec3 fn = f(xn);
    while (fn.lpNorm<Eigen::Infinity>() >= res && step > 1e-6) {
      step *= 0.5;
      xn = x + step * dx;
      fn = f(xn);
    }
    if (fn.lpNorm<Eigen::Infinity>() >= res) break;  // stagnation, possibly at round-off level
    x = xn;
    fx = fn;
    res = fx.lpNorm<Eigen::Infinity>();
  }
  out.end = x;
  out.residual = res;
  out.converged = res < kResidualTol && x.allFinite();
  return out;
}

std::vector<Vec3> seed_grid() {
  // Parity-reduced: b_x > 0 half-space, 8 directions on each sphere.
  std::vector<Vec3> seeds;
  const double pi = std::numbers::pi;
  for (double r : {0.1, 0.25, 0.4}) {
    for (double theta : {pi / 3.0, 2.0 * pi / 3.0}) {
      for (double phi : {-3.0 * pi / 8.0, -pi / 8.0, pi / 8.0, 3.0 * pi / 8.0}) {
        seeds.emplace_back(r * std::sin(theta) * std::cos(phi), r * std::sin(theta) * std::sin(phi),
                           r * std::cos(theta));
      }
    }
  }
  return seeds;
}

}  // namespace

std::vector<Equilibrium> superradiant_equilibria(const ModelParams& p, std::vector<SeedOutcome>* report) {
  const LmgField f(p);
  std::vector<Vec3> roots;
  for (const Vec3& seed : seed_grid()) {
    SeedOutcome o = damped_newton(f, seed);
    if (report) report->push_back(o);
    if (!o.converged) continue;
    Vec3 x = o.end;
    if (std::hypot(x[0], x[1]) < kNormalBeta) continue;
    if (x[0] < 0.0 || (x[0] == 0.0 && x[1] < 0.0)) x = parity(SpinState::from(x)).vec();
    const bool seen = std::any_of(roots.begin(), roots.end(),
                                  [&](const Vec3& r) { return (r - x).lpNorm<Eigen::Infinity>() < kSameRoot; });
    if (!seen) roots.push_back(x);
  }
  // Deterministic order: by gamma, then b_x.
  std::sort(roots.begin(), roots.end(), [](const Vec3& a, const Vec3& b) {
    if (a[2] != b[2]) return a[2] < b[2];
    return a[0] < b[0];
  });
  std::vector<Equilibrium> out;
  for (const Vec3& x : roots) {
    out.push_back(analyze_equilibrium(x, p, EquilibriumLabel::SuperradiantPlus));
    out.push_back(analyze_equilibrium(parity(SpinState::from(x)).vec(), p, EquilibriumLabel::SuperradiantMinus));
  }
  return out;
}

std::optional<double> hopf_lambda_plus(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.delta == 0.0 || r.eta == 0.0) return std::nullopt;
  const double lm = p.lambda_minus;
  const double lp2 = lm * lm - r.sigma * r.sigma / (r.eta * r.delta);
  if (lp2 < 0.0) return std::nullopt;
  const double lp = std::sqrt(lp2);
  // The pair must be complex at the crossing, otherwise the zero sum is a real +-a pair.
  const LmgField f(p.with_lambda_plus(lp));
  const double g = r.delta / (2.0 * r.sigma);
  if ((f.omega0 + f.rot_minus * g) * (f.omega0 + f.rot_plus * g) <= 0.0) return std::nullopt;
  return lp;
}

std::vector<CurvePoint> hopf_curve(const ModelParams& p, const std::vector<double>& lambda_minus) {
  std::vector<CurvePoint> out;
  for (double lm : lambda_minus) {
    if (auto lp = hopf_lambda_plus(p.with_lambda_minus(lm))) out.push_back({lm, *lp});
  }
  return out;
}

std::vector<double> pitchfork_lambda_plus(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.sigma <= 0.0) throw DegenerateEquilibriumError("pitchfork condition needs sigma > 0");
  const double g = r.delta / (2.0 * r.sigma);
  const double lm = p.lambda_minus;
  // det of the (b_x, b_y) block as a quadratic in u = lp^2 - lm^2
  const double a = 4.0 * g * g * (r.eta * r.eta + r.xi * r.xi);
  const double b = 4.0 * g * (r.eta * r.sigma + r.xi * p.omega0);
  const double c = r.sigma * r.sigma + p.omega0 * p.omega0 + 8.0 * g * r.xi * p.omega0 * lm * lm;
  std::vector<double> us;
  if (a == 0.0) {
    if (b != 0.0) us.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return {};
    const double s = std::sqrt(disc);
    // Cancellation-free pair.
    const double q = -0.5 * (b + std::copysign(s, b));
    us.push_back(q / a);
    if (q != 0.0) us.push_back(c / q);
  }
  std::vector<double> out;
  for (double u : us) {
    const double lp2 = u + lm * lm;
    if (lp2 < 0.0) continue;
    const double lp = std::sqrt(lp2);
    const Equilibrium e = normal_equilibrium(p.with_lambda_plus(lp));
    int zeros = 0;
    for (const auto& v : e.eigenvalues) {
      if (std::abs(v) < 1e-8 * std::max(1.0, std::abs(e.eigenvalues[0]) + std::abs(e.eigenvalues[2]))) ++zeros;
    }
    if (zeros == 1) out.push_back(lp);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CurvePoint> pitchfork_curve(const ModelParams& p, const std::vector<double>& lambda_minus) {
  std::vector<CurvePoint> out;
  for (double lm : lambda_minus) {
    for (double lp : pitchfork_lambda_plus(p.with_lambda_minus(lm))) out.push_back({lm, lp});
  }
  return out;
}

SaddleNodeSlopes saddlenode_lines(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  const double w = p.omega0;
  const double den = r.xi * r.sigma - r.eta * w;
  if (std::abs(den) < 1e-15) throw std::domain_error("saddle-node slope denominator vanishes");
  const double base = r.xi * r.xi * r.sigma * r.sigma + w * w * (r.eta * r.eta + 2.0 * r.xi * r.xi);
  const double nested =
      2.0 * r.xi * w * std::sqrt((r.eta * r.eta + r.xi * r.xi) * (r.sigma * r.sigma + w * w));
  SaddleNodeSlopes s;
  s.inner_minus = std::sqrt(std::max(0.0, base - nested)) / std::abs(den);
  s.inner_plus = std::sqrt(base + nested) / std::abs(den);
  return s;
}

Mat3 bialternate_product(const Mat3& J) {
  Mat3 B;
  B << J(0, 0) + J(1, 1), J(1, 2), -J(0, 2),
       J(2, 1), J(0, 0) + J(2, 2), J(0, 1),
       -J(2, 0), J(1, 0), J(1, 1) + J(2, 2);
  return B;
}

double bialternate_test(const Mat3& J) { return bialternate_product(J).determinant(); }

POGeometry po_geometry(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.xi != 0.0) throw std::invalid_argument("po_geometry requires xi = 0");
  const double disc = -(r.delta * r.mu + r.sigma * r.sigma);
  // The orbit leaves the gamma-axis at -delta mu = 2 sigma^2 (the Hopf point).
  if (r.mu == 0.0 || disc <= 0.0 || -r.delta * r.mu < 2.0 * r.sigma * r.sigma * (1.0 - 1e-12)) {
    throw NoOrbitError("no circular orbit: parameters are before the Hopf bifurcation");
  }
  POGeometry g;
  g.r_po = std::sqrt(disc) / std::abs(r.mu);
  g.gamma_po = -r.sigma / r.mu;
  g.theta_po = std::acos(std::clamp(g.gamma_po / g.r_po, -1.0, 1.0));
  g.max_bx = std::sqrt(std::max(0.0, g.r_po * g.r_po - g.gamma_po * g.gamma_po));
  g.period = 2.0 * std::numbers::pi / p.omega0;
  return g;
}

std::pair<double, double> spheroid_axes(const ModelParams& p) {
  const ReducedParams r = derive_params(p);
  if (r.sigma <= 0.0) throw std::invalid_argument("spheroid_axes requires sigma > 0");
  return {r.delta / (4.0 * r.sigma), r.delta / (2.0 * std::numbers::sqrt2 * r.sigma)};
}

namespace {

enum class Asymptotics { Periodic, Equilibrium, Irregular };

Asymptotics forward_asymptotics(const ModelParams& p, const Vec3& start, const ClassifyOptions& opt,
                                std::string& note) {
  const LmgField f(p);
  IntegrateOptions<3> io;
  io.tol = opt.tol;
  Vec3 x = start;
  double t = 0.0;
  double span = opt.transient;
  while (t < opt.max_time) {
    io.keep_dense = false;
    io.keep_states = false;
    io.events.clear();
    const auto pre = integrate_lmg(p, x, {t, t + span}, io);
    if (!pre.ok()) {
      note = std::string("integration failed: ") + to_string(pre.status);
      return Asymptotics::Irregular;
    }
    x = pre.final_state();
    t += span;
    if (f(x).norm() < 1e-9) {
      note = "trajectory converged to an equilibrium";
      return Asymptotics::Equilibrium;
    }
    io.events = {EventSpec<3>::extremum(0, +1)};
    const auto win = integrate_lmg(p, x, {t, t + opt.window}, io);
    x = win.final_state();
    t += opt.window;
    std::vector<double> maxima;
    for (const auto& e : win.events) maxima.push_back(e.value);
    if (maxima.size() >= 4) {
      const auto [lo, hi] = std::minmax_element(maxima.begin(), maxima.end());
      const double scale = std::max(std::abs(*lo), std::abs(*hi));
      if (scale > 1e-6 && (*hi - *lo) <= opt.periodic_rtol * scale) {
        note = "periodic attractor, max b_x = " + std::to_string(*hi);
        return Asymptotics::Periodic;
      }
    }
    span = opt.transient;
  }
  note = "no periodic or equilibrium attractor within the horizon";
  return Asymptotics::Irregular;
}

}  // namespace

PhaseResult classify_phase(const ModelParams& p, const ClassifyOptions& opt) {
  PhaseResult res;
  Equilibrium normal;
  try {
    normal = normal_equilibrium(p);
  } catch (const DegenerateEquilibriumError& e) {
    res.inconclusive = true;
    res.note = e.what();
    return res;
  }
  res.gamma_eq = normal.state[2];
  res.leading_eigenvalue = normal.leading();
  const auto sr = superradiant_equilibria(p);
  const bool sr_stable = std::any_of(sr.begin(), sr.end(), [](const Equilibrium& e) { return e.stable(); });
  if (normal.stable()) {
    res.label = sr_stable ? PhaseLabel::NSR : PhaseLabel::N;
    return res;
  }
  if (sr_stable) {
    res.label = PhaseLabel::SR;
    return res;
  }
  if (normal.stability == Stability::NonHyperbolic) {
    res.inconclusive = true;
    res.note = "normal equilibrium is non-hyperbolic";
    return res;
  }
  const Vec3 start = normal.state + Vec3(opt.perturbation, opt.perturbation, 0.0);
  const Asymptotics a = forward_asymptotics(p, start, opt, res.note);
  if (a == Asymptotics::Periodic) {
    res.label = derive_params(p).delta < 0.0 ? PhaseLabel::CL : PhaseLabel::L;
  } else {
    res.label = PhaseLabel::Transitional;
    res.inconclusive = true;
  }
  return res;
}

void write_phase_csv(std::ostream& os, const std::vector<PhaseRow>& rows) {
  os << "lambda_minus,lambda_plus,label,gamma_eq,leading_eigenvalue_re,leading_eigenvalue_im\n";
  const auto prec = os.precision(12);
  for (const auto& r : rows) {
    os << r.lambda_minus << ',' << r.lambda_plus << ',' << to_string(r.result.label) << ',' << r.result.gamma_eq
       << ',' << r.result.leading_eigenvalue.real() << ',' << r.result.leading_eigenvalue.imag() << '\n';
  }
  os.precision(prec);
}

void write_curve_csv(std::ostream& os, const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves) {
  os << "lambda_minus,lambda_plus,curve_id\n";
  const auto prec = os.precision(12);
  for (const auto& [id, pts] : curves) {
    for (const auto& c : pts) os << c.lambda_minus << ',' << c.lambda_plus << ',' << id << '\n';
  }
  os.precision(prec);
}

}  // namespace lmg
