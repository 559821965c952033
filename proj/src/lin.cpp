#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <optional>

#include <boost/math/tools/roots.hpp>

#include "bvp_internal.hpp"
#include "lmg/integrate.hpp"
#include "lmg/kneading.hpp"
#include "lmg/localbif.hpp"

namespace lmg {

namespace {

struct Saddle {
  Vec3 N, yu, ys, yss;
  double vu = 0.0, vs = 0.0, vss = 0.0;
};

Saddle saddle_data(const ModelParams& p) {
  Equilibrium eq;
  try {
    eq = normal_equilibrium(p);
  } catch (const std::exception& e) {
    throw LinError(e.what());
  }
  for (const auto& e : eq.eigenvalues) {
    if (std::abs(e.imag()) > 1e-12) throw LinError("normal state has complex eigenvalues; a real saddle is required");
  }
  if (!(eq.eigenvalues[0].real() > 0.0 && eq.eigenvalues[1].real() < 0.0)) {
    throw LinError("normal state is not a saddle with one unstable direction");
  }
  Saddle s;
  s.N = eq.state;
  s.vu = eq.eigenvalues[0].real();
  s.vs = eq.eigenvalues[1].real();
  s.vss = eq.eigenvalues[2].real();
  // The branch leaving towards b_x < 0, as in the kneading runs.
  s.yu = -normal_unstable_direction(p).direction;
  s.ys = eq.eigenvectors.col(1).real().normalized();
  if (s.ys[2] < 0.0) s.ys = -s.ys;
  s.yss = eq.eigenvectors.col(2).real().normalized();
  if (s.yss[0] < 0.0) s.yss = -s.yss;
  return s;
}

struct Leg {
  Trajectory<3> tr;
  double T = 0.0;  // duration, positive
  Vec3 start = Vec3::Zero(), end = Vec3::Zero();
  std::string symbols;
};

// Unstable branch up to its first downward section crossing after the symbols of S.
Leg unstable_leg(const ModelParams& p, const Saddle& sd, const std::string& S, const LinOptions& opt) {
  const double w = opt.symbol_halfwidth;
  auto mx = EventSpec<3>::extremum(0, +1);
  mx.exclude = [w](const Vec3& s) { return s[0] <= w; };
  auto mn = EventSpec<3>::extremum(0, -1);
  mn.exclude = [w](const Vec3& s) { return s[0] >= -w; };
  IntegrateOptions<3> io;
  io.events = {mx, mn, EventSpec<3>::plane(2, opt.section_gamma, -1)};
  Leg leg;
  leg.start = sd.N + opt.delta1 * sd.yu;
  for (std::size_t cap = 4 * S.size() + 8;; cap *= 2) {
    io.terminal_total = cap;
    leg.tr = integrate_lmg(p, leg.start, {0.0, opt.horizon}, io);
    std::string sym;
    for (const auto& e : leg.tr.events) {
      if (e.spec < 2) {
        sym += e.spec == 0 ? '1' : '0';
        if (sym.size() > S.size() || sym != S.substr(0, sym.size())) {
          throw LinError("unstable branch follows " + sym + " instead of " + S + " before the section");
        }
        continue;
      }
      if (sym.size() == S.size()) {
        leg.T = e.t;
        leg.end = e.state;
        leg.symbols = sym;
        return leg;
      }
    }
    if (leg.tr.status != IntegrationStatus::StoppedByEvent) {
      throw LinError("unstable branch did not complete " + S + " and reach the section within the horizon");
    }
  }
}

// Reverse-time leg from the end point x2(1) back to its section crossing.
struct Foot {
  Trajectory<3> tr;
  Vec3 x = Vec3::Zero();  // x2(0)
  double T = 0.0;
};

std::optional<Foot> backward_to_section(const ModelParams& p, const Vec3& end, const LinOptions& opt,
                                        const std::function<bool(const Vec3&)>& accept) {
  IntegrateOptions<3> io;
  auto plane = EventSpec<3>::plane(2, opt.section_gamma, 0);
  plane.exclude = [&accept](const Vec3& s) { return !accept(s); };
  plane.terminal_count = 1;
  io.events = {plane};
  // Reverse time is expanding off the attractor; runs that leave the physical region are dropped.
  io.stop = [](double, const Vec3& x) { return x.norm() > 2.0; };
  Foot f;
  f.tr = integrate_lmg(p, end, {0.0, -opt.horizon}, io);
  if (f.tr.events.empty()) return std::nullopt;
  f.x = f.tr.events.front().state;
  f.T = -f.tr.events.front().t;
  return f;
}

// Free scalar of x2 on a logarithmic coordinate q; sign selects the half of the manifold.
struct Target {
  std::function<double(double q)> scalar;
  std::function<Vec3(double s)> end;
  std::function<std::optional<Foot>(double s)> foot;
  double q_lo = -14.0, q_hi = -2.0;  // scan window
  double q_step = 0.05;
};

Eigen::Vector2d xy(const Vec3& v) { return v.head<2>(); }

struct Solved {
  double q = 0.0;
  Foot foot;
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  double gap = 0.0;
};

// Root of g on [a, b] by toms748; g(a), g(b) of opposite sign.
template <class G>
double root_between(G&& g, double a, double b, double ga, double gb) {
  std::uintmax_t iters = 100;
  auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(48), iters);
  return 0.5 * (r.first + r.second);
}

// Foot on the x2 manifold matching x1(1) along the Lin direction. Without a Lin vector the foot is the
// closest point of the manifold curve, and the vector is its normal there.
Solved match_foot(const Target& tg, const Vec3& x1end, const std::optional<Eigen::Vector2d>& v, double q_guess) {
  std::function<std::optional<double>(double)> g;
  const Eigen::Vector2d t = v ? Eigen::Vector2d(-(*v)[1], (*v)[0]) : Eigen::Vector2d::Zero();
  if (v) {
    g = [&](double q) -> std::optional<double> {
      const auto f = tg.foot(tg.scalar(q));
      if (!f) return std::nullopt;
      return (xy(f->x) - xy(x1end)).dot(t);
    };
  } else {
    g = [&](double q) -> std::optional<double> {
      const double h = 1e-4;
      const auto f = tg.foot(tg.scalar(q)), fa = tg.foot(tg.scalar(q - h)), fb = tg.foot(tg.scalar(q + h));
      if (!f || !fa || !fb) return std::nullopt;
      return (xy(f->x) - xy(x1end)).dot(xy(fb->x) - xy(fa->x));
    };
  }
  std::optional<std::pair<double, double>> bracket;
  double ga = 0.0, gb = 0.0;
  if (!v) {
    // Every sign change on the window; the closest foot wins.
    double best = INFINITY;
    std::optional<double> prev_g;
    double prev_q = tg.q_lo;
    for (double q = tg.q_lo; q <= tg.q_hi + 1e-12; q += tg.q_step) {
      const auto gq = g(q);
      if (gq && prev_g && ((*gq > 0) != (*prev_g > 0))) {
        const auto f = tg.foot(tg.scalar(0.5 * (q + prev_q)));
        const double d = f ? (xy(f->x) - xy(x1end)).norm() : INFINITY;
        if (d < best) {
          best = d;
          bracket = std::make_pair(prev_q, q);
          ga = *prev_g;
          gb = *gq;
        }
      }
      prev_g = gq;
      prev_q = q;
    }
  } else {
    // Outward scan from the guess, both sides at equal distance; the nearest sign change wins.
    const double span = tg.q_hi - tg.q_lo;
    const auto g0 = g(q_guess);
    std::array<std::optional<double>, 2> prev_g{g0, g0};
    std::array<double, 2> prev_q{q_guess, q_guess};
    std::array<bool, 2> open{true, true};
    for (double d = tg.q_step; d <= span && !bracket && (open[0] || open[1]); d += tg.q_step) {
      for (int k = 0; k < 2 && !bracket; ++k) {
        if (!open[k]) continue;
        const double q = q_guess + (k == 0 ? d : -d);
        if (q < tg.q_lo || q > tg.q_hi) {
          open[k] = false;
          continue;
        }
        const auto gq = g(q);
        if (gq && prev_g[k] && ((*gq > 0) != (*prev_g[k] > 0))) {
          bracket = std::minmax(prev_q[k], q);
          ga = prev_q[k] < q ? *prev_g[k] : *gq;
          gb = prev_q[k] < q ? *gq : *prev_g[k];
        }
        prev_g[k] = gq;
        prev_q[k] = q;
      }
    }
  }
  if (!bracket) throw LinError("no point of the target manifold on the section matches the unstable branch");
  auto gf = [&](double q) {
    const auto r = g(q);
    if (!r) throw LinError("target manifold leg lost the section");
    return *r;
  };
  Solved s;
  s.q = root_between(gf, bracket->first, bracket->second, ga, gb);
  s.foot = *tg.foot(tg.scalar(s.q));
  if (v) {
    s.v = *v;
  } else {
    const double h = 1e-4;
    const Eigen::Vector2d tan = xy(tg.foot(tg.scalar(s.q + h))->x) - xy(tg.foot(tg.scalar(s.q - h))->x);
    s.v = Eigen::Vector2d(-tan[1], tan[0]).normalized();
    if (s.v[0] < 0.0) s.v = -s.v;
  }
  s.gap = (xy(s.foot.x) - xy(x1end)).dot(s.v);
  return s;
}

OrbitSegment sample(const Trajectory<3>& tr, double t0, double T, int intervals, const std::string& boundary) {
  OrbitSegment seg;
  seg.mesh = uniform_mesh(intervals);
  seg.T = T;
  seg.boundary = boundary;
  for (double s : seg.mesh) seg.states.push_back(tr.at(t0 + s * T));
  return seg;
}

int intervals_for(double T, int minimum, double max_dt) {
  return std::max(minimum, static_cast<int>(std::ceil(std::abs(T) / max_dt)));
}

// Both legs as one multiple-shooting system with unknown durations, free scalar and gap.
void polish(const ModelParams& p, const Saddle& sd, LinProblem& lp, const std::function<Vec3(double)>& end_of,
            const LinOptions& opt) {
  shooting::Layout L;
  L.segments.push_back({lp.x1.mesh, 0, 1.0});
  L.segments.push_back({lp.x2.mesh, 1, 1.0});
  L.scalars = 4;  // T1, T2, free scalar, gap
  VecX z(L.size());
  for (std::size_t i = 0; i < lp.x1.states.size(); ++i) shooting::set3(z, L.node(0, static_cast<int>(i)), lp.x1.states[i]);
  for (std::size_t i = 0; i < lp.x2.states.size(); ++i) shooting::set3(z, L.node(1, static_cast<int>(i)), lp.x2.states[i]);
  z[L.scalar(0)] = lp.x1.T;
  z[L.scalar(1)] = lp.x2.T;
  z[L.scalar(2)] = lp.free_scalar;
  z[L.scalar(3)] = lp.gap;
  const int e1 = L.node(0, static_cast<int>(lp.x1.mesh.size()) - 1);
  const int s2 = L.node(1, 0);
  const int e2 = L.node(1, static_cast<int>(lp.x2.mesh.size()) - 1);
  const Vec3 start = sd.N + opt.delta1 * sd.yu;
  const double c = opt.section_gamma;
  const Eigen::Vector2d v = lp.lin_vector;
  shooting::Extra ex;
  ex.rows = 10;
  ex.f = [=](const VecX& u) {
    VecX r(10);
    r.segment<3>(0) = shooting::get3(u, 0) - start;
    r[3] = u[e1 + 2] - c;
    r.segment<3>(4) = shooting::get3(u, e2) - end_of(u[L.scalar(2)]);
    r[7] = u[s2 + 2] - c;
    r.segment<2>(8) = u.segment<2>(s2) - u.segment<2>(e1) - u[L.scalar(3)] * v;
    return r;
  };
  const auto res = shooting::newton(p, L, z, ex, opt.solve);
  if (!res.converged) throw BvpError("Lin boundary-value problem did not converge", res.z, res.residual);
  for (std::size_t i = 0; i < lp.x1.states.size(); ++i) lp.x1.states[i] = shooting::get3(res.z, L.node(0, static_cast<int>(i)));
  for (std::size_t i = 0; i < lp.x2.states.size(); ++i) lp.x2.states[i] = shooting::get3(res.z, L.node(1, static_cast<int>(i)));
  lp.x1.T = res.z[L.scalar(0)];
  lp.x2.T = res.z[L.scalar(1)];
  lp.free_scalar = res.z[L.scalar(2)];
  lp.gap = res.z[L.scalar(3)];
  lp.x1.residual = lp.x2.residual = res.residual;
}

Target equilibrium_target(const ModelParams& p, const Saddle& sd, const LinOptions& opt, double sign) {
  Target tg;
  tg.scalar = [sign](double q) { return sign * std::pow(10.0, q); };
  tg.end = [sd, d = opt.delta2](double phi) { return Vec3(sd.N + d * (std::cos(phi) * sd.ys + std::sin(phi) * sd.yss)); };
  tg.foot = [p, opt, end = tg.end](double phi) { return backward_to_section(p, end(phi), opt, [](const Vec3&) { return true; }); };
  return tg;
}

struct GapData {
  LinProblem lp;
  double q = 0.0;
};

// Gap of one Lin problem from its initial-value legs; polished as a boundary-value problem on request.
GapData lin_gap(const ModelParams& p, const Saddle& sd, const std::string& S, const Target& tg,
                const std::optional<Eigen::Vector2d>& v, double q_guess, bool do_polish, const LinOptions& opt,
                const std::string& target_name) {
  const Leg leg = unstable_leg(p, sd, S, opt);
  const Solved s = match_foot(tg, leg.end, v, q_guess);
  GapData out;
  out.q = s.q;
  LinProblem& lp = out.lp;
  lp.params = p;
  lp.lin_vector = s.v;
  lp.gap = s.gap;
  lp.free_scalar = tg.scalar(s.q);
  lp.x1 = sample(leg.tr, 0.0, leg.T, intervals_for(leg.T, opt.intervals1, opt.max_interval_time),
                 "x(0) = N + delta1 y_u; gamma(x(1)) = section");
  lp.x2 = sample(s.foot.tr, -s.foot.T, s.foot.T, intervals_for(s.foot.T, opt.intervals2, opt.max_interval_time),
                 "gamma(x(0)) = section; x(1) on " + target_name);
  lp.x1.residual = std::abs(leg.end[2] - opt.section_gamma);
  lp.x2.residual = (s.foot.tr.states.front() - tg.end(lp.free_scalar)).norm();
  if (do_polish) polish(p, sd, lp, tg.end, opt);
  return out;
}

double side_of(const Target& plus, const Target& minus, const Vec3& x1end) {
  const auto a = plus.foot(plus.scalar(-8.0));
  const auto b = minus.foot(minus.scalar(-8.0));
  const double da = a ? (xy(a->x) - xy(x1end)).norm() : INFINITY;
  const double db = b ? (xy(b->x) - xy(x1end)).norm() : INFINITY;
  return da <= db ? 1.0 : -1.0;
}

LinResult finish(const Saddle& sd, const std::string& S, GapData g, std::vector<double> lt, std::vector<double> gt) {
  LinResult r;
  r.lambda_plus = g.lp.params.lambda_plus;
  r.problem = std::move(g.lp);
  r.sequence = S;
  r.lambda_trace = std::move(lt);
  r.gap_trace = std::move(gt);
  r.v_u = sd.vu;
  r.v_s = sd.vs;
  r.v_ss = sd.vss;
  return r;
}

// Natural continuation of the gap on [lo, hi], then Illinois refinement of its zero.
template <class Eval>
LinResult find_zero(const std::string& S, double lo, double hi, const LinOptions& opt, Eval&& eval) {
  if (!(hi > lo)) throw std::invalid_argument("empty lambda_plus window");
  std::vector<double> lt, gt;
  GapData prev = eval(lo, nullptr, false);
  lt.push_back(lo);
  gt.push_back(prev.lp.gap);
  double la = lo, ga = prev.lp.gap;
  GapData a = prev;
  std::optional<std::pair<double, double>> bracket;
  double gb = 0.0;
  GapData b;
  const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / opt.lambda_step)));
  for (int i = 1; i <= n && !bracket; ++i) {
    const double l = lo + (hi - lo) * i / n;
    GapData cur = eval(l, &prev, false);
    lt.push_back(l);
    gt.push_back(cur.lp.gap);
    if ((cur.lp.gap > 0) != (prev.lp.gap > 0)) {
      bracket = std::make_pair(prev.lp.params.lambda_plus, l);
      a = prev;
      la = prev.lp.params.lambda_plus;
      ga = prev.lp.gap;
      b = cur;
      gb = cur.lp.gap;
    }
    prev = std::move(cur);
  }
  if (!bracket) throw LinError("gap of " + S + " has no sign change in the lambda_plus window");
  double lb = bracket->second;
  // A gap that stays large at lambda resolution marks a jump between manifold sheets, not a zero.
  const double closing = std::max(opt.gap_tol, 10.0 * std::abs(gb - ga) / (lb - la) * opt.lambda_tol);
  int side = 0;
  GapData best = std::abs(ga) < std::abs(gb) ? a : b;
  for (int it = 0; it < 100 && std::abs(lb - la) > opt.lambda_tol; ++it) {
    double lc = lb - gb * (lb - la) / (gb - ga);
    if (!(std::min(la, lb) < lc && lc < std::max(la, lb))) lc = 0.5 * (la + lb);
    GapData c = eval(lc, &best, false);
    lt.push_back(lc);
    gt.push_back(c.lp.gap);
    const double gc = c.lp.gap;
    if (std::abs(gc) <= std::abs(best.lp.gap)) best = c;
    if (gc == 0.0) break;
    if ((gc > 0) == (gb > 0)) {
      lb = lc;
      gb = gc;
      if (side == -1) ga *= 0.5;
      side = -1;
    } else {
      la = lc;
      ga = gc;
      if (side == 1) gb *= 0.5;
      side = 1;
    }
  }
  GapData fin = eval(best.lp.params.lambda_plus, &best, true);
  if (!(std::abs(fin.lp.gap) < closing)) {
    throw LinError("gap of " + S + " did not close: " + std::to_string(fin.lp.gap) + " at the refined lambda_plus");
  }
  return finish(saddle_data(fin.lp.params), S, std::move(fin), std::move(lt), std::move(gt));
}

}  // namespace

LinProblem lin_homoclinic_gap(const ModelParams& p, const std::string& sequence, const LinOptions& opt,
                              const LinProblem* previous) {
  if (sequence.empty() || sequence.find_first_not_of("01") != std::string::npos) {
    throw std::invalid_argument("symbol sequence must be a non-empty string of 0 and 1");
  }
  const Saddle sd = saddle_data(p);
  std::optional<Eigen::Vector2d> v;
  double sign = 0.0, q = -8.0;
  if (previous) {
    v = previous->lin_vector;
    sign = previous->free_scalar >= 0.0 ? 1.0 : -1.0;
    q = std::log10(std::max(std::abs(previous->free_scalar), 1e-14));
  }
  if (sign == 0.0) {
    const Leg leg = unstable_leg(p, sd, sequence, opt);
    sign = side_of(equilibrium_target(p, sd, opt, 1.0), equilibrium_target(p, sd, opt, -1.0), leg.end);
  }
  return lin_gap(p, sd, sequence, equilibrium_target(p, sd, opt, sign), v, q, true, opt, "W^s(N)").lp;
}

LinResult lin_find_homoclinic(const ModelParams& p, const std::string& sequence, double lo, double hi,
                              const LinOptions& opt) {
  if (sequence.empty() || sequence.find_first_not_of("01") != std::string::npos) {
    throw std::invalid_argument("symbol sequence must be a non-empty string of 0 and 1");
  }
  auto eval = [&](double l, const GapData* prev, bool pol) {
    const ModelParams q = p.with_lambda_plus(l);
    const Saddle sd = saddle_data(q);
    if (!prev) {
      const Leg leg = unstable_leg(q, sd, sequence, opt);
      const double sign = side_of(equilibrium_target(q, sd, opt, 1.0), equilibrium_target(q, sd, opt, -1.0), leg.end);
      return lin_gap(q, sd, sequence, equilibrium_target(q, sd, opt, sign), std::nullopt, -8.0, pol, opt, "W^s(N)");
    }
    const double sign = prev->lp.free_scalar >= 0.0 ? 1.0 : -1.0;
    return lin_gap(q, sd, sequence, equilibrium_target(q, sd, opt, sign), prev->lp.lin_vector, prev->q, pol, opt, "W^s(N)");
  };
  return find_zero(sequence, lo, hi, opt, eval);
}

namespace {

// Orbit-side half of W^s(orbit): x2(1) = p0 + delta2 w_s with w_s oriented away from the equilibrium
// inside the orbit; the foot is the first reverse-time crossing on the b_x side opposite to the orbit.
Target orbit_target(const ModelParams& p, const PeriodicOrbitSolution& po, const LinOptions& opt, const Vec3& ws) {
  const Vec3 p0 = po.segment.states.front();
  const double side = p0[0] >= 0.0 ? 1.0 : -1.0;
  const LmgField f(p);
  Target tg;
  const double q0 = std::log10(opt.delta2);
  tg.q_lo = q0 + std::min(-0.5, 1.2 * std::log10(std::max(1e-12, std::abs(floquet(po).multipliers[2]))));
  tg.q_hi = q0 + 0.5;
  tg.q_step = 0.01;
  tg.scalar = [](double q) { return std::pow(10.0, q); };
  tg.end = [p0, ws](double d) { return Vec3(p0 + d * ws); };
  tg.foot = [p, opt, end = tg.end, side, f](double d) {
    return backward_to_section(p, end(d), opt, [side, &f](const Vec3& x) { return side * x[0] < 0.0 && f(x)[2] < 0.0; });
  };
  return tg;
}

struct OrbitCache {
  std::deque<PeriodicOrbitSolution> orbits;  // solved along the search

  const PeriodicOrbitSolution& at(const ModelParams& p, const PeriodicOptions& popt) {
    for (const auto& o : orbits) {
      if (o.params.lambda_plus == p.lambda_plus) return o;
    }
    const PeriodicOrbitSolution* near = &orbits.front();
    for (const auto& o : orbits) {
      if (std::abs(o.params.lambda_plus - p.lambda_plus) < std::abs(near->params.lambda_plus - p.lambda_plus)) near = &o;
    }
    PeriodicOrbitSolution o = solve_periodic(p, near->segment.states, near->period, near->symmetric, popt);
    orbits.push_back(std::move(o));
    return orbits.back();
  }
};

PeriodicOrbitSolution on_side(const PeriodicOrbitSolution& seed, int po_side) {
  double mean = 0.0;
  for (const auto& x : seed.segment.states) mean += x[0];
  if ((mean >= 0.0) == (po_side > 0)) return seed;
  PeriodicOrbitSolution o = seed;
  for (auto& x : o.segment.states) x = detail::parity_matrix() * x;
  return o;
}

// Both halves of the stable manifold are tried; the one reaching the section closer to x1(1) wins.
GapData etop_gap(const ModelParams& q, const Saddle& sd, const std::string& prefix, const PeriodicOrbitSolution& po,
                 const std::optional<Eigen::Vector2d>& v, std::optional<double> q_guess, Vec3& ws_ref, bool pol,
                 const LinOptions& opt) {
  Vec3 ws = floquet(po).stable_bundle;
  std::vector<Vec3> tries;
  if (ws_ref.squaredNorm() > 0.0) {
    tries.push_back(ws.dot(ws_ref) >= 0.0 ? ws : Vec3(-ws));
  } else {
    tries = {ws, -ws};
  }
  std::optional<GapData> best;
  std::string why = "no half of the orbit's stable manifold reaches the unstable branch";
  for (const Vec3& w : tries) {
    try {
      GapData g = lin_gap(q, sd, prefix, orbit_target(q, po, opt, w), v, q_guess.value_or(std::log10(opt.delta2)), pol, opt,
                          "W^s(orbit)");
      if (!best || std::abs(g.lp.gap) < std::abs(best->lp.gap)) {
        best = std::move(g);
        ws_ref = w;
      }
    } catch (const LinError& e) {
      why = e.what();
    }
  }
  if (!best) throw LinError(why);
  return *best;
}

}  // namespace

LinProblem lin_etop_gap(const ModelParams& p, const std::string& prefix, const PeriodicOrbitSolution& orbit,
                        const LinOptions& opt, const LinProblem* previous) {
  if (prefix.find_first_not_of("01") != std::string::npos) throw std::invalid_argument("prefix must consist of 0 and 1");
  if (orbit.params.lambda_plus != p.lambda_plus) throw std::invalid_argument("orbit must be solved at the same lambda_plus");
  const Saddle sd = saddle_data(p);
  std::optional<Eigen::Vector2d> v;
  std::optional<double> q;
  if (previous) {
    v = previous->lin_vector;
    q = std::log10(std::abs(previous->free_scalar));
  }
  Vec3 ws_ref = Vec3::Zero();
  return etop_gap(p, sd, prefix, orbit, v, q, ws_ref, true, opt).lp;
}

LinResult lin_find_etop(const ModelParams& p, const std::string& prefix, int po_side, double lo, double hi,
                        const PeriodicOrbitSolution& orbit_seed, const LinOptions& opt) {
  if (prefix.find_first_not_of("01") != std::string::npos) throw std::invalid_argument("prefix must consist of 0 and 1");
  PeriodicOptions popt;
  popt.solve = opt.solve;
  OrbitCache cache;
  {
    // Walk the seed to the window in small parameter steps.
    const PeriodicOrbitSolution seed = on_side(orbit_seed, po_side);
    PeriodicOrbitSolution cur = solve_periodic(seed.params, seed.segment.states, seed.period, seed.symmetric, popt);
    const double l0 = cur.params.lambda_plus;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(lo - l0) / 1e-4)));
    for (int i = 1; i <= n; ++i) {
      cur = solve_periodic(p.with_lambda_plus(l0 + (lo - l0) * i / n), cur.segment.states, cur.period, cur.symmetric, popt);
    }
    cache.orbits.push_back(cur);
  }
  Vec3 ws_ref = Vec3::Zero();
  auto eval = [&](double l, const GapData* prev, bool pol) {
    const ModelParams q = p.with_lambda_plus(l);
    const PeriodicOrbitSolution& po = cache.at(q, popt);
    if (!prev) return etop_gap(q, saddle_data(q), prefix, po, std::nullopt, std::nullopt, ws_ref, pol, opt);
    return etop_gap(q, saddle_data(q), prefix, po, prev->lp.lin_vector, prev->q, ws_ref, pol, opt);
  };
  LinResult r = find_zero(prefix, lo, hi, opt, eval);
  r.sequence = prefix + "(" + (po_side > 0 ? "1" : "0") + ")";
  return r;
}

std::vector<std::pair<double, Vec3>> assemble(const LinProblem& lp) {
  std::vector<std::pair<double, Vec3>> out;
  for (std::size_t i = 0; i < lp.x1.states.size(); ++i) out.emplace_back(lp.x1.T * lp.x1.mesh[i], lp.x1.states[i]);
  for (std::size_t i = 0; i < lp.x2.states.size(); ++i) out.emplace_back(lp.x1.T + lp.x2.T * lp.x2.mesh[i], lp.x2.states[i]);
  return out;
}

}  // namespace lmg
