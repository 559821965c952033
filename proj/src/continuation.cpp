#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bvp_internal.hpp"
#include "lmg/localbif.hpp"

namespace lmg {

const char* to_string(BifurcationKind k) {
  switch (k) {
    case BifurcationKind::Hopf: return "Hopf";
    case BifurcationKind::Fold: return "fold";
    case BifurcationKind::PitchforkEq: return "pitchfork-eq";
    case BifurcationKind::PeriodDoubling: return "PD";
    case BifurcationKind::PitchforkPO: return "PPO";
    case BifurcationKind::FoldPO: return "fold-PO";
    case BifurcationKind::Homoclinic: return "homoclinic";
    case BifurcationKind::EtoP: return "EtoP";
  }
  return "?";
}

namespace {

using shooting::Extra;
using shooting::Layout;
using shooting::Result;

// Branch problem in the unknown z; lambda_plus is the scalar L.lambda_index.
struct ArcProblem {
  ModelParams p;
  Layout L;
  std::function<Extra(const VecX& zref)> conditions;  // all rows except continuity
  VecX weights;
  int tests = 0;
  int arc_tests = 0;  // bit k: test k is refined along the secant instead of at fixed lambda
  std::function<VecX(const Result&)> test_values;
  std::function<std::optional<std::string>(const Result&)> stop;
  SolveOptions solve;

  int lambda() const { return L.scalar(L.lambda_index); }
};

// conditions(zref) plus one linear row a . z - b.
Extra with_row(const ArcProblem& pr, const VecX& zref, const VecX& a, double b) {
  Extra base = pr.conditions(zref);
  Extra e;
  e.rows = base.rows + 1;
  e.f = [base, a, b](const VecX& z) {
    VecX r(base.rows + 1);
    r.head(base.rows) = base.f(z);
    r[base.rows] = a.dot(z) - b;
    return r;
  };
  e.jac = [base, a](const VecX& z) {
    MatX J(base.rows + 1, z.size());
    J.topRows(base.rows) = base.jac(z);
    J.row(base.rows) = a.transpose();
    return J;
  };
  return e;
}

Result solve_row(const ArcProblem& pr, const VecX& guess, const VecX& zref, const VecX& a, double b) {
  return shooting::newton(pr.p, pr.L, guess, with_row(pr, zref, a, b), pr.solve);
}

// Unit tangent (weighted norm) from the Jacobian whose last row is the orientation row.
VecX tangent_from(const ArcProblem& pr, const MatX& J) {
  VecX rhs = VecX::Zero(J.rows());
  rhs[J.rows() - 1] = 1.0;
  VecX t = shooting::solve_linear_system(J, rhs);
  return t / std::sqrt(t.dot(pr.weights.cwiseProduct(t)));
}

Result solve_fixed(const ArcProblem& pr, const VecX& guess, double lambda) {
  VecX a = VecX::Zero(guess.size());
  a[pr.lambda()] = 1.0;
  return solve_row(pr, guess, guess, a, lambda);
}

struct ArcEvent {
  int test = 0;
  Result at;
  bool refined = false;
  double lambda = 0.0;
};

struct ArcRun {
  std::vector<Result> points;
  std::vector<ArcEvent> events;
  std::string end_reason;
};

// Illinois iteration in the secant coordinate s between A (s = 0) and B (s = 1); stays well posed at folds.
ArcEvent refine_on_secant(const ArcProblem& pr, const Result& A, const Result& B, int k, double tol) {
  const int li = pr.lambda();
  const VecX dz = B.z - A.z;
  const VecX a = pr.weights.cwiseProduct(dz);
  const double scale = dz.lpNorm<Eigen::Infinity>();
  double sa = 0.0, sb = 1.0;
  double ga = pr.test_values(A)[k], gb = pr.test_values(B)[k];
  ArcEvent ev;
  ev.test = k;
  ev.at = std::abs(ga) < std::abs(gb) ? A : B;
  ev.lambda = ev.at.z[li];
  double best = std::min(std::abs(ga), std::abs(gb));
  int side = 0;
  for (int it = 0; it < 80 && (sb - sa) * scale >= tol; ++it) {
    double sc = sb - gb * (sb - sa) / (gb - ga);
    if (!(sa < sc && sc < sb)) sc = 0.5 * (sa + sb);
    const VecX guess = A.z + sc * dz;
    Result r = solve_row(pr, guess, A.z, a, a.dot(guess));
    if (!r.converged) break;
    const double gc = pr.test_values(r)[k];
    if (std::abs(gc) <= best) {
      best = std::abs(gc);
      ev.at = r;
      ev.lambda = r.z[li];
    }
    if (gc == 0.0) break;
    if ((gc > 0) == (gb > 0)) {
      sb = sc;
      gb = gc;
      if (side == -1) ga *= 0.5;
      side = -1;
    } else {
      sa = sc;
      ga = gc;
      if (side == 1) gb *= 0.5;
      side = 1;
    }
  }
  ev.refined = (sb - sa) * scale < tol || best == 0.0;
  return ev;
}

// Illinois iteration on the test function in lambda_plus at fixed parameter.
ArcEvent refine_event(const ArcProblem& pr, const Result& A, const Result& B, int k, double tol) {
  if (pr.arc_tests & (1 << k)) return refine_on_secant(pr, A, B, k, tol);
  const int li = pr.lambda();
  double la = A.z[li], lb = B.z[li];
  double ga = pr.test_values(A)[k], gb = pr.test_values(B)[k];
  const VecX za = A.z, zb = B.z;
  ArcEvent ev;
  ev.test = k;
  ev.at = std::abs(ga) < std::abs(gb) ? A : B;
  ev.lambda = ev.at.z[li];
  if (la == lb) return ev;
  int side = 0;
  double best = std::min(std::abs(ga), std::abs(gb));
  // Iterate past the lambda tolerance while the test function still improves.
  for (int it = 0; it < 60; ++it) {
    double lc = lb - gb * (lb - la) / (gb - ga);
    if (!(std::min(la, lb) < lc && lc < std::max(la, lb))) lc = 0.5 * (la + lb);
    const VecX guess = za + (lc - A.z[li]) / (B.z[li] - A.z[li]) * (zb - za);
    Result r = solve_fixed(pr, guess, lc);
    if (!r.converged) break;
    const double gc = pr.test_values(r)[k];
    if (std::abs(gc) <= best) {
      best = std::abs(gc);
      ev.at = r;
      ev.lambda = lc;
    }
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
    if (std::abs(lb - la) < 1e-15 * std::max(1.0, std::abs(lb))) break;
    if (std::abs(lb - la) < tol && best < 1e-12) break;
  }
  ev.refined = std::abs(lb - la) < tol || best == 0.0;
  return ev;
}

ArcRun run_arc(const ArcProblem& pr, const Result& start, VecX t, const ContinuationOptions& opt,
               std::vector<Result> prefix = {}) {
  ArcRun run;
  run.points = std::move(prefix);
  run.points.push_back(start);
  const int li = pr.lambda();
  double ds = opt.ds;
  VecX tests_prev = opt.detect_events && pr.tests > 0 ? pr.test_values(start) : VecX();
  for (int step = 0; step < opt.max_steps; ++step) {
    const Result& prev = run.points.back();
    const VecX a = pr.weights.cwiseProduct(t);
    Result r;
    bool ok = false;
    VecX tn;
    while (!ok) {
      const VecX pred = prev.z + ds * t;
      r = solve_row(pr, pred, prev.z, a, a.dot(prev.z) + ds);
      if (r.converged) {
        tn = tangent_from(pr, r.J);
        // Sharp turns mean a jump to another branch.
        if (tn.allFinite() && tn.dot(pr.weights.cwiseProduct(t)) > 0.9) ok = true;
      }
      if (!ok) {
        ds *= 0.5;
        if (ds < opt.ds_min) {
          run.end_reason = "step size collapse";
          return run;
        }
      }
    }
    if (r.iterations <= 3) ds = std::min(1.5 * ds, opt.ds_max);
    else if (r.iterations > 6) ds *= 0.7;
    t = tn;
    if (opt.detect_events && pr.tests > 0) {
      const VecX tv = pr.test_values(r);
      for (int k = 0; k < pr.tests; ++k) {
        if (std::signbit(tv[k]) != std::signbit(tests_prev[k]) && std::isfinite(tv[k]) && std::isfinite(tests_prev[k])) {
          run.events.push_back(refine_event(pr, run.points.back(), r, k, opt.event_tol));
        }
      }
      tests_prev = tv;
    }
    run.points.push_back(std::move(r));
    const Result& cur = run.points.back();
    const double lam = cur.z[li];
    if (lam < opt.lambda_min || lam > opt.lambda_max) {
      run.end_reason = "lambda_plus range left";
      return run;
    }
    if (pr.stop) {
      if (auto why = pr.stop(cur)) {
        run.end_reason = *why;
        return run;
      }
    }
  }
  run.end_reason = "step limit";
  return run;
}

VecX initial_tangent(const ArcProblem& pr, const Result& at, const VecX& guess) {
  const VecX a = pr.weights.cwiseProduct(guess);
  VecX F;
  MatX J;
  shooting::evaluate(pr.p, pr.L, at.z, with_row(pr, at.z, a, a.dot(at.z)), pr.solve.ode_tol, F, &J, nullptr);
  return tangent_from(pr, J);
}

// ---------------------------------------------------------------------------------------------
// Equilibria

ArcProblem equilibrium_problem(const ModelParams& p, const ContinuationOptions& opt, const Vec3& x0) {
  ArcProblem pr;
  pr.p = p;
  pr.L.scalars = 4;
  pr.L.lambda_index = 3;
  pr.conditions = [p](const VecX&) {
    Extra e;
    e.rows = 3;
    e.f = [p](const VecX& z) { return VecX(LmgField(p.with_lambda_plus(z[3]))(z.head<3>())); };
    e.jac = [p](const VecX& z) {
      const LmgField f(p.with_lambda_plus(z[3]));
      MatX J(3, 4);
      J.leftCols<3>() = f.jacobian(z.head<3>());
      J.col(3) = f.d_lambda_plus(z.head<3>());
      return J;
    };
    return e;
  };
  pr.weights = VecX::Ones(4);
  pr.weights[3] = 1.0 / (opt.lambda_scale * opt.lambda_scale);
  pr.tests = 2;
  pr.arc_tests = 1;
  pr.test_values = [p](const Result& r) {
    const Mat3 J = LmgField(p.with_lambda_plus(r.z[3])).jacobian(r.z.head<3>());
    VecX v(2);
    v << J.determinant(), bialternate_test(J);
    return v;
  };
  if (std::hypot(x0[0], x0[1]) > 1e-12) {
    // A beta != 0 branch ends where it reaches the normal state or steps across it.
    const Eigen::Vector2d b0 = x0.head<2>();
    pr.stop = [b0](const Result& r) -> std::optional<std::string> {
      const Eigen::Vector2d b = r.z.head<2>();
      if (b.norm() < 1e-5 || b.dot(b0) < 0.0) return std::string("merged with the normal state");
      return std::nullopt;
    };
  }
  pr.solve = opt.periodic.solve;
  return pr;
}

EquilibriumPoint eq_point(const ModelParams& p, const VecX& z) {
  EquilibriumPoint e;
  e.lambda_plus = z[3];
  e.x = z.head<3>();
  const auto a = analyze_equilibrium(e.x, p.with_lambda_plus(z[3]), EquilibriumLabel::Normal);
  e.eigenvalues = a.eigenvalues;
  e.unstable_dim = a.unstable_dim;
  return e;
}

std::optional<BifurcationEvent> classify_eq_event(const ModelParams& p, const ArcEvent& ev, const std::string& id) {
  BifurcationEvent b;
  b.branch = id;
  b.lambda_plus = ev.lambda;
  b.state = ev.at.z.head<3>();
  const Mat3 J = LmgField(p.with_lambda_plus(ev.lambda)).jacobian(b.state);
  Eigen::EigenSolver<Mat3> es(J);
  const auto e = es.eigenvalues();
  std::ostringstream d;
  d.precision(12);
  if (ev.test == 0) {
    int k = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(e[i]) < std::abs(e[k])) k = i;
    }
    b.value = e[k];
    b.kind = std::hypot(b.state[0], b.state[1]) < 1e-8 ? BifurcationKind::PitchforkEq : BifurcationKind::Fold;
    d << "eigenvalue " << e[k].real() << (ev.refined ? "" : " (unrefined)");
  } else {
    int a = 0, c = 1;
    double best = INFINITY;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        if (std::abs((e[i] + e[j]).real()) < best) {
          best = std::abs((e[i] + e[j]).real());
          a = i;
          c = j;
        }
      }
    }
    // A real pair with zero sum is a neutral saddle, not a Hopf point.
    if (std::abs(e[a].imag()) < 1e-9) return std::nullopt;
    b.kind = BifurcationKind::Hopf;
    b.value = e[a].imag() > 0 ? e[a] : e[c];
    d << "eigenvalue " << b.value.real() << (b.value.imag() >= 0 ? "+" : "") << b.value.imag() << "i"
      << (ev.refined ? "" : " (unrefined)");
  }
  b.diagnostics = d.str();
  return b;
}

// ---------------------------------------------------------------------------------------------
// Periodic orbits

ArcProblem orbit_problem(const ModelParams& p, int intervals, bool symmetric, double T0, const ContinuationOptions& opt) {
  ArcProblem pr;
  pr.p = p;
  pr.L = detail::periodic_layout(intervals, symmetric, true);
  const Layout L = pr.L;
  pr.conditions = [p, L, symmetric](const VecX& zref) {
    const ModelParams q = p.with_lambda_plus(zref[L.scalar(1)]);
    return detail::periodic_conditions(q, L, symmetric, shooting::get3(zref, 0));
  };
  const int n = L.size();
  pr.weights = VecX::Constant(n, 1.0 / (intervals + 1));
  pr.weights[L.scalar(0)] = 1.0 / (T0 * T0);
  pr.weights[L.scalar(1)] = 1.0 / (opt.lambda_scale * opt.lambda_scale);
  pr.tests = symmetric ? 3 : 2;
  pr.test_values = [p, L, symmetric](const Result& r) {
    const auto po = detail::make_orbit(p, L, r.z, r.jets[0], symmetric, r.residual);
    VecX v(symmetric ? 3 : 2);
    if (symmetric) {
      cplx ppo = 1.0;
      for (int k = 0; k < 3; ++k) {
        if (k != po.trivial) ppo *= po.half_multipliers[k] + 1.0;
      }
      v << ppo.real(), detail::pd_test(po), detail::fold_test(po);
    } else {
      v << detail::pd_test(po), detail::fold_test(po);
    }
    return v;
  };
  const double max_period = opt.max_period;
  pr.stop = [L, max_period, intervals](const Result& r) -> std::optional<std::string> {
    if (r.z[L.scalar(0)] > max_period) return std::string("period limit reached");
    double spread = 0.0;
    const Vec3 x0 = shooting::get3(r.z, 0);
    for (int i = 1; i <= intervals; ++i) spread = std::max(spread, (shooting::get3(r.z, L.node(0, i)) - x0).norm());
    if (spread < 1e-6) return std::string("orbit collapsed onto an equilibrium");
    return std::nullopt;
  };
  pr.solve = opt.periodic.solve;
  return pr;
}

// Sign changes caused by rounding in extreme multipliers (near homoclinic orbits) are dropped.
std::optional<BifurcationEvent> classify_po_event(const ArcProblem& pr, bool symmetric, const ArcEvent& ev,
                                                  const std::string& id) {
  const auto po = detail::make_orbit(pr.p, pr.L, ev.at.z, ev.at.jets[0], symmetric, ev.at.residual);
  BifurcationEvent b;
  b.branch = id;
  b.lambda_plus = ev.lambda;
  b.state = po.segment.states.front();
  std::ostringstream d;
  d.precision(12);
  int kind = symmetric ? ev.test : ev.test + 1;  // 0 PPO, 1 PD, 2 fold
  double target = kind == 1 ? -1.0 : 1.0;
  b.kind = kind == 0 ? BifurcationKind::PitchforkPO : kind == 1 ? BifurcationKind::PeriodDoubling : BifurcationKind::FoldPO;
  const auto [m, idx] = detail::multiplier_near(po, target);
  if (idx < 0 || std::abs(m - target) > 1e-3) return std::nullopt;
  b.value = m;
  d << "multiplier " << b.value.real() << " period " << po.period;
  if (symmetric && kind == 0) d << " half-map eigenvalue -1";
  if (!ev.refined) d << " (unrefined)";
  b.diagnostics = d.str();
  return b;
}

PeriodicBranch to_orbit_branch(const ArcProblem& pr, bool symmetric, const ArcRun& run, const std::string& id) {
  PeriodicBranch br;
  br.id = id;
  for (const auto& r : run.points) br.points.push_back(detail::make_orbit(pr.p, pr.L, r.z, r.jets[0], symmetric, r.residual));
  for (const auto& e : run.events) {
    if (auto b = classify_po_event(pr, symmetric, e, id)) br.events.push_back(*b);
  }
  br.end_reason = run.end_reason;
  return br;
}

double initial_period_scale(double T) { return std::max(T, 1.0); }

// Branch through base + eps * pert, pinned by (x0 - base0) . e0 = eps at eps and 2 eps.
PeriodicBranch switch_branch(const ModelParams& p, const std::vector<Vec3>& base, const std::vector<Vec3>& pert,
                             double T, double eps, const ContinuationOptions& opt, const std::string& id) {
  const int m = static_cast<int>(base.size()) - 1;
  const ArcProblem pr = orbit_problem(p, m, false, initial_period_scale(T), opt);
  const Vec3 e0 = pert.front().normalized();
  const double scale = 1.0 / pert.front().norm();
  auto pinned = [&](double amp) {
    VecX z(pr.L.size());
    for (int i = 0; i <= m; ++i) shooting::set3(z, pr.L.node(0, i), base[i] + amp * scale * pert[i]);
    z[pr.L.scalar(0)] = T;
    z[pr.L.scalar(1)] = p.lambda_plus;
    VecX a = VecX::Zero(z.size());
    a.head<3>() = e0;
    return solve_row(pr, z, z, a, e0.dot(base.front()) + amp);
  };
  const Result r1 = pinned(eps);
  if (!r1.converged) throw BvpError("branch switching failed at the first amplitude", r1.z, r1.residual);
  const Result r2 = pinned(2.0 * eps);
  if (!r2.converged) throw BvpError("branch switching failed at the second amplitude", r2.z, r2.residual);
  const VecX t = initial_tangent(pr, r2, r2.z - r1.z);
  const ArcRun run = run_arc(pr, r2, t, opt, {r1});
  return to_orbit_branch(pr, false, run, id);
}

// Eigenvector of the monodromy for `target`, transported to every node through the interval STMs.
std::vector<Vec3> transported(const std::vector<Mat3>& stms, const Mat3& M, double target) {
  Eigen::EigenSolver<Mat3> es(M);
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(es.eigenvalues()[i] - target) < std::abs(es.eigenvalues()[k] - target)) k = i;
  }
  Vec3 v = es.eigenvectors().col(k).real().normalized();
  std::vector<Vec3> out{v};
  for (const auto& s : stms) {
    v = s * v;
    out.push_back(v);
  }
  return out;
}

}  // namespace

EquilibriumBranch continue_branch(const ModelParams& p, const Vec3& x0, double direction, const ContinuationOptions& opt,
                                  const std::string& id) {
  const ArcProblem pr = equilibrium_problem(p, opt, x0);
  VecX z(4);
  z << x0, p.lambda_plus;
  const Result start = solve_fixed(pr, z, p.lambda_plus);
  if (!start.converged) throw BvpError("starting equilibrium did not converge", start.z, start.residual);
  VecX g = VecX::Zero(4);
  g[3] = direction >= 0.0 ? 1.0 : -1.0;
  const VecX t = initial_tangent(pr, start, g);
  const ArcRun run = run_arc(pr, start, t, opt);
  EquilibriumBranch br;
  br.id = id;
  for (const auto& r : run.points) br.points.push_back(eq_point(p, r.z));
  for (const auto& e : run.events) {
    if (auto b = classify_eq_event(p, e, id)) br.events.push_back(*b);
  }
  br.end_reason = run.end_reason;
  return br;
}

PeriodicBranch continue_branch(const PeriodicOrbitSolution& start, double direction, const ContinuationOptions& opt,
                               const std::string& id) {
  const int m = static_cast<int>(start.segment.mesh.size()) - 1;
  const ArcProblem pr = orbit_problem(start.params, m, start.symmetric, initial_period_scale(start.period), opt);
  const VecX z = detail::pack_orbit(start, pr.L);
  const Result r = solve_fixed(pr, z, start.params.lambda_plus);
  if (!r.converged) throw BvpError("starting orbit did not converge", r.z, r.residual);
  VecX g = VecX::Zero(z.size());
  g[pr.lambda()] = direction >= 0.0 ? 1.0 : -1.0;
  const ArcRun run = run_arc(pr, r, initial_tangent(pr, r, g), opt);
  return to_orbit_branch(pr, start.symmetric, run, id);
}

PeriodicBranch continue_from_hopf(const ModelParams& p, const Vec3& x_eq, const ContinuationOptions& opt,
                                  const std::string& id, double amplitude) {
  const Mat3 J = LmgField(p).jacobian(x_eq);
  Eigen::EigenSolver<Mat3> es(J);
  int k = -1;
  for (int i = 0; i < 3; ++i) {
    const cplx e = es.eigenvalues()[i];
    if (e.imag() > 1e-9 && (k < 0 || std::abs(e.real()) < std::abs(es.eigenvalues()[k].real()))) k = i;
  }
  if (k < 0) throw std::invalid_argument("equilibrium has no complex eigenvalue pair");
  const double w = es.eigenvalues()[k].imag();
  Eigen::Vector3cd q = es.eigenvectors().col(k);
  int big = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(q[i]) > std::abs(q[big])) big = i;
  }
  q *= std::polar(1.0 / q.norm(), -std::arg(q[big]));
  const int m = opt.periodic.intervals;
  const double T = 2.0 * M_PI / w;
  std::vector<Vec3> base(m + 1, x_eq), pert(m + 1);
  for (int i = 0; i <= m; ++i) pert[i] = (q * std::polar(1.0, w * T * i / m)).real();
  return switch_branch(p, base, pert, T, amplitude, opt, id);
}

PeriodicBranch continue_from_ppo(const PeriodicOrbitSolution& at_ppo, double direction, const ContinuationOptions& opt,
                                 const std::string& id) {
  if (!at_ppo.symmetric) throw std::invalid_argument("PPO branch switching needs a symmetric orbit");
  const PeriodicOrbitSolution full = unfold(at_ppo);
  Mat3 M = Mat3::Identity();
  for (const auto& s : at_ppo.stms) M = s * M;
  const auto pert = transported(full.stms, detail::parity_matrix() * M, -1.0);
  return switch_branch(full.params, full.segment.states, pert, full.period, direction >= 0 ? 1e-4 : -1e-4, opt, id);
}

PeriodicBranch continue_from_pd(const PeriodicOrbitSolution& at_pd, double direction, const ContinuationOptions& opt,
                                const std::string& id) {
  const PeriodicOrbitSolution full = unfold(at_pd);
  Mat3 M = Mat3::Identity();
  for (const auto& s : full.stms) M = s * M;
  std::vector<Vec3> base = full.segment.states;
  std::vector<Mat3> stms = full.stms;
  for (std::size_t i = 1; i < full.segment.states.size(); ++i) base.push_back(full.segment.states[i]);
  stms.insert(stms.end(), full.stms.begin(), full.stms.end());
  const auto pert = transported(stms, M, -1.0);
  return switch_branch(full.params, base, pert, 2.0 * full.period, direction >= 0 ? 1e-4 : -1e-4, opt, id);
}

PeriodicOrbitSolution orbit_at(const PeriodicBranch& branch, double lambda_plus, const PeriodicOptions& opt) {
  if (branch.points.empty()) throw std::invalid_argument("branch has no points");
  const auto& pts = branch.points;
  std::size_t best = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i].params.lambda_plus, b = pts[i + 1].params.lambda_plus;
    if ((a - lambda_plus) * (b - lambda_plus) <= 0.0) {
      best = i;
      break;
    }
    if (std::abs(a - lambda_plus) < std::abs(pts[best].params.lambda_plus - lambda_plus)) best = i;
  }
  const auto& A = pts[best];
  const auto& B = best + 1 < pts.size() ? pts[best + 1] : A;
  const double la = A.params.lambda_plus, lb = B.params.lambda_plus;
  const double s = lb != la ? std::clamp((lambda_plus - la) / (lb - la), 0.0, 1.0) : 0.0;
  std::vector<Vec3> nodes(A.segment.states.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = (1 - s) * A.segment.states[i] + s * B.segment.states[i];
  return solve_periodic(A.params.with_lambda_plus(lambda_plus), nodes, (1 - s) * A.period + s * B.period, A.symmetric, opt);
}

}  // namespace lmg
