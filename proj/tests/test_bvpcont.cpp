#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "lmg/bvpcont.hpp"
#include "lmg/integrate.hpp"
#include "lmg/kneading.hpp"
#include "lmg/localbif.hpp"

using namespace lmg;
using doctest::Approx;

namespace {

ModelParams cut_params(double lp) { return ModelParams{0.5, 0.2, 4.0, 1.5, lp, 0.02, 0.0}; }

Vec3 ivp_end(const ModelParams& p, const Vec3& x0, double t) {
  IntegrateOptions<3> io;
  io.keep_dense = false;
  io.keep_states = false;
  return integrate_lmg(p, x0, {0.0, t}, io).final_state();
}

// Shared fixtures; each is computed once per test run.
const PeriodicOrbitSolution& cl_at_2() {
  static const PeriodicOrbitSolution po = periodic_from_simulation(cut_params(2.0), Vec3(-0.1, 0.065, -0.475), 3000.0);
  return po;
}

const EquilibriumBranch& sr_plus() {
  static const EquilibriumBranch b = [] {
    const ModelParams p = cut_params(1.45);
    const auto sr = superradiant_equilibria(p);
    ContinuationOptions opt;
    opt.lambda_min = 1.3;
    opt.lambda_max = 2.0;
    for (const auto& e : sr) {
      if (e.label == EquilibriumLabel::SuperradiantPlus) return continue_branch(p, e.state, 1.0, opt, "SR+");
    }
    throw std::runtime_error("no SR+ state");
  }();
  return b;
}

const PeriodicBranch& sro_plus() {
  static const PeriodicBranch b = [] {
    const BifurcationEvent& h = sr_plus().events.at(0);
    ContinuationOptions opt;
    opt.lambda_min = 1.532;
    opt.detect_events = false;
    opt.max_period = 600.0;
    return continue_from_hopf(cut_params(h.lambda_plus), h.state, opt, "SRO+");
  }();
  return b;
}

const LinResult& hom(const std::string& s) {
  static std::map<std::string, LinResult> cache;
  auto it = cache.find(s);
  if (it != cache.end()) return it->second;
  LinOptions o;
  double lo = 1.5315, hi = 1.5335;
  if (s.size() > 1) {
    o.lambda_step = 2e-6;
    lo = s == "01" ? 1.53284 : 1.53282;
    hi = s == "01" ? 1.5329 : 1.53286;
  }
  return cache.emplace(s, lin_find_homoclinic(cut_params(1.53), s, lo, hi, o)).first->second;
}

const LinResult& etop() {
  static const LinResult r = [] {
    LinOptions o;
    o.lambda_step = 2e-6;
    return lin_find_etop(cut_params(1.53), "0", 1, 1.5328, 1.53283, orbit_at(sro_plus(), 1.5328), o);
  }();
  return r;
}

}  // namespace

TEST_CASE("flow jet derivatives agree with central differences") {
  const ModelParams p = cut_params(1.533);
  const Vec3 x0(0.2, -0.1, -0.3);
  const double t = 7.5;
  const FlowJet j = flow_jet(p, x0, t);
  REQUIRE(j.ok);
  CHECK((j.x - ivp_end(p, x0, t)).norm() < 1e-10);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    const Vec3 col = (ivp_end(p, x0 + e, t) - ivp_end(p, x0 - e, t)) / (2.0 * h);
    CHECK((col - j.stm.col(k)).norm() < 1e-6);
  }
  const Vec3 dl = (ivp_end(cut_params(1.533 + h), x0, t) - ivp_end(cut_params(1.533 - h), x0, t)) / (2.0 * h);
  CHECK((dl - j.dlambda).norm() < 1e-6);
}

TEST_CASE("trivial segment at an equilibrium keeps any duration") {
  const ModelParams p = cut_params(1.45);
  const Vec3 n = normal_equilibrium(p).state;
  SegmentProblem pr;
  pr.params = p;
  pr.guess.mesh = uniform_mesh(4);
  pr.guess.states.assign(5, n);
  pr.guess.T = 12.5;
  pr.boundary_rows = 6;
  pr.boundary = [n](const Vec3& a, const Vec3& b, double) {
    VecX r(6);
    r << a - n, b - n;
    return r;
  };
  const OrbitSegment s = solve_segment(pr);
  CHECK(s.residual == 0.0);
  CHECK(s.T == 12.5);
}

TEST_CASE("initial-value segment matches direct integration forward and backward") {
  const ModelParams p = cut_params(1.5);
  const Vec3 a(0.1, 0.05, -0.45);
  for (double T : {20.0, -6.0}) {
    const Vec3 b = ivp_end(p, a, T);
    SegmentProblem pr;
    pr.params = p;
    pr.free_time = false;
    pr.guess.mesh = uniform_mesh(10);
    for (double s : pr.guess.mesh) pr.guess.states.push_back(a + s * (b - a));
    pr.guess.T = T;
    pr.boundary_rows = 3;
    pr.boundary = [a](const Vec3& x0, const Vec3&, double) { return VecX(x0 - a); };
    const OrbitSegment s = solve_segment(pr);
    CHECK(s.residual < 1e-10);
    CHECK((s.states.back() - b).norm() < 1e-9);
    CHECK((s.at(p, 0.5) - ivp_end(p, a, 0.5 * T)).norm() < 1e-9);
  }
}

TEST_CASE("ill-posed segment problems are rejected") {
  SegmentProblem pr;
  pr.params = cut_params(1.5);
  pr.guess.mesh = {0.0, 0.5};
  pr.guess.states = {Vec3::Zero(), Vec3::Zero()};
  pr.boundary_rows = 1;
  pr.boundary = [](const Vec3&, const Vec3&, double) { return VecX::Zero(1); };
  CHECK_THROWS_AS(solve_segment(pr), std::invalid_argument);
  CHECK_THROWS_AS(uniform_mesh(0), std::invalid_argument);
}

TEST_CASE("stable counter-lasing orbit at lambda_plus = 2") {
  const PeriodicOrbitSolution& po = cl_at_2();
  CHECK(po.symmetric);
  CHECK(po.stable);
  CHECK(po.segment.residual < 1e-10);
  CHECK(std::abs(po.multipliers[po.trivial] - 1.0) < 1e-6);
  for (int i = 0; i < 3; ++i) {
    if (i != po.trivial) CHECK(std::abs(po.multipliers[i]) < 1.0);
  }
  // Independent check: the IVP from the base point closes after one period and hits P x0 at half period.
  const ModelParams& p = po.params;
  const Vec3 x0 = po.segment.states.front();
  CHECK((ivp_end(p, x0, po.period) - x0).norm() < 1e-7);
  const Vec3 half = ivp_end(p, x0, 0.5 * po.period);
  CHECK((half - Vec3(-x0[0], -x0[1], x0[2])).norm() < 1e-7);
}

TEST_CASE("Floquet multipliers match the monodromy of one long integration") {
  const PeriodicOrbitSolution& po = cl_at_2();
  const FlowJet j = flow_jet(po.params, po.segment.states.front(), po.period);
  Eigen::EigenSolver<Mat3> es(j.stm);
  const FloquetResult f = floquet(po);
  CHECK(f.trivial_error < 1e-6);
  CHECK_FALSE(f.degenerate);
  CHECK(f.stable_bundle.norm() == Approx(1.0));
  for (const cplx m : f.multipliers) {
    double best = INFINITY;
    for (int i = 0; i < 3; ++i) best = std::min(best, std::abs(es.eigenvalues()[i] - m));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("unfolding a symmetric orbit closes over the full period") {
  const PeriodicOrbitSolution full = unfold(cl_at_2());
  CHECK_FALSE(full.symmetric);
  CHECK(full.period == Approx(cl_at_2().period));
  CHECK((full.segment.states.back() - full.segment.states.front()).norm() < 1e-9);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(full.multipliers[i] - cl_at_2().multipliers[i]) < 1e-8);
}

TEST_CASE("normal-state pitchforks match the closed-form determinant roots") {
  const ModelParams p = cut_params(1.3);
  ContinuationOptions opt;
  opt.lambda_min = 1.3;
  opt.lambda_max = 2.0;
  const EquilibriumBranch n = continue_branch(p, normal_equilibrium(p).state, 1.0, opt, "N");
  const auto roots = pitchfork_lambda_plus(p);
  std::vector<double> found;
  for (const auto& e : n.events) {
    CHECK(e.kind == BifurcationKind::PitchforkEq);
    found.push_back(e.lambda_plus);
  }
  REQUIRE(found.size() == 2);
  REQUIRE(roots.size() >= 2);
  CHECK(std::abs(found[0] - roots[0]) < 1e-6);
  CHECK(std::abs(found[1] - roots[1]) < 1e-6);
}

TEST_CASE("subcritical Hopf point on the superradiant branch") {
  const EquilibriumBranch& b = sr_plus();
  REQUIRE_FALSE(b.events.empty());
  const BifurcationEvent& h = b.events.front();
  CHECK(h.kind == BifurcationKind::Hopf);
  CHECK(std::abs(h.value.real()) < 1e-8);
  CHECK(h.value.imag() > 0.1);
  const Mat3 J = jacobian(SpinState{h.state[0], h.state[1], h.state[2]}, cut_params(h.lambda_plus));
  CHECK(std::abs(bialternate_test(J)) < 1e-9);
  // H_sub lies between the two pitchforks of the normal state.
  const auto roots = pitchfork_lambda_plus(cut_params(1.5));
  CHECK(roots[0] < h.lambda_plus);
  CHECK(h.lambda_plus < roots[1]);
  CHECK(b.end_reason == "merged with the normal state");
}

TEST_CASE("pitchfork of orbits and first period doubling") {
  const PeriodicOrbitSolution start = periodic_from_simulation(cut_params(1.534), Vec3(-0.1, 0.065, -0.475), 3000.0);
  ContinuationOptions opt;
  opt.lambda_min = 1.53295;
  opt.lambda_max = 1.534;
  opt.max_period = 600.0;
  const PeriodicBranch cl = continue_branch(start, -1.0, opt, "CL");
  const BifurcationEvent* ppo = nullptr;
  for (const auto& e : cl.events) {
    if (e.kind == BifurcationKind::PitchforkPO) ppo = &e;
  }
  REQUIRE(ppo != nullptr);
  CHECK(std::abs(ppo->value - 1.0) < 1e-6);
  // The orbit above the PPO is stable, below it unstable.
  CHECK(cl.points.front().stable);
  CHECK_FALSE(cl.points.back().stable);

  const PeriodicOrbitSolution at = orbit_at(cl, ppo->lambda_plus);
  // Symmetry-breaking: the half-period map has the eigenvalue -1.
  double to_minus_one = INFINITY;
  for (const cplx nu : at.half_multipliers) to_minus_one = std::min(to_minus_one, std::abs(nu + 1.0));
  CHECK(to_minus_one < 1e-5);
  ContinuationOptions oa = opt;
  oa.lambda_max = ppo->lambda_plus + 1e-3;
  const PeriodicBranch asym = continue_from_ppo(at, 1.0, oa, "CL_asym+");
  CHECK_FALSE(asym.points.back().symmetric);
  const BifurcationEvent* pd = nullptr;
  for (const auto& e : asym.events) {
    if (e.kind == BifurcationKind::PeriodDoubling && !pd) pd = &e;
  }
  REQUIRE(pd != nullptr);
  CHECK(std::abs(pd->value + 1.0) < 1e-6);
  CHECK(pd->lambda_plus < ppo->lambda_plus);
  CHECK(ppo->lambda_plus - pd->lambda_plus < 1e-3);
}

TEST_CASE("saddle orbit born at the Hopf point ends at the Hom_0 parameter") {
  const PeriodicBranch& b = sro_plus();
  CHECK(b.end_reason == "period limit reached");
  const double end = b.points.back().params.lambda_plus;
  CHECK(std::abs(end - hom("0").lambda_plus) < 1e-6);
  for (const auto& o : b.points) {
    if (o.period > 40.0) CHECK(o.unstable_dim == 1);
  }
}

TEST_CASE("multipliers of a long saddle orbit obey the Liouville identity") {
  // Near the homoclinic the monodromy spans 20 decades; the product of the two nontrivial multipliers
  // must still equal exp of the integrated divergence, computed here by an augmented quadrature.
  const PeriodicBranch& b = sro_plus();
  const PeriodicOrbitSolution* po = nullptr;
  for (const auto& o : b.points) {
    if (o.period > 400.0 && !po) po = &o;
  }
  REQUIRE(po != nullptr);
  const LmgField f(po->params);
  const Rhs<4> rhs = [&f](double, const ode::Vec<4>& y) {
    const Vec3 x = y.head<3>();
    ode::Vec<4> d;
    d << f(x), f.jacobian(x).trace();
    return d;
  };
  IntegrateOptions<4> io;
  io.keep_dense = false;
  io.keep_states = false;
  // Interval by interval from the shooting nodes; one run over the whole period would leave the orbit.
  double log_det = 0.0;
  const auto& st = po->segment.states;
  const auto& mesh = po->segment.mesh;
  for (std::size_t i = 0; i + 1 < st.size(); ++i) {
    ode::Vec<4> y0;
    y0 << st[i], 0.0;
    log_det += integrate<4>(rhs, y0, {0.0, po->segment.T * (mesh[i + 1] - mesh[i])}, io).final_state()[3];
  }
  cplx prod = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (k != po->trivial) prod *= po->multipliers[k];
  }
  CHECK(std::abs(prod.imag()) < 1e-12 * std::abs(prod));
  CHECK(std::log(prod.real()) == Approx(log_det).epsilon(1e-6));
  CHECK(std::abs(po->multipliers[0]) > 1e10);
  CHECK(std::abs(po->multipliers[po->trivial] - 1.0) < 1e-6);
}

TEST_CASE("Hom_0 and Hom_01 by Lin's method") {
  const LinResult& h0 = hom("0");
  const LinResult& h1 = hom("01");
  CHECK(h0.lambda_plus > 1.5315);
  CHECK(h0.lambda_plus < 1.5335);
  CHECK(std::abs(h1.lambda_plus - 1.53286) < 1e-3);
  for (const LinResult* r : {&h0, &h1}) {
    CHECK(std::abs(r->v_u) > std::abs(r->v_s));
    CHECK(std::abs(r->problem.gap) < 1e-8);
    CHECK(r->problem.x1.residual < 1e-10);
    // Approach to N_u from above in gamma.
    const Vec3 n = normal_equilibrium(r->problem.params).state;
    CHECK(r->problem.x2.states.back()[2] > n[2]);
  }
  // Kneading symbols of the assembled orbit reproduce the label.
  CHECK(h0.sequence == "0");
  CHECK(h1.sequence == "01");
}

TEST_CASE("assembled homoclinic shadows its initial-value run") {
  for (const char* s : {"0", "01"}) {
    const LinProblem& lp = hom(s).problem;
    const auto pts = assemble(lp);
    IntegrateOptions<3> io;
    const auto tr = integrate_lmg(lp.params, pts.front().second, {0.0, pts.back().first}, io);
    // Inside the 1e-4 ball around N_u the run separates at the rate v_u; that final approach is excluded.
    const Vec3 n = normal_equilibrium(lp.params).state;
    double worst = 0.0, covered = 0.0;
    for (const auto& [t, x] : pts) {
      if ((x - n).norm() < 1e-4 && t > lp.x1.T) break;
      worst = std::max(worst, (tr.at(t) - x).norm());
      covered = t;
    }
    CHECK(worst < 1e-4);
    CHECK(covered > lp.x1.T + 0.5 * lp.x2.T);
    // The symbols of the connection are the label.
    CHECK(kneading_sequence(tr, 12, 0.2) == s);
  }
}

TEST_CASE("Lin direction stays fixed while the gap varies") {
  const ModelParams p = cut_params(1.53205);
  const LinProblem a = lin_homoclinic_gap(p, "0");
  const LinProblem b = lin_homoclinic_gap(cut_params(1.5321), "0", {}, &a);
  CHECK(b.lin_vector == a.lin_vector);
  for (const LinProblem* lp : {&a, &b}) {
    const Eigen::Vector2d d = lp->x2.states.front().head<2>() - lp->x1.states.back().head<2>();
    REQUIRE(d.norm() > 1e-8);
    const double angle = std::abs(d[0] * lp->lin_vector[1] - d[1] * lp->lin_vector[0]) / d.norm();
    CHECK(angle < 1e-8);
    CHECK(std::abs(lp->x1.states.back()[2] + 0.4) < 1e-10);
    CHECK(std::abs(lp->x2.states.front()[2] + 0.4) < 1e-10);
  }
  CHECK((a.gap > 0) != (b.gap > 0));
}

TEST_CASE("homoclinic sequence accumulates geometrically on the EtoP connection") {
  const double l1 = hom("01").lambda_plus, l2 = hom("011").lambda_plus, l3 = hom("0111").lambda_plus;
  const double e = etop().lambda_plus;
  CHECK(etop().sequence == "0(1)");
  CHECK(l1 > l2);
  CHECK(l2 > l3);
  CHECK(l3 > e);
  const double r1 = (l2 - e) / (l1 - e), r2 = (l3 - e) / (l2 - e);
  CHECK(r1 < 0.5);
  CHECK(r2 < 0.5);
  CHECK(std::abs(r2 / r1 - 1.0) < 0.3);
}

TEST_CASE("EtoP tail approaches the saddle orbit wrap by wrap") {
  const LinProblem& lp = etop().problem;
  CHECK(std::abs(lp.gap) < 1e-8);
  const ModelParams& p = lp.params;
  const Vec3 end = lp.x2.states.back();
  const Vec3 f0 = LmgField(p)(end);
  int comp = 0;
  f0.cwiseAbs().maxCoeff(&comp);
  const Plane plane{comp, end[comp], f0[comp] > 0.0 ? 1 : -1};
  // Crossing of the saddle orbit itself through the plane at x2(1).
  const PeriodicOrbitSolution po = orbit_at(sro_plus(), p.lambda_plus);
  IntegrateOptions<3> io;
  const auto orbit = integrate_lmg(p, po.segment.states.front(), {0.0, po.period}, io);
  Vec3 star = Vec3::Constant(INFINITY);
  for (const auto& c : poincare_crossings(orbit, plane)) {
    if ((c.state - end).norm() < (star - end).norm()) star = c.state;
  }
  REQUIRE((star - end).norm() < 1e-4);
  // One wrap past x2(1) stays ahead of the separation along the unstable direction.
  const auto tr = integrate_lmg(p, lp.x2.states.front(), {0.0, lp.x2.T + 0.5 * po.period + 1.0}, io);
  std::vector<double> dist;
  for (const auto& c : poincare_crossings(tr, plane)) {
    if ((c.state - star).norm() < 0.05) dist.push_back((c.state - star).norm());
  }
  REQUIRE(dist.size() >= 3);
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i] < 0.1 * dist[i - 1]);
}

TEST_CASE("Lin preconditions") {
  CHECK_THROWS_AS(lin_homoclinic_gap(cut_params(1.0), "0"), LinError);
  CHECK_THROWS_AS(lin_homoclinic_gap(cut_params(1.53), "0a"), std::invalid_argument);
  CHECK_THROWS_AS(lin_find_homoclinic(cut_params(1.53), "0", 1.5325, 1.5326), LinError);
}

TEST_CASE("branch and event CSV layout") {
  BifDiagram d;
  EquilibriumBranch n;
  n.id = "N";
  n.points.push_back({1.4, Vec3(0.0, 0.0, -0.5), {}, 1});
  d.equilibria.push_back(n);
  PeriodicBranch c;
  c.id = "CL_s";
  PeriodicOrbitSolution po;
  po.params = cut_params(2.0);
  po.max_bx = 0.15;
  po.stable = true;
  po.period = 32.0;
  c.points.push_back(po);
  d.orbits.push_back(c);
  std::ostringstream b;
  write_branch_csv(b, d);
  CHECK(b.str() == "branch_id,lambda_plus,max_abs_bx,stability,period\nN,1.4,0,unstable,\nCL_s,2,0.15,stable,32\n");
  BifurcationEvent e;
  e.kind = BifurcationKind::PeriodDoubling;
  e.lambda_plus = 1.533;
  e.branch = "CL_asym+";
  e.value = -1.0;
  e.diagnostics = "multiplier -1";
  std::ostringstream ev;
  write_event_csv(ev, {e});
  CHECK(ev.str() == "kind,lambda_plus,branch,value_re,value_im,diagnostics\nPD,1.533,CL_asym+,-1,0,\"multiplier -1\"\n");
}
