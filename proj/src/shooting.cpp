#include <cmath>
#include <numeric>

#include <Eigen/QR>

#include "lmg/bvpcont.hpp"
#include "lmg/integrate.hpp"

namespace lmg {

FlowJet flow_jet(const ModelParams& p, const Vec3& x0, double t, ode::Tolerances tol) {
  FlowJet out;
  out.x = x0;
  if (t == 0.0) return out;
  using Vec15 = ode::Vec<15>;
  const LmgField f(p);
  ode::Dop853<15> stepper(
      [&f](double, const Vec15& y) {
        const Vec3 x = y.head<3>();
        const Mat3 J = f.jacobian(x);
        Vec15 dy;
        dy.head<3>() = f(x);
        Eigen::Map<Mat3>(dy.data() + 3) = J * Eigen::Map<const Mat3>(y.data() + 3);
        dy.tail<3>() = J * y.tail<3>() + f.d_lambda_plus(x);
        return dy;
      },
      tol);
  Vec15 y;
  y.head<3>() = x0;
  Eigen::Map<Mat3>(y.data() + 3) = Mat3::Identity();
  y.tail<3>().setZero();
  stepper.reset(0.0, y, t);
  while (stepper.t() != t) {
    if (stepper.advance(t) != ode::StepStatus::Ok) {
      out.ok = false;
      break;
    }
  }
  const Vec15& e = stepper.y();
  out.x = e.head<3>();
  out.stm = Eigen::Map<const Mat3>(e.data() + 3);
  out.dlambda = e.tail<3>();
  if (!e.allFinite()) out.ok = false;
  return out;
}

namespace shooting {

int Layout::node(int seg, int i) const {
  int off = 0;
  for (int s = 0; s < seg; ++s) off += 3 * static_cast<int>(segments[s].mesh.size());
  return off + 3 * i;
}

int Layout::scalar(int k) const { return node(static_cast<int>(segments.size()), 0) + k; }

int Layout::size() const { return scalar(scalars); }

int Layout::continuity_rows() const {
  int r = 0;
  for (const auto& s : segments) r += 3 * (static_cast<int>(s.mesh.size()) - 1);
  return r;
}

Vec3 get3(const VecX& z, int offset) { return z.segment<3>(offset); }
void set3(VecX& z, int offset, const Vec3& v) { z.segment<3>(offset) = v; }

namespace {

MatX fd_jacobian(const Extra& extra, const VecX& z) {
  MatX J(extra.rows, z.size());
  VecX zp = z;
  for (int j = 0; j < z.size(); ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
    zp[j] = z[j] + h;
    const VecX a = extra.f(zp);
    zp[j] = z[j] - h;
    const VecX b = extra.f(zp);
    zp[j] = z[j];
    J.col(j) = (a - b) / (2.0 * h);
  }
  return J;
}

VecX solve_linear(const MatX& J, const VecX& rhs) {
  // Column equilibration; unknowns of very different scale share one system.
  VecX scale(J.cols());
  for (int j = 0; j < J.cols(); ++j) {
    const double m = J.col(j).cwiseAbs().maxCoeff();
    scale[j] = m > 0.0 ? 1.0 / m : 1.0;
  }
  const MatX Js = J * scale.asDiagonal();
  VecX y;
  if (J.rows() == J.cols()) {
    y = Js.colPivHouseholderQr().solve(rhs);
  } else {
    y = Js.completeOrthogonalDecomposition().solve(rhs);
  }
  return scale.asDiagonal() * y;
}

}  // namespace

void evaluate(const ModelParams& p, const Layout& L, const VecX& z, const Extra& extra, const ode::Tolerances& tol,
              VecX& F, MatX* J, std::vector<std::vector<FlowJet>>* jets) {
  ModelParams q = p;
  if (L.lambda_index >= 0) q.lambda_plus = z[L.scalar(L.lambda_index)];
  const LmgField field(q);
  const int n = L.size();
  const int rc = L.continuity_rows();
  F.resize(rc + extra.rows);
  if (J) J->setZero(rc + extra.rows, n);
  if (jets) jets->assign(L.segments.size(), {});
  int row = 0;
  for (int s = 0; s < static_cast<int>(L.segments.size()); ++s) {
    const auto& seg = L.segments[s];
    const double T = seg.time_index >= 0 ? seg.time_scale * z[L.scalar(seg.time_index)] : seg.time_scale;
    for (int i = 0; i + 1 < static_cast<int>(seg.mesh.size()); ++i) {
      const double ds = seg.mesh[i + 1] - seg.mesh[i];
      const int a = L.node(s, i), b = L.node(s, i + 1);
      const FlowJet jet = flow_jet(q, get3(z, a), T * ds, tol);
      if (!jet.ok) throw BvpError("flow integration failed inside a shooting interval", z, INFINITY);
      F.segment<3>(row) = jet.x - get3(z, b);
      if (J) {
        J->block<3, 3>(row, a) = jet.stm;
        J->block<3, 3>(row, b) = -Mat3::Identity();
        if (seg.time_index >= 0) J->block<3, 1>(row, L.scalar(seg.time_index)) = field(jet.x) * ds * seg.time_scale;
        if (L.lambda_index >= 0) J->block<3, 1>(row, L.scalar(L.lambda_index)) = jet.dlambda;
      }
      if (jets) (*jets)[s].push_back(jet);
      row += 3;
    }
  }
  if (extra.rows > 0) {
    F.tail(extra.rows) = extra.f(z);
    if (J) J->bottomRows(extra.rows) = extra.jac ? extra.jac(z) : fd_jacobian(extra, z);
  }
}

Result newton(const ModelParams& p, const Layout& L, VecX z, const Extra& extra, const SolveOptions& opt) {
  Result r;
  VecX F;
  MatX J;
  std::vector<std::vector<FlowJet>> jets;
  try {
    evaluate(p, L, z, extra, opt.ode_tol, F, &J, &jets);
  } catch (const BvpError&) {
    r.z = z;
    r.residual = INFINITY;
    return r;
  }
  for (r.iterations = 0;; ++r.iterations) {
    const double res = F.lpNorm<Eigen::Infinity>();
    if (res < opt.tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= opt.max_iterations || !std::isfinite(res)) break;
    const VecX dz = solve_linear(J, -F);
    if (!dz.allFinite()) break;
    const double norm0 = F.norm();
    bool accepted = false;
    double alpha = 1.0;
    for (int k = 0; k < 10 && !accepted; ++k, alpha *= 0.5) {
      VecX zt = z + alpha * dz;
      VecX Ft;
      MatX Jt;
      std::vector<std::vector<FlowJet>> jt;
      try {
        evaluate(p, L, zt, extra, opt.ode_tol, Ft, &Jt, &jt);
      } catch (const BvpError&) {
        continue;
      }
      // Near convergence the residual floor is integration noise; accept full steps there.
      if (Ft.norm() < (1.0 - 1e-4 * alpha) * norm0 || (alpha == 1.0 && Ft.lpNorm<Eigen::Infinity>() < 1e3 * opt.tol)) {
        z = std::move(zt);
        F = std::move(Ft);
        J = std::move(Jt);
        jets = std::move(jt);
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  r.z = std::move(z);
  r.F = std::move(F);
  r.J = std::move(J);
  r.jets = std::move(jets);
  r.residual = r.F.size() ? r.F.lpNorm<Eigen::Infinity>() : 0.0;
  return r;
}

VecX solve_linear_system(const MatX& J, const VecX& rhs) { return solve_linear(J, rhs); }

}  // namespace shooting

Vec3 OrbitSegment::at(const ModelParams& p, double s) const {
  if (mesh.empty() || mesh.size() != states.size()) throw std::logic_error("segment has no nodes");
  std::size_t i = 0;
  while (i + 2 < mesh.size() && mesh[i + 1] <= s) ++i;
  const double dt = T * (s - mesh[i]);
  if (dt == 0.0) return states[i];
  IntegrateOptions<3> io;
  io.keep_dense = false;
  io.keep_states = false;
  return integrate_lmg(p, states[i], {0.0, dt}, io).final_state();
}

std::vector<double> uniform_mesh(int intervals) {
  if (intervals < 1) throw std::invalid_argument("mesh needs at least one interval");
  std::vector<double> m(intervals + 1);
  for (int i = 0; i <= intervals; ++i) m[i] = static_cast<double>(i) / intervals;
  return m;
}

OrbitSegment solve_segment(const SegmentProblem& pr, const SolveOptions& opt) {
  const auto& g = pr.guess;
  if (g.mesh.size() < 2 || g.mesh.size() != g.states.size()) throw std::invalid_argument("guess needs matching mesh and states");
  if (g.mesh.front() != 0.0 || g.mesh.back() != 1.0) throw std::invalid_argument("mesh must run from 0 to 1");
  if (!pr.boundary || pr.boundary_rows < 1) throw std::invalid_argument("boundary conditions missing");
  shooting::Layout L;
  L.segments.push_back({g.mesh, pr.free_time ? 0 : -1, pr.free_time ? 1.0 : g.T});
  L.scalars = pr.free_time ? 1 : 0;
  VecX z(L.size());
  for (std::size_t i = 0; i < g.states.size(); ++i) shooting::set3(z, L.node(0, static_cast<int>(i)), g.states[i]);
  if (pr.free_time) z[L.scalar(0)] = g.T;
  const int last = L.node(0, static_cast<int>(g.mesh.size()) - 1);
  shooting::Extra extra;
  extra.rows = pr.boundary_rows;
  extra.f = [&](const VecX& v) {
    const double T = pr.free_time ? v[L.scalar(0)] : g.T;
    VecX r = pr.boundary(shooting::get3(v, 0), shooting::get3(v, last), T);
    if (r.size() != pr.boundary_rows) throw std::invalid_argument("boundary residual has the wrong size");
    return r;
  };
  const auto res = shooting::newton(pr.params, L, z, extra, opt);
  if (!res.converged) throw BvpError("segment Newton iteration did not converge", res.z, res.residual);
  OrbitSegment out;
  out.mesh = g.mesh;
  out.boundary = g.boundary;
  out.T = pr.free_time ? res.z[L.scalar(0)] : g.T;
  for (std::size_t i = 0; i < g.mesh.size(); ++i) out.states.push_back(shooting::get3(res.z, L.node(0, static_cast<int>(i))));
  out.residual = res.residual;
  return out;
}

}  // namespace lmg
