#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "bvp_internal.hpp"
#include "lmg/integrate.hpp"

namespace lmg {

namespace detail {

shooting::Layout periodic_layout(int intervals, bool symmetric, bool free_lambda) {
  shooting::Layout L;
  L.segments.push_back({uniform_mesh(intervals), 0, symmetric ? 0.5 : 1.0});
  L.scalars = free_lambda ? 2 : 1;
  L.lambda_index = free_lambda ? 1 : -1;
  return L;
}

shooting::Extra periodic_conditions(const ModelParams& p, const shooting::Layout& L, bool symmetric, const Vec3& ref) {
  const int last = L.node(0, static_cast<int>(L.segments[0].mesh.size()) - 1);
  const Mat3 B = symmetric ? parity_matrix() : Mat3::Identity();
  const Vec3 fref = LmgField(p)(ref);
  shooting::Extra e;
  e.rows = 4;
  e.f = [=](const VecX& z) {
    VecX r(4);
    r.head<3>() = shooting::get3(z, last) - B * shooting::get3(z, 0);
    r[3] = fref.dot(shooting::get3(z, 0) - ref);
    return r;
  };
  const int n = L.size();
  e.jac = [=](const VecX&) {
    MatX J = MatX::Zero(4, n);
    J.block<3, 3>(0, last) = Mat3::Identity();
    J.block<3, 3>(0, 0) = -B;
    J.block<1, 3>(3, 0) = fref.transpose();
    return J;
  };
  return e;
}

VecX pack_orbit(const PeriodicOrbitSolution& po, const shooting::Layout& L) {
  VecX z(L.size());
  const auto& st = po.segment.states;
  if (static_cast<int>(st.size()) != static_cast<int>(L.segments[0].mesh.size())) {
    throw std::invalid_argument("orbit mesh does not match the layout");
  }
  for (std::size_t i = 0; i < st.size(); ++i) shooting::set3(z, L.node(0, static_cast<int>(i)), st[i]);
  z[L.scalar(0)] = po.period;
  if (L.lambda_index >= 0) z[L.scalar(L.lambda_index)] = po.params.lambda_plus;
  return z;
}

namespace {

struct Spectrum {
  std::array<cplx, 3> values{};  // descending modulus
  int trivial = 0;
};

// Orthonormal frame whose first column is the flow direction.
Mat3 flow_frame(const Vec3& f) {
  const Eigen::HouseholderQR<Vec3> qr(f);
  Mat3 Q = qr.householderQ();
  if (Q.col(0).dot(f) < 0.0) Q = -Q;
  return Q;
}

// Multipliers of close * S_{m-1} ... S_0 with the flow direction deflated node by node. The two
// nontrivial ones come from the product of 2x2 blocks: the dominant one from the trace and the other
// from the determinant, which stays accurate when the product is badly conditioned.
Spectrum reduced_spectrum(const std::vector<Mat3>& stms, const std::vector<Vec3>& states, const LmgField& f,
                          const Mat3& close) {
  const std::size_t m = stms.size();
  const Mat3 Q0 = flow_frame(f(states.front()));
  Mat3 Qi = Q0;
  double trivial = 1.0, det = 1.0;
  Eigen::Matrix2d B = Eigen::Matrix2d::Identity();
  for (std::size_t i = 0; i < m; ++i) {
    const Mat3 next = i + 1 < m ? flow_frame(f(states[i + 1])) : Q0;
    const Mat3 R = next.transpose() * (i + 1 < m ? stms[i] : Mat3(close * stms[i])) * Qi;
    const Eigen::Matrix2d Bi = R.bottomRightCorner<2, 2>();
    trivial *= R(0, 0);
    det *= Bi.determinant();
    B = Bi * B;
    Qi = next;
  }
  const double tr = B.trace();
  const double disc = tr * tr - 4.0 * det;
  cplx a, b;
  if (disc >= 0.0) {
    const double big = 0.5 * (tr + std::copysign(std::sqrt(disc), tr));
    a = big;
    b = big != 0.0 ? det / big : 0.0;
  } else {
    a = cplx(0.5 * tr, 0.5 * std::sqrt(-disc));
    b = std::conj(a);
  }
  std::array<cplx, 3> v{trivial, a, b};
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return std::abs(v[x]) > std::abs(v[y]); });
  Spectrum s;
  for (int k = 0; k < 3; ++k) {
    s.values[k] = v[idx[k]];
    if (idx[k] == 0) s.trivial = k;
  }
  return s;
}

double orbit_max_bx(const ModelParams& p, const Vec3& x0, double duration, bool absolute) {
  IntegrateOptions<3> io;
  io.keep_dense = false;
  io.keep_states = false;
  io.events.push_back(EventSpec<3>::extremum(0, 0));
  const auto tr = integrate_lmg(p, x0, {0.0, duration}, io);
  double m = absolute ? std::abs(x0[0]) : x0[0];
  const double e = absolute ? std::abs(tr.final_state()[0]) : tr.final_state()[0];
  m = std::max(m, e);
  for (const auto& ev : tr.events) m = std::max(m, absolute ? std::abs(ev.state[0]) : ev.state[0]);
  return m;
}

}  // namespace

PeriodicOrbitSolution make_orbit(const ModelParams& p, const shooting::Layout& L, const VecX& z,
                                 const std::vector<FlowJet>& jets, bool symmetric, double residual) {
  PeriodicOrbitSolution po;
  po.params = p;
  if (L.lambda_index >= 0) po.params.lambda_plus = z[L.scalar(L.lambda_index)];
  po.symmetric = symmetric;
  po.period = z[L.scalar(0)];
  po.segment.mesh = L.segments[0].mesh;
  for (std::size_t i = 0; i < po.segment.mesh.size(); ++i) po.segment.states.push_back(shooting::get3(z, L.node(0, static_cast<int>(i))));
  po.segment.T = symmetric ? 0.5 * po.period : po.period;
  po.segment.boundary = symmetric ? "x(1) = P x(0), half period" : "x(1) = x(0)";
  po.segment.residual = residual;
  for (const auto& j : jets) po.stms.push_back(j.stm);
  const LmgField field(po.params);
  if (symmetric) {
    const Spectrum h = reduced_spectrum(po.stms, po.segment.states, field, parity_matrix());
    po.half_multipliers = h.values;
    for (int k = 0; k < 3; ++k) po.multipliers[k] = h.values[k] * h.values[k];
    po.trivial = h.trivial;
  } else {
    const Spectrum s = reduced_spectrum(po.stms, po.segment.states, field, Mat3::Identity());
    po.multipliers = s.values;
    po.trivial = s.trivial;
  }
  po.unstable_dim = 0;
  for (int k = 0; k < 3; ++k) {
    if (k != po.trivial && std::abs(po.multipliers[k]) > 1.0 + 1e-9) ++po.unstable_dim;
  }
  po.stable = po.unstable_dim == 0 && std::abs(po.multipliers[po.trivial] - 1.0) < 1e-6;
  for (int k = 0; k < 3; ++k) {
    if (k != po.trivial && std::abs(po.multipliers[k]) > 1.0 - 1e-9) po.stable = false;
  }
  po.max_bx = orbit_max_bx(po.params, po.segment.states.front(), po.segment.T, symmetric);
  return po;
}

double pd_test(const PeriodicOrbitSolution& po) {
  cplx r = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (k != po.trivial) r *= po.multipliers[k] + 1.0;
  }
  return r.real();
}

double fold_test(const PeriodicOrbitSolution& po) {
  const auto& m = po.symmetric ? po.half_multipliers : po.multipliers;
  cplx r = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (k != po.trivial) r *= m[k] - 1.0;
  }
  return r.real();
}

std::pair<cplx, int> multiplier_near(const PeriodicOrbitSolution& po, double target) {
  int best = -1;
  double d = INFINITY;
  for (int k = 0; k < 3; ++k) {
    if (k == po.trivial || std::abs(po.multipliers[k].imag()) > 1e-12) continue;
    if (std::abs(po.multipliers[k] - target) < d) {
      d = std::abs(po.multipliers[k] - target);
      best = k;
    }
  }
  return {best >= 0 ? po.multipliers[best] : cplx{}, best};
}

}  // namespace detail

PeriodicOrbitSolution solve_periodic(const ModelParams& p, const std::vector<Vec3>& nodes, double period, bool symmetric,
                                     const PeriodicOptions& opt) {
  if (nodes.size() < 2) throw std::invalid_argument("periodic orbit needs at least two nodes");
  if (!(period > 0.0)) throw std::invalid_argument("period must be positive");
  const auto L = detail::periodic_layout(static_cast<int>(nodes.size()) - 1, symmetric, false);
  VecX z(L.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) shooting::set3(z, L.node(0, static_cast<int>(i)), nodes[i]);
  z[L.scalar(0)] = period;
  const auto extra = detail::periodic_conditions(p, L, symmetric, nodes.front());
  const auto r = shooting::newton(p, L, z, extra, opt.solve);
  if (!r.converged) throw BvpError("periodic orbit Newton iteration did not converge", r.z, r.residual);
  return detail::make_orbit(p, L, r.z, r.jets[0], symmetric, r.residual);
}

PeriodicOrbitSolution periodic_from_simulation(const ModelParams& p, const Vec3& x0, double transient,
                                               const PeriodicOptions& opt) {
  IntegrateOptions<3> io;
  io.keep_dense = false;
  io.keep_states = false;
  const Vec3 start = integrate_lmg(p, x0, {0.0, transient}, io).final_state();
  const LmgField f(p);
  if (f(start).norm() < 1e-8) throw BvpError("simulation settled on an equilibrium", VecX(), 0.0);

  // Successive maxima of b_x; the period closes at the first maximum returning to the first one.
  IntegrateOptions<3> ro;
  ro.events.push_back(EventSpec<3>::extremum(0, +1));
  const double horizon = 4000.0;
  const auto tr = integrate_lmg(p, start, {0.0, horizon}, ro);
  if (tr.events.size() < 2) throw BvpError("no recurrent maxima after the transient", VecX(), 0.0);
  const auto& e0 = tr.events.front();
  double T = 0.0;
  for (std::size_t k = 1; k < tr.events.size(); ++k) {
    if ((tr.events[k].state - e0.state).norm() < 1e-4 * std::max(1.0, e0.state.norm())) {
      T = tr.events[k].t - e0.t;
      break;
    }
  }
  if (T == 0.0) throw BvpError("run did not settle on a periodic orbit", VecX(), 0.0);
  const Vec3 base = e0.state;
  const double half = 0.5 * T;
  const bool symmetric = (tr.at(e0.t + half) - detail::parity_matrix() * base).norm() < 1e-3;
  const double span = symmetric ? half : T;
  const int m = opt.intervals;
  std::vector<Vec3> nodes(m + 1);
  for (int i = 0; i <= m; ++i) nodes[i] = tr.at(e0.t + span * i / m);
  return solve_periodic(p, nodes, T, symmetric, opt);
}

FloquetResult floquet(const PeriodicOrbitSolution& po) {
  if (po.stms.empty() || po.segment.states.empty()) throw std::invalid_argument("orbit carries no variational data");
  Mat3 M = Mat3::Identity();
  for (const auto& s : po.stms) M = s * M;
  if (po.symmetric) {
    const Mat3 H = detail::parity_matrix() * M;
    M = H * H;
  }
  FloquetResult r;
  r.base_point = po.segment.states.front();
  r.multipliers = po.multipliers;
  r.trivial = po.trivial;
  // The stable bundle is the eigenvector of the monodromy closest to the smallest multiplier.
  Eigen::EigenSolver<Mat3> es(M);
  int smallest = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(es.eigenvalues()[k] - po.multipliers[2]) < std::abs(es.eigenvalues()[smallest] - po.multipliers[2])) smallest = k;
  }
  r.trivial_error = std::abs(r.multipliers[r.trivial] - 1.0);
  Vec3 w = es.eigenvectors().col(smallest).real();
  if (w.norm() < 1e-12) w = es.eigenvectors().col(smallest).imag();
  r.stable_bundle = w.normalized();
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      if (std::abs(r.multipliers[a] - r.multipliers[b]) < 1e-8) r.degenerate = true;
    }
  }
  return r;
}

PeriodicOrbitSolution unfold(const PeriodicOrbitSolution& po) {
  if (!po.symmetric) return po;
  const Mat3& P = detail::parity_matrix();
  PeriodicOrbitSolution out = po;
  out.symmetric = false;
  const auto& mesh = po.segment.mesh;
  const std::size_t n = mesh.size();
  out.segment.mesh.clear();
  out.segment.states.clear();
  for (std::size_t i = 0; i < n; ++i) {
    out.segment.mesh.push_back(0.5 * mesh[i]);
    out.segment.states.push_back(po.segment.states[i]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    out.segment.mesh.push_back(0.5 + 0.5 * mesh[i]);
    out.segment.states.push_back(P * po.segment.states[i]);
  }
  out.segment.T = po.period;
  out.segment.boundary = "x(1) = x(0)";
  const std::size_t k = po.stms.size();
  for (std::size_t i = 0; i < k; ++i) out.stms.push_back(P * po.stms[i] * P);
  out.half_multipliers = {};
  return out;
}

}  // namespace lmg
