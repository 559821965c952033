#pragma once

#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmg/dop853.hpp"
#include "lmg/model.hpp"

namespace lmg {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// End point of the flow over time t (either sign) with its derivatives in x0 and lambda_plus.
struct FlowJet {
  Vec3 x = Vec3::Zero();
  Mat3 stm = Mat3::Identity();
  Vec3 dlambda = Vec3::Zero();
  bool ok = true;
};
FlowJet flow_jet(const ModelParams& p, const Vec3& x0, double t, ode::Tolerances tol = ode::kTightTol);

struct SolveOptions {
  double tol = 1e-11;  // max-norm residual
  int max_iterations = 25;
  ode::Tolerances ode_tol = ode::kTightTol;
};

class BvpError : public std::runtime_error {
 public:
  BvpError(const std::string& what, VecX last, double residual)
      : std::runtime_error(what), last_iterate(std::move(last)), residual(residual) {}
  VecX last_iterate;
  double residual;
};

namespace shooting {

/// One shooting segment: nodes at `mesh` (normalized, 0 .. 1), duration held in a scalar unknown.
struct Segment {
  std::vector<double> mesh;
  int time_index = -1;     // scalar carrying the duration; dx/ds = T f(x)
  double time_scale = 1.0;  // duration = time_scale * scalar
};

/// Unknown vector: all segment nodes in order, then the scalars.
struct Layout {
  std::vector<Segment> segments;
  int scalars = 0;
  int lambda_index = -1;  // scalar carrying lambda_plus; -1 keeps it fixed

  int node(int seg, int i) const;
  int scalar(int k) const;
  int size() const;
  int continuity_rows() const;
};

/// Extra (boundary, phase, Lin, arclength) conditions; Jacobian by central differences when absent.
struct Extra {
  int rows = 0;
  std::function<VecX(const VecX&)> f;
  std::function<MatX(const VecX&)> jac;
};

struct Result {
  VecX z;
  VecX F;
  MatX J;
  std::vector<std::vector<FlowJet>> jets;  // per segment, per interval, at z
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Continuity rows and their Jacobian at z.
void evaluate(const ModelParams& p, const Layout& L, const VecX& z, const Extra& extra, const ode::Tolerances& tol,
              VecX& F, MatX* J, std::vector<std::vector<FlowJet>>* jets);

/// Damped Newton (least-squares steps when the system is not square). Never throws on divergence.
Result newton(const ModelParams& p, const Layout& L, VecX z, const Extra& extra, const SolveOptions& opt);

/// Column-equilibrated least-squares / QR solve used by the Newton iterations.
VecX solve_linear_system(const MatX& J, const VecX& rhs);

Vec3 get3(const VecX& z, int offset);
void set3(VecX& z, int offset, const Vec3& v);

}  // namespace shooting

struct OrbitSegment {
  std::vector<double> mesh;   // normalized times in [0, 1]
  std::vector<Vec3> states;   // at the mesh
  double T = 0.0;             // duration; negative T runs backward
  std::string boundary;       // boundary-condition descriptor
  double residual = 0.0;      // max norm over continuity and boundary rows

  /// State at normalized time s, integrated from the preceding node.
  Vec3 at(const ModelParams& p, double s) const;
};

struct SegmentProblem {
  ModelParams params;
  OrbitSegment guess;
  bool free_time = true;
  int boundary_rows = 0;
  // Residual of the boundary conditions on (x(0), x(1), T).
  std::function<VecX(const Vec3&, const Vec3&, double)> boundary;
};

/// Multiple-shooting solve of one segment. Throws BvpError on Newton failure.
OrbitSegment solve_segment(const SegmentProblem& problem, const SolveOptions& opt = {});

/// Uniform normalized mesh with `intervals` intervals.
std::vector<double> uniform_mesh(int intervals);

// ----------------------------------------------------------------------------------------------
// Periodic orbits

struct PeriodicOrbitSolution {
  ModelParams params;
  OrbitSegment segment;  // a full period, or half of it when symmetric
  double period = 0.0;
  bool symmetric = false;  // x(t + T/2) = P x(t)
  std::array<cplx, 3> multipliers{};       // full period, descending modulus
  std::array<cplx, 3> half_multipliers{};  // symmetric orbits: eigenvalues of P Phi(T/2)
  int trivial = 0;                          // index of the trivial multiplier
  int unstable_dim = 0;                     // multipliers outside the unit circle
  bool stable = false;
  double max_bx = 0.0;
  std::vector<Mat3> stms;  // per mesh interval
};

struct PeriodicOptions {
  int intervals = 40;
  SolveOptions solve;
};

/// Newton solve from nodal guesses on a uniform mesh (the last node equals the first, or its parity
/// image when symmetric). Throws BvpError.
PeriodicOrbitSolution solve_periodic(const ModelParams& p, const std::vector<Vec3>& nodes, double period,
                                     bool symmetric, const PeriodicOptions& opt = {});

/// Settles on an attracting orbit by integration from x0, then solves the BVP. Throws BvpError when
/// the run does not settle on a periodic orbit.
PeriodicOrbitSolution periodic_from_simulation(const ModelParams& p, const Vec3& x0, double transient,
                                               const PeriodicOptions& opt = {});

struct FloquetResult {
  std::array<cplx, 3> multipliers{};  // descending modulus
  int trivial = 0;
  double trivial_error = 0.0;  // |mu_trivial - 1|
  Vec3 base_point = Vec3::Zero();
  Vec3 stable_bundle = Vec3::Zero();  // unit; eigenvector of the smallest multiplier
  bool degenerate = false;             // two multipliers closer than 1e-8
};
FloquetResult floquet(const PeriodicOrbitSolution& po);

/// Unfolds a symmetric orbit to its full period.
PeriodicOrbitSolution unfold(const PeriodicOrbitSolution& po);

// ----------------------------------------------------------------------------------------------
// Continuation

enum class BifurcationKind { Hopf, Fold, PitchforkEq, PeriodDoubling, PitchforkPO, FoldPO, Homoclinic, EtoP };
const char* to_string(BifurcationKind k);

struct BifurcationEvent {
  BifurcationKind kind = BifurcationKind::Fold;
  double lambda_plus = 0.0;
  std::string branch;
  cplx value{};  // eigenvalue or multiplier at the event
  std::string diagnostics;
  Vec3 state = Vec3::Zero();
};

struct ContinuationOptions {
  double ds = 1e-2;
  double ds_min = 1e-9;
  double ds_max = 5e-2;
  double lambda_min = 0.0;
  double lambda_max = 10.0;
  int max_steps = 2000;
  double max_period = 1e4;  // orbit branches end here (homoclinic approach)
  double event_tol = 1e-10;  // lambda resolution of event refinement
  double lambda_scale = 0.1;  // lambda_plus unit in the arclength norm
  bool detect_events = true;
  PeriodicOptions periodic;
};

struct EquilibriumPoint {
  double lambda_plus = 0.0;
  Vec3 x = Vec3::Zero();
  std::array<cplx, 3> eigenvalues{};
  int unstable_dim = 0;
};

struct EquilibriumBranch {
  std::string id;
  std::vector<EquilibriumPoint> points;
  std::vector<BifurcationEvent> events;
  std::string end_reason;
};

struct PeriodicBranch {
  std::string id;
  std::vector<PeriodicOrbitSolution> points;
  std::vector<BifurcationEvent> events;
  std::string end_reason;
};

/// Pseudo-arclength continuation of an equilibrium in lambda_plus, starting towards increasing
/// lambda_plus when direction > 0.
EquilibriumBranch continue_branch(const ModelParams& p, const Vec3& x0, double direction,
                                  const ContinuationOptions& opt, const std::string& id);

/// Pseudo-arclength continuation of a periodic orbit in lambda_plus.
PeriodicBranch continue_branch(const PeriodicOrbitSolution& start, double direction, const ContinuationOptions& opt,
                               const std::string& id);

/// Orbit branch born at a Hopf point of the equilibrium x_eq at p.
PeriodicBranch continue_from_hopf(const ModelParams& p, const Vec3& x_eq, const ContinuationOptions& opt,
                                  const std::string& id, double amplitude = 1e-3);

/// Asymmetric orbit branch leaving a symmetric orbit at a PPO point.
PeriodicBranch continue_from_ppo(const PeriodicOrbitSolution& at_ppo, double direction,
                                 const ContinuationOptions& opt, const std::string& id);

/// Doubled-period branch leaving an orbit at a PD point.
PeriodicBranch continue_from_pd(const PeriodicOrbitSolution& at_pd, double direction,
                                const ContinuationOptions& opt, const std::string& id);

/// Orbit of the branch re-solved at a refined event parameter.
PeriodicOrbitSolution orbit_at(const PeriodicBranch& branch, double lambda_plus, const PeriodicOptions& opt = {});

// ----------------------------------------------------------------------------------------------
// Lin's method

struct LinOptions {
  double section_gamma = -0.4;
  double delta1 = 1e-5;
  double delta2 = 1e-5;
  int intervals1 = 30;
  int intervals2 = 30;
  double lambda_step = 2e-5;  // natural-continuation step while bracketing the zero of the gap
  double lambda_tol = 1e-10;  // secant refinement
  double gap_tol = 1e-8;      // |gap| accepted at the refined zero, widened to the slope times lambda_tol
  double horizon = 3000.0;
  double symbol_halfwidth = 0.2;  // exclusion band of the symbol extrema
  double max_interval_time = 8.0;  // shooting intervals are refined below this duration
  SolveOptions solve;
};

struct LinProblem {
  ModelParams params;
  OrbitSegment x1;  // from N_u along the unstable branch to the section
  OrbitSegment x2;  // from the section to the target
  Eigen::Vector2d lin_vector = Eigen::Vector2d::Zero();  // in (b_x, b_y) of the section
  double gap = 0.0;                                      // x2(0) - x1(1) = gap * v
  double free_scalar = 0.0;                              // Phi (equilibrium target) or delta_2 (orbit target)
};

struct LinResult {
  double lambda_plus = 0.0;
  LinProblem problem;
  std::string sequence;  // symbols of the connection
  std::vector<double> lambda_trace;  // continuation record of (lambda, gap)
  std::vector<double> gap_trace;
  double v_u = 0.0, v_s = 0.0, v_ss = 0.0;  // eigenvalues of N_u at the connection
};

class LinError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gap of the homoclinic Lin problem for the symbol sequence S at p (x1 turns back after |S| symbols).
LinProblem lin_homoclinic_gap(const ModelParams& p, const std::string& sequence, const LinOptions& opt = {},
                              const LinProblem* previous = nullptr);

/// Homoclinic orbit Hom_S in [lo, hi]; the gap must change sign on the natural-continuation grid.
LinResult lin_find_homoclinic(const ModelParams& p, const std::string& sequence, double lo, double hi,
                              const LinOptions& opt = {});

/// Connection from N_u, after the prefix symbols, to the saddle orbit around the superradiant state on the
/// side of `po_side` (+1: b_x > 0). The orbit is taken from `orbit_seed` and followed in lambda_plus.
LinResult lin_find_etop(const ModelParams& p, const std::string& prefix, int po_side, double lo, double hi,
                        const PeriodicOrbitSolution& orbit_seed, const LinOptions& opt = {});

/// Gap of the EtoP Lin problem at p for a saddle orbit already solved at p.
LinProblem lin_etop_gap(const ModelParams& p, const std::string& prefix, const PeriodicOrbitSolution& orbit,
                        const LinOptions& opt = {}, const LinProblem* previous = nullptr);

/// Assembled connection x1 then x2 sampled at the mesh nodes.
std::vector<std::pair<double, Vec3>> assemble(const LinProblem& lp);

// ----------------------------------------------------------------------------------------------
// Bifurcation diagram

struct BifDiagramOptions {
  double lambda_lo = 1.3;
  double lambda_hi = 2.0;
  ContinuationOptions cont = [] {
    ContinuationOptions c;
    c.max_period = 600.0;
    return c;
  }();
  Vec3 cl_seed{-0.1, 0.065, -0.475};  // settles on the counter-lasing orbit at lambda_hi
  bool include_connections = true;     // Hom_0, Hom_01 and the EtoP below Hom_01 by Lin's method
  double connection_window = 1e-4;     // half-width around the period-limit end of the orbit branch
  LinOptions lin;
  int pd_levels = 2;  // period doublings followed along the asymmetric branch
};

struct BifDiagram {
  std::vector<EquilibriumBranch> equilibria;
  std::vector<PeriodicBranch> orbits;
  std::vector<LinResult> connections;
  std::vector<BifurcationEvent> events;  // sorted by lambda_plus
  std::vector<std::string> notes;        // per-branch failures
};

BifDiagram bif_diagram(const ModelParams& p, const BifDiagramOptions& opt = {});

/// SRO+ alone: the saddle orbit born at the Hopf point of SR+, followed down to the period limit.
/// Throws std::runtime_error when the equilibrium chain does not produce it.
PeriodicBranch saddle_orbit_branch(const ModelParams& p, const BifDiagramOptions& opt = {});

void write_branch_csv(std::ostream& os, const BifDiagram& d);
void write_event_csv(std::ostream& os, const std::vector<BifurcationEvent>& events);

}  // namespace lmg
