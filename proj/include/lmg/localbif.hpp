#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lmg/dop853.hpp"
#include "lmg/model.hpp"

namespace lmg {

enum class Stability { Sink, Saddle, Source, NonHyperbolic };
enum class EquilibriumLabel { Normal, SuperradiantPlus, SuperradiantMinus };

const char* to_string(Stability s);
const char* to_string(EquilibriumLabel l);

struct Equilibrium {
  Vec3 state = Vec3::Zero();
  std::array<cplx, 3> eigenvalues{};  // descending real part
  Eigen::Matrix3cd eigenvectors = Eigen::Matrix3cd::Zero();  // column k belongs to eigenvalues[k]
  Stability stability = Stability::NonHyperbolic;
  int unstable_dim = 0;
  EquilibriumLabel label = EquilibriumLabel::Normal;

  bool stable() const { return stability == Stability::Sink; }
  const cplx& leading() const { return eigenvalues[0]; }
};

/// The normal state is a whole line of equilibria when sigma = 0.
class DegenerateEquilibriumError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Eigenvalues with |Re| below this are treated as zero.
double zero_threshold(const std::array<cplx, 3>& eigenvalues);

Mat3 jacobian(const SpinState& s, const ModelParams& p);
Equilibrium analyze_equilibrium(const Vec3& x, const ModelParams& p, EquilibriumLabel label);

/// (0, 0, delta / (2 sigma)); throws DegenerateEquilibriumError when sigma = 0.
Equilibrium normal_equilibrium(const ModelParams& p);

struct SeedOutcome {
  Vec3 seed = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// All beta != 0 equilibria via damped Newton from a parity-reduced seed grid.
/// Returned as parity pairs: (plus, minus, plus, minus, ...), plus having b_x > 0.
std::vector<Equilibrium> superradiant_equilibria(const ModelParams& p, std::vector<SeedOutcome>* report = nullptr);

struct CurvePoint {
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
};

/// Positive lambda_plus with mu gamma_eq + sigma = 0 at p.lambda_minus, if the
/// crossing pair is complex there.
std::optional<double> hopf_lambda_plus(const ModelParams& p);
std::vector<CurvePoint> hopf_curve(const ModelParams& p, const std::vector<double>& lambda_minus);

/// Positive roots of the normal-state determinant condition at p.lambda_minus, ascending.
std::vector<double> pitchfork_lambda_plus(const ModelParams& p);
std::vector<CurvePoint> pitchfork_curve(const ModelParams& p, const std::vector<double>& lambda_minus);

/// lambda_plus = slope * lambda_minus on the two saddle-node lines. The outer sign is the one giving
/// positive slopes; `inner_minus` / `inner_plus` name the sign in front of the nested radical.
struct SaddleNodeSlopes {
  double inner_minus = 0.0;
  double inner_plus = 0.0;
};
SaddleNodeSlopes saddlenode_lines(const ModelParams& p);

/// 2J (.) I for a 3x3 matrix; its eigenvalues are the pairwise sums of those of J.
Mat3 bialternate_product(const Mat3& J);
double bialternate_test(const Mat3& J);

struct POGeometry {
  double theta_po = 0.0;
  double r_po = 0.0;
  double gamma_po = 0.0;
  double max_bx = 0.0;
  double period = 0.0;
};

class NoOrbitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Circular lasing / counter-lasing orbit for xi = 0 past the Hopf point.
POGeometry po_geometry(const ModelParams& p);

/// Semi-axes (a along gamma, b across) of the spheroid of orbits, centred at (0, 0, gamma_eq / 2).
std::pair<double, double> spheroid_axes(const ModelParams& p);

enum class PhaseLabel { N, SR, NSR, CL, L, Transitional };
const char* to_string(PhaseLabel l);

struct ClassifyOptions {
  double transient = 4000.0;
  double window = 1500.0;
  double max_time = 20000.0;
  double perturbation = 1e-3;
  double periodic_rtol = 1e-4;
  ode::Tolerances tol = ode::kScanTol;
};

struct PhaseResult {
  PhaseLabel label = PhaseLabel::Transitional;
  bool inconclusive = false;
  double gamma_eq = 0.0;
  cplx leading_eigenvalue{};
  std::string note;
};

PhaseResult classify_phase(const ModelParams& p, const ClassifyOptions& opt = {});

struct PhaseRow {
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
  PhaseResult result;
};

void write_phase_csv(std::ostream& os, const std::vector<PhaseRow>& rows);
void write_curve_csv(std::ostream& os, const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves);

}  // namespace lmg
