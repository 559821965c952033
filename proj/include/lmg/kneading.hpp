#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmg/integrate.hpp"
#include "lmg/model.hpp"

namespace lmg {

/// Exact dyadic rational numerator / 2^bits.
struct Dyadic {
  std::uint64_t numerator = 0;
  int bits = 0;

  double value() const;
  std::string str() const;  // reduced fraction, e.g. "11/32"
  bool operator==(const Dyadic&) const = default;
};

enum class KneadingTerminal { Completed, EscapedToAttractor, HorizonExhausted };
const char* to_string(KneadingTerminal t);

struct KneadingRecord {
  double lambda_plus = 0.0;
  std::string symbols;  // '0' minimum below -w, '1' maximum above +w
  Dyadic K;
  KneadingTerminal terminal = KneadingTerminal::Completed;
  std::string error;  // non-empty when the point failed; symbols then empty

  bool failed() const { return !error.empty(); }
};

class KneadingError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct UnstableDirection {
  Vec3 equilibrium = Vec3::Zero();
  Vec3 direction = Vec3::Zero();  // unit, b_x component > 0
  double eigenvalue = 0.0;
};

/// Unstable eigendirection of the normal state; throws KneadingError unless it is a saddle with one real
/// unstable eigenvalue.
UnstableDirection normal_unstable_direction(const ModelParams& p);

struct BranchOptions {
  double offset = 1e-6;     // delta_1 along the unit eigenvector
  double horizon = 5000.0;  // time budget
  double converged_speed = 1e-10;  // |f| below which the run counts as settled on an equilibrium
  ode::Tolerances tol = ode::kTightTol;
};

/// Negative branch of the unstable manifold, started at N_u - delta_1 y_u (b_x < 0 side).
Trajectory<3> unstable_branch(const ModelParams& p, const BranchOptions& opt = {});

/// Image of a trajectory under (b_x, b_y, gamma) -> (-b_x, -b_y, gamma), dense output included.
Trajectory<3> parity_image(const Trajectory<3>& tr);

/// First n retained symbols of b_x extrema outside (-w, w), in time order.
std::string kneading_sequence(const Trajectory<3>& traj, std::size_t n, double w = 0.2);

/// Sum of a_k 2^-k over exactly n symbols.
Dyadic kneading_invariant(const std::string& symbols, int n);

std::string negate(const std::string& symbols);

/// Keeps the first k symbols and negates the rest; requires symbols[k] == '1'.
std::string negate_map(const std::string& left_sequence, std::size_t k);

struct KneadingOptions {
  int n = 12;
  double w = 0.2;
  BranchOptions branch;
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Symbols of the negative branch at p, stopping after n symbols or at the horizon.
KneadingRecord kneading_record(const ModelParams& p, const KneadingOptions& opt = {});

/// Independent records for every lambda_plus in the grid, merged in grid order. Failures are recorded.
std::vector<KneadingRecord> sweep(const ModelParams& p, const std::vector<double>& lambda_plus,
                                  const KneadingOptions& opt = {});

struct PlateauInterval {
  double lo = 0.0;
  double hi = 0.0;
  Dyadic K;
  std::string left_sequence;
  std::string right_sequence;
  std::vector<double> spike_centers;  // sequence changes or excursions inside the plateau
  std::size_t points = 0;
};

struct PlateauOptions {
  std::size_t min_points = 3;  // shorter runs are spikes
  // Records within this many units of 2^-n of the plateau anchor share it; dual sequences ending in
  // 0-bar and 1-bar differ by one unit after truncation.
  std::uint64_t k_tolerance = 1;
  double resolution = 1e-7;
};

using KneadingEvaluator = std::function<KneadingRecord(double)>;

/// Runs of constant K over records sorted by lambda_plus. With an evaluator, plateau edges and
/// spike centres are refined by bisection down to the resolution.
std::vector<PlateauInterval> detect_plateaus(const std::vector<KneadingRecord>& records,
                                             const PlateauOptions& opt = {},
                                             const KneadingEvaluator& evaluate = {});

/// lo:hi:step inclusive of hi up to rounding.
std::vector<double> uniform_grid(double lo, double hi, double step);

void write_sweep_csv(std::ostream& os, const std::vector<KneadingRecord>& records);
void write_plateau_csv(std::ostream& os, const std::vector<PlateauInterval>& plateaus);

}  // namespace lmg
