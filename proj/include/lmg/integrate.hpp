#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "lmg/dop853.hpp"
#include "lmg/model.hpp"

namespace lmg {

using ode::DenseStep;
using ode::Tolerances;

enum class EventKind { Maximum, Minimum, CrossingUp, CrossingDown };

const char* to_string(EventKind k);

template <int N>
struct Event {
  double t = 0.0;
  EventKind kind = EventKind::Maximum;
  double value = 0.0;  // watched component at the event
  std::size_t spec = 0;
  ode::Vec<N> state;
};

/// Either the extrema of one component or the crossings of a coordinate plane.
template <int N>
struct EventSpec {
  enum class Type { Extremum, Plane };
  Type type = Type::Extremum;
  int component = 0;
  double level = 0.0;  // plane: x[component] = level
  // Extremum: +1 keeps maxima, -1 minima, 0 both. Plane: +1 upward, -1 downward, 0 both.
  int direction = 0;
  // Returns true for events to discard; evaluated on the interpolated event state.
  std::function<bool(const ode::Vec<N>&)> exclude;
  // Integration halts after this many retained events of this spec (0: never).
  std::size_t terminal_count = 0;

  static EventSpec extremum(int component, int direction = 0) {
    EventSpec s;
    s.type = Type::Extremum;
    s.component = component;
    s.direction = direction;
    return s;
  }
  static EventSpec plane(int component, double level, int direction = 0) {
    EventSpec s;
    s.type = Type::Plane;
    s.component = component;
    s.level = level;
    s.direction = direction;
    return s;
  }
};

class DegenerateEventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IntegrationStatus { Completed, StoppedByEvent, StoppedByPredicate, StepUnderflow, NonFinite };

const char* to_string(IntegrationStatus s);

template <int N>
struct Trajectory {
  std::vector<double> times;
  std::vector<ode::Vec<N>> states;
  std::vector<DenseStep<N>> steps;  // steps[i] spans times[i]..times[i+1] when dense output is kept
  std::vector<Event<N>> events;
  IntegrationStatus status = IntegrationStatus::Completed;
  double t_end = 0.0;
  long evaluations = 0;

  bool ok() const {
    return status == IntegrationStatus::Completed || status == IntegrationStatus::StoppedByEvent ||
           status == IntegrationStatus::StoppedByPredicate;
  }
  const ode::Vec<N>& final_state() const { return states.back(); }

  /// Dense evaluation; requires steps and states to be kept.
  ode::Vec<N> at(double t) const {
    if (steps.empty() || steps.size() + 1 != times.size()) {
      throw std::logic_error("trajectory carries no complete dense output");
    }
    const bool forward = steps.front().h > 0.0;
    auto it = std::lower_bound(times.begin() + 1, times.end() - 1, t,
                               [forward](double a, double b) { return forward ? a < b : a > b; });
    return steps[static_cast<std::size_t>(it - times.begin() - 1)](t);
  }
};

template <int N>
struct IntegrateOptions {
  Tolerances tol = ode::kTightTol;
  double max_step = std::numeric_limits<double>::infinity();
  bool keep_dense = true;
  bool keep_states = true;  // false keeps only the endpoints
  std::vector<EventSpec<N>> events;
  // Integration halts after this many retained events over all specs (0: never).
  std::size_t terminal_total = 0;
  // Checked after every accepted step; true halts the integration.
  std::function<bool(double, const ode::Vec<N>&)> stop;
};

namespace detail {

inline constexpr int kSubBrackets = 4;
inline constexpr double kEventTimeTol = 1e-12;
inline constexpr double kInflectionTol = 1e-13;

template <class G>
double refine_root(G&& g, double a, double b, double ga, double gb, double h) {
  if (ga == 0.0) return a;
  if (gb == 0.0) return b;
  boost::uintmax_t iters = 200;
  const double scale = std::abs(h);
  auto tol = [scale](double lo, double hi) { return std::abs(hi - lo) * scale < kEventTimeTol; };
  auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, iters);
  return 0.5 * (r.first + r.second);
}

/// Appends the events of one spec inside one step, in integration order.
template <int N>
void scan_step(const DenseStep<N>& step, const EventSpec<N>& spec, std::size_t spec_index,
               std::vector<Event<N>>& out) {
  const int c = spec.component;
  const bool extremum = spec.type == EventSpec<N>::Type::Extremum;
  auto g = [&](double x) {
    const double t = step.t0 + x * step.h;
    if (extremum) return step.jet(t).dy[c];
    return step(t)[c] - spec.level;
  };
  double x0 = 0.0;
  double g0 = g(0.0);
  double max_abs = std::abs(g0);
  for (int k = 1; k <= kSubBrackets; ++k) {
    const double x1 = static_cast<double>(k) / kSubBrackets;
    const double g1 = g(x1);
    max_abs = std::max(max_abs, std::abs(g1));
    // Half-open (x0, x1]: a root exactly on the left edge belongs to the previous bracket.
    if ((g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0)) {
      const double xr = refine_root(g, x0, x1, g0, g1, step.h);
      const double t = step.t0 + xr * step.h;
      const auto jet = step.jet(t);
      Event<N> e;
      e.t = t;
      e.spec = spec_index;
      e.state = jet.y;
      e.value = jet.y[c];
      bool keep = true;
      if (extremum) {
        const double curvature = jet.d2y[c];
        if (std::abs(curvature) < kInflectionTol) keep = false;
        e.kind = curvature < 0.0 ? EventKind::Maximum : EventKind::Minimum;
        if (spec.direction > 0 && e.kind != EventKind::Maximum) keep = false;
        if (spec.direction < 0 && e.kind != EventKind::Minimum) keep = false;
      } else {
        const double slope = jet.dy[c];
        e.kind = slope > 0.0 ? EventKind::CrossingUp : EventKind::CrossingDown;
        if (spec.direction > 0 && e.kind != EventKind::CrossingUp) keep = false;
        if (spec.direction < 0 && e.kind != EventKind::CrossingDown) keep = false;
      }
      if (keep && spec.exclude && spec.exclude(e.state)) keep = false;
      if (keep) out.push_back(std::move(e));
    }
    x0 = x1;
    g0 = g1;
  }
  if (!extremum && max_abs == 0.0 && step.h != 0.0) {
    const auto mid = step.jet(step.t0 + 0.5 * step.h);
    if (std::abs(mid.dy[c]) < 1e-14) {
      throw DegenerateEventError("trajectory is tangent to (confined in) the section plane");
    }
  }
}

}  // namespace detail

template <int N>
using Rhs = std::function<ode::Vec<N>(double, const ode::Vec<N>&)>;

/// Adaptive DOP853 run from t_span.first to t_span.second with event location on the dense output.
template <int N>
Trajectory<N> integrate(const Rhs<N>& rhs, const ode::Vec<N>& s0, std::pair<double, double> t_span,
                        const IntegrateOptions<N>& opt = {}) {
  if (!(opt.tol.rel > 0.0) || !(opt.tol.abs > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (!s0.allFinite()) throw std::invalid_argument("initial state is not finite");
  Trajectory<N> tr;
  tr.times.push_back(t_span.first);
  tr.states.push_back(s0);
  tr.t_end = t_span.first;
  if (t_span.second == t_span.first) return tr;

  ode::Dop853<N> stepper(rhs, opt.tol, opt.max_step);
  stepper.reset(t_span.first, s0, t_span.second - t_span.first);
  if (!stepper.f().allFinite()) {
    tr.status = IntegrationStatus::NonFinite;
    return tr;
  }
  std::vector<std::size_t> counts(opt.events.size(), 0);
  std::vector<Event<N>> found;
  while (stepper.t() != t_span.second) {
    const auto st = stepper.advance(t_span.second);
    if (st != ode::StepStatus::Ok) {
      tr.status = st == ode::StepStatus::StepUnderflow ? IntegrationStatus::StepUnderflow
                                                       : IntegrationStatus::NonFinite;
      break;
    }
    const auto& step = stepper.last_step();
    bool halt = false;
    if (!opt.events.empty()) {
      found.clear();
      for (std::size_t i = 0; i < opt.events.size(); ++i) detail::scan_step(step, opt.events[i], i, found);
      const double dir = step.h > 0.0 ? 1.0 : -1.0;
      std::stable_sort(found.begin(), found.end(),
                       [dir](const Event<N>& a, const Event<N>& b) { return dir * a.t < dir * b.t; });
      for (auto& e : found) {
        const std::size_t k = e.spec;
        tr.events.push_back(std::move(e));
        ++counts[k];
        if ((opt.events[k].terminal_count != 0 && counts[k] >= opt.events[k].terminal_count) ||
            (opt.terminal_total != 0 && tr.events.size() >= opt.terminal_total)) {
          halt = true;
          break;
        }
      }
    }
    if (opt.keep_states || halt || stepper.t() == t_span.second) {
      tr.times.push_back(stepper.t());
      tr.states.push_back(stepper.y());
      if (opt.keep_dense) tr.steps.push_back(step);
    }
    tr.t_end = stepper.t();
    if (halt) {
      tr.status = IntegrationStatus::StoppedByEvent;
      break;
    }
    if (opt.stop && opt.stop(stepper.t(), stepper.y())) {
      tr.status = IntegrationStatus::StoppedByPredicate;
      break;
    }
  }
  if (!opt.keep_states && tr.times.back() != stepper.t()) {
    tr.times.push_back(stepper.t());
    tr.states.push_back(stepper.y());
  }
  tr.evaluations = stepper.evaluations();
  return tr;
}

/// LMG run, autonomous field.
Trajectory<3> integrate_lmg(const ModelParams& p, const Vec3& s0, std::pair<double, double> t_span,
                            const IntegrateOptions<3>& opt = {});
Trajectory<5> integrate_dicke(const ModelParams& p, const Vec5& s0, std::pair<double, double> t_span,
                              const IntegrateOptions<5>& opt = {});

struct Extremum {
  double t = 0.0;
  double value = 0.0;
  int sign = 0;  // +1 maximum, -1 minimum
  int symbol() const { return sign > 0 ? 1 : 0; }
};

/// Extrema of one component outside the band (-w, w), from the dense output.
template <int N>
std::vector<Extremum> extrema_events(const Trajectory<N>& traj, int component, double exclusion_halfwidth) {
  if (traj.steps.empty() && traj.times.size() > 1) throw std::logic_error("trajectory carries no dense output");
  auto spec = EventSpec<N>::extremum(component);
  const double w = exclusion_halfwidth;
  spec.exclude = [component, w](const ode::Vec<N>& s) { return std::abs(s[component]) <= w; };
  std::vector<Event<N>> ev;
  for (const auto& st : traj.steps) detail::scan_step(st, spec, 0, ev);
  std::vector<Extremum> out;
  out.reserve(ev.size());
  for (const auto& e : ev) {
    const int sign = e.kind == EventKind::Maximum ? 1 : -1;
    // A maximum below -w or a minimum above +w is a wiggle on one side, not a lobe.
    if ((sign > 0 && e.value <= w) || (sign < 0 && e.value >= -w)) continue;
    out.push_back({e.t, e.value, sign});
  }
  return out;
}

struct Plane {
  int component = 1;
  double level = 0.0;
  int direction = 0;  // +1 upward only, -1 downward only, 0 both
};

/// Directed crossings of a coordinate plane. Throws DegenerateEventError when a step lies in the plane.
template <int N>
std::vector<Event<N>> poincare_crossings(const Trajectory<N>& traj, const Plane& plane) {
  if (plane.component < 0 || plane.component >= static_cast<int>(traj.states.front().size())) {
    throw std::invalid_argument("plane component out of range");
  }
  if (traj.steps.empty() && traj.times.size() > 1) throw std::logic_error("trajectory carries no dense output");
  const auto spec = EventSpec<N>::plane(plane.component, plane.level, plane.direction);
  std::vector<Event<N>> ev;
  for (const auto& st : traj.steps) detail::scan_step(st, spec, 0, ev);
  return ev;
}

struct LyapunovEstimate {
  double exponent = 0.0;
  double std_error = 0.0;
  std::size_t renormalizations = 0;
  bool converged_to_equilibrium = false;  // transient-escape warning
  Vec3 final_state = Vec3::Zero();
};

/// Benettin estimate of the largest exponent of the LMG flow; standard error from 10 block means.
LyapunovEstimate lyapunov_max(const ModelParams& p, const Vec3& s0, double horizon, double renorm_interval,
                              double transient = 0.0, Tolerances tol = ode::kTightTol);

/// Paired LMG and Dicke runs from one spin state, the cavity field seeded at its slaved value.
struct DickeComparison {
  Trajectory<3> lmg;
  Trajectory<5> dicke;
  double final_distance = 0.0;  // spin-part distance of the end states
  double lmg_amplitude = 0.0;   // max b_x over the final window
  double dicke_amplitude = 0.0;
};

DickeComparison compare_dicke(const ModelParams& p, const Vec3& s0, double horizon, double window,
                              Tolerances tol = ode::kTightTol);

template <int N>
void write_trajectory_csv(std::ostream& os, const Trajectory<N>& tr, const std::vector<std::string>& columns) {
  os << "t";
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  const auto prec = os.precision(17);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    os << tr.times[i];
    for (int k = 0; k < tr.states[i].size(); ++k) os << ',' << tr.states[i][k];
    os << '\n';
  }
  os.precision(prec);
}

template <int N>
void write_events_csv(std::ostream& os, const std::vector<Event<N>>& events) {
  os << "t,kind,value\n";
  const auto prec = os.precision(17);
  for (const auto& e : events) os << e.t << ',' << to_string(e.kind) << ',' << e.value << '\n';
  os.precision(prec);
}

inline const std::vector<std::string>& lmg_columns() {
  static const std::vector<std::string> c{"b_x", "b_y", "gamma"};
  return c;
}
inline const std::vector<std::string>& dicke_columns() {
  static const std::vector<std::string> c{"alpha_re", "alpha_im", "b_x", "b_y", "gamma"};
  return c;
}

}  // namespace lmg
