#include "lmg/integrate.hpp"

#include <numeric>

namespace lmg {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Maximum: return "max";
    case EventKind::Minimum: return "min";
    case EventKind::CrossingUp: return "up";
    case EventKind::CrossingDown: return "down";
  }
  return "?";
}

const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::Completed: return "completed";
    case IntegrationStatus::StoppedByEvent: return "stopped-by-event";
    case IntegrationStatus::StoppedByPredicate: return "stopped-by-predicate";
    case IntegrationStatus::StepUnderflow: return "step-underflow";
    case IntegrationStatus::NonFinite: return "non-finite";
  }
  return "?";
}

Trajectory<3> integrate_lmg(const ModelParams& p, const Vec3& s0, std::pair<double, double> t_span,
                            const IntegrateOptions<3>& opt) {
  const LmgField f(p);
  return integrate<3>([f](double, const Vec3& x) { return f(x); }, s0, t_span, opt);
}

Trajectory<5> integrate_dicke(const ModelParams& p, const Vec5& s0, std::pair<double, double> t_span,
                              const IntegrateOptions<5>& opt) {
  return integrate<5>([p](double, const Vec5& x) { return dicke_rhs(x, p); }, s0, t_span, opt);
}

DickeComparison compare_dicke(const ModelParams& p, const Vec3& s0, double horizon, double window,
                              Tolerances tol) {
  if (!(window > 0.0) || !(horizon > window)) throw std::invalid_argument("compare_dicke needs horizon > window > 0");
  const cplx alpha = slave_field(SpinState::from(s0).beta(), p);
  Vec5 d0;
  d0 << alpha.real(), alpha.imag(), s0[0], s0[1], s0[2];
  IntegrateOptions<3> o3;
  o3.tol = tol;
  IntegrateOptions<5> o5;
  o5.tol = tol;
  DickeComparison c;
  c.lmg = integrate_lmg(p, s0, {0.0, horizon}, o3);
  c.dicke = integrate_dicke(p, d0, {0.0, horizon}, o5);
  if (!c.lmg.ok() || !c.dicke.ok()) throw std::runtime_error("compare_dicke: integration failed");
  c.final_distance = (c.lmg.final_state() - c.dicke.final_state().tail<3>()).norm();
  const double t0 = horizon - window;
  // Maxima from the dense output; a settled run contributes its end value.
  const auto amplitude = [t0](const auto& tr, int k) {
    double a = tr.final_state()[k];
    for (const auto& e : extrema_events(tr, k, 0.0))
      if (e.t >= t0 && e.sign > 0) a = std::max(a, e.value);
    return a;
  };
  c.lmg_amplitude = amplitude(c.lmg, 0);
  c.dicke_amplitude = amplitude(c.dicke, 2);
  return c;
}

LyapunovEstimate lyapunov_max(const ModelParams& p, const Vec3& s0, double horizon, double renorm_interval,
                              double transient, Tolerances tol) {
  if (!(renorm_interval > 0.0) || !(horizon >= 10.0 * renorm_interval)) {
    throw std::invalid_argument("lyapunov_max needs horizon >= 10 * renorm_interval > 0");
  }
  const LmgField f(p);
  Vec3 x = s0;
  if (transient > 0.0) {
    IntegrateOptions<3> opt;
    opt.tol = tol;
    opt.keep_dense = false;
    opt.keep_states = false;
    const auto tr = integrate_lmg(p, s0, {0.0, transient}, opt);
    if (!tr.ok()) throw std::runtime_error("transient integration failed");
    x = tr.final_state();
  }

  using Vec6 = ode::Vec<6>;
  ode::Dop853<6> stepper(
      [&f](double, const Vec6& z) {
        const Vec3 s = z.head<3>();
        Vec6 dz;
        dz.head<3>() = f(s);
        dz.tail<3>() = f.jacobian(s) * z.tail<3>();
        return dz;
      },
      tol);
  Vec6 z;
  z.head<3>() = x;
  z.tail<3>() = Vec3(1.0, 1.0, 1.0).normalized();

  const auto n_intervals = static_cast<std::size_t>(horizon / renorm_interval);
  std::vector<double> rates;
  rates.reserve(n_intervals);
  double t = 0.0;
  double h = 0.0;
  for (std::size_t k = 0; k < n_intervals; ++k) {
    stepper.reset(t, z, 1.0, h);
    const double t_next = t + renorm_interval;
    while (stepper.t() < t_next) {
      if (stepper.advance(t_next) != ode::StepStatus::Ok) throw std::runtime_error("tangent integration failed");
    }
    h = stepper.step_size();
    z = stepper.y();
    t = t_next;
    const double growth = z.tail<3>().norm();
    rates.push_back(std::log(growth) / renorm_interval);
    z.tail<3>() /= growth;
  }

  LyapunovEstimate est;
  est.renormalizations = rates.size();
  est.exponent = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
  constexpr std::size_t kBlocks = 10;
  const std::size_t per_block = rates.size() / kBlocks;
  std::vector<double> means;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const auto first = rates.begin() + static_cast<std::ptrdiff_t>(b * per_block);
    means.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(per_block), 0.0) /
                    static_cast<double>(per_block));
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / kBlocks;
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  est.std_error = std::sqrt(ss / (kBlocks - 1) / kBlocks);
  est.final_state = z.head<3>();
  est.converged_to_equilibrium = f(est.final_state).norm() < 1e-8;
  return est;
}

}  // namespace lmg
