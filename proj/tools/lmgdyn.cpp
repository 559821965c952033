#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cli_support.hpp"
#include "lmg/bvpcont.hpp"
#include "lmg/integrate.hpp"
#include "lmg/kneading.hpp"
#include "lmg/localbif.hpp"
#include "lmg/model.hpp"

using namespace lmg;
using namespace lmgcli;

namespace {

constexpr int kFatal = 1;
constexpr int kPartial = 2;

struct Globals {
  std::string config;
  std::string out = ".";
  unsigned workers = 0;
  std::optional<double> lambda_plus;
  std::optional<double> lambda_minus;
  std::optional<std::string> grid;
  std::optional<double> tol;
};

ode::Tolerances tolerances(const Globals& g, ode::Tolerances fallback) {
  if (!g.tol) return fallback;
  if (!(*g.tol > 0.0)) throw UsageError("--tol must be positive");
  return {*g.tol, *g.tol * 1e-2};
}

unsigned worker_count(const Globals& g) {
  if (g.workers > 0) return g.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <int N>
void write_samples(std::ostream& os, const Trajectory<N>& tr, const std::vector<std::string>& columns, double dt,
                   const std::function<double(const ode::Vec<N>&)>& photons) {
  os << "t";
  for (const auto& c : columns) os << ',' << c;
  os << ",photon_number\n";
  os << std::setprecision(12);
  auto row = [&](double t, const ode::Vec<N>& x) {
    os << t;
    for (int k = 0; k < N; ++k) os << ',' << x[k];
    os << ',' << photons(x) << '\n';
  };
  if (dt <= 0.0) {
    for (std::size_t i = 0; i < tr.times.size(); ++i) row(tr.times[i], tr.states[i]);
    return;
  }
  const double t0 = tr.times.front();
  const auto n = static_cast<std::size_t>(std::floor((tr.t_end - t0) / dt + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    row(t, tr.at(t));
  }
}

double lmg_photons(const ModelParams& p, const Vec3& x) { return photon_number(SpinState::from(x), p); }

// ---------------------------------------------------------------------------------------------

struct SimulateOpts {
  std::string model = "lmg";
  std::string x0 = "0.01,0,-0.49";
  std::string alpha0;
  double t_end = 1000.0;
  double dt = 0.1;
  double w = 0.0;
};

void run_simulate(RunContext& ctx, const SimulateOpts& o) {
  const Vec3 s0 = parse_vec3(o.x0);
  ctx.options() = {{"model", o.model}, {"x0", o.x0}, {"alpha0", o.alpha0},
                   {"t_end", o.t_end}, {"dt", o.dt},  {"w", o.w}};
  const auto& p = ctx.params();
  if (o.model == "lmg") {
    IntegrateOptions<3> io;
    io.tol = ctx.tol();
    const auto tr = integrate_lmg(p, s0, {0.0, o.t_end}, io);
    auto os = ctx.open_csv("trajectory.csv", {{"status", to_string(tr.status)}});
    write_samples<3>(os, tr, lmg_columns(), o.dt, [&](const Vec3& x) { return lmg_photons(p, x); });
    auto ev = ctx.open_csv("events.csv");
    std::vector<Event<3>> extrema;
    for (const auto& e : extrema_events(tr, 0, o.w)) {
      Event<3> x;
      x.t = e.t;
      x.kind = e.sign > 0 ? EventKind::Maximum : EventKind::Minimum;
      x.value = e.value;
      extrema.push_back(x);
    }
    write_events_csv(ev, extrema);
    if (!tr.ok()) ctx.fail("integrate", std::string("integration ended with ") + to_string(tr.status));
  } else if (o.model == "dicke") {
    cplx a = slave_field(SpinState::from(s0).beta(), p);
    if (!o.alpha0.empty()) {
      const auto comma = o.alpha0.find(',');
      if (comma == std::string::npos) throw UsageError("--alpha0 must be re,im");
      a = {std::stod(o.alpha0.substr(0, comma)), std::stod(o.alpha0.substr(comma + 1))};
    }
    Vec5 d0;
    d0 << a.real(), a.imag(), s0[0], s0[1], s0[2];
    IntegrateOptions<5> io;
    io.tol = ctx.tol();
    const auto tr = integrate_dicke(p, d0, {0.0, o.t_end}, io);
    auto os = ctx.open_csv("trajectory.csv", {{"status", to_string(tr.status)}});
    write_samples<5>(os, tr, dicke_columns(), o.dt, [](const Vec5& x) { return x[0] * x[0] + x[1] * x[1]; });
    auto ev = ctx.open_csv("events.csv");
    std::vector<Event<5>> extrema;
    for (const auto& e : extrema_events(tr, 2, o.w)) {
      Event<5> x;
      x.t = e.t;
      x.kind = e.sign > 0 ? EventKind::Maximum : EventKind::Minimum;
      x.value = e.value;
      extrema.push_back(x);
    }
    write_events_csv(ev, extrema);
    if (!tr.ok()) ctx.fail("integrate", std::string("integration ended with ") + to_string(tr.status));
  } else {
    throw UsageError("--model must be lmg or dicke");
  }
}

// ---------------------------------------------------------------------------------------------

struct PhaseOpts {
  std::string grid_minus;
  double transient = 4000.0;
  double window = 1500.0;
  double max_time = 20000.0;
};

void run_phase_diagram(RunContext& ctx, const Globals& g, const PhaseOpts& o) {
  const auto& p = ctx.params();
  const GridSpec lp = parse_grid(g.grid.value_or("0.05:3:0.05"));
  const GridSpec lm = parse_grid(o.grid_minus.empty() ? json(p.lambda_minus).dump() : o.grid_minus);
  ctx.options() = {{"grid", lp.text},           {"grid_minus", lm.text}, {"transient", o.transient},
                   {"window", o.window},        {"max_time", o.max_time}};
  ClassifyOptions co;
  co.transient = o.transient;
  co.window = o.window;
  co.max_time = o.max_time;
  co.tol = ctx.tol();
  const auto lms = lm.values();
  const auto lps = lp.values();
  struct Cell {
    PhaseRow row;
    std::string error;
  };
  const auto cells = parallel_map(lms.size() * lps.size(), ctx.workers(), [&](std::size_t i) {
    Cell c;
    c.row.lambda_minus = lms[i / lps.size()];
    c.row.lambda_plus = lps[i % lps.size()];
    try {
      c.row.result = classify_phase(p.with_lambda_minus(c.row.lambda_minus).with_lambda_plus(c.row.lambda_plus), co);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
    return c;
  });
  std::vector<PhaseRow> rows;
  for (const auto& c : cells) {
    if (!c.error.empty()) {
      std::ostringstream id;
      id << std::setprecision(12) << "lambda_minus=" << c.row.lambda_minus << " lambda_plus=" << c.row.lambda_plus;
      ctx.fail(id.str(), c.error);
      continue;
    }
    rows.push_back(c.row);
  }
  auto os = ctx.open_csv("phase.csv");
  write_phase_csv(os, rows);

  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  curves.emplace_back("hopf", hopf_curve(p, lms));
  curves.emplace_back("pitchfork", pitchfork_curve(p, lms));
  try {
    const SaddleNodeSlopes sn = saddlenode_lines(p);
    std::vector<CurvePoint> a, b;
    for (double m : lms) {
      a.push_back({m, sn.inner_minus * m});
      b.push_back({m, sn.inner_plus * m});
    }
    curves.emplace_back("saddle_node_inner_minus", a);
    curves.emplace_back("saddle_node_inner_plus", b);
  } catch (const std::exception& e) {
    ctx.fail("saddle-node lines", e.what());
  }
  auto cs = ctx.open_csv("curves.csv");
  write_curve_csv(cs, curves);
}

// ---------------------------------------------------------------------------------------------

void run_po_geometry(RunContext& ctx, const Globals& g) {
  const auto& p = ctx.params();
  const GridSpec lp = parse_grid(g.grid.value_or(json(p.lambda_plus).dump()));
  ctx.options() = {{"grid", lp.text}};
  auto os = ctx.open_csv("po_geometry.csv");
  os << "lambda_minus,lambda_plus,theta_po,r_po,gamma_po,max_bx,period,spheroid_a,spheroid_b,status\n"
     << std::setprecision(12);
  for (double l : lp.values()) {
    const ModelParams q = p.with_lambda_plus(l);
    os << q.lambda_minus << ',' << l << ',';
    try {
      const POGeometry geo = po_geometry(q);
      const auto [a, b] = spheroid_axes(q);
      os << geo.theta_po << ',' << geo.r_po << ',' << geo.gamma_po << ',' << geo.max_bx << ',' << geo.period << ','
         << a << ',' << b << ",ok\n";
    } catch (const NoOrbitError&) {
      os << ",,,,,,,no_orbit\n";
    } catch (const std::exception& e) {
      os << ",,,,,,,error\n";
      ctx.fail("lambda_plus=" + json(l).dump(), e.what());
    }
  }
}

// ---------------------------------------------------------------------------------------------

struct KneadingOpts {
  int n = 12;
  double w = 0.2;
  double resolution = 1e-7;
  bool no_refine = false;
};

void run_kneading_sweep(RunContext& ctx, const Globals& g, const KneadingOpts& o) {
  const GridSpec grid = parse_grid(g.grid.value_or("1.5319:1.5334:1e-5"));
  ctx.options() = {{"grid", grid.text}, {"n", o.n}, {"w", o.w}, {"resolution", o.resolution},
                   {"no_refine", o.no_refine}};
  KneadingOptions ko;
  ko.n = o.n;
  ko.w = o.w;
  ko.branch.tol = ctx.tol();
  ko.workers = ctx.workers();
  const auto records = sweep(ctx.params(), grid.values(), ko);
  for (const auto& r : records) {
    if (r.failed()) ctx.fail("lambda_plus=" + json(r.lambda_plus).dump(), r.error);
  }
  auto os = ctx.open_csv("sweep.csv");
  write_sweep_csv(os, records);
  PlateauOptions po;
  po.resolution = o.resolution;
  KneadingEvaluator eval;
  if (!o.no_refine) {
    KneadingOptions single = ko;
    single.workers = 1;
    eval = [&, single](double l) { return kneading_record(ctx.params().with_lambda_plus(l), single); };
  }
  const auto plateaus = detect_plateaus(records, po, eval);
  auto ps = ctx.open_csv("plateaus.csv");
  write_plateau_csv(ps, plateaus);
}

// ---------------------------------------------------------------------------------------------

struct BifOpts {
  double max_period = 600.0;
  int pd_levels = 2;
  bool no_connections = false;
};

void write_connections(std::ostream& os, const std::vector<LinResult>& rs) {
  os << "sequence,lambda_plus,gap,T1,T2,free_scalar,v_u,v_s,v_ss\n" << std::setprecision(12);
  for (const auto& r : rs) {
    os << r.sequence << ',' << r.lambda_plus << ',' << r.problem.gap << ',' << r.problem.x1.T << ','
       << r.problem.x2.T << ',' << r.problem.free_scalar << ',' << r.v_u << ',' << r.v_s << ',' << r.v_ss << '\n';
  }
}

void run_bif_diagram(RunContext& ctx, const Globals& g, const BifOpts& o) {
  const GridSpec range = parse_grid(g.grid.value_or("1.3:2:0.01"));
  ctx.options() = {{"grid", range.text},
                   {"max_period", o.max_period},
                   {"pd_levels", o.pd_levels},
                   {"no_connections", o.no_connections}};
  BifDiagramOptions bo;
  bo.lambda_lo = range.lo;
  bo.lambda_hi = range.hi;
  bo.cont.max_period = o.max_period;
  bo.pd_levels = o.pd_levels;
  bo.include_connections = !o.no_connections;
  const BifDiagram d = bif_diagram(ctx.params(), bo);
  for (const auto& n : d.notes) ctx.fail("bif-diagram", n);
  auto bs = ctx.open_csv("branches.csv");
  write_branch_csv(bs, d);
  auto es = ctx.open_csv("events.csv");
  write_event_csv(es, d.events);
  auto cs = ctx.open_csv("connections.csv");
  write_connections(cs, d.connections);
}

// ---------------------------------------------------------------------------------------------

struct LinOpts {
  std::string sequence = "0";
  int side = 1;
};

void write_lin(RunContext& ctx, const LinResult& r) {
  auto cs = ctx.open_csv("connection.csv");
  cs << "t,b_x,b_y,gamma,segment\n" << std::setprecision(14);
  const auto pts = assemble(r.problem);
  const std::size_t n1 = r.problem.x1.states.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& [t, x] = pts[i];
    cs << t << ',' << x[0] << ',' << x[1] << ',' << x[2] << ',' << (i < n1 ? 1 : 2) << '\n';
  }
  auto ts = ctx.open_csv("gap_trace.csv");
  ts << "lambda_plus,gap\n" << std::setprecision(14);
  for (std::size_t i = 0; i < r.lambda_trace.size(); ++i) ts << r.lambda_trace[i] << ',' << r.gap_trace[i] << '\n';
  auto ss = ctx.open_csv("summary.csv");
  write_connections(ss, {r});
}

LinOptions lin_options(const RunContext& ctx, const GridSpec& grid) {
  LinOptions lo;
  if (grid.step > 0.0) lo.lambda_step = grid.step;
  lo.solve.ode_tol = ctx.tol();
  return lo;
}

void run_find_homoclinic(RunContext& ctx, const Globals& g, const LinOpts& o) {
  const GridSpec grid = parse_grid(g.grid.value_or("1.5315:1.5335:2e-5"));
  if (grid.step == 0.0) throw UsageError("--grid must be lo:hi:step");
  ctx.options() = {{"grid", grid.text}, {"sequence", o.sequence}};
  write_lin(ctx, lin_find_homoclinic(ctx.params(), o.sequence, grid.lo, grid.hi, lin_options(ctx, grid)));
}

void run_find_etop(RunContext& ctx, const Globals& g, const LinOpts& o) {
  const GridSpec grid = parse_grid(g.grid.value_or("1.5328:1.53283:2e-6"));
  if (grid.step == 0.0) throw UsageError("--grid must be lo:hi:step");
  if (o.side != 1 && o.side != -1) throw UsageError("--side must be 1 or -1");
  ctx.options() = {{"grid", grid.text}, {"sequence", o.sequence}, {"side", o.side}};
  BifDiagramOptions bo;
  bo.lambda_lo = std::min(bo.lambda_lo, grid.lo);
  // The saddle orbit is followed from its Hopf point down to the lower end of the window.
  const PeriodicBranch sro = saddle_orbit_branch(ctx.params(), bo);
  const PeriodicOrbitSolution seed = orbit_at(sro, grid.lo, bo.cont.periodic);
  write_lin(ctx, lin_find_etop(ctx.params(), o.sequence, o.side, grid.lo, grid.hi, seed, lin_options(ctx, grid)));
}

// ---------------------------------------------------------------------------------------------

struct DickeOpts {
  std::string x0 = "-0.1,0.065,-0.475";
  double t_end = 3000.0;
  double window = 200.0;
  double dt = 0.1;
};

void run_compare_dicke(RunContext& ctx, const DickeOpts& o) {
  const Vec3 s0 = parse_vec3(o.x0);
  ctx.options() = {{"x0", o.x0}, {"t_end", o.t_end}, {"window", o.window}, {"dt", o.dt}};
  const auto& p = ctx.params();
  const DickeComparison c = compare_dicke(p, s0, o.t_end, o.window, ctx.tol());
  auto ls = ctx.open_csv("lmg.csv");
  write_samples<3>(ls, c.lmg, lmg_columns(), o.dt, [&](const Vec3& x) { return lmg_photons(p, x); });
  auto ds = ctx.open_csv("dicke.csv");
  write_samples<5>(ds, c.dicke, dicke_columns(), o.dt, [](const Vec5& x) { return x[0] * x[0] + x[1] * x[1]; });
  auto ss = ctx.open_csv("summary.csv");
  const Vec3 le = c.lmg.final_state();
  const Vec5 de = c.dicke.final_state();
  ss << "final_distance,lmg_amplitude,dicke_amplitude,amplitude_difference,lmg_end,dicke_end\n"
     << std::setprecision(14) << c.final_distance << ',' << c.lmg_amplitude << ',' << c.dicke_amplitude << ','
     << c.lmg_amplitude - c.dicke_amplitude << ",\"" << format_vec3(le) << "\",\""
     << format_vec3(de.tail<3>()) << "\"\n";
}

// ---------------------------------------------------------------------------------------------

struct LyapunovOpts {
  std::vector<std::string> x0{"-0.035,-0.023,-0.495"};
  double horizon = 20000.0;
  double renorm = 1.0;
  double transient = 1000.0;
  double w = 0.2;
};

void run_lyapunov(RunContext& ctx, const LyapunovOpts& o) {
  json starts = json::array();
  for (const auto& s : o.x0) starts.push_back(s);
  ctx.options() = {{"x0", starts}, {"horizon", o.horizon}, {"renorm", o.renorm}, {"transient", o.transient},
                   {"w", o.w}};
  std::vector<Vec3> s0;
  for (const auto& s : o.x0) s0.push_back(parse_vec3(s));
  const auto& p = ctx.params();
  struct Row {
    LyapunovEstimate est;
    std::size_t extrema = 0;
    std::size_t switches = 0;
    std::string error;
  };
  const auto rows = parallel_map(s0.size(), ctx.workers(), [&](std::size_t i) {
    Row r;
    try {
      r.est = lyapunov_max(p, s0[i], o.horizon, o.renorm, o.transient, ctx.tol());
      // Sign pattern of the b_x lobes over the measured window.
      IntegrateOptions<3> io;
      io.tol = ctx.tol();
      const auto tr = integrate_lmg(p, s0[i], {0.0, o.transient + o.horizon}, io);
      char last = 0;
      for (const auto& e : extrema_events(tr, 0, o.w)) {
        if (e.t < o.transient) continue;
        const char sym = static_cast<char>('0' + e.symbol());
        ++r.extrema;
        if (last && sym != last) ++r.switches;
        last = sym;
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });
  auto os = ctx.open_csv("lyapunov.csv");
  os << "x0,exponent,std_error,renormalizations,converged_to_equilibrium,final_state,extrema,sign_switches\n"
     << std::setprecision(12);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (!r.error.empty()) {
      ctx.fail("x0=" + o.x0[i], r.error);
      continue;
    }
    os << '"' << o.x0[i] << "\"," << r.est.exponent << ',' << r.est.std_error << ',' << r.est.renormalizations << ','
       << (r.est.converged_to_equilibrium ? "true" : "false") << ",\"" << format_vec3(r.est.final_state) << "\","
       << r.extrema << ',' << r.switches << '\n';
  }
}

int fatal(const std::string& command, const std::string& message) {
  std::cerr << json{{"command", command}, {"subtask", "run"}, {"error", message}}.dump() << '\n';
  return kFatal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical unbalanced Dicke / LMG dynamics toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "key = value file: model parameters, command and options");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads for sweeps (0: all cores)");
  app.add_option("--lambda-plus", g.lambda_plus, "counter-rotating coupling");
  app.add_option("--lambda-minus", g.lambda_minus, "co-rotating coupling");
  app.add_option("--grid", g.grid, "lo:hi:step or a single value");
  app.add_option("--tol", g.tol, "relative integration tolerance (absolute is 1e-2 of it)");

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "single initial-value run, LMG or Dicke chart");
  c_sim->add_option("--model", sim.model, "lmg or dicke");
  c_sim->add_option("--x0", sim.x0, "initial b_x,b_y,gamma");
  c_sim->add_option("--alpha0", sim.alpha0, "initial cavity field re,im (Dicke; default slaved)");
  c_sim->add_option("--t-end", sim.t_end);
  c_sim->add_option("--dt", sim.dt, "output sampling, 0 for integrator steps");
  c_sim->add_option("--w", sim.w, "exclusion half-width of the b_x extrema");

  PhaseOpts ph;
  auto* c_phase = app.add_subcommand("phase-diagram", "phase labels over the coupling plane");
  c_phase->add_option("--grid-minus", ph.grid_minus, "lambda_minus grid lo:hi:step");
  c_phase->add_option("--transient", ph.transient);
  c_phase->add_option("--window", ph.window);
  c_phase->add_option("--max-time", ph.max_time);

  auto* c_po = app.add_subcommand("po-geometry", "closed-form orbit geometry for xi = 0");

  KneadingOpts kn;
  auto* c_kn = app.add_subcommand("kneading-sweep", "kneading sequences and plateaus over lambda_plus");
  c_kn->add_option("--n", kn.n, "symbols per record");
  c_kn->add_option("--w", kn.w, "exclusion half-width");
  c_kn->add_option("--resolution", kn.resolution, "plateau edge bisection resolution");
  c_kn->add_flag("--no-refine", kn.no_refine, "skip edge bisection");

  BifOpts bif;
  auto* c_bif = app.add_subcommand("bif-diagram", "continuation in lambda_plus over --grid lo:hi");
  c_bif->add_option("--max-period", bif.max_period);
  c_bif->add_option("--pd-levels", bif.pd_levels);
  c_bif->add_flag("--no-connections", bif.no_connections, "skip the Lin searches");

  LinOpts hom;
  auto* c_hom = app.add_subcommand("find-homoclinic", "homoclinic orbit of N_u with a given symbol sequence");
  c_hom->add_option("--sequence", hom.sequence);
  LinOpts etop;
  auto* c_etop = app.add_subcommand("find-etop", "connection from N_u to the saddle orbit SRO");
  c_etop->add_option("--sequence", etop.sequence, "symbols before the connection reaches the orbit");
  c_etop->add_option("--side", etop.side, "+1: orbit with b_x > 0");

  DickeOpts dk;
  auto* c_dk = app.add_subcommand("compare-dicke", "paired LMG and Dicke runs from one spin state");
  c_dk->add_option("--x0", dk.x0);
  c_dk->add_option("--t-end", dk.t_end);
  c_dk->add_option("--window", dk.window, "final window for the amplitude");
  c_dk->add_option("--dt", dk.dt);

  LyapunovOpts ly;
  auto* c_ly = app.add_subcommand("lyapunov", "largest Lyapunov exponent and b_x sign switching");
  c_ly->add_option("--x0", ly.x0, "initial states, repeatable");
  c_ly->add_option("--horizon", ly.horizon);
  c_ly->add_option("--renorm", ly.renorm);
  c_ly->add_option("--transient", ly.transient);
  c_ly->add_option("--w", ly.w);

  std::string command = "lmgdyn";
  ModelParams params{0.5, 0.2, 4.0, 1.5, 1.5, 0.02, 0.0};
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    std::string from_config;
    args = expand_config(args, params, from_config);
    const bool named = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      for (const auto* sc : app.get_subcommands({})) {
        if (sc->get_name() == a) return true;
      }
      return false;
    });
    if (!named && !from_config.empty()) args.insert(args.begin(), from_config);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fatal(command, e.what());
  } catch (const std::exception& e) {
    return fatal(command, e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  command = sub->get_name();
  try {
    if (g.lambda_plus) params.lambda_plus = *g.lambda_plus;
    if (g.lambda_minus) params.lambda_minus = *g.lambda_minus;
    params.validate();
    RunContext ctx(command, params, g.out, worker_count(g),
                   tolerances(g, sub == c_phase ? ode::kScanTol : ode::kTightTol));
    if (sub == c_sim) run_simulate(ctx, sim);
    else if (sub == c_phase) run_phase_diagram(ctx, g, ph);
    else if (sub == c_po) run_po_geometry(ctx, g);
    else if (sub == c_kn) run_kneading_sweep(ctx, g, kn);
    else if (sub == c_bif) run_bif_diagram(ctx, g, bif);
    else if (sub == c_hom) run_find_homoclinic(ctx, g, hom);
    else if (sub == c_etop) run_find_etop(ctx, g, etop);
    else if (sub == c_dk) run_compare_dicke(ctx, dk);
    else if (sub == c_ly) run_lyapunov(ctx, ly);
    ctx.write_config();
    ctx.report_errors();
    return ctx.partial() ? kPartial : 0;
  } catch (const std::exception& e) {
    return fatal(command, e.what());
  }
}
