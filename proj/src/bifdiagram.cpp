#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <sstream>

#include "bvp_internal.hpp"
#include "lmg/bvpcont.hpp"
#include "lmg/localbif.hpp"

namespace lmg {

namespace {

const Mat3& P() {
  static const Mat3 m = detail::parity_matrix();
  return m;
}

BifurcationEvent mirrored(BifurcationEvent e, const std::string& id) {
  e.branch = id;
  e.state = P() * e.state;
  return e;
}

EquilibriumBranch mirrored(const EquilibriumBranch& b, const std::string& id) {
  EquilibriumBranch out = b;
  out.id = id;
  for (auto& pt : out.points) pt.x = P() * pt.x;
  for (auto& e : out.events) e = mirrored(e, id);
  return out;
}

PeriodicBranch mirrored(const PeriodicBranch& b, const std::string& id) {
  PeriodicBranch out = b;
  out.id = id;
  for (auto& po : out.points) {
    for (auto& x : po.segment.states) x = P() * x;
    for (auto& s : po.stms) s = P() * s * P();
  }
  for (auto& e : out.events) e = mirrored(e, id);
  return out;
}

// Splits the symmetric counter-lasing branch at its PPO; the stable part keeps the larger lambda.
std::pair<PeriodicBranch, PeriodicBranch> split_at(const PeriodicBranch& b, double lam) {
  PeriodicBranch hi, lo;
  hi.id = "CL_s";
  lo.id = "CL_u";
  hi.end_reason = "pitchfork of orbits";
  lo.end_reason = b.end_reason;
  for (const auto& po : b.points) (po.params.lambda_plus >= lam ? hi : lo).points.push_back(po);
  for (auto e : b.events) {
    const bool upper = e.lambda_plus >= lam && e.kind != BifurcationKind::PitchforkPO;
    e.branch = upper ? hi.id : lo.id;
    (upper ? hi : lo).events.push_back(e);
  }
  return {hi, lo};
}

const BifurcationEvent* first_of(const std::vector<BifurcationEvent>& ev, BifurcationKind k) {
  for (const auto& e : ev) {
    if (e.kind == k) return &e;
  }
  return nullptr;
}

double end_lambda(const PeriodicBranch& b) { return b.points.back().params.lambda_plus; }

bool ended_at_period_limit(const PeriodicBranch& b, const ContinuationOptions& c) {
  return !b.points.empty() && b.points.back().period >= 0.9 * c.max_period;
}

BifurcationEvent connection_event(BifurcationKind kind, const LinResult& r, const std::string& label) {
  BifurcationEvent e;
  e.kind = kind;
  e.lambda_plus = r.lambda_plus;
  e.branch = label;
  e.value = r.v_u;
  e.state = r.problem.x1.states.front();
  std::ostringstream d;
  d << std::setprecision(10) << "sequence " << r.sequence << " gap " << r.problem.gap << " T1 " << r.problem.x1.T
    << " T2 " << r.problem.x2.T << " v_u " << r.v_u << " v_s " << r.v_s;
  e.diagnostics = d.str();
  return e;
}

struct EqChain {
  std::vector<EquilibriumBranch> branches;
  std::vector<PeriodicBranch> orbits;
  std::vector<std::string> notes;
};

struct OrbitChain {
  std::vector<PeriodicBranch> orbits;
  std::vector<std::string> notes;
};

EqChain equilibrium_chain(const ModelParams& p, const BifDiagramOptions& opt) {
  EqChain out;
  ContinuationOptions c = opt.cont;
  c.lambda_min = opt.lambda_lo;
  c.lambda_max = opt.lambda_hi;
  const ModelParams p0 = p.with_lambda_plus(opt.lambda_lo);
  const EquilibriumBranch n = continue_branch(p0, normal_equilibrium(p0).state, 1.0, c, "N");
  out.branches.push_back(n);
  const BifurcationEvent* pf = first_of(n.events, BifurcationKind::PitchforkEq);
  if (!pf) {
    out.notes.push_back("N: no pitchfork in range, superradiant branches skipped");
    return out;
  }
  // Superradiant states are seeded just past the first pitchfork of the normal state.
  double seed_lam = pf->lambda_plus + 0.05;
  for (const auto& e : n.events) {
    if (e.kind == BifurcationKind::PitchforkEq && e.lambda_plus > pf->lambda_plus) {
      seed_lam = std::min(seed_lam, 0.5 * (pf->lambda_plus + e.lambda_plus));
      break;
    }
  }
  const ModelParams ps = p.with_lambda_plus(seed_lam);
  const auto sr = superradiant_equilibria(ps);
  const Equilibrium* plus = nullptr;
  for (const auto& e : sr) {
    if (e.label == EquilibriumLabel::SuperradiantPlus) plus = &e;
  }
  if (!plus) {
    out.notes.push_back("SR: no superradiant equilibrium at the seed parameter");
    return out;
  }
  const EquilibriumBranch down = continue_branch(ps, plus->state, -1.0, c, "SR+");
  EquilibriumBranch up = continue_branch(ps, plus->state, 1.0, c, "SR+");
  EquilibriumBranch srp;
  srp.id = "SR+";
  srp.points.assign(down.points.rbegin(), down.points.rend());
  srp.points.insert(srp.points.end(), up.points.begin() + 1, up.points.end());
  srp.events = down.events;
  srp.events.insert(srp.events.end(), up.events.begin(), up.events.end());
  srp.end_reason = down.end_reason + " / " + up.end_reason;
  out.branches.push_back(srp);
  out.branches.push_back(mirrored(srp, "SR-"));

  const BifurcationEvent* hopf = first_of(srp.events, BifurcationKind::Hopf);
  if (!hopf) {
    out.notes.push_back("SR+: no Hopf point, SRO skipped");
    return out;
  }
  ContinuationOptions co = c;
  co.lambda_min = std::max(opt.lambda_lo, pf->lambda_plus);
  try {
    const PeriodicBranch sro = continue_from_hopf(p.with_lambda_plus(hopf->lambda_plus), hopf->state, co, "SRO+");
    out.orbits.push_back(sro);
    out.orbits.push_back(mirrored(sro, "SRO-"));
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("SRO: ") + e.what());
  }
  return out;
}

OrbitChain orbit_chain(const ModelParams& p, const BifDiagramOptions& opt) {
  OrbitChain out;
  ContinuationOptions c = opt.cont;
  c.lambda_min = opt.lambda_lo;
  c.lambda_max = opt.lambda_hi;
  PeriodicOrbitSolution start;
  try {
    start = periodic_from_simulation(p.with_lambda_plus(opt.lambda_hi), opt.cl_seed, 3000.0, c.periodic);
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("CL: ") + e.what());
    return out;
  }
  const PeriodicBranch cl = continue_branch(start, -1.0, c, "CL");
  const BifurcationEvent* ppo = first_of(cl.events, BifurcationKind::PitchforkPO);
  if (!ppo) {
    out.orbits.push_back(cl);
    out.notes.push_back("CL: no pitchfork of orbits, asymmetric branches skipped");
    return out;
  }
  auto [hi, lo] = split_at(cl, ppo->lambda_plus);
  out.orbits.push_back(hi);
  out.orbits.push_back(lo);

  ContinuationOptions ca = c;
  ca.lambda_min = opt.lambda_lo;
  ca.lambda_max = ppo->lambda_plus + 1e-3;
  try {
    const PeriodicOrbitSolution at = orbit_at(cl, ppo->lambda_plus, c.periodic);
    PeriodicBranch cur = continue_from_ppo(at, 1.0, ca, "CL_asym+");
    out.orbits.push_back(cur);
    out.orbits.push_back(mirrored(cur, "CL_asym-"));
    for (int level = 1; level <= opt.pd_levels; ++level) {
      const BifurcationEvent* pd = first_of(cur.events, BifurcationKind::PeriodDoubling);
      if (!pd) {
        out.notes.push_back(cur.id + ": no period doubling");
        break;
      }
      if (level == opt.pd_levels) break;
      const PeriodicOrbitSolution o = orbit_at(cur, pd->lambda_plus, c.periodic);
      const std::string id = "PD" + std::to_string(level) + "+";
      cur = continue_from_pd(o, 1.0, ca, id);
      out.orbits.push_back(cur);
      out.orbits.push_back(mirrored(cur, "PD" + std::to_string(level) + "-"));
    }
  } catch (const std::exception& e) {
    out.notes.push_back(std::string("asymmetric branches: ") + e.what());
  }
  return out;
}

}  // namespace

BifDiagram bif_diagram(const ModelParams& p, const BifDiagramOptions& opt) {
  if (!(opt.lambda_lo < opt.lambda_hi)) throw std::invalid_argument("empty lambda_plus range");
  BifDiagram d;
  auto eq_job = std::async(std::launch::async, [&] { return equilibrium_chain(p, opt); });
  auto po_job = std::async(std::launch::async, [&] { return orbit_chain(p, opt); });
  EqChain eq;
  OrbitChain po;
  try {
    eq = eq_job.get();
  } catch (const std::exception& e) {
    eq.notes.push_back(std::string("equilibria: ") + e.what());
  }
  try {
    po = po_job.get();
  } catch (const std::exception& e) {
    po.notes.push_back(std::string("orbits: ") + e.what());
  }
  d.equilibria = std::move(eq.branches);
  d.orbits = std::move(eq.orbits);
  d.orbits.insert(d.orbits.end(), po.orbits.begin(), po.orbits.end());
  d.notes = std::move(eq.notes);
  d.notes.insert(d.notes.end(), po.notes.begin(), po.notes.end());

  auto find = [&](const std::string& id) -> const PeriodicBranch* {
    for (const auto& b : d.orbits) {
      if (b.id == id && !b.points.empty()) return &b;
    }
    return nullptr;
  };
  if (opt.include_connections) {
    const ModelParams pm = p.with_lambda_plus(opt.lambda_lo);
    // Lin windows are centred on the parameters where orbit branches reach the period limit.
    LinOptions lo = opt.lin;
    const PeriodicBranch* sro = find("SRO+");
    if (sro && ended_at_period_limit(*sro, opt.cont)) {
      const double c = end_lambda(*sro);
      try {
        d.connections.push_back(lin_find_homoclinic(pm, "0", c - opt.connection_window, c + opt.connection_window, lo));
      } catch (const std::exception& e) {
        d.notes.push_back(std::string("Hom_0: ") + e.what());
      }
    } else {
      d.notes.push_back("Hom_0: SRO branch did not reach the period limit");
    }
    const PeriodicBranch* asym = find("CL_asym+");
    if (asym && ended_at_period_limit(*asym, opt.cont)) {
      const double c = end_lambda(*asym);
      const double w = 0.5 * opt.connection_window;
      LinOptions fine = lo;
      fine.lambda_step = 0.02 * w;
      try {
        d.connections.push_back(lin_find_homoclinic(pm, "01", c - w, c + w, fine));
        if (sro) {
          // The EtoP connection lies below Hom_01 on the SRO side.
          const double top = d.connections.back().lambda_plus;
          const double bottom = top - 2.0 * w;
          const PeriodicOrbitSolution seed = orbit_at(*sro, bottom, opt.cont.periodic);
          d.connections.push_back(lin_find_etop(pm, "0", 1, bottom, top - fine.lambda_step, seed, fine));
        }
      } catch (const std::exception& e) {
        d.notes.push_back(std::string("Hom_01 / EtoP: ") + e.what());
      }
    } else {
      d.notes.push_back("Hom_01: asymmetric branch did not reach the period limit");
    }
  }

  for (const auto& b : d.equilibria) d.events.insert(d.events.end(), b.events.begin(), b.events.end());
  for (const auto& b : d.orbits) d.events.insert(d.events.end(), b.events.begin(), b.events.end());
  for (const auto& r : d.connections) {
    const bool etop = r.sequence.find('(') != std::string::npos;
    d.events.push_back(connection_event(etop ? BifurcationKind::EtoP : BifurcationKind::Homoclinic, r,
                                        (etop ? "EtoP_" : "Hom_") + r.sequence));
  }
  std::stable_sort(d.events.begin(), d.events.end(),
                   [](const auto& a, const auto& b) { return a.lambda_plus < b.lambda_plus; });
  return d;
}

PeriodicBranch saddle_orbit_branch(const ModelParams& p, const BifDiagramOptions& opt) {
  EqChain eq = equilibrium_chain(p, opt);
  for (auto& b : eq.orbits) {
    if (b.id == "SRO+" && !b.points.empty()) return std::move(b);
  }
  std::string why = "no saddle orbit branch";
  for (const auto& n : eq.notes) why += "; " + n;
  throw std::runtime_error(why);
}

void write_branch_csv(std::ostream& os, const BifDiagram& d) {
  const auto old = os.precision(12);
  os << "branch_id,lambda_plus,max_abs_bx,stability,period\n";
  for (const auto& b : d.equilibria) {
    for (const auto& pt : b.points) {
      os << b.id << ',' << pt.lambda_plus << ',' << std::abs(pt.x[0]) << ','
         << (pt.unstable_dim == 0 ? "stable" : "unstable") << ",\n";
    }
  }
  for (const auto& b : d.orbits) {
    for (const auto& po : b.points) {
      os << b.id << ',' << po.params.lambda_plus << ',' << po.max_bx << ',' << (po.stable ? "stable" : "unstable")
         << ',' << po.period << '\n';
    }
  }
  os.precision(old);
}

void write_event_csv(std::ostream& os, const std::vector<BifurcationEvent>& events) {
  const auto old = os.precision(12);
  os << "kind,lambda_plus,branch,value_re,value_im,diagnostics\n";
  for (const auto& e : events) {
    os << to_string(e.kind) << ',' << e.lambda_plus << ',' << e.branch << ',' << e.value.real() << ','
       << e.value.imag() << ",\"" << e.diagnostics << "\"\n";
  }
  os.precision(old);
}

}  // namespace lmg
