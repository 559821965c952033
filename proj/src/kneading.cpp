#include "lmg/kneading.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "lmg/localbif.hpp"

namespace lmg {

double Dyadic::value() const { return std::ldexp(static_cast<double>(numerator), -bits); }

std::string Dyadic::str() const {
  std::uint64_t num = numerator;
  int b = bits;
  while (b > 0 && num % 2 == 0) {
    num /= 2;
    --b;
  }
  if (b == 0) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(std::uint64_t{1} << b);
}

const char* to_string(KneadingTerminal t) {
  switch (t) {
    case KneadingTerminal::Completed: return "completed";
    case KneadingTerminal::EscapedToAttractor: return "escaped-to-attractor";
    case KneadingTerminal::HorizonExhausted: return "horizon-exhausted";
  }
  return "?";
}

UnstableDirection normal_unstable_direction(const ModelParams& p) {
  const Equilibrium n = normal_equilibrium(p);
  const double thr = zero_threshold(n.eigenvalues);
  const cplx lead = n.eigenvalues[0];
  if (lead.real() <= thr) throw KneadingError("normal state has no unstable direction");
  if (std::abs(lead.imag()) > thr) throw KneadingError("unstable eigenvalue of the normal state is complex");
  if (n.eigenvalues[1].real() >= -thr) throw KneadingError("normal state is not a saddle with one unstable direction");
  Vec3 v = n.eigenvectors.col(0).real();
  if (v.norm() < 1e-12) v = n.eigenvectors.col(0).imag();
  v.normalize();
  if (v[0] < 0.0) v = -v;
  return {n.state, v, lead.real()};
}

namespace {

IntegrateOptions<3> branch_options(const ModelParams& p, const BranchOptions& opt, const Vec3& origin) {
  if (!(opt.offset > 0.0) || !(opt.horizon > 0.0)) throw std::invalid_argument("offset and horizon must be positive");
  IntegrateOptions<3> io;
  io.tol = opt.tol;
  const LmgField f(p);
  const double speed = opt.converged_speed;
  const double away = 10.0 * opt.offset;
  io.stop = [f, speed, origin, away](double, const ode::Vec<3>& y) {
    return f(y).norm() < speed && (y - origin).norm() > away;
  };
  return io;
}

// Symbol repeated forever once the run has settled on an equilibrium outside the exclusion band.
char tail_symbol(const Vec3& settled, double w) {
  if (settled[0] < -w) return '0';
  if (settled[0] > w) return '1';
  return '\0';
}

}  // namespace

Trajectory<3> unstable_branch(const ModelParams& p, const BranchOptions& opt) {
  const auto u = normal_unstable_direction(p);
  auto io = branch_options(p, opt, u.equilibrium);
  return integrate_lmg(p, u.equilibrium - opt.offset * u.direction, {0.0, opt.horizon}, io);
}

Trajectory<3> parity_image(const Trajectory<3>& tr) {
  Trajectory<3> out = tr;
  auto flip = [](ode::Vec<3>& v) {
    v[0] = -v[0];
    v[1] = -v[1];
  };
  for (auto& s : out.states) flip(s);
  for (auto& st : out.steps) {
    flip(st.y0);
    for (auto& c : st.F) flip(c);
  }
  // Event kinds depend on the watched component; the image carries none.
  out.events.clear();
  return out;
}

std::string kneading_sequence(const Trajectory<3>& traj, std::size_t n, double w) {
  std::string s;
  for (const auto& e : extrema_events(traj, 0, w)) {
    if (s.size() == n) break;
    s.push_back(static_cast<char>('0' + e.symbol()));
  }
  if (s.size() < n && traj.status == IntegrationStatus::StoppedByPredicate) {
    if (const char c = tail_symbol(traj.final_state(), w)) s.resize(n, c);
  }
  return s;
}

Dyadic kneading_invariant(const std::string& symbols, int n) {
  if (n < 0 || n > 63) throw std::invalid_argument("kneading invariant supports 0..63 symbols");
  if (symbols.size() > static_cast<std::size_t>(n)) throw std::invalid_argument("more symbols than n");
  Dyadic k{0, n};
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const char c = symbols[i];
    if (c != '0' && c != '1') throw std::invalid_argument("symbols must be 0 or 1");
    if (c == '1') k.numerator |= std::uint64_t{1} << (n - 1 - static_cast<int>(i));
  }
  return k;
}

std::string negate(const std::string& symbols) {
  std::string out = symbols;
  for (char& c : out) {
    if (c == '0') c = '1';
    else if (c == '1') c = '0';
    else throw std::invalid_argument("symbols must be 0 or 1");
  }
  return out;
}

std::string negate_map(const std::string& left_sequence, std::size_t k) {
  if (k >= left_sequence.size()) throw std::invalid_argument("prefix covers the whole sequence");
  if (left_sequence[k] != '1') throw std::invalid_argument("symbol after the prefix must be 1");
  return left_sequence.substr(0, k) + negate(left_sequence.substr(k));
}

KneadingRecord kneading_record(const ModelParams& p, const KneadingOptions& opt) {
  KneadingRecord rec;
  rec.lambda_plus = p.lambda_plus;
  rec.K = Dyadic{0, opt.n};
  try {
    if (opt.n < 1 || opt.n > 63) throw std::invalid_argument("n must be in 1..63");
    const auto u = normal_unstable_direction(p);
    auto io = branch_options(p, opt.branch, u.equilibrium);
    io.keep_dense = false;
    io.keep_states = false;
    const double w = opt.w;
    auto maxima = EventSpec<3>::extremum(0, +1);
    maxima.exclude = [w](const ode::Vec<3>& s) { return s[0] <= w; };
    auto minima = EventSpec<3>::extremum(0, -1);
    minima.exclude = [w](const ode::Vec<3>& s) { return s[0] >= -w; };
    io.events = {maxima, minima};
    io.terminal_total = static_cast<std::size_t>(opt.n);
    const auto tr = integrate_lmg(p, u.equilibrium - opt.branch.offset * u.direction, {0.0, opt.branch.horizon}, io);
    if (!tr.ok()) throw std::runtime_error(std::string("integration failed: ") + to_string(tr.status));
    for (const auto& e : tr.events) rec.symbols.push_back(e.kind == EventKind::Maximum ? '1' : '0');
    const auto n = static_cast<std::size_t>(opt.n);
    if (rec.symbols.size() >= n) {
      rec.symbols.resize(n);
      rec.terminal = KneadingTerminal::Completed;
    } else if (tr.status == IntegrationStatus::StoppedByPredicate) {
      rec.terminal = KneadingTerminal::EscapedToAttractor;
      if (const char c = tail_symbol(tr.final_state(), w)) rec.symbols.resize(n, c);
    } else {
      rec.terminal = KneadingTerminal::HorizonExhausted;
    }
    rec.K = kneading_invariant(rec.symbols, opt.n);
  } catch (const std::exception& e) {
    rec.symbols.clear();
    rec.error = e.what();
  }
  return rec;
}

std::vector<KneadingRecord> sweep(const ModelParams& p, const std::vector<double>& lambda_plus,
                                  const KneadingOptions& opt) {
  if (!std::is_sorted(lambda_plus.begin(), lambda_plus.end())) throw std::invalid_argument("grid must be sorted");
  std::vector<KneadingRecord> out(lambda_plus.size());
  unsigned workers = opt.workers != 0 ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, lambda_plus.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < lambda_plus.size(); i = next++) {
      out[i] = kneading_record(p.with_lambda_plus(lambda_plus[i]), opt);
    }
  };
  if (workers <= 1) {
    work();
    return out;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  return out;
}

namespace {

bool same_plateau(const KneadingRecord& r, const Dyadic& anchor, std::uint64_t tol) {
  if (r.failed() || r.K.bits != anchor.bits) return false;
  const auto a = r.K.numerator, b = anchor.numerator;
  return (a > b ? a - b : b - a) <= tol;
}

// Last point on the `inside` side of a transition between lp_in and lp_out.
template <class Pred>
double bisect_edge(double lp_in, double lp_out, double resolution, const KneadingEvaluator& evaluate, Pred inside) {
  while (std::abs(lp_out - lp_in) > resolution) {
    const double mid = 0.5 * (lp_in + lp_out);
    if (inside(evaluate(mid))) lp_in = mid;
    else lp_out = mid;
  }
  return 0.5 * (lp_in + lp_out);
}

}  // namespace

std::vector<PlateauInterval> detect_plateaus(const std::vector<KneadingRecord>& records, const PlateauOptions& opt,
                                             const KneadingEvaluator& evaluate) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].lambda_plus < records[i - 1].lambda_plus) throw std::invalid_argument("records must be sorted");
  }
  const std::size_t gap = opt.min_points > 0 ? opt.min_points - 1 : 0;
  std::vector<PlateauInterval> out;
  std::size_t i = 0;
  while (i < records.size()) {
    if (records[i].failed()) {
      ++i;
      continue;
    }
    const Dyadic anchor = records[i].K;
    auto member = [&](const KneadingRecord& r) { return same_plateau(r, anchor, opt.k_tolerance); };
    std::vector<std::size_t> hits{i};
    std::size_t j = i + 1;
    while (j < records.size()) {
      if (member(records[j])) {
        hits.push_back(j);
        ++j;
        continue;
      }
      std::size_t k = j;
      while (k < records.size() && k - j < gap && !member(records[k])) ++k;
      if (k < records.size() && k - j < gap && member(records[k])) {
        j = k;
        continue;
      }
      break;
    }
    if (hits.size() < std::max<std::size_t>(1, opt.min_points)) {
      ++i;
      continue;
    }
    const std::size_t first = hits.front(), last = hits.back();
    PlateauInterval pl;
    pl.K = anchor;
    pl.points = hits.size();
    pl.left_sequence = records[first].symbols;
    pl.right_sequence = records[last].symbols;
    pl.lo = records[first].lambda_plus;
    pl.hi = records[last].lambda_plus;
    if (evaluate) {
      if (first > 0) pl.lo = bisect_edge(pl.lo, records[first - 1].lambda_plus, opt.resolution, evaluate, member);
      if (last + 1 < records.size()) {
        pl.hi = bisect_edge(pl.hi, records[last + 1].lambda_plus, opt.resolution, evaluate, member);
      }
    }
    for (std::size_t h = 1; h < hits.size(); ++h) {
      const auto& a = records[hits[h - 1]];
      const auto& b = records[hits[h]];
      if (hits[h] == hits[h - 1] + 1 && a.symbols == b.symbols) continue;
      double centre = 0.5 * (a.lambda_plus + b.lambda_plus);
      if (evaluate && hits[h] == hits[h - 1] + 1) {
        const std::string left = a.symbols;
        centre = bisect_edge(a.lambda_plus, b.lambda_plus, opt.resolution, evaluate,
                             [&left](const KneadingRecord& r) { return r.symbols == left; });
      } else if (evaluate) {
        const double l = bisect_edge(a.lambda_plus, records[hits[h - 1] + 1].lambda_plus, opt.resolution, evaluate, member);
        const double r = bisect_edge(b.lambda_plus, records[hits[h] - 1].lambda_plus, opt.resolution, evaluate, member);
        centre = 0.5 * (l + r);
      }
      pl.spike_centers.push_back(centre);
    }
    out.push_back(std::move(pl));
    i = last + 1;
  }
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid needs lo <= hi and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = lo + static_cast<double>(k) * step;
  return g;
}

void write_sweep_csv(std::ostream& os, const std::vector<KneadingRecord>& records) {
  os << "lambda_plus,K_numerator,n,symbols,terminal\n";
  const auto prec = os.precision(17);
  for (const auto& r : records) {
    os << r.lambda_plus << ',' << r.K.numerator << ',' << r.K.bits << ',' << r.symbols << ','
       << (r.failed() ? "failed" : to_string(r.terminal)) << '\n';
  }
  os.precision(prec);
}

void write_plateau_csv(std::ostream& os, const std::vector<PlateauInterval>& plateaus) {
  os << "lo,hi,K,left_seq,right_seq,spike_center\n";
  const auto prec = os.precision(17);
  for (const auto& p : plateaus) {
    os << p.lo << ',' << p.hi << ',' << p.K.str() << ',' << p.left_sequence << ',' << p.right_sequence << ',';
    for (std::size_t k = 0; k < p.spike_centers.size(); ++k) os << (k ? ";" : "") << p.spike_centers[k];
    os << '\n';
  }
  os.precision(prec);
}

}  // namespace lmg
