#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <sstream>

#include "lmg/kneading.hpp"
#include "lmg/params_io.hpp"

namespace lmgcli {

namespace {

double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("bad number in " + what + ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<double> GridSpec::values() const {
  if (step == 0.0) return {lo};
  return lmg::uniform_grid(lo, hi, step);
}

GridSpec parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  GridSpec g;
  g.text = text;
  if (parts.size() == 1) {
    g.lo = g.hi = to_double(parts[0], "grid");
    return g;
  }
  if (parts.size() != 3) throw UsageError("grid must be lo:hi:step, got '" + text + "'");
  g.lo = to_double(parts[0], "grid");
  g.hi = to_double(parts[1], "grid");
  g.step = to_double(parts[2], "grid");
  if (!(g.step > 0.0) || !(g.hi >= g.lo)) throw UsageError("grid needs lo <= hi and step > 0: '" + text + "'");
  return g;
}

lmg::Vec3 parse_vec3(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw UsageError("state must be b_x,b_y,gamma, got '" + text + "'");
  return {to_double(parts[0], "state"), to_double(parts[1], "state"), to_double(parts[2], "state")};
}

std::string format_vec3(const lmg::Vec3& v) {
  return json(v[0]).dump() + "," + json(v[1]).dump() + "," + json(v[2]).dump();
}

json params_json(const lmg::ModelParams& p) {
  return {{"omega", p.omega},           {"omega0", p.omega0},         {"kappa", p.kappa},
          {"lambda_minus", p.lambda_minus}, {"lambda_plus", p.lambda_plus}, {"gamma_down", p.gamma_down},
          {"gamma_up", p.gamma_up}};
}

RunContext::RunContext(std::string command, lmg::ModelParams p, std::filesystem::path out, unsigned workers,
                       lmg::ode::Tolerances tol)
    : command_(std::move(command)), params_(p), out_(std::move(out)), workers_(workers), tol_(tol) {
  std::filesystem::create_directories(out_);
}

json RunContext::header(const std::string& file, const json& extra) const {
  json h{{"command", command_},
         {"file", file},
         {"params", params_json(params_)},
         {"tolerances", {{"rel", tol_.rel}, {"abs", tol_.abs}}},
         {"options", options_}};
  for (const auto& [k, v] : extra.items()) h[k] = v;
  return h;
}

std::ofstream RunContext::open_csv(const std::string& name, const json& extra) const {
  std::ofstream os(out_ / name);
  if (!os) throw std::runtime_error("cannot write " + (out_ / name).string());
  os << "# " << header(name, extra).dump() << '\n';
  return os;
}

void RunContext::write_config() const {
  std::ofstream os(out_ / "run.cfg");
  if (!os) throw std::runtime_error("cannot write " + (out_ / "run.cfg").string());
  os << "command = " << command_ << '\n' << lmg::format_params(params_);
  os << "tol = " << json(tol_.rel).dump() << '\n';
  for (const auto& [k, v] : options_.items()) {
    if (v.is_boolean()) {
      // Flags are written only when set.
      if (v.get<bool>()) os << k << " = true\n";
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& item : v) joined += (joined.empty() ? "" : ";") + item.get<std::string>();
      os << k << " = " << joined << '\n';
    } else if (v.is_string()) {
      if (!v.get<std::string>().empty()) os << k << " = " << v.get<std::string>() << '\n';
    } else {
      os << k << " = " << v.dump() << '\n';
    }
  }
}

void RunContext::fail(const std::string& subtask, const std::string& message) {
  errors_.push_back({{"command", command_}, {"subtask", subtask}, {"error", message}});
}

void RunContext::report_errors() const {
  if (errors_.empty()) return;
  for (const auto& e : errors_) std::cerr << e.dump() << '\n';
  std::ofstream os(out_ / "errors.json");
  os << errors_.dump(2) << '\n';
}

std::vector<std::string> expand_config(const std::vector<std::string>& args, lmg::ModelParams& params,
                                       std::string& command) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  std::ostringstream text;
  // Keys missing from the file keep the values already in `params`.
  text << lmg::format_params(params) << in.rdbuf();
  std::map<std::string, std::string> extra;
  try {
    params = lmg::parse_params(text.str(), &extra);
  } catch (const std::invalid_argument& e) {
    throw UsageError(path + ": " + e.what());
  }
  std::vector<std::string> out = args;
  if (auto it = extra.find("command"); it != extra.end()) {
    command = it->second;
    extra.erase(it);
  }
  for (const auto& [key, value] : extra) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given || value.empty()) continue;
    if (value == "true") {
      out.push_back(flag);
    } else if (value != "false") {
      // Repeated options are stored joined by ';'.
      std::istringstream items(value);
      for (std::string item; std::getline(items, item, ';');) out.push_back(flag + "=" + item);
    }
  }
  return out;
}

}  // namespace lmgcli
