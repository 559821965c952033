#include "lmg/params_io.hpp"

#include <charconv>
#include <iomanip>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace lmg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("bad numeric value for '" + key + "': " + text);
  }
  return v;
}

}  // namespace

std::string format_params(const ModelParams& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "omega = " << p.omega << '\n'
     << "omega0 = " << p.omega0 << '\n'
     << "kappa = " << p.kappa << '\n'
     << "lambda_minus = " << p.lambda_minus << '\n'
     << "lambda_plus = " << p.lambda_plus << '\n'
     << "gamma_down = " << p.gamma_down << '\n'
     << "gamma_up = " << p.gamma_up << '\n';
  return os.str();
}

ModelParams parse_params(std::istream& in, std::map<std::string, std::string>* extra) {
  ModelParams p;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "omega") p.omega = parse_real(key, val);
    else if (key == "omega0") p.omega0 = parse_real(key, val);
    else if (key == "kappa") p.kappa = parse_real(key, val);
    else if (key == "lambda_minus") p.lambda_minus = parse_real(key, val);
    else if (key == "lambda_plus") p.lambda_plus = parse_real(key, val);
    else if (key == "gamma_down") p.gamma_down = parse_real(key, val);
    else if (key == "gamma_up") p.gamma_up = parse_real(key, val);
    else if (extra) (*extra)[key] = val;
    else throw std::invalid_argument("unknown parameter key '" + key + "'");
  }
  p.validate();
  return p;
}

ModelParams parse_params(const std::string& text, std::map<std::string, std::string>* extra) {
  std::istringstream is(text);
  return parse_params(is, extra);
}

}  // namespace lmg
