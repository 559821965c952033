#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "lmg/dop853.hpp"
#include "lmg/model.hpp"

namespace lmgcli {

using json = nlohmann::ordered_json;

/// Fatal misuse of the command line or config; exit status 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
  std::string text;

  std::vector<double> values() const;
};

GridSpec parse_grid(const std::string& text);
lmg::Vec3 parse_vec3(const std::string& text);
std::string format_vec3(const lmg::Vec3& v);

json params_json(const lmg::ModelParams& p);

/// Shared state of one run: parameters, output directory, options echoed into every artifact,
/// and the failures of individual subtasks.
class RunContext {
 public:
  RunContext(std::string command, lmg::ModelParams p, std::filesystem::path out, unsigned workers,
             lmg::ode::Tolerances tol);

  const lmg::ModelParams& params() const { return params_; }
  const lmg::ode::Tolerances& tol() const { return tol_; }
  unsigned workers() const { return workers_; }
  json& options() { return options_; }

  /// Opens out/name and writes the '#'-prefixed JSON header line.
  std::ofstream open_csv(const std::string& name, const json& extra = json::object()) const;

  /// Stored config that re-runs this command to the same artifacts.
  void write_config() const;

  void fail(const std::string& subtask, const std::string& message);
  bool partial() const { return !errors_.empty(); }
  /// Writes errors.json and echoes each failure as one JSON line on stderr.
  void report_errors() const;

 private:
  json header(const std::string& file, const json& extra) const;

  std::string command_;
  lmg::ModelParams params_;
  std::filesystem::path out_;
  unsigned workers_;
  lmg::ode::Tolerances tol_;
  json options_ = json::object();
  json errors_ = json::array();
};

/// f(i) for i in [0, n) on up to `workers` threads; results in index order.
/// f must not throw.
template <class F>
auto parallel_map(std::size_t n, unsigned workers, F f) -> std::vector<std::invoke_result_t<F, std::size_t>> {
  std::vector<std::invoke_result_t<F, std::size_t>> out(n);
  const unsigned k = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = f(i);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < k; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return out;
}

/// argv with the extra keys of a config file appended as --key value, unless given explicitly.
/// Returns the parsed parameters through `params` and the command named in the file, if any.
std::vector<std::string> expand_config(const std::vector<std::string>& args, lmg::ModelParams& params,
                                       std::string& command);

}  // namespace lmgcli
