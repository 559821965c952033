#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "lmg/model.hpp"

namespace lmg {

/// Flat `key = value` text form of ModelParams. '#' starts a comment.
/// Keys: omega, omega0, kappa, lambda_minus, lambda_plus, gamma_down, gamma_up.
std::string format_params(const ModelParams& p);

/// Parses the keys above; unknown keys are returned in `extra` (when given) instead of failing,
/// so run configs can carry command options in the same file. Missing keys keep their defaults.
ModelParams parse_params(std::istream& in, std::map<std::string, std::string>* extra = nullptr);
ModelParams parse_params(const std::string& text, std::map<std::string, std::string>* extra = nullptr);

}  // namespace lmg
