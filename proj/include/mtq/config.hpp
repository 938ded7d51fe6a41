#pragma once

// JSON configuration: rate functions, models and run settings.
//
// A rate function is either a bare number (a constant) or
//   {"kind": "constant" | "piecewise-constant" | "piecewise-linear" | "sinusoidal" | "sum",
//    "params": [...], "breakpoints": [...], "signed": false, "terms": [...]}
// with params [c] for constant, one value per breakpoint for the piecewise
// kinds, [a, b, omega, phase] for a + b sin(omega t + phase), and terms (each
// a rate function) for sums.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtq/diffusion.hpp"
#include "mtq/model.hpp"
#include "mtq/rates.hpp"

namespace mtq {

using json = nlohmann::json;

/// Raised for unreadable or malformed configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected a list of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(what + ": expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline RateFunction parse_rate(const json& j, const std::string& what, bool default_signed = false) {
  try {
    if (j.is_number()) return RateFunction::constant(j.get<double>(), default_signed);
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
      throw ConfigError(what + ": expected a number or an object with a \"kind\"");
    const bool is_signed = j.value("signed", default_signed);
    const RateKind kind = rate_kind_from_string(j["kind"].get<std::string>());
    const auto params = j.contains("params") ? detail::number_list(j["params"], what + ".params") : std::vector<double>{};
    const auto breaks =
        j.contains("breakpoints") ? detail::number_list(j["breakpoints"], what + ".breakpoints") : std::vector<double>{};
    switch (kind) {
      case RateKind::constant:
        if (params.size() != 1) throw ConfigError(what + ": constant needs params [c]");
        return RateFunction::constant(params[0], is_signed);
      case RateKind::piecewise_constant: return RateFunction::piecewise_constant(breaks, params, is_signed);
      case RateKind::piecewise_linear: return RateFunction::piecewise_linear(breaks, params, is_signed);
      case RateKind::sinusoidal:
        if (params.size() != 4) throw ConfigError(what + ": sinusoidal needs params [a, b, omega, phase]");
        return RateFunction::sinusoidal(params[0], params[1], params[2], params[3], is_signed);
      case RateKind::sum: {
        if (!j.contains("terms") || !j["terms"].is_array()) throw ConfigError(what + ": sum needs \"terms\"");
        std::vector<RateFunction> terms;
        for (std::size_t i = 0; i < j["terms"].size(); ++i)
          terms.push_back(parse_rate(j["terms"][i], what + ".terms[" + std::to_string(i) + "]", true));
        return RateFunction::sum(terms, is_signed);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
  throw ConfigError(what + ": unsupported kind");
}

inline json rate_to_json(const RateFunction& f) {
  json j;
  j["kind"] = std::string(to_string(f.kind()));
  if (f.kind() == RateKind::sum) {
    j["terms"] = json::array();
    for (const auto& t : f.terms()) j["terms"].push_back(rate_to_json(t));
  } else {
    j["params"] = f.params();
    if (!f.breakpoints().empty()) j["breakpoints"] = f.breakpoints();
  }
  if (f.is_signed()) j["signed"] = true;
  return j;
}

namespace detail {

inline double number_field(const json& j, const std::string& key, double fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(what + "." + key + ": expected a number");
  return j[key].get<double>();
}

}  // namespace detail

/// {"q0", "x0", "lambda", "alpha", "k", "gamma", "mu", "theta"}; omitted
/// fields default to q0 = x0 = alpha = gamma = 0 and k = mu = theta = 1.
inline Model parse_model(const json& j, const std::string& what = "model") {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  if (!j.contains("lambda")) throw ConfigError(what + ".lambda: required");
  static const char* known[] = {"q0", "x0", "lambda", "alpha", "k", "gamma", "mu", "theta"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ConfigError(what + ": unknown field \"" + key + "\"");
  Model m;
  m.scheme.q0 = detail::number_field(j, "q0", 0.0, what);
  if (!(m.scheme.q0 >= 0.0)) throw ConfigError(what + ".q0: must be >= 0");
  m.scheme.x0 = detail::number_field(j, "x0", 0.0, what);
  m.scheme.lambda = parse_rate(j["lambda"], what + ".lambda");
  if (j.contains("alpha")) m.scheme.alpha = parse_rate(j["alpha"], what + ".alpha", true);
  if (j.contains("k")) m.scheme.k = parse_rate(j["k"], what + ".k");
  if (j.contains("gamma")) m.scheme.gamma = parse_rate(j["gamma"], what + ".gamma", true);
  if (j.contains("mu")) m.mu = parse_rate(j["mu"], what + ".mu");
  if (j.contains("theta")) m.theta = parse_rate(j["theta"], what + ".theta");
  return m;
}

inline json model_to_json(const Model& m) {
  return {{"q0", m.scheme.q0},
          {"x0", m.scheme.x0},
          {"lambda", rate_to_json(m.scheme.lambda)},
          {"alpha", rate_to_json(m.scheme.alpha)},
          {"k", rate_to_json(m.scheme.k)},
          {"gamma", rate_to_json(m.scheme.gamma)},
          {"mu", rate_to_json(m.mu)},
          {"theta", rate_to_json(m.theta)}};
}

/// A run configuration file: a model plus defaults for every subcommand.
struct RunConfig {
  std::string name;
  Model model;
  double horizon = 10.0;
  double grid_step = 0.1;
  double tol = 1e-8;
  std::int64_t n = 100;
  std::int64_t replications = 100;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  std::int64_t paths = 1000;
};

namespace detail {

inline std::int64_t integer_field(const json& j, const std::string& key, std::int64_t fallback, std::int64_t min,
                                  const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(what + "." + key + ": expected an integer");
  const auto v = j[key].get<std::int64_t>();
  if (v < min) throw ConfigError(what + "." + key + ": must be >= " + std::to_string(min));
  return v;
}

inline double positive_field(const json& j, const std::string& key, double fallback, const std::string& what) {
  const double v = number_field(j, key, fallback, what);
  if (!(v > 0.0)) throw ConfigError(what + "." + key + ": must be > 0");
  return v;
}

inline std::uint64_t seed_field(const json& j, const std::string& key, std::uint64_t fallback,
                                const std::string& what) {
  if (!j.contains(key)) return fallback;
  const auto& v = j[key];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(what + "." + key + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j, const std::string& what = "config") {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  if (!j.contains("model")) throw ConfigError(what + ".model: required");
  RunConfig c;
  c.name = j.value("name", std::string{});
  c.model = parse_model(j["model"], what + ".model");
  c.horizon = detail::positive_field(j, "horizon", c.horizon, what);
  c.grid_step = detail::positive_field(j, "grid_step", c.grid_step, what);
  c.tol = detail::positive_field(j, "tol", c.tol, what);
  c.n = detail::integer_field(j, "n", c.n, 1, what);
  c.replications = detail::integer_field(j, "replications", c.replications, 1, what);
  c.seed = detail::seed_field(j, "seed", c.seed, what);
  c.dt = detail::positive_field(j, "dt", c.dt, what);
  c.paths = detail::integer_field(j, "paths", c.paths, 1, what);
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path), path.filename().string());
}

inline json law_to_json(const StationaryLaw& law) {
  json j;
  j["kind"] = std::string(to_string(law.kind));
  if (law.kind == LawKind::gaussian) {
    j["params"] = {{"mean", law.mean}, {"variance", law.variance}};
    j["C"] = nullptr;
  } else {
    j["params"] = {{"alpha", law.alpha}, {"mu", law.mu}, {"theta", law.theta}};
    j["C"] = law.normalizer;
  }
  return j;
}

}  // namespace mtq
