#pragma once

// Experiment configuration: an INI file with [sections] or the equivalent
// nested JSON object. Both are flattened to "section.key" strings and checked
// against a fixed key table before anything runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "roulette/error.hpp"

namespace roulette::cli {

enum class Model { ising, bingham };
enum class Method { roulette_geometric, poisson_geometric, exponential_series, exchange_exact, exchange_approx,
                    exact_reference };
enum class Normalizer { ais, smc };

inline std::string to_string(Model m) { return m == Model::ising ? "ising" : "bingham"; }

inline std::string to_string(Method m) {
  switch (m) {
    case Method::roulette_geometric: return "roulette_geometric";
    case Method::poisson_geometric: return "poisson_geometric";
    case Method::exponential_series: return "exponential_series";
    case Method::exchange_exact: return "exchange_exact";
    case Method::exchange_approx: return "exchange_approx";
    case Method::exact_reference: return "exact_reference";
  }
  return "?";
}

using FlatConfig = std::map<std::string, std::string>;

struct ExperimentConfig {
  // [experiment]
  Model model = Model::ising;
  Method method = Method::roulette_geometric;
  long n_iters = 20000;
  long burn_in = 10000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  long workers = 1;
  double init = 0.2;
  double proposal_scale = 0.05;
  bool adapt = true;
  double target_accept = 0.4;

  // [data]
  std::string data_path;        // lattice snapshot (ising) or point CSV (bingham)
  bool data_simulate = false;   // bingham only: simulate points from the seed
  long data_points = 20;
  double data_lambda3 = -2.0;

  // [ising]
  std::string ising_infer = "beta";
  double ising_alpha = 0.0;     // fixed value when inferring beta
  double ising_beta = 0.0;      // fixed value when inferring alpha

  // [prior]
  double prior_lower = 0.0;
  double prior_upper = 1.0;

  // [estimator]
  Normalizer normalizer = Normalizer::ais;
  long ais_samples = 100;
  long ais_temps = 1000;
  long updates_per_temp = 1;
  double smc_threshold = 0.5;
  long is_samples = 10;
  long pilot_draws = 20;
  long pilot_nodes = 101;
  double kappa_target = 0.5;
  double sign_margin = 3.0;
  double q_min = 0.05;
  double q_max = 0.9;
  double variance_target = 0.1;
  double exponential_q = 0.5;
  double poisson_lambda = 1.0;
  long safety_cap = 10000;
  std::string z_tilde = "pilot";  // pilot | bound

  // [exchange]
  long gibbs_steps = 50000;
  long cftp_max_sweeps = 1L << 20;
  std::string perfect_sampler = "cluster";  // cluster | heat_bath

  FlatConfig flat;  // every key, defaults filled in; used for the digest
};

namespace detail {

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "experiment.model", "experiment.method", "experiment.n_iters", "experiment.burn_in", "experiment.seed",
      "experiment.output_dir", "experiment.workers", "experiment.init", "experiment.proposal_scale",
      "experiment.adapt", "experiment.target_accept", "data.path", "data.simulate", "data.n_points",
      "data.lambda3", "ising.infer", "ising.alpha", "ising.beta", "prior.lower", "prior.upper",
      "estimator.normalizer", "estimator.ais_samples", "estimator.ais_temps", "estimator.updates_per_temp",
      "estimator.smc_threshold", "estimator.is_samples", "estimator.pilot_draws", "estimator.pilot_nodes",
      "estimator.kappa_target", "estimator.sign_margin", "estimator.q_min", "estimator.q_max",
      "estimator.variance_target", "estimator.exponential_q", "estimator.poisson_lambda", "estimator.safety_cap",
      "estimator.z_tilde", "exchange.gibbs_steps", "exchange.cftp_max_sweeps",
      "exchange.perfect_sampler"};
  return keys;
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, FlatConfig& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  if (j.is_string()) out[prefix] = j.get<std::string>();
  else if (j.is_boolean()) out[prefix] = j.get<bool>() ? "true" : "false";
  else if (j.is_number_integer()) out[prefix] = std::to_string(j.get<long long>());
  else if (j.is_number_unsigned()) out[prefix] = std::to_string(j.get<unsigned long long>());
  else if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << j.get<double>();
    out[prefix] = os.str();
  } else {
    throw ConfigError("unsupported JSON value for key " + prefix);
  }
}

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

class Reader {
 public:
  explicit Reader(const FlatConfig& flat) : flat_(flat) {}

  std::string str(const std::string& key, const std::string& def) const {
    auto it = flat_.find(key);
    return it == flat_.end() ? def : it->second;
  }

  double real(const std::string& key, double def) const {
    auto it = flat_.find(key);
    if (it == flat_.end()) return def;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size() || !std::isfinite(v)) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a finite number, got '" + it->second + "'");
    }
  }

  long integer(const std::string& key, long def) const {
    auto it = flat_.find(key);
    if (it == flat_.end()) return def;
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an integer, got '" + it->second + "'");
    }
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) const {
    auto it = flat_.find(key);
    if (it == flat_.end()) return def;
    try {
      std::size_t pos = 0;
      if (!it->second.empty() && it->second[0] == '-') throw std::invalid_argument("");
      const auto v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + it->second + "'");
    }
  }

  bool boolean(const std::string& key, bool def) const {
    auto it = flat_.find(key);
    if (it == flat_.end()) return def;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + it->second + "'");
  }

 private:
  const FlatConfig& flat_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail

inline FlatConfig flatten_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  FlatConfig flat;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must belong to a [section]");
    for (const auto& [key, value] : body) flat[section + "." + key] = detail::trim(value.data());
  }
  return flat;
}

inline FlatConfig flatten_json_text(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed JSON config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON config must be an object");
  FlatConfig flat;
  detail::flatten_json(j, "", flat);
  return flat;
}

inline ExperimentConfig config_from_flat(const FlatConfig& flat) {
  using detail::require;
  const auto& keys = detail::known_keys();
  for (const auto& [k, v] : flat)
    require(std::find(keys.begin(), keys.end(), k) != keys.end(), "unknown config key '" + k + "'");

  detail::Reader r(flat);
  ExperimentConfig c;
  const std::string model = r.str("experiment.model", "ising");
  if (model == "ising") c.model = Model::ising;
  else if (model == "bingham") c.model = Model::bingham;
  else throw ConfigError("experiment.model must be ising or bingham");

  const std::string method = r.str("experiment.method", "roulette_geometric");
  bool found = false;
  for (auto m : {Method::roulette_geometric, Method::poisson_geometric, Method::exponential_series,
                 Method::exchange_exact, Method::exchange_approx, Method::exact_reference}) {
    if (method == to_string(m)) {
      c.method = m;
      found = true;
    }
  }
  require(found, "experiment.method '" + method + "' is not a known method");

  const bool bingham = c.model == Model::bingham;
  c.n_iters = r.integer("experiment.n_iters", c.n_iters);
  c.burn_in = r.integer("experiment.burn_in", c.n_iters / 2);
  c.seed = r.unsigned_integer("experiment.seed", c.seed);
  c.output_dir = r.str("experiment.output_dir", c.output_dir);
  c.workers = r.integer("experiment.workers", c.workers);
  c.init = r.real("experiment.init", bingham ? -1.0 : c.init);
  c.proposal_scale = r.real("experiment.proposal_scale", bingham ? 1.0 : c.proposal_scale);
  c.adapt = r.boolean("experiment.adapt", c.adapt);
  c.target_accept = r.real("experiment.target_accept", c.target_accept);

  c.data_path = r.str("data.path", "");
  c.data_simulate = r.boolean("data.simulate", c.data_simulate);
  c.data_points = r.integer("data.n_points", c.data_points);
  c.data_lambda3 = r.real("data.lambda3", c.data_lambda3);

  c.ising_infer = r.str("ising.infer", c.ising_infer);
  c.ising_alpha = r.real("ising.alpha", c.ising_alpha);
  c.ising_beta = r.real("ising.beta", c.ising_beta);

  c.prior_lower = r.real("prior.lower", bingham ? -5.0 : c.prior_lower);
  c.prior_upper = r.real("prior.upper", bingham ? 0.0 : c.prior_upper);

  const std::string normalizer = r.str("estimator.normalizer", "ais");
  if (normalizer == "ais") c.normalizer = Normalizer::ais;
  else if (normalizer == "smc") c.normalizer = Normalizer::smc;
  else throw ConfigError("estimator.normalizer must be ais or smc");
  c.ais_samples = r.integer("estimator.ais_samples", c.ais_samples);
  c.ais_temps = r.integer("estimator.ais_temps", c.ais_temps);
  c.updates_per_temp = r.integer("estimator.updates_per_temp", c.updates_per_temp);
  c.smc_threshold = r.real("estimator.smc_threshold", c.smc_threshold);
  c.is_samples = r.integer("estimator.is_samples", c.is_samples);
  c.pilot_draws = r.integer("estimator.pilot_draws", c.pilot_draws);
  c.pilot_nodes = r.integer("estimator.pilot_nodes", c.pilot_nodes);
  c.kappa_target = r.real("estimator.kappa_target", c.kappa_target);
  c.sign_margin = r.real("estimator.sign_margin", bingham ? 0.0 : c.sign_margin);
  c.q_min = r.real("estimator.q_min", c.q_min);
  c.q_max = r.real("estimator.q_max", bingham ? 0.995 : c.q_max);
  c.variance_target = r.real("estimator.variance_target", c.variance_target);
  c.exponential_q = r.real("estimator.exponential_q", c.exponential_q);
  c.poisson_lambda = r.real("estimator.poisson_lambda", c.poisson_lambda);
  c.safety_cap = r.integer("estimator.safety_cap", c.safety_cap);
  c.z_tilde = r.str("estimator.z_tilde", bingham ? "bound" : "pilot");

  c.gibbs_steps = r.integer("exchange.gibbs_steps", c.gibbs_steps);
  c.cftp_max_sweeps = r.integer("exchange.cftp_max_sweeps", c.cftp_max_sweeps);
  c.perfect_sampler = r.str("exchange.perfect_sampler", c.perfect_sampler);

  require(c.n_iters >= 0, "experiment.n_iters must be non-negative");
  require(c.burn_in >= 0 && (c.n_iters == 0 || c.burn_in < c.n_iters),
          "experiment.burn_in must be non-negative and below n_iters");
  require(c.workers >= 1, "experiment.workers must be at least 1");
  require(c.proposal_scale > 0.0, "experiment.proposal_scale must be positive");
  require(c.target_accept > 0.0 && c.target_accept < 1.0, "experiment.target_accept must lie in (0, 1)");
  require(c.prior_upper > c.prior_lower, "prior.upper must exceed prior.lower");
  require(c.init >= c.prior_lower && c.init <= c.prior_upper, "experiment.init must lie inside the prior support");
  require(c.ais_samples >= 1 && c.ais_temps >= 1 && c.updates_per_temp >= 1, "AIS ladder sizes must be positive");
  require(c.smc_threshold >= 0.0 && c.smc_threshold <= 1.0, "estimator.smc_threshold must lie in [0, 1]");
  require(c.normalizer != Normalizer::smc || c.ais_samples >= 2, "SMC needs at least two particles");
  require(c.is_samples >= 1, "estimator.is_samples must be positive");
  require(c.pilot_draws >= 2, "estimator.pilot_draws must be at least 2");
  require(c.pilot_nodes >= 2, "estimator.pilot_nodes must be at least 2");
  require(c.kappa_target > 0.0 && c.kappa_target < 1.0, "estimator.kappa_target must lie in (0, 1)");
  require(c.sign_margin >= 0.0, "estimator.sign_margin must be non-negative");
  require(c.q_min > 0.0 && c.q_min <= c.q_max && c.q_max <= 1.0, "need 0 < q_min <= q_max <= 1");
  require(c.variance_target > 0.0, "estimator.variance_target must be positive");
  require(c.exponential_q > 0.0 && c.exponential_q <= 1.0, "estimator.exponential_q must lie in (0, 1]");
  require(c.poisson_lambda > 0.0, "estimator.poisson_lambda must be positive");
  require(c.safety_cap >= 1, "estimator.safety_cap must be at least 1");
  require(c.z_tilde == "pilot" || c.z_tilde == "bound", "estimator.z_tilde must be pilot or bound");
  require(c.gibbs_steps >= 0, "exchange.gibbs_steps must be non-negative");
  require(c.cftp_max_sweeps >= 1, "exchange.cftp_max_sweeps must be positive");
  require(c.perfect_sampler == "cluster" || c.perfect_sampler == "heat_bath",
          "exchange.perfect_sampler must be cluster or heat_bath");

  if (bingham) {
    require(c.method == Method::roulette_geometric || c.method == Method::poisson_geometric ||
                c.method == Method::exact_reference,
            "the bingham model supports roulette_geometric, poisson_geometric and exact_reference");
    require(c.data_simulate != !c.data_path.empty(), "bingham data needs exactly one of data.path or data.simulate");
    require(c.data_points >= 1, "data.n_points must be positive");
    require(c.data_lambda3 <= 0.0, "data.lambda3 must be non-positive");
    require(c.prior_upper <= 0.0, "the lambda3 prior must lie in (-inf, 0]");
  } else {
    require(!c.data_path.empty(), "ising runs need data.path (see ising-simulate)");
    require(!c.data_simulate, "data.simulate applies to the bingham model only");
    require(c.ising_infer == "alpha" || c.ising_infer == "beta", "ising.infer must be alpha or beta");
    require(c.z_tilde == "pilot", "the ising model supports only estimator.z_tilde = pilot");
    require(c.ising_infer == "alpha" || c.prior_lower >= 0.0 || c.method != Method::exchange_exact,
            "exact exchange needs beta >= 0 over the whole prior");
  }

  // Canonical flat form with every default filled in.
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  FlatConfig& f = c.flat;
  f["experiment.model"] = to_string(c.model);
  f["experiment.method"] = to_string(c.method);
  f["experiment.n_iters"] = std::to_string(c.n_iters);
  f["experiment.burn_in"] = std::to_string(c.burn_in);
  f["experiment.seed"] = std::to_string(c.seed);
  f["experiment.workers"] = std::to_string(c.workers);
  f["experiment.init"] = num(c.init);
  f["experiment.proposal_scale"] = num(c.proposal_scale);
  f["experiment.adapt"] = c.adapt ? "true" : "false";
  f["experiment.target_accept"] = num(c.target_accept);
  f["data.path"] = c.data_path;
  f["data.simulate"] = c.data_simulate ? "true" : "false";
  f["data.n_points"] = std::to_string(c.data_points);
  f["data.lambda3"] = num(c.data_lambda3);
  f["ising.infer"] = c.ising_infer;
  f["ising.alpha"] = num(c.ising_alpha);
  f["ising.beta"] = num(c.ising_beta);
  f["prior.lower"] = num(c.prior_lower);
  f["prior.upper"] = num(c.prior_upper);
  f["estimator.normalizer"] = c.normalizer == Normalizer::ais ? "ais" : "smc";
  f["estimator.ais_samples"] = std::to_string(c.ais_samples);
  f["estimator.ais_temps"] = std::to_string(c.ais_temps);
  f["estimator.updates_per_temp"] = std::to_string(c.updates_per_temp);
  f["estimator.smc_threshold"] = num(c.smc_threshold);
  f["estimator.is_samples"] = std::to_string(c.is_samples);
  f["estimator.pilot_draws"] = std::to_string(c.pilot_draws);
  f["estimator.pilot_nodes"] = std::to_string(c.pilot_nodes);
  f["estimator.kappa_target"] = num(c.kappa_target);
  f["estimator.sign_margin"] = num(c.sign_margin);
  f["estimator.q_min"] = num(c.q_min);
  f["estimator.q_max"] = num(c.q_max);
  f["estimator.variance_target"] = num(c.variance_target);
  f["estimator.exponential_q"] = num(c.exponential_q);
  f["estimator.poisson_lambda"] = num(c.poisson_lambda);
  f["estimator.safety_cap"] = std::to_string(c.safety_cap);
  f["estimator.z_tilde"] = c.z_tilde;
  f["exchange.gibbs_steps"] = std::to_string(c.gibbs_steps);
  f["exchange.cftp_max_sweeps"] = std::to_string(c.cftp_max_sweeps);
  f["exchange.perfect_sampler"] = c.perfect_sampler;
  return c;
}

// Reads an INI file, or JSON when the path ends in ".json".
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return config_from_flat(json ? flatten_json_text(in) : flatten_ini(in));
}

inline ExperimentConfig config_from_ini_text(const std::string& text) {
  std::istringstream in(text);
  return config_from_flat(flatten_ini(in));
}

}  // namespace roulette::cli
