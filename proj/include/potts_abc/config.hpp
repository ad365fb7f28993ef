#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abc_beta.hpp"
#include "hybrid_gibbs.hpp"
#include "lattice.hpp"

namespace potts_abc {

/// Invalid or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { gamma, alpha_rayleigh };

inline std::string to_string(ModelKind m) {
  return m == ModelKind::gamma ? "gamma" : "alpha-rayleigh";
}

struct ExperimentConfig {
  std::vector<std::size_t> dims{128, 128};
  Neighborhood neighborhood = Neighborhood::n4;
  int classes = 3;

  ModelKind model = ModelKind::gamma;
  int looks = 3;
  std::vector<double> means{1.0, 2.0, 3.0};
  std::vector<double> alphas{1.99, 1.99, 1.80};
  std::vector<double> gammas{1.0, 1.5, 2.0};
  double prior_shape = 1.0;
  double prior_scale = 1.0;
  double alpha_init = 1.9;

  double true_beta = 1.0;
  std::size_t prior_sweeps = 500;

  ChainConfig chain;
  std::uint64_t seed = 1;

  std::vector<double> suite_betas{0.8, 1.0, 1.2};
  std::vector<double> suite_fixed_betas{0.6, 0.8, 1.0, 1.2, 1.4};

  std::vector<std::size_t> full_dims{256, 256};
  std::optional<std::size_t> full_iterations, full_burnin;

  std::filesystem::path output_dir = "out";

  std::size_t sites() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  void validate() const {
    if (dims.size() != static_cast<std::size_t>(dimension_of(neighborhood)))
      throw ConfigError("lattice dims do not match the neighborhood dimension");
    for (auto d : dims)
      if (d == 0) throw ConfigError("lattice dims must be positive");
    if (classes < 1 || classes > kMaxClasses) throw ConfigError("classes out of range");
    const auto K = static_cast<std::size_t>(classes);
    if (model == ModelKind::gamma) {
      if (means.size() != K) throw ConfigError("model.means must have K entries");
      if (looks < 1) throw ConfigError("model.looks must be >= 1");
      for (double m : means)
        if (!(m > 0.0)) throw ConfigError("model.means must be positive");
    } else {
      if (alphas.size() != K || gammas.size() != K)
        throw ConfigError("model.alphas and model.gammas must have K entries");
      for (double a : alphas)
        if (!(a > 0.0 && a <= 2.0)) throw ConfigError("model.alphas must lie in (0, 2]");
      for (double g : gammas)
        if (!(g > 0.0)) throw ConfigError("model.gammas must be positive");
      if (!(alpha_init > 0.0 && alpha_init <= 2.0))
        throw ConfigError("model.alpha_init must lie in (0, 2]");
    }
    if (!(prior_shape > 0.0 && prior_scale > 0.0))
      throw ConfigError("prior hyperparameters must be positive");
    if (!(true_beta >= 0.0)) throw ConfigError("potts.beta must be nonnegative");
    try {
      chain.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  /// Switches to the full-size lattice and, when given, the long-run
  /// iteration counts.
  void apply_full_scale() {
    dims = full_dims;
    if (full_iterations) chain.iterations = *full_iterations;
    if (full_burnin) chain.burnin = *full_burnin;
  }

  /// Every field that influences numerical output, in a fixed order. The
  /// seed and output directory are excluded.
  std::string canonical_text() const {
    std::ostringstream s;
    s << std::setprecision(17);
    auto list = [&](const char* key, const auto& v) {
      s << key << "=";
      for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
      s << "\n";
    };
    list("dims", dims);
    s << "neighborhood=" << to_string(neighborhood) << "\nclasses=" << classes
      << "\nmodel=" << to_string(model) << "\n";
    if (model == ModelKind::gamma) {
      s << "looks=" << looks << "\n";
      list("means", means);
    } else {
      list("alphas", alphas);
      list("gammas", gammas);
      s << "alpha_init=" << alpha_init << "\n";
    }
    s << "prior_shape=" << prior_shape << "\nprior_scale=" << prior_scale
      << "\ntrue_beta=" << true_beta << "\nprior_sweeps=" << prior_sweeps
      << "\niterations=" << chain.iterations << "\nburnin=" << chain.burnin
      << "\nthinning=" << chain.thinning << "\ninitial_beta=" << chain.initial_beta
      << "\nB=" << chain.abc.upper_bound << "\nnu=" << chain.abc.nu
      << "\nM=" << chain.abc.moves << "\ns2=" << chain.abc.proposal_variance
      << "\ntarget_accept=" << chain.abc.target_accept
      << "\nadapt_every=" << chain.abc.adapt_every << "\ngain=" << chain.abc.gain << "\n";
    if (chain.fixed_beta) s << "fixed_beta=" << *chain.fixed_beta << "\n";
    return s.str();
  }

  /// 64-bit FNV-1a of canonical_text().
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_text()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    std::istringstream in(item.substr(b, e - b + 1));
    T v{};
    if (!(in >> v) || !in.eof()) throw ConfigError("bad value '" + item + "' in " + key);
    out.push_back(v);
  }
  return out;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
  const auto v = parse_list<T>(key, text);
  if (v.size() != 1) throw ConfigError(key + " expects a single value");
  return v.front();
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "lattice.dims",         "lattice.neighborhood", "model.type",
      "model.classes",        "model.looks",          "model.means",
      "model.alphas",         "model.gammas",         "model.prior_shape",
      "model.prior_scale",    "model.alpha_init",     "potts.beta",
      "simulate.sweeps",      "chain.iterations",     "chain.burnin",
      "chain.thinning",       "chain.initial_beta",   "chain.seed",
      "abc.upper_bound",      "abc.nu",               "abc.moves",
      "abc.proposal_variance", "abc.target_accept",   "abc.adapt_every",
      "abc.gain",             "suite.betas",          "suite.fixed_betas",
      "full_scale.dims",      "full_scale.iterations", "full_scale.burnin",
      "output.dir"};
  return keys;
}

}  // namespace detail

/// Parses the INI-style configuration. Unknown keys are rejected so typos
/// do not silently fall back to defaults.
inline ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : pt) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      const auto full = section + "." + key;
      if (!detail::known_keys().count(full)) throw ConfigError("unknown config key '" + full + "'");
    }
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = pt.get_optional<std::string>(key)) return *v;
    return std::nullopt;
  };
  using detail::parse_list;
  using detail::parse_scalar;
  if (auto v = get("lattice.dims")) c.dims = parse_list<std::size_t>("lattice.dims", *v);
  if (auto v = get("lattice.neighborhood")) {
    try {
      c.neighborhood = parse_neighborhood(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = get("model.type")) {
    if (*v == "gamma")
      c.model = ModelKind::gamma;
    else if (*v == "alpha-rayleigh")
      c.model = ModelKind::alpha_rayleigh;
    else
      throw ConfigError("model.type must be gamma or alpha-rayleigh");
  }
  if (auto v = get("model.classes")) c.classes = parse_scalar<int>("model.classes", *v);
  if (auto v = get("model.looks")) c.looks = parse_scalar<int>("model.looks", *v);
  if (auto v = get("model.means")) c.means = parse_list<double>("model.means", *v);
  if (auto v = get("model.alphas")) c.alphas = parse_list<double>("model.alphas", *v);
  if (auto v = get("model.gammas")) c.gammas = parse_list<double>("model.gammas", *v);
  if (auto v = get("model.prior_shape")) c.prior_shape = parse_scalar<double>("model.prior_shape", *v);
  if (auto v = get("model.prior_scale")) c.prior_scale = parse_scalar<double>("model.prior_scale", *v);
  if (auto v = get("model.alpha_init")) c.alpha_init = parse_scalar<double>("model.alpha_init", *v);
  if (auto v = get("potts.beta")) c.true_beta = parse_scalar<double>("potts.beta", *v);
  if (auto v = get("simulate.sweeps")) c.prior_sweeps = parse_scalar<std::size_t>("simulate.sweeps", *v);
  if (auto v = get("chain.iterations"))
    c.chain.iterations = parse_scalar<std::size_t>("chain.iterations", *v);
  if (auto v = get("chain.burnin")) c.chain.burnin = parse_scalar<std::size_t>("chain.burnin", *v);
  if (auto v = get("chain.thinning"))
    c.chain.thinning = parse_scalar<std::size_t>("chain.thinning", *v);
  if (auto v = get("chain.initial_beta"))
    c.chain.initial_beta = parse_scalar<double>("chain.initial_beta", *v);
  if (auto v = get("chain.seed")) c.seed = parse_scalar<std::uint64_t>("chain.seed", *v);
  if (auto v = get("abc.upper_bound"))
    c.chain.abc.upper_bound = parse_scalar<double>("abc.upper_bound", *v);
  if (auto v = get("abc.nu")) c.chain.abc.nu = parse_scalar<double>("abc.nu", *v);
  if (auto v = get("abc.moves")) c.chain.abc.moves = parse_scalar<int>("abc.moves", *v);
  if (auto v = get("abc.proposal_variance"))
    c.chain.abc.proposal_variance = parse_scalar<double>("abc.proposal_variance", *v);
  if (auto v = get("abc.target_accept"))
    c.chain.abc.target_accept = parse_scalar<double>("abc.target_accept", *v);
  if (auto v = get("abc.adapt_every"))
    c.chain.abc.adapt_every = parse_scalar<std::size_t>("abc.adapt_every", *v);
  if (auto v = get("abc.gain")) c.chain.abc.gain = parse_scalar<double>("abc.gain", *v);
  if (auto v = get("suite.betas")) c.suite_betas = parse_list<double>("suite.betas", *v);
  if (auto v = get("suite.fixed_betas"))
    c.suite_fixed_betas = parse_list<double>("suite.fixed_betas", *v);
  if (auto v = get("full_scale.dims")) c.full_dims = parse_list<std::size_t>("full_scale.dims", *v);
  if (auto v = get("full_scale.iterations"))
    c.full_iterations = parse_scalar<std::size_t>("full_scale.iterations", *v);
  if (auto v = get("full_scale.burnin"))
    c.full_burnin = parse_scalar<std::size_t>("full_scale.burnin", *v);
  if (auto v = get("output.dir")) c.output_dir = *v;
  c.chain.seed = c.seed;
  c.validate();
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

}  // namespace potts_abc
