#pragma once

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "align.hpp"
#include "alpha_rayleigh_model.hpp"
#include "array_io.hpp"
#include "config.hpp"
#include "gamma_model.hpp"
#include "hybrid_gibbs.hpp"
#include "oracle.hpp"
#include "potts.hpp"

namespace potts_abc {

struct Simulation {
  std::vector<std::size_t> dims;
  LabelField labels;
  ObservationField observations;
};

/// Draws z ~ f(z | beta) by chromatic prior sweeps from a uniform random
/// field, then one observation per site from its class density. Site n draws
/// its observation from its own stream, so the result does not depend on the
/// number of threads.
inline Simulation simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const Lattice lattice(cfg.dims, cfg.neighborhood);
  const auto coloring = chromatic_coloring(lattice);
  const auto root = StreamKey::root(cfg.seed);
  auto z = uniform_label_field(lattice.size(), cfg.classes, child(root, Domain::init));
  const auto prior = child(root, Domain::prior);
  for (std::size_t s = 0; s < cfg.prior_sweeps; ++s)
    sample_potts_prior_sweep(z, cfg.true_beta, lattice, coloring, prior.child(s));
  const auto obs = child(root, Domain::observations);
  std::vector<double> r(lattice.size());
  for (std::size_t n = 0; n < r.size(); ++n) {
    auto gen = obs.child(n).engine();
    const auto k = z[n];
    r[n] = cfg.model == ModelKind::gamma
               ? sample_gamma_observation(cfg.looks, cfg.means[k], gen)
               : sample_alpha_rayleigh_observation(cfg.alphas[k], cfg.gammas[k], gen);
  }
  return {cfg.dims, std::move(z), ObservationField(std::move(r))};
}

using AnyModel = std::variant<GammaModel, AlphaRayleighModel>;

/// Data-driven starting parameters (K-quantile split, classes ascending).
inline AnyModel initial_model(const ExperimentConfig& cfg, const ObservationField& r) {
  const InverseGammaPrior prior{cfg.prior_shape, cfg.prior_scale};
  if (cfg.model == ModelKind::gamma) return initialize_gamma_model(r, cfg.classes, cfg.looks, prior);
  return initialize_alpha_rayleigh_model(r, cfg.classes, cfg.alpha_init, prior);
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
};

struct RunReport {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string model;
  int classes = 0;
  std::vector<std::size_t> dims;
  std::optional<double> fixed_beta;
  double beta_mean = 0.0;
  double beta_std = 0.0;
  std::vector<ParameterSummary> theta;
  std::optional<double> accuracy;
  std::vector<int> permutation;  ///< estimated class k -> truth class (0-based)
  double beta_acceptance = 0.0;
  double final_proposal_variance = 0.0;
  std::size_t records = 0;
  double runtime_seconds = 0.0;
};

struct FitResult {
  RunReport report;
  Trace trace;
  LabelField map;  ///< marginal-mode labels, relabeled to the truth when given
};

namespace detail {

/// Reorders per-class parameter blocks so entry k refers to truth class k.
inline std::vector<double> permute_blocks(const std::vector<double>& v, const std::vector<int>& perm) {
  const auto K = perm.size();
  std::vector<double> out(v.size());
  for (std::size_t b = 0; b < v.size() / K; ++b)
    for (std::size_t k = 0; k < K; ++k) out[b * K + static_cast<std::size_t>(perm[k])] = v[b * K + k];
  return out;
}

}  // namespace detail

/// Runs the hybrid Gibbs chain on r. With `fixed_beta` the beta update is
/// skipped. With `truth` the labels are aligned to it and the parameter
/// summaries are reported in truth-class order.
inline FitResult fit(const ExperimentConfig& cfg, const ObservationField& r,
                     const std::optional<LabelField>& truth = std::nullopt,
                     std::optional<double> fixed_beta = std::nullopt) {
  cfg.validate();
  const Lattice lattice(cfg.dims, cfg.neighborhood);
  r.check_against(lattice);
  if (truth) truth->check_against(lattice);
  ChainConfig chain = cfg.chain;
  chain.seed = cfg.seed;
  if (fixed_beta) chain.fixed_beta = fixed_beta;

  const auto start = std::chrono::steady_clock::now();
  Trace trace = std::visit(
      [&](auto model) { return run_chain(chain, r, lattice, std::move(model)); },
      initial_model(cfg, r));
  const auto elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  FitResult out{{}, std::move(trace), {}};
  auto& rep = out.report;
  ExperimentConfig effective = cfg;
  effective.chain.fixed_beta = chain.fixed_beta;
  rep.config_hash = effective.hash();
  rep.seed = cfg.seed;
  rep.model = to_string(cfg.model);
  rep.classes = cfg.classes;
  rep.dims = cfg.dims;
  rep.fixed_beta = chain.fixed_beta;
  const auto est = mmse_estimate(out.trace);
  rep.beta_mean = est.beta_mean;
  rep.beta_std = est.beta_std;
  out.map = map_labels(out.trace);
  std::vector<double> mean = est.theta_mean, sd = est.theta_std;
  if (truth && cfg.classes <= kMaxAlignClasses) {
    const auto a = align_labels(out.map, *truth, cfg.classes);
    rep.accuracy = a.accuracy;
    rep.permutation = a.permutation;
    out.map = apply_alignment(out.map, a);
    mean = detail::permute_blocks(mean, a.permutation);
    sd = detail::permute_blocks(sd, a.permutation);
  }
  for (std::size_t i = 0; i < mean.size(); ++i)
    rep.theta.push_back({out.trace.theta_names[i], mean[i], sd[i]});
  rep.beta_acceptance = out.trace.beta_acceptance();
  rep.final_proposal_variance = out.trace.final_proposal_variance;
  rep.records = out.trace.records();
  rep.runtime_seconds = elapsed;
  return out;
}

inline std::string hex_hash(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["config_hash"] = hex_hash(r.config_hash);
  j["seed"] = r.seed;
  j["model"] = r.model;
  j["classes"] = r.classes;
  j["dims"] = r.dims;
  j["beta_mode"] = r.fixed_beta ? "fixed" : "estimated";
  if (r.fixed_beta) j["fixed_beta"] = *r.fixed_beta;
  j["beta"] = {{"mean", r.beta_mean}, {"std", r.beta_std}};
  auto theta = nlohmann::ordered_json::array();
  for (const auto& p : r.theta) theta.push_back({{"name", p.name}, {"mean", p.mean}, {"std", p.stddev}});
  j["theta"] = theta;
  j["std_convention"] = "population";
  if (r.accuracy) {
    j["accuracy"] = *r.accuracy;
    std::vector<int> one_based;
    for (int k : r.permutation) one_based.push_back(k + 1);
    j["permutation"] = one_based;
  }
  j["beta_acceptance"] = r.beta_acceptance;
  j["final_proposal_variance"] = r.final_proposal_variance;
  j["records"] = r.records;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  r.seed = j.at("seed").get<std::uint64_t>();
  r.model = j.at("model").get<std::string>();
  r.classes = j.at("classes").get<int>();
  r.dims = j.at("dims").get<std::vector<std::size_t>>();
  if (j.contains("fixed_beta")) r.fixed_beta = j.at("fixed_beta").get<double>();
  r.beta_mean = j.at("beta").at("mean").get<double>();
  r.beta_std = j.at("beta").at("std").get<double>();
  for (const auto& p : j.at("theta"))
    r.theta.push_back({p.at("name").get<std::string>(), p.at("mean").get<double>(),
                       p.at("std").get<double>()});
  if (j.contains("accuracy")) {
    r.accuracy = j.at("accuracy").get<double>();
    for (int k : j.at("permutation").get<std::vector<int>>()) r.permutation.push_back(k - 1);
  }
  r.beta_acceptance = j.value("beta_acceptance", 0.0);
  r.final_proposal_variance = j.value("final_proposal_variance", 0.0);
  r.records = j.value("records", std::size_t{0});
  return r;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  detail::write_file(path, j.dump(2) + "\n");
}

/// Writes labels.bin, observations.bin and labels.pgm (2D only).
inline void write_simulation(const std::filesystem::path& dir, const Simulation& sim,
                             const ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  write_label_array(dir / "labels.bin", sim.labels, sim.dims, cfg.seed, cfg.hash());
  write_observation_array(dir / "observations.bin", sim.observations, sim.dims, cfg.seed,
                          cfg.hash());
  if (sim.dims.size() == 2)
    write_label_pgm(dir / "labels.pgm", sim.labels, sim.dims, cfg.seed, cfg.hash());
}

/// Writes report.json, map_labels.bin, map_labels.pgm (2D), trace.csv and
/// timing.json. Wall-clock time lives in timing.json only, so every other
/// file is reproducible byte for byte from (config, seed).
inline void write_fit(const std::filesystem::path& dir, const FitResult& f) {
  std::filesystem::create_directories(dir);
  const auto& r = f.report;
  write_json(dir / "report.json", to_json(r));
  nlohmann::ordered_json timing;
  timing["config_hash"] = hex_hash(r.config_hash);
  timing["seed"] = r.seed;
  timing["runtime_seconds"] = r.runtime_seconds;
  write_json(dir / "timing.json", timing);
  write_label_array(dir / "map_labels.bin", f.map, r.dims, r.seed, r.config_hash);
  if (r.dims.size() == 2)
    write_label_pgm(dir / "map_labels.pgm", f.map, r.dims, r.seed, r.config_hash);
  write_trace_csv(dir / "trace.csv", f.trace, r.config_hash, r.seed);
}

// ---------------------------------------------------------------------------
// Suite tables

struct SuiteRow {
  double true_beta = 0.0;
  std::optional<RunReport> estimated;
  std::map<double, std::optional<RunReport>> fixed;  ///< keyed by fixed beta
};

inline std::string format_number(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

inline std::string run_directory_name(const std::string& prefix, double value) {
  return prefix + format_number(value, 2);
}

/// Accuracy table: one row per true beta; columns are the estimated-beta run
/// followed by one column per fixed beta. Missing runs print as NA.
inline std::string accuracy_table_csv(const std::vector<SuiteRow>& rows,
                                      const std::vector<double>& fixed_betas) {
  std::ostringstream s;
  s << "true_beta,estimated_beta";
  for (double b : fixed_betas) s << ",fixed_" << format_number(b, 2);
  s << "\n";
  auto cell = [](const std::optional<RunReport>& r) {
    return r && r->accuracy ? format_number(100.0 * *r->accuracy, 2) : std::string("NA");
  };
  for (const auto& row : rows) {
    s << format_number(row.true_beta, 2) << "," << cell(row.estimated);
    for (double b : fixed_betas) {
      const auto it = row.fixed.find(b);
      s << "," << (it == row.fixed.end() ? std::string("NA") : cell(it->second));
    }
    s << "\n";
  }
  return s.str();
}

/// Parameter table: rows beta, then the model parameters; one "mean ± std"
/// column per true beta, from the estimated-beta runs.
inline std::string parameter_table_csv(const std::vector<SuiteRow>& rows) {
  std::vector<std::string> names{"beta"};
  for (const auto& row : rows)
    if (row.estimated) {
      for (const auto& p : row.estimated->theta) names.push_back(p.name);
      break;
    }
  std::ostringstream s;
  s << "parameter";
  for (const auto& row : rows) s << ",true_beta_" << format_number(row.true_beta, 2);
  s << "\n";
  if (rows.empty()) return s.str();
  for (std::size_t i = 0; i < names.size(); ++i) {
    s << names[i];
    for (const auto& row : rows) {
      if (!row.estimated) {
        s << ",NA";
        continue;
      }
      const auto& r = *row.estimated;
      if (i == 0) {
        s << "," << format_number(r.beta_mean, 3) << " ± " << format_number(r.beta_std, 3);
      } else if (i - 1 < r.theta.size()) {
        s << "," << format_number(r.theta[i - 1].mean, 3) << " ± "
          << format_number(r.theta[i - 1].stddev, 3);
      } else {
        s << ",NA";
      }
    }
    s << "\n";
  }
  return s.str();
}

/// Loads the suite reports found under `root`, laid out as
/// root/beta_<b>/estimated/report.json and root/beta_<b>/fixed_<f>/report.json.
/// Missing reports stay empty and are listed in `missing`.
inline std::vector<SuiteRow> load_suite(const std::filesystem::path& root,
                                        const ExperimentConfig& cfg,
                                        std::vector<std::string>* missing = nullptr) {
  std::vector<SuiteRow> rows;
  auto load = [&](const std::filesystem::path& p) -> std::optional<RunReport> {
    std::ifstream in(p / "report.json");
    if (!in) {
      if (missing) missing->push_back(p.string());
      return std::nullopt;
    }
    try {
      return report_from_json(nlohmann::json::parse(in));
    } catch (const std::exception&) {
      if (missing) missing->push_back(p.string());
      return std::nullopt;
    }
  };
  for (double b : cfg.suite_betas) {
    SuiteRow row;
    row.true_beta = b;
    const auto dir = root / run_directory_name("beta_", b);
    row.estimated = load(dir / "estimated");
    for (double f : cfg.suite_fixed_betas) row.fixed[f] = load(dir / run_directory_name("fixed_", f));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Oracle report

struct OracleOptions {
  std::vector<double> betas{0.0, 0.5, 1.0, 1.5, 2.0};
  double label_beta = 1.0;       ///< z is an exact draw at this beta
  std::size_t grid_points = 400;
  std::size_t chain_samples = 0;  ///< 0 skips the ABC chain comparison
  std::size_t chain_thinning = 10;
  std::size_t chain_burnin = 1000;
  double tv_threshold = 0.05;
  AbcConfig abc{2.0, 1e-3, 20, 1.0};
  std::uint64_t seed = 1;
};

inline nlohmann::ordered_json oracle_report(const Lattice& lattice, int k_classes,
                                            const OracleOptions& opt) {
  nlohmann::ordered_json j;
  j["dims"] = std::vector<std::size_t>(lattice.dims().begin(), lattice.dims().end());
  j["neighborhood"] = std::string(to_string(lattice.neighborhood()));
  j["classes"] = k_classes;
  j["states"] = oracle_state_count(lattice, k_classes);
  j["seed"] = opt.seed;
  const auto hist = eta_histogram(lattice, k_classes);
  j["eta_histogram"] = hist;
  auto rows = nlohmann::ordered_json::array();
  for (double b : opt.betas) {
    const double via_hist = std::exp(log_partition(hist, b));
    const double direct = enumerate_partition_direct(lattice, k_classes, b);
    rows.push_back({{"beta", b},
                    {"partition", via_hist},
                    {"partition_direct", direct},
                    {"relative_difference", std::abs(via_hist - direct) / direct}});
  }
  j["partition"] = rows;

  const auto root = StreamKey::root(opt.seed);
  LabelField z;
  if (lattice.size() <= ExactPottsSampler::kMaxSites) {
    const ExactPottsSampler sampler(lattice, k_classes);
    z = sampler.draw(opt.label_beta, to_unit(child(root, Domain::init).engine().at(0)));
  } else {
    const auto coloring = chromatic_coloring(lattice);
    z = uniform_label_field(lattice.size(), k_classes, child(root, Domain::init));
    for (std::size_t s = 0; s < 500; ++s)
      sample_potts_prior_sweep(z, opt.label_beta, lattice, coloring, child(root, Domain::prior).child(s));
  }
  j["labels"] = z.to_one_based();
  j["eta"] = suff_stat(z, lattice);
  const auto post = exact_beta_posterior(z, lattice, opt.abc.upper_bound, opt.grid_points);
  auto grid = nlohmann::ordered_json::array();
  for (const auto& [b, d] : post.beta_grid) grid.push_back({b, d});
  j["beta_posterior"] = grid;

  if (opt.chain_samples > 0) {
    BetaChainOptions co;
    co.samples = opt.chain_samples;
    co.thinning = opt.chain_thinning;
    co.burnin = opt.chain_burnin;
    BetaState final_state;
    const auto samples =
        sample_beta_chain(z, lattice, opt.abc, co, child(root, Domain::beta), &final_state);
    const auto masses = exact_beta_bin_masses(z, lattice, opt.abc.upper_bound, opt.grid_points);
    const double tv = histogram_tv(samples, masses, opt.abc.upper_bound);
    j["abc_chain"] = {{"samples", samples.size()},
                      {"moves", opt.abc.moves},
                      {"thinning", opt.chain_thinning},
                      {"acceptance", static_cast<double>(final_state.accept_count) /
                                         static_cast<double>(final_state.proposal_count)},
                      {"tv", tv},
                      {"threshold", opt.tv_threshold},
                      {"pass", tv < opt.tv_threshold}};
  }
  return j;
}

}  // namespace potts_abc
