// Command-line front end: simulate | fit | oracle | table | eval.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "potts_abc/potts_abc.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace potts_abc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 0;
  bool full_scale = false;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_config = true) {
  auto* c = app->add_option("--config", o.config, "experiment configuration (INI)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "override the configured seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--threads", o.threads, "worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app->add_flag("--full-scale", o.full_scale, "use the full-size lattice and run lengths");
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  auto cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.full_scale) cfg.apply_full_scale();
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.chain.seed = *o.seed;
  }
  if (o.out) cfg.output_dir = *o.out;
  cfg.validate();
  return cfg;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

void print_report(const RunReport& r) {
  std::cout << "beta " << format_number(r.beta_mean, 4) << " +/- " << format_number(r.beta_std, 4);
  if (r.fixed_beta) std::cout << " (fixed)";
  std::cout << "\n";
  for (const auto& p : r.theta)
    std::cout << p.name << " " << format_number(p.mean, 4) << " +/- " << format_number(p.stddev, 4)
              << "\n";
  if (r.accuracy) std::cout << "accuracy " << format_number(100.0 * *r.accuracy, 2) << "%\n";
  std::cout << "runtime " << format_number(r.runtime_seconds, 1) << " s\n";
}

int run_simulate(const CommonOptions& o, std::optional<double> beta) {
  auto cfg = resolve_config(o);
  if (beta) cfg.true_beta = *beta;
  cfg.validate();
  ensure_directory(cfg.output_dir);
  const auto sim = simulate(cfg);
  write_simulation(cfg.output_dir, sim, cfg);
  const Lattice lattice(cfg.dims, cfg.neighborhood);
  std::cout << "eta " << suff_stat(sim.labels, lattice) << " of "
            << lattice.total_degree() << " directed pairs\n"
            << "wrote " << cfg.output_dir.string() << "\n";
  return 0;
}

int run_fit(const CommonOptions& o, const std::string& observations,
            const std::optional<std::string>& truth_path, std::optional<double> fixed_beta) {
  const auto cfg = resolve_config(o);
  const auto obs = read_observation_array(observations);
  if (obs.header.dims != cfg.dims)
    throw IoError("observation dims do not match the configured lattice");
  std::optional<LabelField> truth;
  if (truth_path) {
    const auto t = read_label_array(*truth_path);
    if (t.header.dims != cfg.dims) throw IoError("truth dims do not match the configured lattice");
    truth = t.field(cfg.classes);
  }
  ensure_directory(cfg.output_dir);
  const auto f = fit(cfg, obs.values, truth, fixed_beta);
  write_fit(cfg.output_dir, f);
  print_report(f.report);
  return 0;
}

int run_eval(const std::string& estimate_path, const std::string& truth_path, int classes) {
  const auto est = read_label_array(estimate_path);
  const auto truth = read_label_array(truth_path);
  if (est.header.dims != truth.header.dims) throw IoError("estimate and truth dims differ");
  const int K = classes > 0 ? classes : std::max(est.max_label(), truth.max_label());
  const auto a = align_labels(est.field(K), truth.field(K), K);
  nlohmann::ordered_json j;
  std::vector<int> perm;
  for (int p : a.permutation) perm.push_back(p + 1);
  j["classes"] = K;
  j["permutation"] = perm;
  j["accuracy"] = a.accuracy;
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct OracleArgs {
  std::vector<std::size_t> dims{3, 3};
  std::string neighborhood = "n4";
  int classes = 2;
  std::vector<double> betas{0.0, 0.5, 1.0, 1.5, 2.0};
  double label_beta = 1.0;
  std::size_t grid = 400;
  std::size_t chain_samples = 0;
  std::size_t chain_thinning = 10;
  int moves = 20;
};

int run_oracle(const CommonOptions& o, const OracleArgs& a) {
  const Lattice lattice(a.dims, parse_neighborhood(a.neighborhood));
  OracleOptions opt;
  opt.betas = a.betas;
  opt.label_beta = a.label_beta;
  opt.grid_points = a.grid;
  opt.chain_samples = a.chain_samples;
  opt.chain_thinning = a.chain_thinning;
  opt.abc.moves = a.moves;
  opt.seed = o.seed.value_or(1);
  const auto j = oracle_report(lattice, a.classes, opt);
  const fs::path dir = o.out.value_or("out/oracle");
  ensure_directory(dir);
  write_json(dir / "oracle.json", j);
  for (const auto& row : j["partition"])
    std::cout << "C(" << row["beta"].get<double>() << ") = " << std::setprecision(12)
              << row["partition"].get<double>() << "\n";
  if (j.contains("abc_chain")) {
    const auto& c = j["abc_chain"];
    std::cout << "abc chain TV " << c["tv"].get<double>() << " "
              << (c["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
    if (!c["pass"].get<bool>()) return kExitNumerical;
  }
  std::cout << "wrote " << (dir / "oracle.json").string() << "\n";
  return 0;
}

/// Simulates and fits every suite member that has no report yet, in
/// root/beta_<b>/{estimated,fixed_<f>}.
void run_suite(const ExperimentConfig& cfg, const fs::path& root) {
  for (double b : cfg.suite_betas) {
    auto member = cfg;
    member.true_beta = b;
    const auto dir = root / run_directory_name("beta_", b);
    ensure_directory(dir / "data");
    const auto sim = simulate(member);
    write_simulation(dir / "data", sim, member);
    std::vector<std::pair<fs::path, std::optional<double>>> runs{{dir / "estimated", std::nullopt}};
    for (double f : cfg.suite_fixed_betas)
      runs.emplace_back(dir / run_directory_name("fixed_", f), f);
    for (const auto& [run_dir, fixed] : runs) {
      if (fs::exists(run_dir / "report.json")) continue;
      ensure_directory(run_dir);
      std::cerr << "running " << run_dir.string() << "\n";
      write_fit(run_dir, fit(member, sim.observations, sim.labels, fixed));
    }
  }
}

int run_table(const CommonOptions& o, bool execute) {
  const auto cfg = resolve_config(o);
  const fs::path root = cfg.output_dir;
  ensure_directory(root);
  if (execute) run_suite(cfg, root);
  std::vector<std::string> missing;
  const auto rows = load_suite(root, cfg, &missing);
  const auto accuracy = accuracy_table_csv(rows, cfg.suite_fixed_betas);
  const auto params = parameter_table_csv(rows);
  detail::write_file(root / "accuracy_table.csv", accuracy);
  detail::write_file(root / "parameter_table.csv", params);
  std::cout << accuracy << "\n" << params;
  for (const auto& m : missing) std::cerr << "missing run: " << m << "\n";
  return missing.empty() ? 0 : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potts-MRF segmentation with ABC estimation of the granularity coefficient"};
  app.require_subcommand(1);

  CommonOptions sim_o, fit_o, oracle_o, table_o;
  std::optional<double> sim_beta, fixed_beta;
  std::string observations, estimate, truth_eval;
  std::optional<std::string> truth;
  int eval_classes = 0;
  OracleArgs oracle_a;
  bool table_run = false;

  auto* sim = app.add_subcommand("simulate", "draw a label field and observations");
  add_common(sim, sim_o);
  sim->add_option("--beta", sim_beta, "override the true granularity coefficient");

  auto* fit_cmd = app.add_subcommand("fit", "run the hybrid Gibbs sampler on observations");
  add_common(fit_cmd, fit_o);
  fit_cmd->add_option("--observations", observations, "observation array")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--truth", truth, "ground-truth label array, enables accuracy");
  fit_cmd->add_option("--fixed-beta", fixed_beta, "hold beta fixed and skip its update");

  auto* oracle = app.add_subcommand("oracle", "exact enumeration on a tiny lattice");
  add_common(oracle, oracle_o, false);
  oracle->add_option("--dims", oracle_a.dims, "lattice dims")->delimiter(',');
  oracle->add_option("--neighborhood", oracle_a.neighborhood, "n4 | n8 | n6 | n14");
  oracle->add_option("--classes", oracle_a.classes, "K")->check(CLI::Range(1, kMaxClasses));
  oracle->add_option("--betas", oracle_a.betas, "partition function rows")->delimiter(',');
  oracle->add_option("--label-beta", oracle_a.label_beta, "beta of the exact label draw");
  oracle->add_option("--grid", oracle_a.grid, "posterior grid points / TV bins");
  oracle->add_option("--chain-samples", oracle_a.chain_samples, "ABC chain samples (0 = skip)");
  oracle->add_option("--chain-thinning", oracle_a.chain_thinning, "ABC steps per sample");
  oracle->add_option("--moves", oracle_a.moves, "auxiliary sweeps M");

  auto* table = app.add_subcommand("table", "aggregate suite reports into CSV tables");
  add_common(table, table_o);
  table->add_flag("--run", table_run, "simulate and fit suite members that are missing");

  auto* eval = app.add_subcommand("eval", "best-permutation accuracy of a label map");
  eval->add_option("--estimate", estimate, "estimated labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth_eval, "true labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--classes", eval_classes, "K (default: largest label)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) {
      apply_threads(sim_o.threads);
      return run_simulate(sim_o, sim_beta);
    }
    if (*fit_cmd) {
      apply_threads(fit_o.threads);
      return run_fit(fit_o, observations, truth, fixed_beta);
    }
    if (*oracle) {
      apply_threads(oracle_o.threads);
      return run_oracle(oracle_o, oracle_a);
    }
    if (*table) {
      apply_threads(table_o.threads);
      return run_table(table_o, table_run);
    }
    if (*eval) return run_eval(estimate, truth_eval, eval_classes);
  } catch (const QuadratureError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
