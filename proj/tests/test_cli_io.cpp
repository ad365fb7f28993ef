#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "potts_abc/experiment.hpp"

using namespace potts_abc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("potts_abc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ExperimentConfig small_config() {
  return parse_config_string(R"(
[lattice]
dims = 24, 20
neighborhood = n4
[model]
type = gamma
classes = 3
looks = 3
means = 1, 2, 3
[potts]
beta = 1.1
[chain]
iterations = 40
burnin = 20
seed = 9
)");
}

}  // namespace

TEST(Config, ParsesSectionsAndLists) {
  const auto c = small_config();
  EXPECT_EQ(c.dims, (std::vector<std::size_t>{24, 20}));
  EXPECT_EQ(c.classes, 3);
  EXPECT_EQ(c.means, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(c.chain.iterations, 40u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.chain.seed, 9u);
  EXPECT_DOUBLE_EQ(c.true_beta, 1.1);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_string("[model]\nmeans = 1, 2\n"), ConfigError);  // K = 3
  EXPECT_THROW(parse_config_string("[model]\nmaens = 1, 2, 3\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[lattice]\ndims = 4, x\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[lattice]\nneighborhood = n6\n"), ConfigError);  // 2D dims
  EXPECT_THROW(parse_config_string("[model]\ntype = alpha-rayleigh\nalphas = 1.9, 2.5, 1.8\n"),
               ConfigError);
  EXPECT_THROW(parse_config_string("[chain]\niterations = 10\nburnin = 10\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(Config, HashIgnoresSeedAndOutputButNotModel) {
  auto a = small_config(), b = small_config();
  b.seed = 1234;
  b.output_dir = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.means[2] = 3.5;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.chain.fixed_beta = 0.6;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, FullScaleSwitch) {
  auto c = parse_config_string("[full_scale]\ndims = 256, 256\niterations = 1000\nburnin = 400\n");
  c.apply_full_scale();
  EXPECT_EQ(c.dims, (std::vector<std::size_t>{256, 256}));
  EXPECT_EQ(c.chain.iterations, 1000u);
}

TEST(ArrayIo, RoundTripWithProvenance) {
  const auto dir = scratch_dir("arrays");
  const LabelField z(std::vector<std::uint8_t>{0, 2, 1, 1, 0, 2}, 3);
  write_label_array(dir / "z.bin", z, {2, 3}, 77, 0xabcdef);
  const auto back = read_label_array(dir / "z.bin");
  EXPECT_EQ(back.header.dims, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(back.header.seed, 77u);
  EXPECT_EQ(back.header.config_hash, 0xabcdefu);
  EXPECT_EQ(back.one_based, (std::vector<int>{1, 3, 2, 2, 1, 3}));
  EXPECT_EQ(back.field(3), z);

  const ObservationField r(std::vector<double>{0.5, 1e-300, 7.25, 3.0});
  write_observation_array(dir / "r.bin", r, {2, 1, 2}, 5, 6);
  const auto rb = read_observation_array(dir / "r.bin");
  EXPECT_EQ(rb.header.dims.size(), 3u);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(rb.values[i], r[i]);

  const auto bytes = slurp(dir / "z.bin");
  EXPECT_EQ(bytes.substr(0, 8), "POTTSARR");
  EXPECT_EQ(bytes.size(), kArrayHeaderBytes + 6);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1);  // element type, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 2);  // dims[0]
}

TEST(ArrayIo, MalformedFilesRaise) {
  const auto dir = scratch_dir("bad_arrays");
  EXPECT_THROW(read_label_array(dir / "missing.bin"), IoError);
  std::ofstream(dir / "junk.bin") << "not an array";
  EXPECT_THROW(read_label_array(dir / "junk.bin"), IoError);
  const LabelField z(4, 2);
  write_label_array(dir / "z.bin", z, {2, 2}, 1, 1);
  EXPECT_THROW(read_observation_array(dir / "z.bin"), IoError);
  auto bytes = slurp(dir / "z.bin");
  bytes.pop_back();
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes;
  EXPECT_THROW(read_label_array(dir / "short.bin"), IoError);
  EXPECT_THROW(write_label_array(dir / "z.bin", z, {3, 2}, 1, 1), IoError);
  EXPECT_THROW(write_label_array("/nonexistent/dir/z.bin", z, {2, 2}, 1, 1), IoError);
}

TEST(ArrayIo, PgmAndTraceCarryProvenance) {
  const auto dir = scratch_dir("pgm");
  const LabelField z(std::vector<std::uint8_t>{0, 1, 2, 0}, 3);
  write_label_pgm(dir / "z.pgm", z, {2, 2}, 3, 0x10);
  const auto pgm = slurp(dir / "z.pgm");
  EXPECT_EQ(pgm.rfind("P5\n# config_hash=0000000000000010,seed=3\n2 2\n255\n", 0), 0u);
  EXPECT_EQ(static_cast<unsigned char>(pgm.back()), 0);
  EXPECT_EQ(static_cast<unsigned char>(pgm[pgm.size() - 2]), 255);

  Trace t;
  t.theta_names = {"m_1"};
  t.iterations = {3, 4};
  t.beta_samples = {1.0, 1.25};
  t.theta_samples = {{2.0}, {2.5}};
  t.beta_accepted = {0, 1};
  write_trace_csv(dir / "trace.csv", t, 0x10, 3);
  EXPECT_EQ(slurp(dir / "trace.csv"),
            "# config_hash=0000000000000010,seed=3\niteration,beta,beta_accepted,m_1\n"
            "3,1,0,2\n4,1.25,1,2.5\n");
}

TEST(Align, IdentitySwapAndRelabelingInvariance) {
  const LabelField truth(std::vector<std::uint8_t>{0, 0, 1, 1, 2, 2, 0, 1}, 3);
  auto a = align_labels(truth, truth, 3);
  EXPECT_EQ(a.permutation, (std::vector<int>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(a.accuracy, 1.0);

  auto swapped = truth;
  for (std::size_t n = 0; n < swapped.size(); ++n)
    swapped[n] = swapped[n] == 0 ? 1 : swapped[n] == 1 ? 0 : 2;
  a = align_labels(swapped, truth, 3);
  EXPECT_EQ(a.permutation, (std::vector<int>{1, 0, 2}));
  EXPECT_DOUBLE_EQ(a.accuracy, 1.0);
  EXPECT_EQ(apply_alignment(swapped, a), truth);

  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    LabelField est(200, 4), tr(200, 4);
    for (std::size_t n = 0; n < 200; ++n) {
      tr[n] = static_cast<std::uint8_t>(gen() % 4);
      est[n] = gen() % 3 ? tr[n] : static_cast<std::uint8_t>(gen() % 4);
    }
    std::vector<std::uint8_t> p{0, 1, 2, 3}, q{0, 1, 2, 3};
    std::shuffle(p.begin(), p.end(), gen);
    std::shuffle(q.begin(), q.end(), gen);
    auto est2 = est, tr2 = tr;
    for (std::size_t n = 0; n < 200; ++n) {
      est2[n] = p[est[n]];
      tr2[n] = q[tr[n]];
    }
    const double acc = align_labels(est, tr, 4).accuracy;
    EXPECT_DOUBLE_EQ(align_labels(est2, tr, 4).accuracy, acc);
    EXPECT_DOUBLE_EQ(align_labels(est, tr2, 4).accuracy, acc);
  }
}

TEST(Align, RandomLabelsScoreNearOneThird) {
  const auto est = uniform_label_field(200000, 3, StreamKey::root(1));
  const auto truth = uniform_label_field(200000, 3, StreamKey::root(2));
  EXPECT_NEAR(align_labels(est, truth, 3).accuracy, 1.0 / 3.0, 0.02);
  EXPECT_THROW(align_labels(LabelField(4, 9), LabelField(4, 9), 9), std::invalid_argument);
}

TEST(Simulate, GranularityShowsInAgreementFraction) {
  auto cfg = ExperimentConfig{};
  cfg.true_beta = 1.2;
  auto sim = simulate(cfg);
  const Lattice lat(cfg.dims, cfg.neighborhood);
  EXPECT_GT(static_cast<double>(suff_stat(sim.labels, lat)) / lat.total_degree(), 0.8);

  cfg.true_beta = 0.0;
  sim = simulate(cfg);
  EXPECT_NEAR(static_cast<double>(suff_stat(sim.labels, lat)) / lat.total_degree(), 1.0 / 3.0,
              0.02 / 3.0);
}

TEST(Simulate, SameSeedSameFiles) {
  auto cfg = small_config();
  cfg.model = ModelKind::alpha_rayleigh;
  const auto d1 = scratch_dir("sim1"), d2 = scratch_dir("sim2");
  write_simulation(d1, simulate(cfg), cfg);
  write_simulation(d2, simulate(cfg), cfg);
  for (const char* f : {"labels.bin", "observations.bin", "labels.pgm"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  cfg.seed = 10;
  write_simulation(d2, simulate(cfg), cfg);
  EXPECT_NE(slurp(d1 / "observations.bin"), slurp(d2 / "observations.bin"));
}

TEST(Fit, RerunIsByteIdentical) {
  const auto cfg = small_config();
  const auto sim = simulate(cfg);
  const auto d1 = scratch_dir("fit1"), d2 = scratch_dir("fit2");
  write_fit(d1, fit(cfg, sim.observations, sim.labels));
  write_fit(d2, fit(cfg, sim.observations, sim.labels));
  for (const char* f : {"report.json", "map_labels.bin", "map_labels.pgm", "trace.csv"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  const auto j = nlohmann::json::parse(slurp(d1 / "report.json"));
  EXPECT_EQ(j["config_hash"], hex_hash(cfg.hash()));
  EXPECT_EQ(j["seed"], 9);
  EXPECT_EQ(j["records"], 20);
}

TEST(Fit, SingleClassAccuracy) {
  auto cfg = small_config();
  cfg.classes = 1;
  cfg.means = {2.0};
  const auto sim = simulate(cfg);
  auto f = fit(cfg, sim.observations, sim.labels);
  ASSERT_TRUE(f.report.accuracy.has_value());
  EXPECT_DOUBLE_EQ(*f.report.accuracy, 1.0);
  EXPECT_EQ(f.report.theta.size(), 1u);
  EXPECT_FALSE(fit(cfg, sim.observations).report.accuracy.has_value());
}

TEST(Fit, RejectsDimensionMismatch) {
  auto cfg = small_config();
  const auto sim = simulate(cfg);
  cfg.dims = {20, 24};
  cfg.chain.iterations = 3;
  cfg.chain.burnin = 1;
  EXPECT_NO_THROW(fit(cfg, sim.observations));  // same site count
  cfg.dims = {10, 10};
  EXPECT_THROW(fit(cfg, sim.observations), std::invalid_argument);
}

TEST(Fit, ReportJsonRoundTrip) {
  RunReport r;
  r.config_hash = 0x0123456789abcdefULL;
  r.seed = 4;
  r.model = "gamma";
  r.classes = 2;
  r.dims = {3, 3};
  r.fixed_beta = 0.6;
  r.beta_mean = 0.6;
  r.theta = {{"m_1", 1.0, 0.1}, {"m_2", 2.0, 0.2}};
  r.accuracy = 0.75;
  r.permutation = {1, 0};
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(back.fixed_beta, r.fixed_beta);
  EXPECT_EQ(back.permutation, r.permutation);
  EXPECT_EQ(back.theta[1].stddev, 0.2);
  EXPECT_EQ(to_json(r)["permutation"], nlohmann::json({2, 1}));
}

TEST(Tables, ShapeAndMissingRuns) {
  auto cfg = ExperimentConfig{};
  const auto root = scratch_dir("suite");
  std::vector<std::string> missing;
  auto rows = load_suite(root, cfg, &missing);
  EXPECT_EQ(missing.size(), 18u);
  const auto acc = accuracy_table_csv(rows, cfg.suite_fixed_betas);
  std::istringstream lines(acc);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0], "true_beta,estimated_beta,fixed_0.60,fixed_0.80,fixed_1.00,fixed_1.20,fixed_1.40");
  EXPECT_EQ(all[3], "1.20,NA,NA,NA,NA,NA,NA");

  RunReport r;
  r.beta_mean = 1.18;
  r.beta_std = 0.02;
  r.theta = {{"m_1", 1.0, 0.01}, {"m_2", 2.0, 0.02}, {"m_3", 3.0, 0.03}};
  r.accuracy = 0.956;
  rows[2].estimated = r;
  const auto params = parameter_table_csv(rows);
  EXPECT_NE(params.find("\nbeta,NA,NA,1.180 ± 0.020\n"), std::string::npos);
  EXPECT_NE(params.find("\nm_3,NA,NA,3.000 ± 0.030\n"), std::string::npos);
  EXPECT_NE(accuracy_table_csv(rows, cfg.suite_fixed_betas).find("1.20,95.60,NA"),
            std::string::npos);

  EXPECT_EQ(parameter_table_csv({}), "parameter\n");
  EXPECT_EQ(accuracy_table_csv({}, cfg.suite_fixed_betas),
            "true_beta,estimated_beta,fixed_0.60,fixed_0.80,fixed_1.00,fixed_1.20,fixed_1.40\n");
}

TEST(OracleReport, TwoSiteRows) {
  OracleOptions opt;
  const auto j = oracle_report(Lattice({1, 2}, Neighborhood::n4), 2, opt);
  ASSERT_EQ(j["partition"].size(), 5u);
  EXPECT_DOUBLE_EQ(j["partition"][0]["partition"].get<double>(), 4.0);
  EXPECT_NEAR(j["partition"][2]["partition"].get<double>(), 2.0 * std::exp(1.0) + 2.0, 1e-12);
  EXPECT_LT(j["partition"][4]["relative_difference"].get<double>(), 1e-12);
  EXPECT_FALSE(j.contains("abc_chain"));
}
