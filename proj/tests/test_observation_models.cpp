#include <gtest/gtest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "potts_abc/alpha_rayleigh_model.hpp"
#include "potts_abc/gamma_model.hpp"
#include "test_support.hpp"

using namespace potts_abc;
namespace pt = potts_abc::testing;
namespace bq = boost::math::quadrature;

namespace {

double rayleigh_closed_form(double r, double g) {
  return r / (2.0 * g * g) * std::exp(-r * r / (4.0 * g * g));
}

/// log of L-look gamma density via boost (shape L, scale m / L).
double reference_gamma_logpdf(double r, int L, double m) {
  return std::log(boost::math::pdf(boost::math::gamma_distribution<double>(L, m / L), r));
}

/// Posterior CDF of m on a log grid from likelihood x InvGamma prior, with no
/// use of conjugacy.
pt::GridCdf grid_m_posterior(const std::vector<double>& obs, int L, InverseGammaPrior prior) {
  std::vector<double> u, logd;
  const double lo = std::log(1e-4), hi = std::log(1e6);
  const std::size_t pts = 400000;
  for (std::size_t i = 0; i < pts; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (pts - 1);
    const double m = std::exp(x);
    double ld = -(prior.shape + 1.0) * x - prior.scale / m + x;  // prior times dm/du
    for (double r : obs) ld += reference_gamma_logpdf(r, L, m);
    u.push_back(x);
    logd.push_back(ld);
  }
  return pt::GridCdf(u, logd);
}

}  // namespace

TEST(GammaDensity, ClosedFormValues) {
  EXPECT_NEAR(std::exp(gamma_logpdf(1.0, 3, 1.0)), 13.5 * std::exp(-3.0), 1e-14);
  EXPECT_NEAR(std::exp(gamma_logpdf(1.0, 3, 1.0)), 0.67213, 5e-6);
  EXPECT_NEAR(gamma_logpdf(2.0, 1, 1.0), -2.0, 1e-14);
  for (double r : {0.1, 0.7, 2.5, 9.0})
    for (int L : {1, 3, 8})
      for (double m : {0.5, 2.0})
        EXPECT_NEAR(gamma_logpdf(r, L, m), reference_gamma_logpdf(r, L, m), 1e-12);
}

TEST(GammaDensity, NormalizedWithMeanM) {
  auto f = [](double r) { return std::exp(gamma_logpdf(r, 3, 2.0)); };
  const double mass = bq::gauss_kronrod<double, 61>::integrate(f, 0.0, INFINITY, 15, 1e-12);
  const double mean = bq::gauss_kronrod<double, 61>::integrate(
      [&](double r) { return r * f(r); }, 0.0, INFINITY, 15, 1e-12);
  EXPECT_NEAR(mass, 1.0, 1e-9);
  EXPECT_NEAR(mean, 2.0, 1e-8);
}

TEST(GammaDensity, RejectsInvalidArguments) {
  EXPECT_THROW(gamma_logpdf(0.0, 3, 1.0), std::domain_error);
  EXPECT_THROW(gamma_logpdf(1.0, 0, 1.0), std::domain_error);
  EXPECT_THROW(gamma_logpdf(1.0, 3, -1.0), std::domain_error);
}

TEST(GammaSampler, MomentsAndReproducibility) {
  auto gen = StreamKey::root(21).engine();
  const int n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) v = sample_gamma_observation(3, 1.0, gen);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
  EXPECT_NEAR(var, 1.0 / 3.0, 0.05 / 3.0);
  auto g1 = StreamKey::root(5).engine(), g2 = StreamKey::root(5).engine();
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(sample_gamma_observation(3, 2.0, g1), sample_gamma_observation(3, 2.0, g2));
}

TEST(GammaPosterior, SingleObservationGivesInverseGamma44) {
  auto gen = StreamKey::root(8).engine();
  std::vector<double> draws(100000);
  for (auto& d : draws) d = sample_m_posterior(1, 1.0, 3, InverseGammaPrior{1.0, 1.0}, gen);
  const boost::math::inverse_gamma_distribution<double> ig(4.0, 4.0);
  EXPECT_LT(pt::ks_distance(draws, [&](double m) { return boost::math::cdf(ig, m); }), 0.01);
}

TEST(GammaPosterior, MatchesGridQuadratureForClassSizes) {
  const int L = 3;
  const InverseGammaPrior prior{1.0, 1.0};
  auto data_gen = StreamKey::root(99).engine();
  for (std::size_t n_k : {0u, 1u, 100u}) {
    std::vector<double> obs(n_k);
    for (auto& r : obs) r = sample_gamma_observation(L, 2.0, data_gen);
    const auto cdf = grid_m_posterior(obs, L, prior);

    // Route the draw through the model-level sampler with a label field.
    GammaModel model{L, {2.0, 5.0}, {prior, prior}};
    std::vector<double> all = obs;
    std::vector<std::uint8_t> labels(n_k, 0);
    all.push_back(5.0);
    labels.push_back(1);
    const ObservationField r(all);
    const LabelField z(labels, 2);
    auto gen = StreamKey::root(1000 + n_k).engine();
    std::vector<double> draws(100000);
    for (auto& d : draws) d = std::log(sample_m_posterior(r, z, 0, model, gen));
    EXPECT_LT(pt::ks_distance(draws, cdf), 0.01) << "class size " << n_k;
  }
}

TEST(GammaModel, InitializationSortsClassMeans) {
  auto gen = StreamKey::root(3).engine();
  std::vector<double> v;
  for (double m : {1.0, 2.0, 3.0})
    for (int i = 0; i < 3000; ++i) v.push_back(sample_gamma_observation(3, m, gen));
  const auto model = initialize_gamma_model(ObservationField(v), 3, 3, {});
  ASSERT_EQ(model.classes(), 3);
  EXPECT_LT(model.means[0], model.means[1]);
  EXPECT_LT(model.means[1], model.means[2]);
  EXPECT_EQ(model.parameter_names(), (std::vector<std::string>{"m_1", "m_2", "m_3"}));
}

TEST(AlphaRayleighDensity, RayleighClosedFormAtAlphaTwo) {
  for (double r : {0.1, 1.0, 3.0})
    for (double g : {0.5, 1.0, 2.0}) {
      const double ref = rayleigh_closed_form(r, g);
      EXPECT_LT(std::abs(alpha_rayleigh_pdf(r, 2.0, g) - ref) / ref, 1e-6) << r << " " << g;
    }
  // the oscillatory quadrature on its own, without the series shortcuts
  for (double s : {0.05, 0.5, 1.5, 3.0, 5.0}) {
    const double ref = rayleigh_closed_form(s, 1.0);
    EXPECT_LT(std::abs(s * detail::hankel_integral(s, 2.0) - ref) / ref, 1e-6) << s;
  }
}

TEST(AlphaRayleighDensity, VanishesAtOriginAndIsNonnegative) {
  EXPECT_LT(alpha_rayleigh_pdf(1e-9, 1.8, 2.0), 1e-8);
  for (double a : {0.7, 1.2, 1.5, 1.8, 1.99})
    for (double r = 0.01; r < 200.0; r *= 1.7) EXPECT_GE(alpha_rayleigh_pdf(r, a, 1.0), 0.0);
}

TEST(AlphaRayleighDensity, IntegratesToOne) {
  bq::tanh_sinh<double> core;
  bq::exp_sinh<double> tail;
  for (double a : {1.5, 1.8, 1.99})
    for (double g : {1.0, 2.0}) {
      auto f = [&](double r) { return alpha_rayleigh_pdf(r, a, g); };
      const double split = 10.0 * g;
      const double mass = core.integrate(f, 0.0, split, 1e-10) + tail.integrate(f, split, INFINITY, 1e-10);
      EXPECT_NEAR(mass, 1.0, 1e-4) << "alpha " << a << " gamma " << g;
    }
}

TEST(AlphaRayleighDensity, PowerSeriesAgreesWithQuadrature) {
  for (double a : {1.2, 1.6, 1.9, 1.99})
    for (double s : {0.1, 0.8, 2.0, 3.5}) {
      const auto series = detail::small_radius_series(s, a);
      // heavy cancellation may refuse the series further out; never near zero
      if (s <= 0.8) {
        ASSERT_TRUE(series.has_value()) << a << " " << s;
      }
      if (!series) continue;
      const double quad = s * detail::hankel_integral(s, a);
      EXPECT_NEAR(*series / quad, 1.0, 1e-8) << a << " " << s;
    }
}

TEST(AlphaRayleighDensity, TableMatchesDirectEvaluation) {
  for (double a : {1.5, 1.8, 1.99}) {
    const AlphaRayleighTable table(a);
    for (double s = 2e-4; s < 900.0; s *= 1.37) {
      const double direct = std::log(detail::standard_pdf(s, a));
      EXPECT_NEAR(table.log_pdf_standard(s), direct, 2e-5) << a << " " << s;
    }
    EXPECT_NEAR(table.log_pdf(3.0, 2.0), std::log(alpha_rayleigh_pdf(3.0, a, 2.0)), 2e-5);
  }
}

TEST(AlphaRayleighDensity, MemoizesTablesPerAlpha) {
  AlphaRayleighDensity d(2);
  const auto t1 = d.table(1.7);
  const auto t2 = d.table(1.7);
  EXPECT_EQ(t1.get(), t2.get());
  EXPECT_EQ(d.builds(), 1u);
  d.table(1.8);
  d.table(1.9);  // evicts 1.7
  d.table(1.7);
  EXPECT_EQ(d.builds(), 4u);
}

TEST(AlphaRayleighSampler, RayleighDrawsMatchClosedFormCdf) {
  auto gen = StreamKey::root(31).engine();
  std::vector<double> x(100000);
  for (auto& v : x) v = sample_alpha_rayleigh_observation(2.0, 1.0, gen);
  EXPECT_LT(pt::ks_distance(x, [](double r) { return -std::expm1(-r * r / 4.0); }), 0.01);
}

TEST(AlphaRayleighSampler, MedianMatchesIntegratedCdf) {
  const double a = 1.8, g = 2.0;
  bq::tanh_sinh<double> ts;
  auto cdf = [&](double r) {
    return ts.integrate([&](double x) { return alpha_rayleigh_pdf(x, a, g); }, 0.0, r, 1e-10);
  };
  std::uintmax_t iters = 60;
  const auto bracket = boost::math::tools::toms748_solve(
      [&](double r) { return cdf(r) - 0.5; }, 0.5, 20.0, boost::math::tools::eps_tolerance<double>(40),
      iters);
  const double median = 0.5 * (bracket.first + bracket.second);

  auto gen = StreamKey::root(41).engine();
  std::vector<double> x(100001);
  for (auto& v : x) v = sample_alpha_rayleigh_observation(a, g, gen);
  std::nth_element(x.begin(), x.begin() + 50000, x.end());
  EXPECT_NEAR(x[50000] / median, 1.0, 0.02);

  auto g1 = StreamKey::root(2).engine(), g2 = StreamKey::root(2).engine();
  EXPECT_EQ(sample_alpha_rayleigh_observation(a, g, g1), sample_alpha_rayleigh_observation(a, g, g2));
}

TEST(AlphaGammaPosterior, EmptyClassDrawsFromPriors) {
  AlphaRayleighDensity density;
  AlphaGammaSteps steps;
  const InverseGammaPrior prior{1.0, 1.0};
  auto gen = StreamKey::root(4).engine();
  std::vector<double> a(50000), g(50000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto d = sample_alpha_gamma_posterior({}, 1.9, 1.0, prior, density, gen, steps);
    a[i] = d.alpha;
    g[i] = d.gamma;
    ASSERT_GT(d.alpha, 0.0);
    ASSERT_LE(d.alpha, 2.0);
  }
  EXPECT_LT(pt::ks_distance(a, [](double x) { return x / 2.0; }), 0.01);
  EXPECT_LT(pt::ks_distance(g, [](double x) { return std::exp(-1.0 / x); }), 0.01);
  EXPECT_EQ(density.builds(), 0u);
}

TEST(AlphaGammaPosterior, RejectedProposalKeepsState) {
  auto gen = StreamKey::root(12).engine();
  std::vector<double> r(200);
  for (auto& v : r) v = sample_alpha_rayleigh_observation(1.8, 2.0, gen);
  AlphaRayleighDensity density;
  AlphaGammaSteps steps{1.5, 1.0};  // wide steps, frequent rejections
  double a = 1.8, g = 2.0;
  int rejected = 0;
  for (int i = 0; i < 60; ++i) {
    const auto d = sample_alpha_gamma_posterior(r, a, g, {}, density, gen, steps);
    if (!d.alpha_accepted && !d.gamma_accepted) {
      EXPECT_EQ(d.alpha, a);
      EXPECT_EQ(d.gamma, g);
      ++rejected;
    }
    if (!d.alpha_accepted) {
      EXPECT_EQ(d.alpha, a);
    }
    a = d.alpha;
    g = d.gamma;
  }
  EXPECT_GT(rejected, 0);
  EXPECT_EQ(steps.alpha_proposals, 60u);
  EXPECT_LE(steps.alpha_accepts, steps.alpha_proposals);
}

TEST(AlphaGammaPosterior, RecoversParametersFromSimulatedClass) {
  auto data = StreamKey::root(2024).engine();
  std::vector<double> r(500);
  for (auto& v : r) v = sample_alpha_rayleigh_observation(1.8, 2.0, data);
  AlphaRayleighDensity density(64);
  AlphaGammaSteps steps{0.3, 0.06};
  auto gen = StreamKey::root(7).engine();
  double a = 1.5, g = 1.5;
  std::vector<double> as, gs;
  const int iterations = 1500, burnin = 300;
  for (int t = 0; t < iterations; ++t) {
    const auto d = sample_alpha_gamma_posterior(r, a, g, {}, density, gen, steps);
    a = d.alpha;
    g = d.gamma;
    if (t >= burnin) {
      as.push_back(a);
      gs.push_back(g);
    }
  }
  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0.0, q = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) q += (x - m) * (x - m);
    return std::pair{m, std::sqrt(q / static_cast<double>(v.size()))};
  };
  // 500 draws pin (alpha, gamma) to a few hundredths; the truth must sit
  // within three posterior standard deviations of the posterior mean
  const auto [ma, sda] = mean_sd(as);
  const auto [mg, sdg] = mean_sd(gs);
  EXPECT_LT(sda, 0.1);
  EXPECT_LT(sdg, 0.15);
  EXPECT_NEAR(ma, 1.8, 3.0 * sda) << "sd " << sda;
  EXPECT_NEAR(mg, 2.0, 3.0 * sdg) << "sd " << sdg;
}

TEST(AlphaRayleighDensity, SmallAlphaStaysFinite) {
  for (double a : {0.2, 0.05, 0.01}) {
    const AlphaRayleighTable table(a);
    for (double s : {1e-6, 1e-5, 1e-3, 1.0, 100.0, 5000.0})
      EXPECT_TRUE(std::isfinite(table.log_pdf_standard(s))) << a << " " << s;
  }
  // below the grid the expansion and direct evaluation meet
  const AlphaRayleighTable table(0.5);
  EXPECT_NEAR(table.log_pdf_standard(5e-5), std::log(detail::standard_pdf(5e-5, 0.5)), 1e-6);
}

TEST(ParallelErrors, RethrowsFirstException) {
  detail::ParallelErrors errors;
  const std::ptrdiff_t n = 10000;
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i)
    errors.run([&] {
      if (i % 1000 == 7) throw std::domain_error("bad site");
    });
  EXPECT_THROW(errors.rethrow(), std::domain_error);
  detail::ParallelErrors clean;
  clean.run([] {});
  EXPECT_NO_THROW(clean.rethrow());
}
