#include <gtest/gtest.h>

#include <cmath>

#include "singlegan/errors.hpp"
#include "singlegan/objectives.hpp"
#include "test_support.hpp"

namespace singlegan {
namespace {

using testing::gradient_errors;
using testing::random_tensor;

using V = Var<double>;

std::vector<V> constant_maps(double value) {
  return {V(Tensor<double>(Shape{1, 1, 14, 14}, value)), V(Tensor<double>(Shape{1, 1, 6, 6}, value))};
}

double mean_of(const Tensor<double>& t, double (*f)(double)) {
  double s = 0;
  for (double v : t.values()) s += f(v);
  return s / double(t.numel());
}

TEST(LsganD, Examples) {
  EXPECT_NEAR(objectives::lsgan_d_loss<double>(constant_maps(1.0), constant_maps(0.0)).item(), 0.0, 1e-6);
  EXPECT_NEAR(objectives::lsgan_d_loss<double>(constant_maps(0.5), constant_maps(0.5)).item(), 0.5, 1e-6);
  EXPECT_THROW(objectives::lsgan_d_loss<double>({}, {}), ArgumentError);
}

TEST(LsganG, Examples) {
  EXPECT_NEAR(objectives::lsgan_g_loss<double>(constant_maps(1.0)).item(), 0.0, 1e-6);
  EXPECT_NEAR(objectives::lsgan_g_loss<double>(constant_maps(0.0)).item(), 1.0, 1e-6);
  EXPECT_THROW(objectives::lsgan_g_loss<double>({}), ArgumentError);
}

TEST(Lsgan, MatchesBruteForceOnRandomMaps) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto r0 = random_tensor<double>(Shape{2, 1, 5, 5}, rng, -2, 2);
    const auto r1 = random_tensor<double>(Shape{2, 1, 3, 3}, rng, -2, 2);
    const auto f0 = random_tensor<double>(Shape{2, 1, 5, 5}, rng, -2, 2);
    const auto f1 = random_tensor<double>(Shape{2, 1, 3, 3}, rng, -2, 2);
    auto sq_minus_one = [](double v) { return (v - 1) * (v - 1); };
    auto sq = [](double v) { return v * v; };
    const double d_oracle = 0.5 * (mean_of(r0, sq_minus_one) + mean_of(f0, sq) + mean_of(r1, sq_minus_one) + mean_of(f1, sq));
    const double g_oracle = 0.5 * (mean_of(f0, sq_minus_one) + mean_of(f1, sq_minus_one));
    const std::vector<V> real{V(r0), V(r1)}, fake{V(f0), V(f1)};
    EXPECT_NEAR(objectives::lsgan_d_loss<double>(real, fake).item(), d_oracle, 1e-6);
    EXPECT_NEAR(objectives::lsgan_g_loss<double>(fake).item(), g_oracle, 1e-6);
  }
}

TEST(CycleLoss, Examples) {
  Rng rng(1);
  const auto x = random_tensor<double>(Shape{1, 3, 4, 4}, rng);
  EXPECT_NEAR(objectives::cycle_loss(V(x), V(x)).item(), 0.0, 1e-6);
  const V a(Tensor<double>(Shape{1, 3, 4, 4}, 0.2)), b(Tensor<double>(Shape{1, 3, 4, 4}, 0.5));
  EXPECT_NEAR(objectives::cycle_loss(a, b).item(), 0.3, 1e-6);
  EXPECT_THROW(objectives::cycle_loss(a, V(Tensor<double>(Shape{1, 3, 4, 5}))), ShapeError);
}

TEST(CycleLoss, MatchesElementwiseOracleAndIsSymmetric) {
  Rng rng(2);
  const auto x = random_tensor<double>(Shape{2, 3, 5, 5}, rng);
  const auto y = random_tensor<double>(Shape{2, 3, 5, 5}, rng);
  double oracle = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) oracle += std::abs(x[i] - y[i]);
  oracle /= double(x.numel());
  EXPECT_NEAR(objectives::cycle_loss(V(x), V(y)).item(), oracle, 1e-7);
  EXPECT_EQ(objectives::cycle_loss(V(x), V(y)).item(), objectives::cycle_loss(V(y), V(x)).item());
}

TEST(LatentRegression, Examples) {
  const V c(Tensor<double>(Shape{1, 2}, std::vector<double>{1, -1}));
  EXPECT_NEAR(objectives::latent_regression_loss(c, c).item(), 0.0, 1e-6);
  EXPECT_NEAR(objectives::latent_regression_loss(c, V(Tensor<double>(Shape{1, 2}))).item(), 1.0, 1e-6);
  EXPECT_THROW(objectives::latent_regression_loss(c, V(Tensor<double>(Shape{1, 3}))), ShapeError);
  Rng rng(4);
  const auto a = random_tensor<double>(Shape{3, 8}, rng), b = random_tensor<double>(Shape{3, 8}, rng);
  double oracle = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) oracle += std::abs(a[i] - b[i]);
  EXPECT_NEAR(objectives::latent_regression_loss(V(a), V(b)).item(), oracle / 24.0, 1e-7);
}

LatentDistribution<double> dist(std::vector<double> mu, std::vector<double> logvar) {
  const std::size_t n = mu.size();
  return {V(Tensor<double>(Shape{1, n}, std::move(mu))), V(Tensor<double>(Shape{1, n}, std::move(logvar)))};
}

TEST(KlLoss, ClosedFormValues) {
  EXPECT_NEAR(objectives::kl_loss(dist({0}, {0})).item(), 0.0, 1e-6);
  EXPECT_NEAR(objectives::kl_loss(dist({1}, {0})).item(), 0.5, 1e-6);
  const double expected = 0.5 * (4.0 - std::log(4.0) - 1.0);
  EXPECT_NEAR(objectives::kl_loss(dist({0}, {std::log(4.0)})).item(), expected, 1e-6);
  EXPECT_NEAR(expected, 0.8069, 1e-4);
}

TEST(KlLoss, AveragesOverBatchAndIsPositiveAwayFromPrior) {
  const LatentDistribution<double> d{V(Tensor<double>(Shape{2, 1}, std::vector<double>{1, 0})),
                                     V(Tensor<double>(Shape{2, 1}, std::vector<double>{0, std::log(4.0)}))};
  EXPECT_NEAR(objectives::kl_loss(d).item(), 0.5 * (0.5 + 0.5 * (4.0 - std::log(4.0) - 1.0)), 1e-9);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto mu = random_tensor<double>(Shape{2, 3}, rng), lv = random_tensor<double>(Shape{2, 3}, rng);
    EXPECT_GT(objectives::kl_loss(LatentDistribution<double>{V(mu), V(lv)}).item(), 0.0);
  }
}

TEST(PairedRecon, ExamplesAndAdditivity) {
  const Shape s{1, 3, 2, 2};
  const V zero{Tensor<double>(s)}, a{Tensor<double>(s, 0.1)}, b{Tensor<double>(s, 0.3)};
  std::vector<std::pair<V, V>> same{std::make_pair(zero, zero), std::make_pair(a, a)};
  EXPECT_NEAR(objectives::paired_recon_loss<double>(same).item(), 0.0, 1e-6);
  std::vector<std::pair<V, V>> gaps{std::make_pair(zero, a), std::make_pair(zero, b)};
  EXPECT_NEAR(objectives::paired_recon_loss<double>(gaps).item(), 0.4, 1e-6);
  std::vector<std::pair<V, V>> bad{std::make_pair(zero, V(Tensor<double>(Shape{1, 3, 2, 3})))};
  EXPECT_THROW(objectives::paired_recon_loss<double>(bad), ShapeError);

  Rng rng(6);
  std::vector<std::pair<V, V>> pairs;
  double oracle = 0;
  for (int k = 0; k < 3; ++k) {
    const auto t = random_tensor<double>(s, rng), g = random_tensor<double>(s, rng);
    double m = 0;
    for (std::size_t i = 0; i < t.numel(); ++i) m += std::abs(t[i] - g[i]);
    oracle += m / double(t.numel());
    pairs.emplace_back(V(t), V(g));
  }
  EXPECT_NEAR(objectives::paired_recon_loss<double>(pairs).item(), oracle, 1e-6);
}

TEST(Losses, AreNonNegativeOnRandomInputs) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const std::vector<V> r{V(random_tensor<double>(Shape{1, 1, 3, 3}, rng, -3, 3))};
    const std::vector<V> f{V(random_tensor<double>(Shape{1, 1, 3, 3}, rng, -3, 3))};
    EXPECT_GE(objectives::lsgan_d_loss<double>(r, f).item(), 0.0);
    EXPECT_GE(objectives::lsgan_g_loss<double>(f).item(), 0.0);
    EXPECT_GE(objectives::cycle_loss(r[0], f[0]).item(), 0.0);
  }
}

// 10 seeded instances per loss.
class LossGradient : public ::testing::TestWithParam<int> {};

TEST_P(LossGradient, LsganMatchesFiniteDifferences) {
  Rng rng(300 + GetParam());
  const std::vector<Tensor<double>> in{
      random_tensor<double>(Shape{2, 1, 4, 4}, rng), random_tensor<double>(Shape{2, 1, 2, 2}, rng),
      random_tensor<double>(Shape{2, 1, 4, 4}, rng), random_tensor<double>(Shape{2, 1, 2, 2}, rng)};
  auto d = gradient_errors(
      [](const std::vector<V>& v) {
        return objectives::lsgan_d_loss<double>(std::vector<V>{v[0], v[1]}, std::vector<V>{v[2], v[3]});
      },
      in, rng);
  for (double e : d) EXPECT_LT(e, 1e-4);
  auto g = gradient_errors(
      [](const std::vector<V>& v) { return objectives::lsgan_g_loss<double>(std::vector<V>{v[0], v[1]}); },
      {in[0], in[1]}, rng);
  for (double e : g) EXPECT_LT(e, 1e-4);
}

// Keeps |a - b| well above the finite-difference step so |.| stays smooth.
std::pair<Tensor<double>, Tensor<double>> separated(Shape s, Rng& rng) {
  auto a = random_tensor<double>(s, rng);
  auto b = a;
  for (auto& v : b.values()) v += (uniform01(rng) < 0.5 ? -1 : 1) * (0.1 + uniform01(rng));
  return {a, b};
}

TEST_P(LossGradient, L1LossesMatchFiniteDifferences) {
  Rng rng(400 + GetParam());
  auto [a, b] = separated(Shape{2, 3, 3, 3}, rng);
  for (double e : gradient_errors([](const std::vector<V>& v) { return objectives::cycle_loss(v[0], v[1]); },
                                  {a, b}, rng)) {
    EXPECT_LT(e, 1e-4);
  }
  auto [c, d] = separated(Shape{3, 8}, rng);
  for (double e : gradient_errors(
           [](const std::vector<V>& v) { return objectives::latent_regression_loss(v[0], v[1]); }, {c, d}, rng)) {
    EXPECT_LT(e, 1e-4);
  }
  auto [t1, g1] = separated(Shape{1, 3, 3, 3}, rng);
  auto [t2, g2] = separated(Shape{1, 3, 3, 3}, rng);
  for (double e : gradient_errors(
           [](const std::vector<V>& v) {
             std::vector<std::pair<V, V>> pairs{std::make_pair(v[0], v[1]), std::make_pair(v[2], v[3])};
             return objectives::paired_recon_loss<double>(pairs);
           },
           {t1, g1, t2, g2}, rng)) {
    EXPECT_LT(e, 1e-4);
  }
}

TEST_P(LossGradient, KlMatchesFiniteDifferences) {
  Rng rng(500 + GetParam());
  const std::vector<Tensor<double>> in{random_tensor<double>(Shape{3, 8}, rng, -2, 2),
                                       random_tensor<double>(Shape{3, 8}, rng, -2, 2)};
  for (double e : gradient_errors(
           [](const std::vector<V>& v) { return objectives::kl_loss(LatentDistribution<double>{v[0], v[1]}); }, in,
           rng)) {
    EXPECT_LT(e, 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LossGradient, ::testing::Range(0, 10));

TEST(LossWeights, DefaultsAndValidation) {
  LossWeights w;
  EXPECT_EQ(w.lambda_cyc, 10.0);
  EXPECT_EQ(w.lambda_kl, 0.1);
  EXPECT_EQ(w.lambda_reg, 0.5);
  w.lambda_kl = -1;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(LossReport, CanonicalOrderAndLogLine) {
  LossReport r;
  r.set("total_d", 1.5);
  r.set("cyc", 0.25);
  r.set("d_adv.B", 0.5);
  r.set("g_adv.B", 2);
  r.set("g_adv.A", 3);
  r.set("total_g", 4);
  EXPECT_EQ(r.to_log_line(7, "base"), "step=7 regime=base g_adv.B=2 g_adv.A=3 d_adv.B=0.5 cyc=0.25 total_g=4 total_d=1.5");
  EXPECT_EQ(r.count_prefix("g_adv."), 2u);
  EXPECT_FALSE(r.first_non_finite().has_value());
  r.set("cyc", NAN);
  EXPECT_EQ(r.first_non_finite(), std::optional<std::string>("cyc"));
}

}  // namespace
}  // namespace singlegan
