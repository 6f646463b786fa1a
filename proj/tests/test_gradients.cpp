#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "support.hpp"

using namespace lmmg;
using lmmg::testing::example_table;
using lmmg::testing::make_state;
using lmmg::testing::random_instance;

namespace {

constexpr double kH = 1e-6;

double central(const std::function<double(double)>& f, double x) { return (f(x + kH) - f(x - kH)) / (2 * kH); }

double unpenalized(const ModelState& s, const Dataset& d) {
  const auto o = objective(s, d);
  return o.l_phi + o.l_f + o.l_a_surrogate;
}

void expect_close(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-3) EXPECT_NEAR(analytic, numeric, 1e-7);
  else EXPECT_LT(std::abs(analytic - numeric) / scale, 1e-4) << analytic << " vs " << numeric;
}

}  // namespace

TEST(GradPhi, ConstantAffinityHasNoEdgeContribution) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.3, 0.6;
  const auto s = make_state(phi, Eigen::MatrixXd::Zero(0, 2), {constant_table(0.4)});
  Dataset d(2, 0);
  d.add_edge(0, 1);
  d.add_edge(1, 0);
  EXPECT_NEAR(grad_phi_network(s, d, 0, 0), 0.0, 1e-15);
}

TEST(GradPhi, SingleEdgeTermMatchesFiniteDifference) {
  const auto t = example_table();
  Eigen::MatrixXd phi(2, 1);
  phi << 0.4, 0.6;
  auto s = make_state(phi, Eigen::MatrixXd::Zero(0, 2), {t});
  Dataset d(2, 0);
  d.add_edge(0, 1);
  d.add_edge(1, 0);  // the incoming edge term is subtracted below
  const double analytic_both = grad_phi_network(s, d, 0, 0);
  const double in_edge = 0.6 * (std::log(t[1][1]) - std::log(t[1][0])) + 0.4 * (std::log(t[0][1]) - std::log(t[0][0]));
  const double out_edge = analytic_both - in_edge;
  const double numeric = central(
      [&](double x) { return pair_expectation(x, 0.6, log_table(t)); }, 0.4);
  EXPECT_NEAR(out_edge, numeric, 1e-8);
  EXPECT_NEAR(out_edge, 1.0279, 1e-4);
}

TEST(GradPhi, UniformPriorHasZeroGradient) {
  Eigen::MatrixXd phi(1, 1);
  phi << 0.27;
  auto s = make_state(phi, Eigen::MatrixXd::Zero(0, 2), {example_table()});
  s.hyper.alpha = {BetaPrior{1, 1}};
  EXPECT_EQ(grad_phi_prior(s, 0, 0), 0.0);
}

TEST(GradPhi, ExactModeMatchesFiniteDifferences) {
  std::mt19937_64 rng(101);
  for (int r = 0; r < 5; ++r) {
    auto in = random_instance(rng, 6, 2, 4);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t k = 0; k < 2; ++k) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto kk = static_cast<Eigen::Index>(k);
        auto s = in.state;
        const double x0 = s.phi()(ii, kk);
        const double numeric = central(
            [&](double x) {
              s.phi()(ii, kk) = x;
              return unpenalized(s, in.data);
            },
            x0);
        s.phi()(ii, kk) = x0;
        expect_close(grad_phi(s, in.data, i, k, FeatureGradient::exact).total, numeric);
      }
  }
}

TEST(GradPhi, NormalizedModeDividesByObservedCount) {
  std::mt19937_64 rng(102);
  auto in = random_instance(rng, 4, 2, 6, 0.0);
  in.data.set_feature(1, 2, Cell::missing);
  in.data.set_feature(1, 4, Cell::missing);
  const double exact = grad_phi_features(in.state, in.data, 1, 0, FeatureGradient::exact);
  EXPECT_NEAR(grad_phi_features(in.state, in.data, 1, 0, FeatureGradient::normalized), exact / 4.0, 1e-15);
  // fully observed nodes keep the plain sum
  EXPECT_EQ(grad_phi_features(in.state, in.data, 0, 0, FeatureGradient::normalized),
            grad_phi_features(in.state, in.data, 0, 0, FeatureGradient::exact));
}

TEST(GradW, AllMissingGivesZero) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.3, 0.7;
  Eigen::MatrixXd w(1, 2);
  w << 0.0, 0.0;
  auto s = make_state(phi, w, {example_table()});
  const Dataset d(2, 1);
  EXPECT_EQ(grad_w(s, d, 0, 0), 0.0);
}

TEST(GradW, SingleNodeHandValue) {
  Eigen::MatrixXd phi(1, 1);
  phi << 0.3;
  Eigen::MatrixXd w(1, 2);
  w << 0.0, 0.0;
  auto s = make_state(phi, w, {example_table()});
  Dataset d(1, 1);
  d.set_feature(0, 0, Cell::one);
  EXPECT_NEAR(grad_w(s, d, 0, 0), 0.15, 1e-15);
  const double numeric = central(
      [&](double x) {
        s.w()(0, 0) = x;
        return feature_term(s, d);
      },
      0.0);
  EXPECT_NEAR(numeric, 0.15, 1e-8);
}

TEST(GradW, MatchesFiniteDifferencesAndRowForm) {
  std::mt19937_64 rng(103);
  auto in = random_instance(rng, 8, 3, 5);
  for (std::size_t l = 0; l < 5; ++l) {
    const auto row = grad_w_row(in.state, in.data, l);
    for (std::size_t k = 0; k <= 3; ++k) {
      auto s = in.state;
      const auto ll = static_cast<Eigen::Index>(l);
      const auto kk = static_cast<Eigen::Index>(k);
      const double numeric = central(
          [&](double x) {
            s.w()(ll, kk) = x;
            return unpenalized(s, in.data);
          },
          in.state.w()(ll, kk));
      expect_close(grad_w(in.state, in.data, l, k), numeric);
      EXPECT_NEAR(row(kk), grad_w(in.state, in.data, l, k), 1e-12);
    }
  }
}

TEST(Lasso, SubThresholdStaysZero) { EXPECT_EQ(lasso_step(0.0, 0.1, 0.005, 0.01), 0.0); }

TEST(Lasso, ActiveWeightMovesAndShrinks) { EXPECT_NEAR(lasso_step(0.5, 1.0, 0.1, 0.01), 0.59, 1e-15); }

TEST(Lasso, ZeroCrossingResets) { EXPECT_EQ(lasso_step(0.02, -1.0, 0.1, 0.01), 0.0); }

TEST(Lasso, InactiveWeightActivatesInGradientDirection) {
  EXPECT_NEAR(lasso_step(0.0, 1.0, 0.1, 0.01), 0.09, 1e-15);
  EXPECT_NEAR(lasso_step(0.0, -1.0, 0.1, 0.01), -0.09, 1e-15);
}

TEST(GradTheta, DegenerateEdgeHitsSingleEntry) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.0, 1.0;
  const auto t = example_table();
  auto s = make_state(phi, Eigen::MatrixXd::Zero(0, 2), {t});
  Dataset d(2, 0);
  d.add_edge(0, 1);
  d.add_edge(1, 0);
  // the reverse edge sits in entry [1][0]
  const auto g = grad_theta(s, d, 0);
  EXPECT_DOUBLE_EQ(g[0][1], 1.0 / t[0][1]);
  EXPECT_DOUBLE_EQ(g[1][0], 1.0 / t[1][0]);
  EXPECT_EQ(g[0][0], 0.0);
  EXPECT_EQ(g[1][1], 0.0);
}

TEST(GradTheta, SingleNodeHasZeroGradient) {
  Eigen::MatrixXd phi(1, 1);
  phi << 0.5;
  auto s = make_state(phi, Eigen::MatrixXd::Zero(0, 2), {example_table()});
  const Dataset d(1, 0);
  const auto g = grad_theta(s, d, 0);
  for (const auto& r : g)
    for (double v : r) EXPECT_EQ(v, 0.0);
}

TEST(GradTheta, MatchesFiniteDifferences) {
  std::mt19937_64 rng(104);
  auto in = random_instance(rng, 4, 2, 1);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto g = grad_theta(in.state, in.data, k);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        auto s = in.state;
        const double numeric = central(
            [&](double x) {
              s.theta()[k][a][b] = x;
              return network_term(s, in.data);
            },
            in.state.theta()[k][a][b]);
        expect_close(g[a][b], numeric);
      }
  }
}
