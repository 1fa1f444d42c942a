#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ownerrel/datagen.hpp"
#include "ownerrel/priors.hpp"
#include "test_support.hpp"

using namespace ownerrel;
using ownerrel::test::expect_error;

namespace {

std::vector<double> two_gaussians(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.normal(rng.bernoulli(0.5) ? 1.0 : -1.0, 0.2);
  return xs;
}

GaussianMixture unit_pair() { return {{0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}}; }

}  // namespace

TEST(CollectPairStats, Counting) {
  EXPECT_TRUE(collect_pair_stats({}).wv.empty());
  EXPECT_TRUE(collect_pair_stats({}).ww.empty());
  const Scene s = ownerrel::test::two_wheel_scene();
  const auto stats = collect_pair_stats(std::span(&s, 1));
  EXPECT_EQ(stats.wv.size(), 2u);
  EXPECT_EQ(stats.ww.size(), 1u);
}

TEST(CollectPairStats, OrientationMatchesHandComputation) {
  const Scene s = ownerrel::test::two_wheel_scene();
  const auto stats = collect_pair_stats(std::span(&s, 1));
  // couple: A = rear (larger x, id 2), B = front (id 1)
  const auto& rear = s.box(2);
  const auto& front = s.box(1);
  const double d = normalized_distance(rear, front, s.width, s.height);
  EXPECT_DOUBLE_EQ(stats.ww[0], std::log(2.0 * d / (40.0 / 640.0 + 40.0 / 480.0)));
  // wheel-vehicle: B = wheel
  const auto& v = s.box(0);
  std::vector<double> expect;
  for (ObjectId w : {1, 2}) {
    const double dv = normalized_distance(v, s.box(w), s.width, s.height);
    expect.push_back(std::log(distance_ratio(dv, s.box(w), s.width, s.height)));
  }
  auto got = stats.wv;
  std::sort(got.begin(), got.end());
  std::sort(expect.begin(), expect.end());
  EXPECT_DOUBLE_EQ(got[0], expect[0]);
  EXPECT_DOUBLE_EQ(got[1], expect[1]);
}

TEST(CollectPairStats, MatchesGeneratorTally) {
  GenConfig config;
  config.scene_count = 100;
  config.seed = 21;
  config.ambiguity_rate = 0.3;
  GenStats tally;
  const auto scenes = generate_dataset(config, &tally);
  const auto stats = collect_pair_stats(scenes);
  EXPECT_EQ(stats.wv.size(), tally.wheel_vehicle_pairs);
  EXPECT_EQ(stats.ww.size(), tally.wheel_wheel_pairs);
}

TEST(FitGmm, ConstantDataSingleComponent) {
  const std::vector<double> xs{2, 2, 2, 2};
  const auto m = fit_gmm(xs, 1, 1e-6, 200, 0);
  ASSERT_EQ(m.components(), 1u);
  EXPECT_DOUBLE_EQ(m.means[0], 2.0);
  EXPECT_DOUBLE_EQ(m.variances[0], kVarianceFloor);
  EXPECT_DOUBLE_EQ(m.weights[0], 1.0);
}

TEST(FitGmm, RecoversTwoComponentMixture) {
  const auto xs = two_gaussians(10000, 42);
  const auto m = fit_gmm(xs, 2, 1e-6, 200, 0);
  const std::size_t lo = m.means[0] < m.means[1] ? 0 : 1;
  EXPECT_NEAR(m.means[lo], -1.0, 0.05);
  EXPECT_NEAR(m.means[1 - lo], 1.0, 0.05);
  EXPECT_NEAR(m.weights[lo], 0.5, 0.03);
  EXPECT_NEAR(std::sqrt(m.variances[lo]), 0.2, 0.02);
}

TEST(FitGmm, LogLikelihoodMonotoneAndWeightsNormalized) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Rng rng(seed);
    std::vector<double> xs(600);
    for (double& x : xs) x = rng.bernoulli(0.3) ? rng.normal(0.4, 0.5) : rng.normal(-0.7, 0.15);
    EmOptions options;
    options.components = 1 + seed % 3;
    const auto r = fit_gmm_em(xs, options);
    ASSERT_GE(r.log_likelihood.size(), 2u);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-9) << "seed " << seed << " iter " << i;
    }
    double total = 0.0;
    for (double w : r.mixture.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (double v : r.mixture.variances) EXPECT_GE(v, kVarianceFloor);
    EXPECT_NEAR(r.log_likelihood.back(), mean_log_likelihood(r.mixture, xs), 1e-12);
  }
}

TEST(FitGmm, Deterministic) {
  const auto xs = two_gaussians(500, 9);
  EXPECT_EQ(fit_gmm(xs, 2, 1e-6, 200, 1), fit_gmm(xs, 2, 1e-6, 200, 1));
}

TEST(FitGmm, Errors) {
  const std::vector<double> three{1, 2, 3};
  expect_error(ErrorCode::kInsufficientData, [&] { fit_gmm(three, 2, 1e-6, 200, 0); });
  expect_error(ErrorCode::kInvalidParameter, [&] { fit_gmm(three, 0, 1e-6, 200, 0); });
  expect_error(ErrorCode::kInvalidParameter, [&] { fit_gmm(three, 1, 0.0, 200, 0); });
}

TEST(Pdf, StandardNormalPeak) {
  const GaussianMixture m{{1.0}, {0.0}, {1.0}};
  EXPECT_NEAR(pdf(m, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
}

TEST(Pdf, SymmetricMixture) {
  const auto m = unit_pair();
  for (double x : {0.1, 0.5, 1.3, 4.0}) EXPECT_NEAR(pdf(m, -x), pdf(m, x), 1e-15);
}

TEST(Pdf, IntegratesToOne) {
  for (const GaussianMixture& m : {unit_pair(), GaussianMixture{{0.2, 0.3, 0.5}, {-2.0, 0.0, 1.5}, {0.5, 1.0, 2.0}}}) {
    const int n = 200000;
    const double a = -10.0, b = 10.0, h = (b - a) / n;
    double sum = 0.5 * (pdf(m, a) + pdf(m, b));
    for (int i = 1; i < n; ++i) sum += pdf(m, a + h * i);
    EXPECT_NEAR(sum * h, 1.0, 1e-4);
    EXPECT_GT(pdf(m, 9.0), 0.0);
  }
}

TEST(InitAdjacency, SingleVehicle) {
  Scene s;
  s.width = s.height = 100;
  s.boxes = {ownerrel::test::box(10, 10, 50, 40)};
  const PriorModel priors{unit_pair(), unit_pair()};
  const Matrix a = init_adjacency(s, priors);
  ASSERT_EQ(a.rows(), 1u);
  EXPECT_EQ(a(0, 0), 1.0);
}

TEST(InitAdjacency, VehicleAndWheelRawDensity) {
  Scene s;
  s.width = 400;
  s.height = 200;
  s.boxes = {ownerrel::test::box(100, 50, 300, 150, ObjectClass::kVehicle, 0),
             ownerrel::test::box(120, 110, 160, 150, ObjectClass::kWheel, 1)};
  const PriorModel priors{{{0.5, 0.5}, {0.0, 1.0}, {0.3, 0.3}}, unit_pair()};
  // hand computation: centers (200,100) and (140,130)
  const double d = std::sqrt(0.15 * 0.15 + 0.15 * 0.15);
  const double ratio = 2.0 * d / (40.0 / 400.0 + 40.0 / 200.0);
  const double raw = pdf(priors.wv, std::log(ratio));
  EXPECT_NEAR(pair_prior_density(s.boxes[0], s.boxes[1], s, priors), raw, 1e-15);
  EXPECT_NEAR(pair_prior_density(s.boxes[1], s.boxes[0], s, priors), raw, 1e-15);
  const Matrix a = init_adjacency(s, priors);
  // both rows have the pair as their only off-diagonal entry
  EXPECT_EQ(a(0, 0), 1.0);
  EXPECT_EQ(a(1, 1), 1.0);
  EXPECT_NEAR(a(0, 1), 1.0, 1e-15);
  EXPECT_EQ(a(0, 1), a(1, 0));
}

TEST(InitAdjacency, StructuralPropertiesOnGeneratedScenes) {
  GenConfig config;
  config.scene_count = 60;
  config.seed = 4;
  config.ambiguity_rate = 0.5;
  const auto scenes = generate_dataset(config);
  const PriorModel priors = fit_priors(scenes, {});
  for (const Scene& s : scenes) {
    const Matrix a = init_adjacency(s, priors);
    const std::size_t n = s.boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(a(i, i), 1.0);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(a(i, j), a(j, i));
        EXPECT_GE(a(i, j), 0.0);
        EXPECT_LE(a(i, j), 1.0);
        if (i != j && s.boxes[i].is_vehicle() && s.boxes[j].is_vehicle()) EXPECT_EQ(a(i, j), 0.0);
      }
    }
  }
}

TEST(InitAdjacency, PermutationRelabels) {
  const Scene s = ownerrel::test::fixture_scene();
  const PriorModel priors{{{0.5, 0.5}, {0.5, 1.2}, {0.2, 0.4}}, {{1.0}, {1.3}, {0.3}}};
  const Matrix a = init_adjacency(s, priors);
  const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  Scene p = s;
  for (std::size_t i = 0; i < perm.size(); ++i) p.boxes[i] = s.boxes[perm[i]];
  const Matrix b = init_adjacency(p, priors);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = 0; j < perm.size(); ++j) EXPECT_NEAR(b(i, j), a(perm[i], perm[j]), 1e-15);
  }
}

TEST(InitAdjacency, CoincidentCentersGiveZero) {
  Scene s;
  s.width = s.height = 100;
  s.boxes = {ownerrel::test::box(10, 10, 50, 50, ObjectClass::kVehicle, 0),
             ownerrel::test::box(20, 20, 40, 40, ObjectClass::kWheel, 1)};
  const Matrix a = init_adjacency(s, {unit_pair(), unit_pair()});
  EXPECT_EQ(a(0, 1), 0.0);
  EXPECT_EQ(a(1, 0), 0.0);
}

TEST(PriorFile, RoundTripIsBitExact) {
  const auto xs = two_gaussians(2000, 5);
  const PriorModel priors{fit_gmm(xs, 2, 1e-6, 200, 0), fit_gmm(xs, 2, 1e-8, 50, 0)};
  std::ostringstream first;
  write_priors(first, priors);
  std::istringstream in(first.str());
  const PriorModel back = read_priors(in);
  EXPECT_EQ(back, priors);
  std::ostringstream second;
  write_priors(second, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(PriorFile, RejectsUnknownVersion) {
  std::istringstream in("ownerrel-priors 9 1\nwv 1 0 1\nww 1 0 1\n");
  expect_error(ErrorCode::kFormat, [&] { read_priors(in); });
}
