#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "ownerrel/training.hpp"
#include "test_support.hpp"

using namespace ownerrel;
using ownerrel::test::expect_error;

namespace {

ModelConfig small_model() {
  ModelConfig m;
  m.extractor_hidden = {16};
  m.feature_dim = 16;
  m.gat_hidden = 8;
  return m;
}

std::vector<Scene> easy_scenes(std::size_t n, std::uint64_t seed) {
  GenConfig g;
  g.scene_count = n;
  g.seed = seed;
  g.max_vehicles = 3;
  return generate_dataset(g);
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (*pa[i].second != *pb[i].second) return false;
  }
  return true;
}

}  // namespace

TEST(WeightedL2Loss, HandExamples) {
  const Matrix scores{{1.0, 0.8}, {0.2, 1.0}};
  const Matrix target{{0.0, 1.0}, {0.0, 0.0}};
  const std::vector<std::uint8_t> mask{0, 1, 1, 0};
  // positive (0.8 − 1)² weight 1, negative 0.2² weight 0.5
  EXPECT_NEAR(weighted_l2_loss(scores, target, mask, 0.5), (0.04 + 0.5 * 0.04) / 1.5, 1e-15);
  EXPECT_NEAR(weighted_l2_loss(scores, target, mask, 0.0), 0.04, 1e-15);
  const Matrix perfect{{0.0, 1.0}, {0.0, 0.0}};
  EXPECT_EQ(weighted_l2_loss(perfect, target, mask, 0.1), 0.0);
  const std::vector<std::uint8_t> none(4, 0);
  expect_error(ErrorCode::kUndefinedLoss, [&] { weighted_l2_loss(scores, target, none, 0.1); });
  const std::vector<std::uint8_t> neg_only{0, 0, 1, 0};
  expect_error(ErrorCode::kUndefinedLoss, [&] { weighted_l2_loss(scores, target, neg_only, 0.0); });
  expect_error(ErrorCode::kShape, [&] { weighted_l2_loss(scores, Matrix(1, 2), mask, 0.1); });
}

TEST(WeightedL2Loss, TapeFormAgrees) {
  ownerrel::test::Lcg lcg(4);
  const Matrix scores = ownerrel::test::random_matrix(3, 3, lcg);
  const Matrix target{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};
  const std::vector<std::uint8_t> mask{0, 1, 1, 1, 0, 1, 1, 1, 0};
  const Matrix w = loss_weights(target, mask, 0.1, 0.0, nullptr);
  Tape tape;
  const auto v = tape.variable(scores);
  const auto loss = weighted_l2_loss(tape, v, target, w);
  EXPECT_NEAR(tape.value(loss)(0, 0), weighted_l2_loss(scores, target, mask, 0.1), 1e-15);
  tape.backward(loss);
  // d/ds = 2c(s − t)/Σc
  const double den = 4.0 + 2.0 * 0.1;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(tape.grad(v)(i, j), 2.0 * w(i, j) * (scores(i, j) - target(i, j)) / den, 1e-15);
    }
  }
}

TEST(PairTargets, SymmetricGroundTruth) {
  const Scene s = ownerrel::test::two_wheel_scene();
  const Matrix t = pair_targets(s);
  EXPECT_EQ(t, (Matrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}));
  const Scene f = ownerrel::test::fixture_scene();
  const Matrix tf = pair_targets(f);
  EXPECT_EQ(tf(2, 3), 0.0);
  EXPECT_EQ(tf(4, 3), 1.0);
  EXPECT_EQ(tf(3, 4), 1.0);
}

TEST(LossWeights, PositivesNegativesAndDrop) {
  const Scene s = ownerrel::test::fixture_scene();
  const Matrix t = pair_targets(s);
  const auto mask = candidate_mask(s, {});
  const Matrix w = loss_weights(t, mask, 0.1, 0.0, nullptr);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double expect = !mask[i * 5 + j] ? 0.0 : (t(i, j) > 0 ? 1.0 : 0.1);
      EXPECT_EQ(w(i, j), expect);
    }
  }
  Rng rng(1);
  const Matrix dropped = loss_weights(t, mask, 0.1, 1.0, &rng);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(dropped(i, j), t(i, j) > 0 && mask[i * 5 + j] ? 1.0 : 0.0);
  }
  EXPECT_EQ(dropped, dropped.transposed());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.epochs = 0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.momentum = 1.0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.batch_size = 0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.neg_drop_ratio = 2.0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.grad_clip = -1.0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
}

TEST(Train, ZeroLearningRateKeepsInitialParameters) {
  const auto scenes = easy_scenes(6, 1);
  const PriorModel priors = fit_priors(scenes, {});
  TrainConfig c;
  c.epochs = 2;
  c.learning_rate = 0.0;
  c.model = small_model();
  c.seed = 9;
  const auto r = train(scenes, priors, c);
  EXPECT_TRUE(same_params(r.model, ModelParams::init(c.model, 9)));
  ASSERT_EQ(r.epoch_loss.size(), 2u);
  EXPECT_NEAR(r.epoch_loss[0], r.epoch_loss[1], 1e-12);  // shuffled summation order
}

TEST(Train, DeterministicForFixedSeed) {
  const auto scenes = easy_scenes(10, 2);
  const PriorModel priors = fit_priors(scenes, {});
  TrainConfig c;
  c.epochs = 2;
  c.model = small_model();
  c.neg_drop_ratio = 0.3;
  c.seed = 4;
  std::vector<std::size_t> seen;
  const auto a = train(scenes, priors, c, [&](std::size_t e, double) { seen.push_back(e); });
  const auto b = train(scenes, priors, c);
  EXPECT_TRUE(same_params(a.model, b.model));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));
  c.seed = 5;
  EXPECT_FALSE(same_params(a.model, train(scenes, priors, c).model));
}

TEST(Train, DivergenceIsReported) {
  const auto scenes = easy_scenes(8, 3);
  const PriorModel priors = fit_priors(scenes, {});
  TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 1e300;
  c.grad_clip = 0.0;
  c.model = small_model();
  expect_error(ErrorCode::kTrainingDiverged, [&] { train(scenes, priors, c); });
}

TEST(Train, LossFallsOnEasyScenes) {
  const auto scenes = easy_scenes(200, 4);
  const PriorModel priors = fit_priors(scenes, {});
  TrainConfig c;
  c.epochs = 20;
  c.seed = 1;
  const auto r = train(scenes, priors, c);
  ASSERT_EQ(r.epoch_loss.size(), 20u);
  EXPECT_LT(r.epoch_loss[19], 0.5 * r.epoch_loss[0]);
}

TEST(Evaluate, OracleScoresOneAndLogicIsReported) {
  GenConfig g;
  g.scene_count = 60;
  g.seed = 5;
  g.ambiguity_rate = 0.5;
  const auto scenes = generate_dataset(g);
  const PriorModel priors = fit_priors(scenes, {});
  const auto split = split_easy_hard(scenes, 1);
  OraclePredictor oracle;
  LogicPredictor logic(priors);
  const std::vector<const PairPredictor*> ps{&oracle, &logic};
  const std::vector<NamedSplit> splits{{"easy", split.easy}, {"hard", split.hard}, {"mixed", split.mixed}};
  const auto rows = evaluate(ps, splits);
  EXPECT_EQ(rows.size(), 2u * 3u * 3u);
  for (const auto& row : rows) {
    if (row.method == "oracle") EXPECT_EQ(row.accuracy, 1.0) << row.split << " " << row.kind;
    EXPECT_GE(row.accuracy, 0.0);
    EXPECT_LE(row.accuracy, 1.0);
    EXPECT_GT(row.scenes, 0u);
  }
  const MetricRow* hard = find_metric(rows, "logic", "hard", "combined");
  ASSERT_NE(hard, nullptr);
  EXPECT_EQ(find_metric(rows, "logic", "nowhere", "combined"), nullptr);

  std::ostringstream table;
  write_metrics_table(table, rows);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')),
            "method   split    kind            accuracy  scenes");
  EXPECT_NE(table.str().find("oracle   easy     combined           1.000"), std::string::npos);

  std::ostringstream js;
  write_metrics_json(js, rows);
  const auto parsed = nlohmann::json::parse(js.str());
  ASSERT_TRUE(parsed.is_array());
  EXPECT_EQ(parsed.size(), rows.size());
  EXPECT_EQ(parsed[0]["method"], "oracle");

  const std::vector<NamedSplit> empty{{"none", std::span<const Scene>{}}};
  expect_error(ErrorCode::kPartition, [&] { evaluate(ps, empty); });
}

TEST(LoadPredictor, OracleAndGcnCheckpoints) {
  const PriorModel priors{{{1.0}, {0.0}, {1.0}}, {{1.0}, {0.0}, {1.0}}};
  std::stringstream oracle_ck;
  save_oracle_checkpoint(oracle_ck);
  const auto oracle = load_predictor(oracle_ck, priors);
  EXPECT_EQ(oracle->name(), "oracle");
  const Scene s = ownerrel::test::two_wheel_scene();
  EXPECT_EQ(pair_accuracy(oracle->predict(s), s).combined(), 1.0);

  std::stringstream gcn_ck;
  save_model(gcn_ck, ModelParams::init(small_model(), 1));
  const auto gcn = load_predictor(gcn_ck, priors);
  EXPECT_EQ(gcn->name(), "gcn");
  for (const auto& p : gcn->predict(s)) EXPECT_GT(p.score, 0.5);

  std::stringstream junk("ownerrel-checkpoint 1\nmeta kind mystery\nend\n");
  expect_error(ErrorCode::kFormat, [&] { load_predictor(junk, priors); });
}
