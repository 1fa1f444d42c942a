#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "ownerrel/baseline.hpp"
#include "ownerrel/datagen.hpp"
#include "ownerrel/matcher.hpp"
#include "test_support.hpp"

using namespace ownerrel;
using ownerrel::test::expect_error;

namespace {

GenConfig config_with(std::size_t n, std::uint64_t seed, double rate = 0.0) {
  GenConfig c;
  c.scene_count = n;
  c.seed = seed;
  c.ambiguity_rate = rate;
  return c;
}

const PriorModel kUnusedPriors{{{1.0}, {0.0}, {1.0}}, {{1.0}, {0.0}, {1.0}}};

}  // namespace

TEST(Generate, CountsAndOwnership) {
  GenConfig config = config_with(200, 1, 0.3);
  config.min_vehicles = 2;
  config.max_vehicles = 5;
  GenStats stats;
  const auto scenes = generate_dataset(config, &stats);
  ASSERT_EQ(scenes.size(), 200u);
  EXPECT_EQ(stats.scenes, 200u);
  std::size_t wv = 0, ww = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    EXPECT_EQ(s.id, static_cast<std::int64_t>(i));
    EXPECT_GE(s.vehicle_count(), 2u);
    EXPECT_LE(s.vehicle_count(), 5u);
    EXPECT_GE(s.wheel_count(), 1u);
    EXPECT_EQ(s.gt_wheel_vehicle.size(), s.wheel_count());
    for (std::size_t k = 0; k < s.boxes.size(); ++k) {
      const auto& b = s.boxes[k];
      EXPECT_EQ(b.id, static_cast<ObjectId>(k));
      EXPECT_GE(b.x_min, 0.0);
      EXPECT_GE(b.y_min, 0.0);
      EXPECT_LE(b.x_max, s.width);
      EXPECT_LE(b.y_max, s.height);
    }
    std::map<ObjectId, int> per_vehicle;
    for (const auto& [wheel, vehicle] : s.gt_wheel_vehicle) {
      EXPECT_TRUE(s.box(wheel).is_wheel());
      EXPECT_TRUE(s.box(vehicle).is_vehicle());
      EXPECT_GE(containment(s.box(wheel), s.box(vehicle)), 0.999);
      ++per_vehicle[vehicle];
    }
    for (const auto& [v, n] : per_vehicle) EXPECT_LE(n, 2);
    for (const auto& [a, b] : s.gt_wheel_wheel) {
      EXPECT_LT(a, b);
      EXPECT_EQ(s.gt_wheel_vehicle.at(a), s.gt_wheel_vehicle.at(b));
    }
    std::size_t couples = 0;
    for (const auto& [v, n] : per_vehicle) couples += n == 2 ? 1 : 0;
    EXPECT_EQ(s.gt_wheel_wheel.size(), couples);
    wv += s.gt_wheel_vehicle.size();
    ww += s.gt_wheel_wheel.size();
  }
  EXPECT_EQ(stats.wheel_vehicle_pairs, wv);
  EXPECT_EQ(stats.wheel_wheel_pairs, ww);
}

TEST(Generate, DeterministicAndPrefixStable) {
  const auto a = generate_dataset(config_with(30, 5, 0.5));
  EXPECT_EQ(a, generate_dataset(config_with(30, 5, 0.5)));
  const auto prefix = generate_dataset(config_with(10, 5, 0.5));
  for (std::size_t i = 0; i < prefix.size(); ++i) EXPECT_EQ(prefix[i], a[i]);
  EXPECT_NE(a, generate_dataset(config_with(30, 6, 0.5)));
}

TEST(Generate, FullAmbiguityPutsAForeignWheelInEveryVehicle) {
  GenConfig config = config_with(150, 2, 1.0);
  config.min_vehicles = 2;
  std::size_t checked = 0;
  for (const Scene& s : generate_dataset(config)) {
    std::set<ObjectId> owners;
    for (const auto& [w, v] : s.gt_wheel_vehicle) owners.insert(v);
    for (const auto& v : s.boxes) {
      if (!v.is_vehicle()) continue;
      // needs some other vehicle's wheel to grow towards
      bool foreign_exists = false, foreign_inside = false;
      for (const auto& [w, owner] : s.gt_wheel_vehicle) {
        if (owner == v.id) continue;
        foreign_exists = true;
        if (containment(s.box(w), v) == 1.0) foreign_inside = true;
      }
      if (!foreign_exists) continue;
      EXPECT_TRUE(foreign_inside) << "scene " << s.id << " vehicle " << v.id;
      ++checked;
    }
    // any wheel now sits in two vehicles' boxes
    EXPECT_TRUE(s.ambiguous_containment || owners.size() < 2 || s.vehicle_count() < 2) << "scene " << s.id;
  }
  EXPECT_GT(checked, 300u);
}

TEST(Generate, AmbiguityMinVehiclesLeavesSmallScenesAlone) {
  GenConfig clean = config_with(120, 3, 0.0);
  GenConfig gated = config_with(120, 3, 1.0);
  gated.ambiguity_min_vehicles = 4;
  const auto a = generate_dataset(clean);
  const auto b = generate_dataset(gated);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].vehicle_count() < 4) EXPECT_EQ(a[i], b[i]) << "scene " << i;
  }
}

TEST(Generate, AmbiguityHurtsTheLogicModel) {
  auto accuracy = [](double rate) {
    GenConfig c = config_with(200, 4, rate);
    c.min_vehicles = 4;
    std::size_t correct = 0, total = 0;
    for (const Scene& s : generate_dataset(c)) {
      const auto acc = pair_accuracy(logic_predict(s, kUnusedPriors), s);
      correct += acc.wv_correct;
      total += acc.wv_total;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
  };
  const double clean = accuracy(0.0);
  const double ambiguous = accuracy(1.0);
  EXPECT_GT(clean, 0.95);
  EXPECT_LT(ambiguous, clean - 0.1);
}

TEST(GenConfig, Validation) {
  GenConfig c;
  c.min_vehicles = 0;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.min_vehicles = 5;
  c.max_vehicles = 4;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.ambiguity_rate = 1.5;
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.wheel_count_weights = {0, 0, 0};
  expect_error(ErrorCode::kInvalidParameter, [&] { c.validate(); });
  c = {};
  c.width = 100;
  c.height = 50;
  c.min_vehicles = c.max_vehicles = 40;
  Rng rng(1);
  expect_error(ErrorCode::kGeneration, [&] { generate_scene(c, rng); });
}

TEST(RenderNodeInput, CropAndFrameGolden) {
  Scene s;
  s.width = 560;
  s.height = 560;
  s.boxes = {ownerrel::test::box(280, 0, 308, 28, ObjectClass::kVehicle, 0)};
  const NodeInput in = render_node_input(s, 0);
  // crop window (210, 0)–(378, 98) after clipping: 3 px columns, 1.75 px rows;
  // the box's vertical edges cut columns 23 and 32 to two thirds
  EXPECT_NEAR(in.at(0, 5, 23), 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_EQ(in.at(0, 5, 24), 0.5);
  EXPECT_NEAR(in.at(0, 15, 32), 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_EQ(in.at(0, 15, 31), 0.5);
  EXPECT_EQ(in.at(0, 5, 22), 0.0);
  EXPECT_EQ(in.at(0, 5, 33), 0.0);
  EXPECT_EQ(in.at(0, 16, 25), 0.0);
  // focus layer repeats the object; no wheels; frame view uses 10 px cells
  for (std::size_t y = 0; y < kInputSide; ++y) {
    for (std::size_t x = 0; x < kInputSide; ++x) {
      EXPECT_EQ(in.at(2, y, x), in.at(0, y, x));
      EXPECT_EQ(in.at(1, y, x), 0.0);
      const double fx = x == 28 || x == 29 ? 1.0 : x == 30 ? 0.8 : 0.0;
      const double fy = y < 2 ? 1.0 : y == 2 ? 0.8 : 0.0;
      EXPECT_NEAR(in.at(3, y, x), 0.5 * fx * fy, 1e-12) << y << "," << x;
    }
  }
  // quadrants x_min/W, y_min/H, x_max/W, y_max/H
  EXPECT_EQ(in.at(6, 0, 0), 0.5);
  EXPECT_EQ(in.at(6, 0, 55), 0.0);
  EXPECT_EQ(in.at(6, 55, 0), 0.55);
  EXPECT_EQ(in.at(6, 55, 55), 0.05);
}

TEST(RenderNodeInput, FullFrameObjectCropEqualsContext) {
  Scene s;
  s.width = 640;
  s.height = 480;
  s.boxes = {ownerrel::test::box(0, 0, 640, 480, ObjectClass::kVehicle, 0),
             ownerrel::test::box(100, 300, 180, 380, ObjectClass::kWheel, 1)};
  const NodeInput in = render_node_input(s, 0);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < kInputSide; ++y) {
      for (std::size_t x = 0; x < kInputSide; ++x) EXPECT_EQ(in.at(c, y, x), in.at(c + 3, y, x));
    }
  }
}

TEST(RenderNodeInput, WheelsUseTheirOwnLayerAndQuadrantsAreDistinct) {
  Scene s;
  s.width = 560;
  s.height = 400;
  s.boxes = {ownerrel::test::box(56, 80, 280, 300, ObjectClass::kVehicle, 0),
             ownerrel::test::box(100, 260, 140, 300, ObjectClass::kWheel, 1)};
  const NodeInput in = render_node_input(s, 1);
  EXPECT_DOUBLE_EQ(in.at(6, 0, 0), 100.0 / 560.0);
  EXPECT_DOUBLE_EQ(in.at(6, 0, 55), 260.0 / 400.0);
  EXPECT_DOUBLE_EQ(in.at(6, 55, 0), 140.0 / 560.0);
  EXPECT_DOUBLE_EQ(in.at(6, 55, 55), 300.0 / 400.0);
  // crop centered on the wheel: wheel fills the middle third
  EXPECT_NEAR(in.at(1, 28, 28), 1.0, 1e-12);
  EXPECT_NEAR(in.at(2, 28, 28), 1.0, 1e-12);
  EXPECT_NEAR(in.at(0, 28, 28), 0.5, 1e-12);
  EXPECT_EQ(in.at(2, 5, 5), 0.0);
}

TEST(RenderNodeInput, GeneratedValuesInUnitRange) {
  const auto scenes = generate_dataset(config_with(10, 7, 0.5));
  for (const Scene& s : scenes) {
    for (const auto& b : s.boxes) {
      for (double v : render_node_input(s, b.id).data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
  expect_error(ErrorCode::kLookup, [&] { render_node_input(scenes[0], 999); });
}

TEST(Split, EasyHardMixed) {
  const auto scenes = generate_dataset(config_with(100, 8, 0.0));
  const auto sp = split_easy_hard(scenes, 3);
  EXPECT_EQ(sp.easy.size() + sp.hard.size(), scenes.size());
  for (const auto& s : sp.easy) EXPECT_LE(s.vehicle_count(), 3u);
  for (const auto& s : sp.hard) EXPECT_GT(s.vehicle_count(), 3u);
  const std::size_t per_side = std::min(sp.easy.size(), sp.hard.size()) / 2;
  ASSERT_EQ(sp.mixed.size(), 2 * per_side);
  std::size_t easy_in_mixed = 0;
  std::set<std::int64_t> ids;
  for (const auto& s : sp.mixed) {
    easy_in_mixed += is_easy(s) ? 1 : 0;
    ids.insert(s.id);
  }
  EXPECT_EQ(easy_in_mixed, per_side);
  EXPECT_EQ(ids.size(), sp.mixed.size());
  EXPECT_EQ(split_easy_hard(scenes, 3).mixed, sp.mixed);
  EXPECT_EQ(split_easy_hard(scenes, 3, 4).mixed.size(), 8u);
  expect_error(ErrorCode::kPartition, [&] { split_easy_hard(scenes, 3, 1000); });
  const std::vector<Scene> only_easy(sp.easy.begin(), sp.easy.end());
  expect_error(ErrorCode::kPartition, [&] { split_easy_hard(only_easy, 3); });
}

TEST(DatasetFile, RoundTripIsBitExact) {
  const auto scenes = generate_dataset(config_with(25, 9, 0.5));
  std::ostringstream first;
  write_dataset(first, scenes);
  std::istringstream in(first.str());
  const auto back = read_dataset(in);
  EXPECT_EQ(back, scenes);
  std::ostringstream second;
  write_dataset(second, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(DatasetFile, RejectsBrokenInput) {
  std::istringstream bad_magic("something 1 0\n");
  expect_error(ErrorCode::kFormat, [&] { read_dataset(bad_magic); });
  std::istringstream bad_version("ownerrel-dataset 7 0\n");
  expect_error(ErrorCode::kFormat, [&] { read_dataset(bad_version); });
  std::istringstream two_owners(
      "ownerrel-dataset 1 1\nscene 0 100 100 3 2 0\nbox 0 vehicle 0 0 50 50\nbox 1 vehicle 50 0 100 50\n"
      "box 2 wheel 10 10 20 20\npair wv 2 0\npair wv 2 1\ntag easy 0\n");
  expect_error(ErrorCode::kFormat, [&] { read_dataset(two_owners); });
}
