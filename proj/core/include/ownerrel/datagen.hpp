#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ownerrel/geometry.hpp"
#include "ownerrel/random.hpp"

namespace ownerrel {

struct GenConfig {
  std::size_t scene_count = 100;
  double width = 1280.0;
  double height = 720.0;
  std::size_t min_vehicles = 1;
  std::size_t max_vehicles = 6;
  // Relative frequency of a vehicle showing 0, 1 or 2 wheels.
  std::array<double, 3> wheel_count_weights{0.05, 0.15, 0.80};
  // Per-vehicle probability of having its box grown around a neighbour's
  // wheel.
  double ambiguity_rate = 0.0;
  // Scenes with fewer vehicles than this are left unambiguous.
  std::size_t ambiguity_min_vehicles = 0;
  // Box jitter, standard deviation as a fraction of the box size.
  double noise = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// Running tally of what the generator emitted.
struct GenStats {
  std::size_t scenes = 0;
  std::size_t wheel_vehicle_pairs = 0;
  std::size_t wheel_wheel_pairs = 0;
  std::size_t ambiguous_scenes = 0;
};

// One scene from the generator's stream. Boxes are emitted in shuffled order
// with ids equal to their position.
Scene generate_scene(const GenConfig& config, Rng& rng, std::int64_t scene_id = 0);

// Scene i is drawn from its own stream split off the config seed, so a
// dataset is a pure function of the config.
std::vector<Scene> generate_dataset(const GenConfig& config, GenStats* stats = nullptr);

inline constexpr std::size_t kInputSide = 56;
inline constexpr std::size_t kInputChannels = 7;
inline constexpr std::size_t kInputSize = kInputSide * kInputSide * kInputChannels;

inline constexpr double kVehicleIntensity = 0.5;
inline constexpr double kWheelIntensity = 1.0;

// Crop window side relative to the object's box, same center, clipped to the
// frame.
inline constexpr double kCropContext = 6.0;

// 56×56×7 node input, channel-major.
//   0..2  crop around the object's box: vehicle layer, wheel layer, focus layer
//   3..5  the same three layers over the whole frame
//   6     coordinate quadrants: x_min/W, y_min/H, x_max/W, y_max/H
//         (top-left, top-right, bottom-left, bottom-right)
struct NodeInput {
  std::vector<double> data = std::vector<double>(kInputSize, 0.0);

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * kInputSide + y) * kInputSide + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * kInputSide + y) * kInputSide + x];
  }
};

NodeInput render_node_input(const Scene& scene, ObjectId object_id);

struct SceneSplits {
  std::vector<Scene> easy;
  std::vector<Scene> hard;
  std::vector<Scene> mixed;
};

inline constexpr std::size_t kEasyMaxVehicles = 3;

bool is_easy(const Scene& scene);

// Easy = at most three vehicles, hard = more. Mixed holds `mixed_per_side`
// seeded picks from each; the default takes half of the smaller side.
SceneSplits split_easy_hard(std::span<const Scene> scenes, std::uint64_t seed,
                            std::size_t mixed_per_side = 0);

void write_dataset(std::ostream& out, std::span<const Scene> scenes);
std::vector<Scene> read_dataset(std::istream& in);

}  // namespace ownerrel
