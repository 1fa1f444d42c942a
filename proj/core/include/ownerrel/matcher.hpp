#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ownerrel/geometry.hpp"
#include "ownerrel/matrix.hpp"
#include "ownerrel/relgraph.hpp"

namespace ownerrel {

enum class PairKind { kWheelVehicle, kWheelWheel };

const char* to_string(PairKind kind);
PairKind parse_pair_kind(const std::string& s);

// Wheel-vehicle: subject = wheel, object = vehicle.
// Wheel-wheel: subject and object are the two wheels in node order.
struct PairPrediction {
  ObjectId subject = 0;
  ObjectId object = 0;
  PairKind kind = PairKind::kWheelVehicle;
  double score = 0.0;

  friend bool operator==(const PairPrediction&, const PairPrediction&) = default;
};

inline constexpr double kDefaultThreshold = 0.5;

// Dot product of unit vectors; 0 when either vector is zero.
double cosine_score(std::span<const double> a, std::span<const double> b);

// One prediction per unordered mask-true pair.
std::vector<PairPrediction> score_pairs(const Matrix& embeddings, const RelGraph& graph);

// Strictly-above-threshold pairs, with at most one vehicle per wheel (highest
// score, ties to the lower vehicle id). Sorted by kind, subject, object.
std::vector<PairPrediction> decide(std::span<const PairPrediction> predictions, double threshold = kDefaultThreshold);

struct PairAccuracy {
  std::size_t wv_correct = 0;
  std::size_t wv_total = 0;
  std::size_t ww_correct = 0;
  std::size_t ww_total = 0;

  // nullopt when there are no candidates of the requested kind.
  std::optional<double> wheel_vehicle() const;
  std::optional<double> wheel_wheel() const;
  std::optional<double> combined() const;
};

// Binary decision accuracy over every candidate pair of the scene, with
// ground-truth pairs as positives.
PairAccuracy pair_accuracy(std::span<const PairPrediction> retained, const Scene& scene,
                           const GraphOptions& options = {});

// One line per pair: "<scene> <kind> <subject> <object> <score>".
void write_predictions(std::ostream& out, std::int64_t scene_id, std::span<const PairPrediction> pairs);

struct ScenePredictions {
  std::int64_t scene_id = 0;
  std::vector<PairPrediction> pairs;
};
std::vector<ScenePredictions> read_predictions(std::istream& in);

}  // namespace ownerrel
