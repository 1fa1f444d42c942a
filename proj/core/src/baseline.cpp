#include "ownerrel/baseline.hpp"

#include <algorithm>
#include <map>

namespace ownerrel {

std::vector<PairPrediction> logic_predict(const Scene& scene, const PriorModel& /*priors*/) {
  std::vector<PairPrediction> out;
  std::map<ObjectId, std::vector<const BoundingBox*>> assigned;  // vehicle -> wheels

  for (const auto& wheel : scene.boxes) {
    if (!wheel.is_wheel()) continue;
    std::vector<const BoundingBox*> candidates;
    for (const auto& v : scene.boxes) {
      if (v.is_vehicle() && containment(wheel, v) >= kLogicContainment) candidates.push_back(&v);
    }
    if (candidates.empty()) {
      for (const auto& v : scene.boxes) {
        if (v.is_vehicle() && iou(wheel, v) > 0.0) candidates.push_back(&v);
      }
    }
    const BoundingBox* winner = nullptr;
    double best = 0.0;
    for (const BoundingBox* v : candidates) {
      const double d = normalized_distance(*v, wheel, scene.width, scene.height);
      const double r = distance_ratio(d, wheel, scene.width, scene.height);
      if (!winner || r < best || (r == best && v->id < winner->id)) {
        winner = v;
        best = r;
      }
    }
    if (!winner) continue;
    out.push_back({wheel.id, winner->id, PairKind::kWheelVehicle, 1.0});
    assigned[winner->id].push_back(&wheel);
  }

  for (auto& [vehicle, wheels] : assigned) {
    std::sort(wheels.begin(), wheels.end(), [](const BoundingBox* a, const BoundingBox* b) {
      const double xa = a->center().x;
      const double xb = b->center().x;
      return xa < xb || (xa == xb && a->id < b->id);
    });
    for (std::size_t k = 0; k + 1 < wheels.size(); ++k) {
      const WheelPair p = make_wheel_pair(wheels[k]->id, wheels[k + 1]->id);
      out.push_back({p.first, p.second, PairKind::kWheelWheel, 1.0});
    }
  }

  std::sort(out.begin(), out.end(), [](const PairPrediction& a, const PairPrediction& b) {
    return std::tie(a.kind, a.subject, a.object) < std::tie(b.kind, b.subject, b.object);
  });
  return out;
}

}  // namespace ownerrel
