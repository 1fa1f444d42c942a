#include "ownerrel/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "ownerrel/error.hpp"

namespace ownerrel {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid-dimension";
    case ErrorCode::kInvalidBox: return "invalid-box";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDegenerateVector: return "degenerate-vector";
    case ErrorCode::kUnsupportedOp: return "unsupported-op";
    case ErrorCode::kNormalization: return "normalization";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kGeneration: return "generation";
    case ErrorCode::kPartition: return "partition";
    case ErrorCode::kUndefinedLoss: return "undefined-loss";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kRender: return "render";
  }
  return "unknown";
}

const char* to_string(ObjectClass c) {
  return c == ObjectClass::kVehicle ? "vehicle" : "wheel";
}

ObjectClass parse_object_class(const std::string& s) {
  if (s == "vehicle") return ObjectClass::kVehicle;
  if (s == "wheel") return ObjectClass::kWheel;
  fail(ErrorCode::kFormat, "unknown object class '" + s + "'");
}

WheelPair make_wheel_pair(ObjectId a, ObjectId b) {
  return a < b ? WheelPair{a, b} : WheelPair{b, a};
}

std::size_t Scene::vehicle_count() const {
  return static_cast<std::size_t>(
      std::count_if(boxes.begin(), boxes.end(), [](const auto& b) { return b.is_vehicle(); }));
}

std::size_t Scene::wheel_count() const { return boxes.size() - vehicle_count(); }

std::optional<std::size_t> Scene::index_of(ObjectId id) const {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].id == id) return i;
  }
  return std::nullopt;
}

const BoundingBox& Scene::box(ObjectId id) const {
  auto idx = index_of(id);
  if (!idx) fail(ErrorCode::kLookup, "scene " + std::to_string(this->id) + ": unknown object id " + std::to_string(id));
  return boxes[*idx];
}

void Scene::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) {
    fail(ErrorCode::kInvalidDimension, "scene " + std::to_string(id) + ": non-positive dimensions");
  }
  std::set<ObjectId> seen;
  for (const auto& b : boxes) {
    if (b.id < 0 || !seen.insert(b.id).second) {
      fail(ErrorCode::kInvalidBox, "scene " + std::to_string(id) + ": duplicate or negative id " + std::to_string(b.id));
    }
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
      fail(ErrorCode::kInvalidBox, "scene " + std::to_string(id) + ": empty box " + std::to_string(b.id));
    }
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > width || b.y_max > height) {
      fail(ErrorCode::kInvalidBox, "scene " + std::to_string(id) + ": box " + std::to_string(b.id) + " outside frame");
    }
  }
  for (const auto& [wheel, vehicle] : gt_wheel_vehicle) {
    if (!box(wheel).is_wheel() || !box(vehicle).is_vehicle()) {
      fail(ErrorCode::kLookup, "scene " + std::to_string(id) + ": wheel-vehicle pair with wrong classes");
    }
  }
  for (const auto& [a, b] : gt_wheel_wheel) {
    if (a == b || !box(a).is_wheel() || !box(b).is_wheel()) {
      fail(ErrorCode::kLookup, "scene " + std::to_string(id) + ": wheel-wheel pair with wrong classes");
    }
  }
}

double normalized_distance(const BoundingBox& a, const BoundingBox& b, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) fail(ErrorCode::kInvalidDimension, "normalized_distance: non-positive image size");
  const Point ca = a.center();
  const Point cb = b.center();
  const double dx = ca.x / w - cb.x / w;
  const double dy = ca.y / h - cb.y / h;
  return std::sqrt(dx * dx + dy * dy);
}

double distance_ratio(double d, const BoundingBox& b, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) fail(ErrorCode::kInvalidDimension, "distance_ratio: non-positive image size");
  if (d < 0.0) fail(ErrorCode::kDomain, "distance_ratio: negative distance");
  const double size = b.width() / w + b.height() / h;
  if (!(b.width() >= 0.0) || !(b.height() >= 0.0) || !(size > 0.0)) {
    fail(ErrorCode::kInvalidBox, "distance_ratio: degenerate box " + std::to_string(b.id));
  }
  return 2.0 * d / size;
}

double log_ratio(double ratio) {
  if (!(ratio > 0.0)) fail(ErrorCode::kDomain, "log_ratio: ratio must be positive");
  return std::log(ratio);
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double containment(const BoundingBox& inner, const BoundingBox& outer) {
  const double area = inner.area();
  if (area <= 0.0) return 0.0;
  return std::clamp(intersection_area(inner, outer) / area, 0.0, 1.0);
}

std::pair<const BoundingBox*, const BoundingBox*> rear_front(const BoundingBox& a,
                                                             const BoundingBox& b) {
  const double xa = a.center().x;
  const double xb = b.center().x;
  if (xa > xb || (xa == xb && a.id > b.id)) return {&a, &b};
  return {&b, &a};
}

std::optional<double> pair_log_ratio(const BoundingBox& a, const BoundingBox& b,
                                     double scene_w, double scene_h) {
  const double d = normalized_distance(a, b, scene_w, scene_h);
  if (d <= 0.0) return std::nullopt;
  return log_ratio(distance_ratio(d, b, scene_w, scene_h));
}

}  // namespace ownerrel
