#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ownerrel {

enum class ObjectClass { kVehicle, kWheel };

const char* to_string(ObjectClass c);
ObjectClass parse_object_class(const std::string& s);

using ObjectId = std::int64_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned detection box in pixel coordinates.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  ObjectClass cls = ObjectClass::kVehicle;
  ObjectId id = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  Point center() const { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }
  bool is_wheel() const { return cls == ObjectClass::kWheel; }
  bool is_vehicle() const { return cls == ObjectClass::kVehicle; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Unordered wheel couple, stored with first < second.
using WheelPair = std::pair<ObjectId, ObjectId>;
WheelPair make_wheel_pair(ObjectId a, ObjectId b);

struct Scene {
  std::int64_t id = 0;
  double width = 0.0;
  double height = 0.0;
  std::vector<BoundingBox> boxes;
  std::map<ObjectId, ObjectId> gt_wheel_vehicle;  // wheel -> owning vehicle
  std::set<WheelPair> gt_wheel_wheel;
  bool ambiguous_containment = false;

  std::size_t vehicle_count() const;
  std::size_t wheel_count() const;
  // Index into boxes, or nullopt when the id is unknown.
  std::optional<std::size_t> index_of(ObjectId id) const;
  const BoundingBox& box(ObjectId id) const;

  // Throws kInvalidBox / kInvalidDimension / kLookup on broken invariants.
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Center distance with x normalized by w and y by h.
double normalized_distance(const BoundingBox& a, const BoundingBox& b, double w, double h);

// 2d / (W_B + H_B) with the box size normalized by the scene dimensions.
double distance_ratio(double d, const BoundingBox& b, double w, double h);

double log_ratio(double ratio);

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);
// Fraction of `inner` covered by `outer`.
double containment(const BoundingBox& inner, const BoundingBox& outer);

// Rear/front orientation of a wheel couple: the rear wheel has the larger
// x-center; equal centers fall back to the larger id.
std::pair<const BoundingBox*, const BoundingBox*> rear_front(const BoundingBox& a,
                                                             const BoundingBox& b);

// Log distance ratio for an ordered (A, B) pair within a scene, or nullopt
// for coincident centers.
std::optional<double> pair_log_ratio(const BoundingBox& a, const BoundingBox& b,
                                     double scene_w, double scene_h);

}  // namespace ownerrel
