#include "ownerrel/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "ownerrel/error.hpp"
#include "ownerrel/nn.hpp"

namespace ownerrel {

void GenConfig::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) fail(ErrorCode::kInvalidParameter, "GenConfig: image size must be positive");
  if (min_vehicles == 0 || min_vehicles > max_vehicles) {
    fail(ErrorCode::kInvalidParameter, "GenConfig: vehicles-per-scene range must be non-empty and start at 1 or more");
  }
  if (!(ambiguity_rate >= 0.0 && ambiguity_rate <= 1.0)) fail(ErrorCode::kInvalidParameter, "GenConfig: ambiguity rate outside [0, 1]");
  if (!(noise >= 0.0)) fail(ErrorCode::kInvalidParameter, "GenConfig: negative noise scale");
  double total = 0.0;
  for (double w : wheel_count_weights) {
    if (!(w >= 0.0)) fail(ErrorCode::kInvalidParameter, "GenConfig: negative wheel-count weight");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::kInvalidParameter, "GenConfig: wheel-count weights sum to zero");
}

namespace {

// Depth rows from far (high in the frame, small) to near.
struct RowSpec {
  double ground_lo, ground_hi;  // fraction of H
  double width_lo, width_hi;    // fraction of W
};

constexpr std::array<RowSpec, 3> kRows{{
    {0.40, 0.46, 0.09, 0.13},
    {0.60, 0.68, 0.15, 0.20},
    {0.88, 0.96, 0.22, 0.28},
}};

constexpr int kMaxPlacementAttempts = 64;

struct Vehicle {
  BoundingBox box;
  std::vector<BoundingBox> wheels;  // rear/front order irrelevant here
};

std::size_t draw_wheel_count(const GenConfig& config, Rng& rng) {
  const auto& w = config.wheel_count_weights;
  const double total = w[0] + w[1] + w[2];
  const double u = rng.uniform() * total;
  if (u < w[0]) return 0;
  if (u < w[0] + w[1]) return 1;
  return 2;
}

std::optional<std::vector<Vehicle>> try_place(const GenConfig& config, Rng& rng, std::size_t count) {
  const double W = config.width;
  const double H = config.height;

  std::array<std::vector<double>, 3> widths;
  for (std::size_t v = 0; v < count; ++v) {
    const auto row = static_cast<std::size_t>(rng.uniform_int(0, 2));
    widths[row].push_back(rng.uniform(kRows[row].width_lo, kRows[row].width_hi) * W);
  }

  std::vector<Vehicle> vehicles;
  for (std::size_t row = 0; row < kRows.size(); ++row) {
    const auto& ws = widths[row];
    if (ws.empty()) continue;
    const double used = std::accumulate(ws.begin(), ws.end(), 0.0);
    const double slack = W - used;
    if (slack <= 0.0) return std::nullopt;
    std::vector<double> gaps(ws.size() + 1);
    for (double& g : gaps) g = rng.uniform(0.05, 1.0);
    const double gsum = std::accumulate(gaps.begin(), gaps.end(), 0.0);
    const double ground = rng.uniform(kRows[row].ground_lo, kRows[row].ground_hi) * H;
    double x = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      x += slack * gaps[i] / gsum;
      Vehicle v;
      const double w = ws[i];
      const double h = w * rng.uniform(0.42, 0.55);
      v.box.cls = ObjectClass::kVehicle;
      v.box.x_min = x;
      v.box.x_max = x + w;
      v.box.y_max = std::min(H, ground + rng.normal(0.0, 0.01 * H));
      v.box.y_min = v.box.y_max - h;
      if (v.box.y_min < 0.0) return std::nullopt;
      x += w;
      vehicles.push_back(std::move(v));
    }
  }

  // Every scene shows at least one wheel.
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    std::size_t total = 0;
    for (auto& v : vehicles) {
      v.wheels.clear();
      const BoundingBox& b = v.box;
      const double w = b.width();
      const double d = w * rng.uniform(0.15, 0.19);
      const double bw = d * rng.uniform(0.85, 1.0);
      const double bottom = b.y_max - rng.uniform(0.0, 0.02) * b.height();
      const double rear_cx = b.x_min + rng.uniform(0.17, 0.24) * w;
      const double front_cx = b.x_max - rng.uniform(0.17, 0.24) * w;
      const std::size_t n = draw_wheel_count(config, rng);
      const bool keep_rear = n == 2 || (n == 1 && rng.bernoulli(0.5));
      const bool keep_front = n == 2 || (n == 1 && !keep_rear);
      for (auto [keep, cx] : {std::pair{keep_rear, rear_cx}, std::pair{keep_front, front_cx}}) {
        if (!keep) continue;
        BoundingBox wheel;
        wheel.cls = ObjectClass::kWheel;
        wheel.x_min = cx - bw / 2.0;
        wheel.x_max = cx + bw / 2.0;
        wheel.y_max = bottom;
        wheel.y_min = bottom - d;
        v.wheels.push_back(wheel);
      }
      total += v.wheels.size();
    }
    if (total > 0) return vehicles;
  }
  return std::nullopt;
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  BoundingBox u = a;
  u.x_min = std::min(a.x_min, b.x_min);
  u.y_min = std::min(a.y_min, b.y_min);
  u.x_max = std::max(a.x_max, b.x_max);
  u.y_max = std::max(a.y_max, b.y_max);
  return u;
}

// Grows vehicle `self` around the closest wheel of another vehicle.
void enlarge_toward_neighbour(std::vector<Vehicle>& vehicles, std::size_t self, const GenConfig& config, Rng& rng) {
  const Point c = vehicles[self].box.center();
  const BoundingBox* target = nullptr;
  double best = INFINITY;
  for (std::size_t o = 0; o < vehicles.size(); ++o) {
    if (o == self) continue;
    for (const auto& wheel : vehicles[o].wheels) {
      const Point wc = wheel.center();
      const double d = std::hypot(wc.x - c.x, wc.y - c.y);
      if (d < best) {
        best = d;
        target = &wheel;
      }
    }
  }
  if (!target) return;
  // Union with the box mirrored about the wheel and shrunk towards it, which
  // leaves the wheel near the middle of the grown box.
  BoundingBox& box = vehicles[self].box;
  const Point wc = target->center();
  const double t = rng.uniform(0.7, 1.0);
  const double hx = box.width() / 2.0 * t;
  const double hy = box.height() / 2.0 * t;
  BoundingBox mirror;
  mirror.x_min = 2.0 * wc.x - c.x - hx;
  mirror.x_max = 2.0 * wc.x - c.x + hx;
  mirror.y_min = 2.0 * wc.y - c.y - hy;
  mirror.y_max = 2.0 * wc.y - c.y + hy;
  box = union_box(box, mirror);
  box = union_box(box, *target);
  box.x_min = std::max(0.0, box.x_min);
  box.y_min = std::max(0.0, box.y_min);
  box.x_max = std::min(config.width, box.x_max);
  box.y_max = std::min(config.height, box.y_max);
}

void jitter(BoundingBox& b, const GenConfig& config, Rng& rng) {
  if (config.noise <= 0.0) return;
  const double sx = config.noise * b.width();
  const double sy = config.noise * b.height();
  BoundingBox j = b;
  j.x_min = std::clamp(b.x_min + rng.normal(0.0, sx), 0.0, config.width);
  j.x_max = std::clamp(b.x_max + rng.normal(0.0, sx), 0.0, config.width);
  j.y_min = std::clamp(b.y_min + rng.normal(0.0, sy), 0.0, config.height);
  j.y_max = std::clamp(b.y_max + rng.normal(0.0, sy), 0.0, config.height);
  if (j.x_min < j.x_max && j.y_min < j.y_max) b = j;
}

bool has_shared_containment(const Scene& scene) {
  for (const auto& w : scene.boxes) {
    if (!w.is_wheel()) continue;
    int holders = 0;
    for (const auto& v : scene.boxes) {
      if (v.is_vehicle() && containment(w, v) >= 0.999) ++holders;
    }
    if (holders >= 2) return true;
  }
  return false;
}

}  // namespace

Scene generate_scene(const GenConfig& config, Rng& rng, std::int64_t scene_id) {
  config.validate();
  const auto count = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(config.min_vehicles),
                                                              static_cast<std::int64_t>(config.max_vehicles)));
  std::optional<std::vector<Vehicle>> placed;
  for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) placed = try_place(config, rng, count);
  if (!placed) {
    fail(ErrorCode::kGeneration, "generate_scene: could not place " + std::to_string(count) + " vehicles in a " +
                                     format_double(config.width) + "x" + format_double(config.height) + " frame");
  }
  std::vector<Vehicle>& vehicles = *placed;

  // Jitter, then pull each wheel back inside its owner by translation.
  for (auto& v : vehicles) {
    jitter(v.box, config, rng);
    for (auto& wheel : v.wheels) {
      jitter(wheel, config, rng);
      const double dx = std::max(0.0, v.box.x_min - wheel.x_min) - std::max(0.0, wheel.x_max - v.box.x_max);
      const double dy = std::max(0.0, v.box.y_min - wheel.y_min) - std::max(0.0, wheel.y_max - v.box.y_max);
      wheel.x_min += dx;
      wheel.x_max += dx;
      wheel.y_min += dy;
      wheel.y_max += dy;
    }
  }

  std::vector<std::size_t> order(vehicles.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const bool ambiguity_on = vehicles.size() >= config.ambiguity_min_vehicles;
  for (std::size_t v : order) {
    if (rng.bernoulli(config.ambiguity_rate) && ambiguity_on) enlarge_toward_neighbour(vehicles, v, config, rng);
  }

  // Flatten, shuffle, then assign ids by position.
  struct Entry {
    BoundingBox box;
    std::size_t vehicle;
    std::size_t slot;  // 0 vehicle, 1.. wheels
  };
  std::vector<Entry> entries;
  for (std::size_t v = 0; v < vehicles.size(); ++v) {
    entries.push_back({vehicles[v].box, v, 0});
    for (std::size_t k = 0; k < vehicles[v].wheels.size(); ++k) entries.push_back({vehicles[v].wheels[k], v, k + 1});
  }
  rng.shuffle(entries);

  Scene scene;
  scene.id = scene_id;
  scene.width = config.width;
  scene.height = config.height;
  std::vector<ObjectId> vehicle_id(vehicles.size());
  std::vector<std::vector<ObjectId>> wheel_ids(vehicles.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    BoundingBox b = entries[i].box;
    b.id = static_cast<ObjectId>(i);
    scene.boxes.push_back(b);
    if (entries[i].slot == 0) {
      vehicle_id[entries[i].vehicle] = b.id;
    } else {
      wheel_ids[entries[i].vehicle].push_back(b.id);
    }
  }
  for (std::size_t v = 0; v < vehicles.size(); ++v) {
    for (ObjectId w : wheel_ids[v]) scene.gt_wheel_vehicle[w] = vehicle_id[v];
    if (wheel_ids[v].size() == 2) scene.gt_wheel_wheel.insert(make_wheel_pair(wheel_ids[v][0], wheel_ids[v][1]));
  }
  scene.ambiguous_containment = has_shared_containment(scene);
  scene.validate();
  return scene;
}

std::vector<Scene> generate_dataset(const GenConfig& config, GenStats* stats) {
  config.validate();
  Rng root(config.seed);
  std::vector<Scene> scenes;
  scenes.reserve(config.scene_count);
  for (std::size_t i = 0; i < config.scene_count; ++i) {
    Rng rng = root.split(i);
    scenes.push_back(generate_scene(config, rng, static_cast<std::int64_t>(i)));
    if (stats) {
      ++stats->scenes;
      stats->wheel_vehicle_pairs += scenes.back().gt_wheel_vehicle.size();
      stats->wheel_wheel_pairs += scenes.back().gt_wheel_wheel.size();
      stats->ambiguous_scenes += scenes.back().ambiguous_containment ? 1 : 0;
    }
  }
  return scenes;
}

namespace {

// Fraction of each of the 56 cells along one axis covered by [lo, hi], the
// cells spanning [origin, origin + extent].
std::array<double, kInputSide> axis_coverage(double lo, double hi, double origin, double extent) {
  std::array<double, kInputSide> cov{};
  const double cell = extent / static_cast<double>(kInputSide);
  for (std::size_t k = 0; k < kInputSide; ++k) {
    const double c0 = origin + cell * static_cast<double>(k);
    const double c1 = c0 + cell;
    const double overlap = std::min(hi, c1) - std::max(lo, c0);
    cov[k] = overlap > 0.0 ? std::min(1.0, overlap / cell) : 0.0;
  }
  return cov;
}

void paint(NodeInput& input, std::size_t channel, const BoundingBox& b, double intensity, double x0, double y0,
           double w, double h) {
  const auto cx = axis_coverage(b.x_min, b.x_max, x0, w);
  const auto cy = axis_coverage(b.y_min, b.y_max, y0, h);
  for (std::size_t y = 0; y < kInputSide; ++y) {
    if (cy[y] == 0.0) continue;
    for (std::size_t x = 0; x < kInputSide; ++x) {
      if (cx[x] == 0.0) continue;
      double& dst = input.at(channel, y, x);
      dst = std::max(dst, intensity * cx[x] * cy[y]);
    }
  }
}

double class_intensity(const BoundingBox& b) { return b.is_vehicle() ? kVehicleIntensity : kWheelIntensity; }

void render_view(NodeInput& input, std::size_t first_channel, const Scene& scene, const BoundingBox& focus,
                 double x0, double y0, double w, double h) {
  for (const auto& b : scene.boxes) {
    if (intersection_area(b, BoundingBox{x0, y0, x0 + w, y0 + h}) <= 0.0) continue;
    paint(input, first_channel + (b.is_vehicle() ? 0 : 1), b, class_intensity(b), x0, y0, w, h);
  }
  paint(input, first_channel + 2, focus, class_intensity(focus), x0, y0, w, h);
}

}  // namespace

NodeInput render_node_input(const Scene& scene, ObjectId object_id) {
  const BoundingBox& focus = scene.box(object_id);
  NodeInput input;
  const Point c = focus.center();
  const double x0 = std::max(0.0, c.x - focus.width() * kCropContext / 2.0);
  const double y0 = std::max(0.0, c.y - focus.height() * kCropContext / 2.0);
  const double x1 = std::min(scene.width, c.x + focus.width() * kCropContext / 2.0);
  const double y1 = std::min(scene.height, c.y + focus.height() * kCropContext / 2.0);
  render_view(input, 0, scene, focus, x0, y0, x1 - x0, y1 - y0);
  render_view(input, 3, scene, focus, 0.0, 0.0, scene.width, scene.height);
  const double quadrant[4] = {
      std::clamp(focus.x_min / scene.width, 0.0, 1.0),
      std::clamp(focus.y_min / scene.height, 0.0, 1.0),
      std::clamp(focus.x_max / scene.width, 0.0, 1.0),
      std::clamp(focus.y_max / scene.height, 0.0, 1.0),
  };
  constexpr std::size_t half = kInputSide / 2;
  for (std::size_t y = 0; y < kInputSide; ++y) {
    for (std::size_t x = 0; x < kInputSide; ++x) {
      input.at(6, y, x) = quadrant[(y >= half ? 2 : 0) + (x >= half ? 1 : 0)];
    }
  }
  return input;
}

bool is_easy(const Scene& scene) { return scene.vehicle_count() <= kEasyMaxVehicles; }

SceneSplits split_easy_hard(std::span<const Scene> scenes, std::uint64_t seed, std::size_t mixed_per_side) {
  SceneSplits out;
  for (const Scene& s : scenes) (is_easy(s) ? out.easy : out.hard).push_back(s);
  if (out.easy.empty() || out.hard.empty()) {
    fail(ErrorCode::kPartition, "split_easy_hard: need both easy and hard scenes (got " +
                                    std::to_string(out.easy.size()) + " easy, " + std::to_string(out.hard.size()) +
                                    " hard)");
  }
  if (mixed_per_side == 0) mixed_per_side = std::max<std::size_t>(1, std::min(out.easy.size(), out.hard.size()) / 2);
  if (mixed_per_side > out.easy.size() || mixed_per_side > out.hard.size()) {
    fail(ErrorCode::kPartition, "split_easy_hard: not enough scenes for a mixed split of " +
                                    std::to_string(2 * mixed_per_side));
  }
  Rng rng(seed);
  for (const auto* side : {&out.easy, &out.hard}) {
    std::vector<std::size_t> idx(side->size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(mixed_per_side);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.mixed.push_back((*side)[i]);
  }
  return out;
}

namespace {

constexpr const char* kDatasetMagic = "ownerrel-dataset";
constexpr int kDatasetVersion = 1;

}  // namespace

void write_dataset(std::ostream& out, std::span<const Scene> scenes) {
  out << kDatasetMagic << ' ' << kDatasetVersion << ' ' << scenes.size() << '\n';
  for (const Scene& s : scenes) {
    out << "scene " << s.id << ' ' << format_double(s.width) << ' ' << format_double(s.height) << ' '
        << s.boxes.size() << ' ' << s.gt_wheel_vehicle.size() << ' ' << s.gt_wheel_wheel.size() << '\n';
    for (const auto& b : s.boxes) {
      out << "box " << b.id << ' ' << to_string(b.cls) << ' ' << format_double(b.x_min) << ' '
          << format_double(b.y_min) << ' ' << format_double(b.x_max) << ' ' << format_double(b.y_max) << '\n';
    }
    for (const auto& [wheel, vehicle] : s.gt_wheel_vehicle) out << "pair wv " << wheel << ' ' << vehicle << '\n';
    for (const auto& [a, b] : s.gt_wheel_wheel) out << "pair ww " << a << ' ' << b << '\n';
    out << "tag " << (is_easy(s) ? "easy" : "hard") << ' ' << (s.ambiguous_containment ? 1 : 0) << '\n';
  }
}

std::vector<Scene> read_dataset(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != kDatasetMagic) fail(ErrorCode::kFormat, "dataset: missing header");
  if (version != kDatasetVersion) fail(ErrorCode::kFormat, "dataset: unsupported version " + std::to_string(version));
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::string tag, w, h;
    Scene scene;
    std::size_t nboxes = 0, nwv = 0, nww = 0;
    if (!(in >> tag >> scene.id >> w >> h >> nboxes >> nwv >> nww) || tag != "scene") {
      fail(ErrorCode::kFormat, "dataset: bad scene header at scene " + std::to_string(s));
    }
    scene.width = parse_double(w);
    scene.height = parse_double(h);
    for (std::size_t i = 0; i < nboxes; ++i) {
      std::string cls, x0, y0, x1, y1;
      BoundingBox b;
      if (!(in >> tag >> b.id >> cls >> x0 >> y0 >> x1 >> y1) || tag != "box") {
        fail(ErrorCode::kFormat, "dataset: bad box line in scene " + std::to_string(scene.id));
      }
      b.cls = parse_object_class(cls);
      b.x_min = parse_double(x0);
      b.y_min = parse_double(y0);
      b.x_max = parse_double(x1);
      b.y_max = parse_double(y1);
      scene.boxes.push_back(b);
    }
    for (std::size_t i = 0; i < nwv + nww; ++i) {
      std::string kind;
      ObjectId a = 0, b = 0;
      if (!(in >> tag >> kind >> a >> b) || tag != "pair") {
        fail(ErrorCode::kFormat, "dataset: bad pair line in scene " + std::to_string(scene.id));
      }
      if (kind == "wv") {
        if (!scene.gt_wheel_vehicle.emplace(a, b).second) {
          fail(ErrorCode::kFormat, "dataset: wheel " + std::to_string(a) + " has two owners");
        }
      } else if (kind == "ww") {
        scene.gt_wheel_wheel.insert(make_wheel_pair(a, b));
      } else {
        fail(ErrorCode::kFormat, "dataset: unknown pair kind '" + kind + "'");
      }
    }
    std::string split;
    int ambiguous = 0;
    if (!(in >> tag >> split >> ambiguous) || tag != "tag" || (split != "easy" && split != "hard")) {
      fail(ErrorCode::kFormat, "dataset: bad tag line in scene " + std::to_string(scene.id));
    }
    scene.ambiguous_containment = ambiguous != 0;
    if (scene.gt_wheel_vehicle.size() != nwv || scene.gt_wheel_wheel.size() != nww) {
      fail(ErrorCode::kFormat, "dataset: pair counts disagree with header in scene " + std::to_string(scene.id));
    }
    scene.validate();
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace ownerrel
