#include "ownerrel/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ownerrel/error.hpp"
#include "ownerrel/nn.hpp"

namespace ownerrel {

const char* to_string(PairKind kind) {
  return kind == PairKind::kWheelVehicle ? "wheel-vehicle" : "wheel-wheel";
}

PairKind parse_pair_kind(const std::string& s) {
  if (s == "wheel-vehicle") return PairKind::kWheelVehicle;
  if (s == "wheel-wheel") return PairKind::kWheelWheel;
  fail(ErrorCode::kFormat, "unknown pair kind '" + s + "'");
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  const auto ua = l2_normalize(a);
  const auto ub = l2_normalize(b);
  for (std::size_t i = 0; i < a.size(); ++i) dot += ua[i] * ub[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<PairPrediction> score_pairs(const Matrix& embeddings, const RelGraph& graph) {
  const std::size_t n = graph.size();
  if (embeddings.rows() != n) fail(ErrorCode::kShape, "score_pairs: embeddings and graph disagree");
  std::vector<PairPrediction> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!graph.candidate(i, j)) continue;
      const NodeRef& a = graph.nodes[i];
      const NodeRef& b = graph.nodes[j];
      PairPrediction p;
      p.score = cosine_score(embeddings.row(i), embeddings.row(j));
      if (a.cls == ObjectClass::kWheel && b.cls == ObjectClass::kWheel) {
        p.kind = PairKind::kWheelWheel;
        p.subject = a.id;
        p.object = b.id;
      } else {
        p.kind = PairKind::kWheelVehicle;
        p.subject = a.cls == ObjectClass::kWheel ? a.id : b.id;
        p.object = a.cls == ObjectClass::kWheel ? b.id : a.id;
      }
      out.push_back(p);
    }
  }
  return out;
}

namespace {

bool order_key(const PairPrediction& a, const PairPrediction& b) {
  return std::tie(a.kind, a.subject, a.object) < std::tie(b.kind, b.subject, b.object);
}

}  // namespace

std::vector<PairPrediction> decide(std::span<const PairPrediction> predictions, double threshold) {
  std::vector<PairPrediction> out;
  std::map<ObjectId, PairPrediction> best_vehicle;
  for (const auto& p : predictions) {
    if (!(p.score > threshold)) continue;
    if (p.kind == PairKind::kWheelWheel) {
      out.push_back(p);
      continue;
    }
    auto [it, inserted] = best_vehicle.emplace(p.subject, p);
    if (inserted) continue;
    const PairPrediction& cur = it->second;
    if (p.score > cur.score || (p.score == cur.score && p.object < cur.object)) it->second = p;
  }
  for (const auto& [wheel, p] : best_vehicle) out.push_back(p);
  std::sort(out.begin(), out.end(), order_key);
  return out;
}

std::optional<double> PairAccuracy::wheel_vehicle() const {
  if (wv_total == 0) return std::nullopt;
  return static_cast<double>(wv_correct) / static_cast<double>(wv_total);
}

std::optional<double> PairAccuracy::wheel_wheel() const {
  if (ww_total == 0) return std::nullopt;
  return static_cast<double>(ww_correct) / static_cast<double>(ww_total);
}

std::optional<double> PairAccuracy::combined() const {
  const std::size_t total = wv_total + ww_total;
  if (total == 0) return std::nullopt;
  return static_cast<double>(wv_correct + ww_correct) / static_cast<double>(total);
}

PairAccuracy pair_accuracy(std::span<const PairPrediction> retained, const Scene& scene, const GraphOptions& options) {
  std::set<std::pair<ObjectId, ObjectId>> predicted_wv;
  std::set<WheelPair> predicted_ww;
  for (const auto& p : retained) {
    if (p.kind == PairKind::kWheelVehicle) {
      predicted_wv.emplace(p.subject, p.object);
    } else {
      predicted_ww.insert(make_wheel_pair(p.subject, p.object));
    }
  }
  const auto mask = candidate_mask(scene, options);
  const std::size_t n = scene.boxes.size();
  PairAccuracy acc;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!mask[i * n + j]) continue;
      const BoundingBox& a = scene.boxes[i];
      const BoundingBox& b = scene.boxes[j];
      if (a.is_wheel() && b.is_wheel()) {
        const WheelPair key = make_wheel_pair(a.id, b.id);
        const bool truth = scene.gt_wheel_wheel.contains(key);
        const bool said = predicted_ww.contains(key);
        ++acc.ww_total;
        if (truth == said) ++acc.ww_correct;
      } else {
        const ObjectId wheel = a.is_wheel() ? a.id : b.id;
        const ObjectId vehicle = a.is_wheel() ? b.id : a.id;
        auto it = scene.gt_wheel_vehicle.find(wheel);
        const bool truth = it != scene.gt_wheel_vehicle.end() && it->second == vehicle;
        const bool said = predicted_wv.contains({wheel, vehicle});
        ++acc.wv_total;
        if (truth == said) ++acc.wv_correct;
      }
    }
  }
  return acc;
}

void write_predictions(std::ostream& out, std::int64_t scene_id, std::span<const PairPrediction> pairs) {
  char score[32];
  for (const auto& p : pairs) {
    std::snprintf(score, sizeof(score), "%.6f", p.score);
    out << scene_id << ' ' << to_string(p.kind) << ' ' << p.subject << ' ' << p.object << ' ' << score << '\n';
  }
}

std::vector<ScenePredictions> read_predictions(std::istream& in) {
  std::vector<ScenePredictions> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t scene = 0;
    std::string kind, score;
    PairPrediction p;
    if (!(ss >> scene >> kind >> p.subject >> p.object >> score)) {
      fail(ErrorCode::kFormat, "predictions: malformed line " + std::to_string(lineno));
    }
    p.kind = parse_pair_kind(kind);
    p.score = parse_double(score);
    if (out.empty() || out.back().scene_id != scene) out.push_back({scene, {}});
    out.back().pairs.push_back(p);
  }
  return out;
}

}  // namespace ownerrel
