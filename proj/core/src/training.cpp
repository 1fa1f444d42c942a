#include "ownerrel/training.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ownerrel/error.hpp"

namespace ownerrel {

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidParameter, "TrainConfig: epochs must be at least 1");
  if (!(learning_rate >= 0.0)) fail(ErrorCode::kInvalidParameter, "TrainConfig: learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::kInvalidParameter, "TrainConfig: momentum must be in [0, 1)");
  if (!(neg_weight >= 0.0)) fail(ErrorCode::kInvalidParameter, "TrainConfig: negative weight must be non-negative");
  if (batch_size < 1) fail(ErrorCode::kInvalidParameter, "TrainConfig: batch size must be at least 1");
  if (!(neg_drop_ratio >= 0.0 && neg_drop_ratio <= 1.0)) {
    fail(ErrorCode::kInvalidParameter, "TrainConfig: negative drop ratio outside [0, 1]");
  }
  if (!(grad_clip >= 0.0)) fail(ErrorCode::kInvalidParameter, "TrainConfig: gradient clip must be non-negative");
  model.validate();
}

double weighted_l2_loss(const Matrix& scores, const Matrix& target, std::span<const std::uint8_t> mask,
                        double neg_weight) {
  if (!scores.same_shape(target) || mask.size() != scores.size()) {
    fail(ErrorCode::kShape, "weighted_l2_loss: scores, targets and mask must share a shape");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!mask[k]) continue;
    const double t = target.data()[k];
    const double c = t > 0.5 ? 1.0 : neg_weight;
    const double e = scores.data()[k] - t;
    num += c * e * e;
    den += c;
  }
  if (!(den > 0.0)) fail(ErrorCode::kUndefinedLoss, "weighted_l2_loss: no weighted entries under the mask");
  return num / den;
}

Tape::Var weighted_l2_loss(Tape& tape, Tape::Var scores, const Matrix& target, const Matrix& weights) {
  double den = 0.0;
  for (double c : weights.data()) den += c;
  if (!(den > 0.0)) fail(ErrorCode::kUndefinedLoss, "weighted_l2_loss: no weighted entries under the mask");
  const Tape::Var err = tape.sub(scores, tape.constant(target));
  const Tape::Var sq = tape.hadamard(err, err);
  return tape.scale(tape.sum(tape.hadamard(sq, tape.constant(weights))), 1.0 / den);
}

Matrix pair_targets(const Scene& scene) {
  const std::size_t n = scene.boxes.size();
  Matrix t(n, n);
  for (const auto& [wheel, vehicle] : scene.gt_wheel_vehicle) {
    const std::size_t i = *scene.index_of(wheel);
    const std::size_t j = *scene.index_of(vehicle);
    t(i, j) = t(j, i) = 1.0;
  }
  for (const auto& [a, b] : scene.gt_wheel_wheel) {
    const std::size_t i = *scene.index_of(a);
    const std::size_t j = *scene.index_of(b);
    t(i, j) = t(j, i) = 1.0;
  }
  return t;
}

Matrix loss_weights(const Matrix& target, std::span<const std::uint8_t> mask, double neg_weight,
                    double neg_drop_ratio, Rng* rng) {
  const std::size_t n = target.rows();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!mask[i * n + j]) continue;
      double c = 1.0;
      if (target(i, j) < 0.5) {
        c = neg_weight;
        if (neg_drop_ratio > 0.0 && rng && rng->bernoulli(neg_drop_ratio)) c = 0.0;
      }
      w(i, j) = w(j, i) = c;
    }
  }
  return w;
}

SceneLoss scene_loss_and_grad(const Scene& scene, const PriorModel& priors, const ModelParams& model,
                              const Matrix& weights, const GraphOptions& options) {
  const RelGraph graph = build_graph(scene, priors, options);
  const Matrix inputs = stack_inputs(render_scene_inputs(scene));
  Tape tape;
  const BoundParams bound = bind_parameters(tape, model);
  const ForwardTrace trace = forward_on_tape(tape, bound, graph, tape.constant_ref(inputs), model);
  const Tape::Var unit = tape.l2_normalize_rows(trace.embeddings);
  const Tape::Var scores = tape.matmul_nt(unit, unit);
  const Tape::Var loss = weighted_l2_loss(tape, scores, pair_targets(scene), weights);
  tape.backward(loss);
  SceneLoss out;
  out.loss = tape.value(loss)(0, 0);
  out.grads.reserve(bound.vars.size());
  for (Tape::Var v : bound.vars) out.grads.push_back(tape.take_grad(v));
  return out;
}

namespace {

void clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double s = max_norm / norm;
  for (Matrix& g : grads) g *= s;
}

}  // namespace

TrainResult train(std::span<const Scene> dataset, const PriorModel& priors, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) fail(ErrorCode::kInsufficientData, "train: empty dataset");
  GraphOptions options;
  options.small_object_mask = config.small_object_mask;

  TrainResult result;
  result.model = ModelParams::init(config.model, config.seed);
  SgdMomentum optimizer(config.learning_rate, config.momentum);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  // Scenes without any weighted candidate cannot contribute.
  std::vector<std::size_t> order;
  std::vector<Matrix> targets(dataset.size());
  std::vector<std::vector<std::uint8_t>> masks(dataset.size());
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    targets[s] = pair_targets(dataset[s]);
    masks[s] = candidate_mask(dataset[s], options);
    bool any = false;
    for (std::size_t k = 0; k < masks[s].size(); ++k) {
      if (masks[s][k] && (targets[s].data()[k] > 0.5 || config.neg_weight > 0.0)) any = true;
    }
    if (any) order.push_back(s);
  }
  if (order.empty()) fail(ErrorCode::kInsufficientData, "train: no scene has a weighted candidate pair");

  auto params = result.model.parameters();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Matrix> batch_grads;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t s = order[k];
        const Matrix w = loss_weights(targets[s], masks[s], config.neg_weight, config.neg_drop_ratio, &rng);
        bool any = false;
        for (double c : w.data()) any = any || c > 0.0;
        if (!any) continue;
        SceneLoss sl;
        try {
          sl = scene_loss_and_grad(dataset[s], priors, result.model, w, options);
        } catch (const Error& e) {
          // non-finite weights surface as a failed normalization in the forward pass
          if (e.code() != ErrorCode::kNormalization) throw;
          fail(ErrorCode::kTrainingDiverged, "train: forward pass broke down in epoch " + std::to_string(epoch + 1) +
                                                 " (" + e.what() + ")");
        }
        if (!std::isfinite(sl.loss)) {
          fail(ErrorCode::kTrainingDiverged, "train: loss became non-finite in epoch " + std::to_string(epoch + 1));
        }
        loss_sum += sl.loss;
        ++counted;
        if (batch_grads.empty()) {
          batch_grads = std::move(sl.grads);
        } else {
          for (std::size_t p = 0; p < batch_grads.size(); ++p) batch_grads[p] += sl.grads[p];
        }
      }
      if (batch_grads.empty()) continue;
      if (config.grad_clip > 0.0) clip_global_norm(batch_grads, config.grad_clip);
      optimizer.step(params, batch_grads);
      for (const auto& p : params) {
        if (!p.value->all_finite()) {
          fail(ErrorCode::kTrainingDiverged, "train: parameter " + p.name + " became non-finite in epoch " +
                                                 std::to_string(epoch + 1));
        }
      }
    }
    const double mean = counted ? loss_sum / static_cast<double>(counted) : 0.0;
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

GcnPredictor::GcnPredictor(ModelParams model, PriorModel priors, GraphOptions options, double threshold)
    : model_(std::move(model)), priors_(std::move(priors)), options_(options), threshold_(threshold) {
  model_.validate();
}

std::vector<PairPrediction> GcnPredictor::score(const Scene& scene) const {
  const RelGraph graph = build_graph(scene, priors_, options_);
  const auto inputs = render_scene_inputs(scene);
  const Matrix embeddings = forward(scene, inputs, priors_, model_, options_);
  return score_pairs(embeddings, graph);
}

std::vector<PairPrediction> GcnPredictor::predict(const Scene& scene) const {
  return decide(score(scene), threshold_);
}

std::vector<PairPrediction> OraclePredictor::predict(const Scene& scene) const {
  std::vector<PairPrediction> out;
  for (const auto& [wheel, vehicle] : scene.gt_wheel_vehicle) out.push_back({wheel, vehicle, PairKind::kWheelVehicle, 1.0});
  for (const auto& [a, b] : scene.gt_wheel_wheel) out.push_back({a, b, PairKind::kWheelWheel, 1.0});
  return decide(out, kDefaultThreshold);
}

namespace {

struct MeanAcc {
  double sum = 0.0;
  std::size_t count = 0;
  void add(std::optional<double> v) {
    if (!v) return;
    sum += *v;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

}  // namespace

std::vector<MetricRow> evaluate(std::span<const PairPredictor* const> predictors, std::span<const NamedSplit> splits,
                                const GraphOptions& options) {
  std::vector<MetricRow> rows;
  for (const PairPredictor* predictor : predictors) {
    for (const NamedSplit& split : splits) {
      if (split.scenes.empty()) fail(ErrorCode::kPartition, "evaluate: split '" + split.name + "' is empty");
      MeanAcc wv, ww, all;
      for (const Scene& scene : split.scenes) {
        const auto retained = predictor->predict(scene);
        const PairAccuracy acc = pair_accuracy(retained, scene, options);
        wv.add(acc.wheel_vehicle());
        ww.add(acc.wheel_wheel());
        all.add(acc.combined());
      }
      rows.push_back({predictor->name(), split.name, "wheel-vehicle", wv.mean(), wv.count});
      rows.push_back({predictor->name(), split.name, "wheel-wheel", ww.mean(), ww.count});
      rows.push_back({predictor->name(), split.name, "combined", all.mean(), all.count});
    }
  }
  return rows;
}

const MetricRow* find_metric(std::span<const MetricRow> rows, const std::string& method, const std::string& split,
                             const std::string& kind) {
  for (const auto& r : rows) {
    if (r.method == method && r.split == split && r.kind == kind) return &r;
  }
  return nullptr;
}

void write_metrics_table(std::ostream& out, std::span<const MetricRow> rows) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %-8s %-14s %9s %7s\n", "method", "split", "kind", "accuracy", "scenes");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-8s %-8s %-14s %9.3f %7zu\n", r.method.c_str(), r.split.c_str(),
                  r.kind.c_str(), r.accuracy, r.scenes);
    out << line;
  }
}

void write_metrics_json(std::ostream& out, std::span<const MetricRow> rows) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    doc.push_back({{"method", r.method}, {"split", r.split}, {"kind", r.kind}, {"accuracy", r.accuracy},
                   {"scenes", r.scenes}});
  }
  out << doc.dump(2) << '\n';
}

std::unique_ptr<PairPredictor> load_predictor(std::istream& checkpoint, const PriorModel& priors,
                                              const GraphOptions& options) {
  const Checkpoint ck = Checkpoint::read(checkpoint);
  auto kind = ck.meta.find("kind");
  if (kind == ck.meta.end()) fail(ErrorCode::kFormat, "checkpoint: missing meta 'kind'");
  if (kind->second == "oracle") return std::make_unique<OraclePredictor>();
  return std::make_unique<GcnPredictor>(model_from_checkpoint(ck), priors, options);
}

void save_oracle_checkpoint(std::ostream& out) {
  Checkpoint ck;
  ck.meta["kind"] = "oracle";
  ck.write(out);
}

}  // namespace ownerrel
