#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ownerrel/baseline.hpp"
#include "ownerrel/matcher.hpp"
#include "ownerrel/relgraph.hpp"

namespace ownerrel {

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double neg_weight = 0.1;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  ModelConfig model;
  // Fraction of negative candidates left out of the loss each time a scene
  // is visited.
  double neg_drop_ratio = 0.0;
  // Cap on the global L2 norm of each batch gradient; 0 turns it off.
  double grad_clip = 0.5;
  bool small_object_mask = true;

  void validate() const;
};

// Σ c·(score − target)² / Σ c over mask-true entries; c = 1 on positives and
// neg_weight on negatives. Throws kUndefinedLoss when no entry carries weight.
double weighted_l2_loss(const Matrix& scores, const Matrix& target, std::span<const std::uint8_t> mask,
                        double neg_weight);

// Same loss recorded on a tape; `weights` holds c per entry (0 off-mask).
Tape::Var weighted_l2_loss(Tape& tape, Tape::Var scores, const Matrix& target, const Matrix& weights);

// 1 on ground-truth wheel-vehicle and wheel-wheel pairs, symmetric.
Matrix pair_targets(const Scene& scene);

// Loss weights for one scene visit, optionally dropping negatives.
Matrix loss_weights(const Matrix& target, std::span<const std::uint8_t> mask, double neg_weight,
                    double neg_drop_ratio, Rng* rng);

struct SceneLoss {
  double loss = 0.0;
  std::vector<Matrix> grads;  // parallel to ModelParams::parameters()
};

// Forward, cosine scores, weighted loss and backward for one scene.
SceneLoss scene_loss_and_grad(const Scene& scene, const PriorModel& priors, const ModelParams& model,
                              const Matrix& weights, const GraphOptions& options = {});

struct TrainResult {
  ModelParams model;
  std::vector<double> epoch_loss;  // mean scene loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

TrainResult train(std::span<const Scene> dataset, const PriorModel& priors, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Anything that turns a scene into retained pairs.
class PairPredictor {
 public:
  virtual ~PairPredictor() = default;
  virtual std::string name() const = 0;
  virtual std::vector<PairPrediction> predict(const Scene& scene) const = 0;
};

class GcnPredictor : public PairPredictor {
 public:
  GcnPredictor(ModelParams model, PriorModel priors, GraphOptions options = {},
               double threshold = kDefaultThreshold);
  std::string name() const override { return "gcn"; }
  std::vector<PairPrediction> predict(const Scene& scene) const override;
  // Every scored candidate before thresholding.
  std::vector<PairPrediction> score(const Scene& scene) const;

 private:
  ModelParams model_;
  PriorModel priors_;
  GraphOptions options_;
  double threshold_;
};

class LogicPredictor : public PairPredictor {
 public:
  explicit LogicPredictor(PriorModel priors) : priors_(std::move(priors)) {}
  std::string name() const override { return "logic"; }
  std::vector<PairPrediction> predict(const Scene& scene) const override { return logic_predict(scene, priors_); }

 private:
  PriorModel priors_;
};

// Reproduces the ground truth; fixture for checking the evaluation plumbing.
class OraclePredictor : public PairPredictor {
 public:
  std::string name() const override { return "oracle"; }
  std::vector<PairPrediction> predict(const Scene& scene) const override;
};

struct MetricRow {
  std::string method;
  std::string split;
  std::string kind;  // wheel-vehicle | wheel-wheel | combined
  double accuracy = 0.0;
  std::size_t scenes = 0;  // scenes contributing a defined accuracy
};

struct NamedSplit {
  std::string name;
  std::span<const Scene> scenes;
};

// Mean per-scene pair accuracy for every predictor × split × pair kind.
std::vector<MetricRow> evaluate(std::span<const PairPredictor* const> predictors, std::span<const NamedSplit> splits,
                                const GraphOptions& options = {});

const MetricRow* find_metric(std::span<const MetricRow> rows, const std::string& method, const std::string& split,
                             const std::string& kind);

void write_metrics_table(std::ostream& out, std::span<const MetricRow> rows);
void write_metrics_json(std::ostream& out, std::span<const MetricRow> rows);

// Predictor stored in a checkpoint file: either a trained GCN or the oracle
// fixture ("meta kind oracle").
std::unique_ptr<PairPredictor> load_predictor(std::istream& checkpoint, const PriorModel& priors,
                                              const GraphOptions& options = {});
void save_oracle_checkpoint(std::ostream& out);

}  // namespace ownerrel
