#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ownerrel/datagen.hpp"
#include "ownerrel/geometry.hpp"
#include "ownerrel/matrix.hpp"
#include "ownerrel/nn.hpp"
#include "ownerrel/priors.hpp"
#include "ownerrel/tape.hpp"

namespace ownerrel {

// Boxes smaller than this fraction of the frame are left out of candidate
// pairs.
inline constexpr double kSmallObjectFraction = 0.0004;

struct GraphOptions {
  bool small_object_mask = true;
  double small_object_fraction = kSmallObjectFraction;
};

bool is_small_object(const BoundingBox& b, const Scene& scene, const GraphOptions& options);

// Candidate-pair mask (wheel-vehicle and wheel-wheel, small objects out),
// row-major N×N over scene.boxes order.
std::vector<std::uint8_t> candidate_mask(const Scene& scene, const GraphOptions& options);

struct NodeRef {
  ObjectId id;
  ObjectClass cls;
};

struct RelGraph {
  Matrix node_features;  // N×F, filled by the extractor
  Matrix adjacency;      // N×N
  std::vector<std::uint8_t> mask;
  std::vector<NodeRef> nodes;

  std::size_t size() const { return nodes.size(); }
  bool candidate(std::size_t i, std::size_t j) const { return mask[i * size() + j] != 0; }
};

// Prior adjacency and candidate mask. With the small-object mask on, the
// off-diagonal adjacency of small objects is zeroed as well.
RelGraph build_graph(const Scene& scene, const PriorModel& priors, const GraphOptions& options = {});

struct GatParams {
  DenseLayer fc1;  // 2F -> hidden
  DenseLayer fc2;  // hidden -> 1
};

struct ModelConfig {
  std::size_t input_dim = kInputSize;
  std::vector<std::size_t> extractor_hidden{64};
  std::size_t feature_dim = 64;
  std::size_t gcn_layers = 2;
  std::size_t gat_hidden = 64;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  ModelConfig config;
  std::vector<DenseLayer> extractor;  // input -> ... -> F
  std::vector<DenseLayer> gcn;        // F -> F each
  GatParams gat;

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  // Every learnable matrix in a fixed order with stable names.
  std::vector<ParamRef> parameters();
  std::vector<std::pair<std::string, const Matrix*>> parameters() const;

  // Throws kShape if the chained layer dimensions disagree with the config.
  void validate() const;
};

void save_model(std::ostream& out, const ModelParams& model);
// Rebuilds the architecture from the header and checks every block against it.
ModelParams load_model(std::istream& in);
ModelParams model_from_checkpoint(const Checkpoint& ck);

// Dense input matrix, one flattened NodeInput per row.
Matrix stack_inputs(std::span<const NodeInput> inputs);
std::vector<NodeInput> render_scene_inputs(const Scene& scene);

// Extractor stack: dense + relu per layer, no activation after the last.
Matrix extract_node_features(std::span<const NodeInput> inputs, const std::vector<DenseLayer>& extractor);

// Softmax-normalized attention over the neighbours of `node` (non-zero
// off-diagonal adjacency), in increasing neighbour index.
struct NeighbourScale {
  std::size_t neighbour;
  double scale;
};
std::vector<NeighbourScale> gat_scale(const RelGraph& graph, std::size_t node, const GatParams& gat);

// w' = w × scale on each listed edge of row `node`; diagonal stays 1 and
// structural zeros stay zero.
Matrix refine_edges(const Matrix& adjacency, std::span<const std::vector<NeighbourScale>> scales);

// relu(layer(Â · features)) with Â the row-normalized adjacency.
Matrix gcn_layer(const Matrix& refined_adjacency, const Matrix& features, const DenseLayer& layer);

// Embeddings for every node of `scene` (rows in scene.boxes order).
Matrix forward(const Scene& scene, std::span<const NodeInput> inputs, const PriorModel& priors,
               const ModelParams& model, const GraphOptions& options = {});

// Tape-recorded pipeline shared by training and inference.
struct BoundParams {
  std::vector<Tape::Var> vars;  // parallel to ModelParams::parameters()
};
BoundParams bind_parameters(Tape& tape, const ModelParams& model);

struct ForwardTrace {
  Tape::Var embeddings;
  // Refined adjacency actually used by each GCN layer.
  std::vector<Matrix> refined;
};

ForwardTrace forward_on_tape(Tape& tape, const BoundParams& bound, const RelGraph& graph, Tape::Var inputs,
                             const ModelParams& model);

}  // namespace ownerrel
