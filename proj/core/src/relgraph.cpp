#include "ownerrel/relgraph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "ownerrel/error.hpp"

namespace ownerrel {

bool is_small_object(const BoundingBox& b, const Scene& scene, const GraphOptions& options) {
  return options.small_object_mask && b.area() < options.small_object_fraction * scene.width * scene.height;
}

std::vector<std::uint8_t> candidate_mask(const Scene& scene, const GraphOptions& options) {
  const std::size_t n = scene.boxes.size();
  std::vector<std::uint8_t> mask(n * n, 0);
  std::vector<bool> small(n);
  for (std::size_t i = 0; i < n; ++i) small[i] = is_small_object(scene.boxes[i], scene, options);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || small[i] || small[j]) continue;
      if (scene.boxes[i].is_vehicle() && scene.boxes[j].is_vehicle()) continue;
      mask[i * n + j] = 1;
    }
  }
  return mask;
}

RelGraph build_graph(const Scene& scene, const PriorModel& priors, const GraphOptions& options) {
  RelGraph g;
  g.adjacency = init_adjacency(scene, priors);
  g.mask = candidate_mask(scene, options);
  const std::size_t n = scene.boxes.size();
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back({scene.boxes[i].id, scene.boxes[i].cls});
    if (!is_small_object(scene.boxes[i], scene, options)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      g.adjacency(i, j) = 0.0;
      g.adjacency(j, i) = 0.0;
    }
  }
  return g;
}

void ModelConfig::validate() const {
  if (input_dim == 0 || feature_dim == 0 || gat_hidden == 0) {
    fail(ErrorCode::kInvalidParameter, "ModelConfig: dimensions must be positive");
  }
  for (std::size_t h : extractor_hidden) {
    if (h == 0) fail(ErrorCode::kInvalidParameter, "ModelConfig: zero-width extractor layer");
  }
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams m;
  m.config = config;
  std::size_t in = config.input_dim;
  for (std::size_t h : config.extractor_hidden) {
    m.extractor.emplace_back(in, h);
    in = h;
  }
  m.extractor.emplace_back(in, config.feature_dim);
  for (std::size_t l = 0; l < config.gcn_layers; ++l) m.gcn.emplace_back(config.feature_dim, config.feature_dim);
  m.gat.fc1 = DenseLayer(2 * config.feature_dim, config.gat_hidden);
  m.gat.fc2 = DenseLayer(config.gat_hidden, 1);
  for (auto& layer : m.extractor) layer.init_glorot(rng);
  for (auto& layer : m.gcn) layer.init_glorot(rng);
  m.gat.fc1.init_glorot(rng);
  m.gat.fc2.init_glorot(rng);
  return m;
}

namespace {

template <typename Self, typename Out, typename Make>
void collect_parameters(Self& self, Out& out, Make make) {
  for (std::size_t l = 0; l < self.extractor.size(); ++l) {
    out.push_back(make("extractor." + std::to_string(l) + ".weight", self.extractor[l].weight));
    out.push_back(make("extractor." + std::to_string(l) + ".bias", self.extractor[l].bias));
  }
  for (std::size_t l = 0; l < self.gcn.size(); ++l) {
    out.push_back(make("gcn." + std::to_string(l) + ".weight", self.gcn[l].weight));
    out.push_back(make("gcn." + std::to_string(l) + ".bias", self.gcn[l].bias));
  }
  out.push_back(make("gat.fc1.weight", self.gat.fc1.weight));
  out.push_back(make("gat.fc1.bias", self.gat.fc1.bias));
  out.push_back(make("gat.fc2.weight", self.gat.fc2.weight));
  out.push_back(make("gat.fc2.bias", self.gat.fc2.bias));
}

}  // namespace

std::vector<ParamRef> ModelParams::parameters() {
  std::vector<ParamRef> out;
  collect_parameters(*this, out, [](std::string name, Matrix& m) { return ParamRef{std::move(name), &m}; });
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::parameters() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect_parameters(*this, out, [](std::string name, const Matrix& m) { return std::pair{std::move(name), &m}; });
  return out;
}

void ModelParams::validate() const {
  const ModelParams shape = [&] {
    ModelParams s;
    s.config = config;
    std::size_t in = config.input_dim;
    for (std::size_t h : config.extractor_hidden) {
      s.extractor.emplace_back(in, h);
      in = h;
    }
    s.extractor.emplace_back(in, config.feature_dim);
    for (std::size_t l = 0; l < config.gcn_layers; ++l) s.gcn.emplace_back(config.feature_dim, config.feature_dim);
    s.gat.fc1 = DenseLayer(2 * config.feature_dim, config.gat_hidden);
    s.gat.fc2 = DenseLayer(config.gat_hidden, 1);
    return s;
  }();
  const auto want = shape.parameters();
  const auto have = parameters();
  if (want.size() != have.size()) fail(ErrorCode::kShape, "ModelParams: layer count disagrees with config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!want[i].second->same_shape(*have[i].second)) {
      fail(ErrorCode::kShape, "ModelParams: " + have[i].first + " has the wrong shape");
    }
  }
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  if (v.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) fail(ErrorCode::kFormat, std::string("checkpoint: bad ") + what + " '" + s + "'");
  return static_cast<std::size_t>(v);
}

const std::string& require_meta(const Checkpoint& ck, const std::string& key) {
  auto it = ck.meta.find(key);
  if (it == ck.meta.end()) fail(ErrorCode::kFormat, "checkpoint: missing meta '" + key + "'");
  return it->second;
}

}  // namespace

void save_model(std::ostream& out, const ModelParams& model) {
  Checkpoint ck;
  ck.meta["kind"] = "gcn";
  ck.meta["input_dim"] = std::to_string(model.config.input_dim);
  ck.meta["extractor_hidden"] = join_sizes(model.config.extractor_hidden);
  ck.meta["feature_dim"] = std::to_string(model.config.feature_dim);
  ck.meta["gcn_layers"] = std::to_string(model.config.gcn_layers);
  ck.meta["gat_hidden"] = std::to_string(model.config.gat_hidden);
  for (const auto& [name, m] : model.parameters()) ck.params.emplace_back(name, *m);
  ck.write(out);
}

ModelParams load_model(std::istream& in) { return model_from_checkpoint(Checkpoint::read(in)); }

ModelParams model_from_checkpoint(const Checkpoint& ck) {
  if (require_meta(ck, "kind") != "gcn") fail(ErrorCode::kFormat, "checkpoint: not a GCN model");
  ModelConfig config;
  config.input_dim = parse_size(require_meta(ck, "input_dim"), "input_dim");
  config.extractor_hidden.clear();
  const std::string hidden = require_meta(ck, "extractor_hidden");
  if (hidden != "-") {
    std::stringstream ss(hidden);
    std::string part;
    while (std::getline(ss, part, ',')) config.extractor_hidden.push_back(parse_size(part, "extractor width"));
  }
  config.feature_dim = parse_size(require_meta(ck, "feature_dim"), "feature_dim");
  config.gcn_layers = parse_size(require_meta(ck, "gcn_layers"), "gcn_layers");
  config.gat_hidden = parse_size(require_meta(ck, "gat_hidden"), "gat_hidden");
  config.validate();

  ModelParams model = ModelParams::init(config, 0);
  auto slots = model.parameters();
  if (slots.size() != ck.params.size()) {
    fail(ErrorCode::kShape, "checkpoint: " + std::to_string(ck.params.size()) + " parameter blocks, architecture has " +
                                std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, value] = ck.params[i];
    if (name != slots[i].name) fail(ErrorCode::kFormat, "checkpoint: expected block '" + slots[i].name + "', found '" + name + "'");
    if (!value.same_shape(*slots[i].value)) {
      fail(ErrorCode::kShape, "checkpoint: block '" + name + "' is " + std::to_string(value.rows()) + "x" +
                                  std::to_string(value.cols()) + ", architecture expects " +
                                  std::to_string(slots[i].value->rows()) + "x" + std::to_string(slots[i].value->cols()));
    }
    *slots[i].value = value;
  }
  return model;
}

Matrix stack_inputs(std::span<const NodeInput> inputs) {
  Matrix x(inputs.size(), kInputSize);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& d = inputs[i].data;
    if (d.size() != kInputSize) {
      fail(ErrorCode::kShape, "node input " + std::to_string(i) + " has " + std::to_string(d.size()) + " values, expected " +
                                  std::to_string(kInputSize));
    }
    for (double v : d) {
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::kNormalization, "node input " + std::to_string(i) + " outside [0, 1]");
    }
    std::copy(d.begin(), d.end(), x.row(i).begin());
  }
  return x;
}

std::vector<NodeInput> render_scene_inputs(const Scene& scene) {
  std::vector<NodeInput> inputs;
  inputs.reserve(scene.boxes.size());
  for (const auto& b : scene.boxes) inputs.push_back(render_node_input(scene, b.id));
  return inputs;
}

Matrix extract_node_features(std::span<const NodeInput> inputs, const std::vector<DenseLayer>& extractor) {
  Matrix h = stack_inputs(inputs);
  for (std::size_t l = 0; l < extractor.size(); ++l) {
    if (h.cols() != extractor[l].in_features()) fail(ErrorCode::kShape, "extractor layer " + std::to_string(l) + ": input width mismatch");
    h = extractor[l].apply(h);
    if (l + 1 < extractor.size()) h = relu(h);
  }
  return h;
}

namespace {

double gat_score(const Matrix& features, std::size_t node, std::size_t neighbour, const GatParams& gat) {
  const std::size_t f = features.cols();
  Matrix x(1, 2 * f);
  for (std::size_t c = 0; c < f; ++c) {
    x(0, c) = features(node, c);
    x(0, f + c) = features(neighbour, c);
  }
  return gat.fc2.apply(relu(gat.fc1.apply(x)))(0, 0);
}

std::vector<std::vector<NeighbourScale>> all_scales(const Matrix& adjacency, const Matrix& features,
                                                    const GatParams& gat) {
  RelGraph g;
  g.adjacency = adjacency;
  g.node_features = features;
  g.nodes.resize(adjacency.rows());
  std::vector<std::vector<NeighbourScale>> out;
  for (std::size_t i = 0; i < adjacency.rows(); ++i) out.push_back(gat_scale(g, i, gat));
  return out;
}

}  // namespace

std::vector<NeighbourScale> gat_scale(const RelGraph& graph, std::size_t node, const GatParams& gat) {
  const std::size_t n = graph.adjacency.rows();
  if (node >= n) fail(ErrorCode::kLookup, "gat_scale: node index out of range");
  if (graph.node_features.rows() != n) fail(ErrorCode::kShape, "gat_scale: features and adjacency disagree");
  if (gat.fc1.in_features() != 2 * graph.node_features.cols()) fail(ErrorCode::kShape, "gat_scale: fc1 expects 2F inputs");
  std::vector<std::size_t> neighbours;
  std::vector<double> scores;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == node || graph.adjacency(node, j) == 0.0) continue;
    neighbours.push_back(j);
    scores.push_back(gat_score(graph.node_features, node, j, gat));
  }
  if (neighbours.empty()) return {};
  const auto coef = softmax(scores);
  std::vector<NeighbourScale> out;
  for (std::size_t k = 0; k < neighbours.size(); ++k) out.push_back({neighbours[k], coef[k]});
  return out;
}

Matrix refine_edges(const Matrix& adjacency, std::span<const std::vector<NeighbourScale>> scales) {
  Matrix refined = adjacency;
  for (std::size_t i = 0; i < scales.size() && i < refined.rows(); ++i) {
    for (const auto& s : scales[i]) {
      if (s.neighbour == i) continue;
      refined(i, s.neighbour) = adjacency(i, s.neighbour) * s.scale;
    }
  }
  for (std::size_t i = 0; i < refined.rows(); ++i) refined(i, i) = 1.0;
  return refined;
}

Matrix gcn_layer(const Matrix& refined_adjacency, const Matrix& features, const DenseLayer& layer) {
  Matrix norm = refined_adjacency;
  for (std::size_t i = 0; i < norm.rows(); ++i) {
    double s = 0.0;
    for (double v : norm.row(i)) s += v;
    if (!(s > 0.0)) fail(ErrorCode::kNormalization, "gcn_layer: row " + std::to_string(i) + " sums to zero");
    for (double& v : norm.row(i)) v /= s;
  }
  return relu(layer.apply(matmul(norm, features)));
}

Matrix forward(const Scene& scene, std::span<const NodeInput> inputs, const PriorModel& priors,
               const ModelParams& model, const GraphOptions& options) {
  if (inputs.size() != scene.boxes.size()) fail(ErrorCode::kShape, "forward: one input per scene object required");
  RelGraph graph = build_graph(scene, priors, options);
  Matrix h = extract_node_features(inputs, model.extractor);
  for (const auto& layer : model.gcn) {
    const auto scales = all_scales(graph.adjacency, h, model.gat);
    const Matrix refined = refine_edges(graph.adjacency, scales);
    h = gcn_layer(refined, h, layer);
  }
  return h;
}

BoundParams bind_parameters(Tape& tape, const ModelParams& model) {
  BoundParams b;
  for (const auto& [name, m] : model.parameters()) b.vars.push_back(tape.parameter(*m));
  return b;
}

ForwardTrace forward_on_tape(Tape& tape, const BoundParams& bound, const RelGraph& graph, Tape::Var inputs,
                             const ModelParams& model) {
  const std::size_t n = graph.size();
  if (tape.value(inputs).rows() != n) fail(ErrorCode::kShape, "forward: one input row per graph node required");
  const std::size_t ne = model.extractor.size();
  const std::size_t ng = model.gcn.size();
  auto var = [&](std::size_t k) { return bound.vars.at(k); };

  Tape::Var h = inputs;
  for (std::size_t l = 0; l < ne; ++l) {
    h = tape.dense(h, var(2 * l), var(2 * l + 1));
    if (l + 1 < ne) h = tape.relu(h);
  }

  // Edge list of non-zero off-diagonal prior weights, grouped by source row.
  std::vector<std::size_t> src, dst, flat;
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || graph.adjacency(i, j) == 0.0) continue;
      src.push_back(i);
      dst.push_back(j);
      flat.push_back(i * n + j);
      weights.push_back(graph.adjacency(i, j));
    }
  }
  const Tape::Var edge_w = tape.constant(Matrix(weights.size(), 1, weights));
  const std::size_t gat0 = 2 * (ne + ng);

  ForwardTrace trace;
  for (std::size_t l = 0; l < ng; ++l) {
    Tape::Var refined;
    if (src.empty()) {
      refined = tape.constant(Matrix::identity(n));
    } else {
      const Tape::Var pair = tape.concat_cols(tape.gather_rows(h, src), tape.gather_rows(h, dst));
      const Tape::Var hidden = tape.relu(tape.dense(pair, var(gat0), var(gat0 + 1)));
      const Tape::Var score = tape.dense(hidden, var(gat0 + 2), var(gat0 + 3));
      const Tape::Var scale = tape.group_softmax(score, src);
      refined = tape.scatter(Matrix::identity(n), tape.hadamard(edge_w, scale), flat);
    }
    trace.refined.push_back(tape.value(refined));
    const Tape::Var agg = tape.matmul(tape.row_normalize(refined), h);
    h = tape.relu(tape.dense(agg, var(2 * (ne + l)), var(2 * (ne + l) + 1)));
  }
  trace.embeddings = h;
  return trace;
}

}  // namespace ownerrel
