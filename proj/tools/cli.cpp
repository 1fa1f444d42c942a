#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ownerrel/baseline.hpp"
#include "ownerrel/datagen.hpp"
#include "ownerrel/error.hpp"
#include "ownerrel/nn.hpp"
#include "ownerrel/priors.hpp"
#include "ownerrel/relgraph.hpp"
#include "ownerrel/render.hpp"
#include "ownerrel/training.hpp"

namespace ownerrel::cli {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return in;
}

// "-" means the command's stdout stream.
void write_out(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

std::vector<Scene> load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

PriorModel load_priors(const std::string& path) {
  auto in = open_in(path);
  return read_priors(in);
}

struct GenerateArgs {
  GenConfig config;
  std::string out = "-";
};

struct FitArgs {
  std::string data;
  std::string out = "-";
  EmOptions em;
};

struct TrainArgs {
  std::string data, priors;
  std::string out = "-";
  std::string loss_log;
  TrainConfig config;
  bool no_small_mask = false;
};

struct PredictArgs {
  std::string checkpoint, priors, data;
  std::string out = "-";
  double threshold = kDefaultThreshold;
  bool no_small_mask = false;
};

struct EvalArgs {
  std::string checkpoint, priors, data;
  std::string out = "-";
  std::string json;
  bool baseline = false;
  bool no_small_mask = false;
  std::size_t mixed_per_side = 0;
  std::uint64_t seed = 0;
};

struct RenderArgs {
  std::string data, predictions;
  std::int64_t scene = 0;
  std::string out = "-";
};

GraphOptions graph_options(bool no_small_mask) {
  GraphOptions g;
  g.small_object_mask = !no_small_mask;
  return g;
}

void do_generate(const GenerateArgs& a, std::ostream& out) {
  const auto scenes = generate_dataset(a.config);
  std::ostringstream s;
  write_dataset(s, scenes);
  write_out(a.out, s.str(), out);
}

void do_fit(const FitArgs& a, std::ostream& out) {
  const auto scenes = load_dataset(a.data);
  std::ostringstream s;
  write_priors(s, fit_priors(scenes, a.em));
  write_out(a.out, s.str(), out);
}

void do_train(TrainArgs a, std::ostream& out) {
  const auto scenes = load_dataset(a.data);
  const PriorModel priors = load_priors(a.priors);
  a.config.small_object_mask = !a.no_small_mask;
  std::ostringstream log;
  log << "epoch loss\n";
  const TrainResult r = train(scenes, priors, a.config, [&](std::size_t epoch, double loss) {
    log << epoch << ' ' << format_double(loss) << '\n';
  });
  std::ostringstream s;
  save_model(s, r.model);
  write_out(a.out, s.str(), out);
  if (!a.loss_log.empty()) write_out(a.loss_log, log.str(), out);
}

void do_predict(const PredictArgs& a, std::ostream& out) {
  const PriorModel priors = load_priors(a.priors);
  const auto scenes = load_dataset(a.data);
  auto ck = open_in(a.checkpoint);
  const GraphOptions options = graph_options(a.no_small_mask);
  const Checkpoint checkpoint = Checkpoint::read(ck);
  std::unique_ptr<PairPredictor> predictor;
  if (auto kind = checkpoint.meta.find("kind"); kind != checkpoint.meta.end() && kind->second == "oracle") {
    predictor = std::make_unique<OraclePredictor>();
  } else {
    predictor = std::make_unique<GcnPredictor>(model_from_checkpoint(checkpoint), priors, options, a.threshold);
  }
  std::ostringstream s;
  for (const Scene& scene : scenes) write_predictions(s, scene.id, predictor->predict(scene));
  write_out(a.out, s.str(), out);
}

void do_eval(const EvalArgs& a, std::ostream& out) {
  const PriorModel priors = load_priors(a.priors);
  const auto scenes = load_dataset(a.data);
  const GraphOptions options = graph_options(a.no_small_mask);
  auto ck = open_in(a.checkpoint);
  auto learned = load_predictor(ck, priors, options);
  LogicPredictor logic(priors);

  std::vector<const PairPredictor*> predictors{learned.get()};
  if (a.baseline) predictors.push_back(&logic);

  const SceneSplits splits = split_easy_hard(scenes, a.seed, a.mixed_per_side);
  std::vector<NamedSplit> named;
  if (!splits.easy.empty()) named.push_back({"easy", splits.easy});
  if (!splits.hard.empty()) named.push_back({"hard", splits.hard});
  if (!splits.mixed.empty()) named.push_back({"mixed", splits.mixed});
  if (named.empty()) fail(ErrorCode::kPartition, "eval: dataset is empty");

  const auto rows = evaluate(predictors, named, options);
  std::ostringstream table;
  write_metrics_table(table, rows);
  write_out(a.out, table.str(), out);
  if (!a.json.empty()) {
    std::ostringstream js;
    write_metrics_json(js, rows);
    write_out(a.json, js.str(), out);
  }
}

void do_render(const RenderArgs& a, std::ostream& out) {
  const auto scenes = load_dataset(a.data);
  const Scene* scene = nullptr;
  for (const auto& s : scenes) {
    if (s.id == a.scene) scene = &s;
  }
  if (!scene) fail(ErrorCode::kLookup, "render: no scene with id " + std::to_string(a.scene));
  std::vector<PairPrediction> pairs;
  if (a.predictions.empty()) {
    pairs = OraclePredictor().predict(*scene);
  } else {
    auto in = open_in(a.predictions);
    for (auto& sp : read_predictions(in)) {
      if (sp.scene_id == a.scene) pairs.insert(pairs.end(), sp.pairs.begin(), sp.pairs.end());
    }
  }
  write_out(a.out, render_svg(*scene, pairs), out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wheel-vehicle owner-member relationship toolkit", "ownerrel"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic dataset");
  g->add_option("--scenes", gen.config.scene_count, "Number of scenes")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.config.seed, "Random seed");
  g->add_option("--width", gen.config.width, "Frame width in pixels");
  g->add_option("--height", gen.config.height, "Frame height in pixels");
  g->add_option("--min-vehicles", gen.config.min_vehicles);
  g->add_option("--max-vehicles", gen.config.max_vehicles);
  g->add_option("--ambiguity", gen.config.ambiguity_rate, "Per-vehicle ambiguity rate");
  g->add_option("--ambiguity-min-vehicles", gen.config.ambiguity_min_vehicles,
                "Only scenes with at least this many vehicles get ambiguity");
  g->add_option("--noise", gen.config.noise, "Box jitter as a fraction of box size");
  g->add_option("-o,--out", gen.out, "Output dataset ('-' for stdout)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit-priors", "Fit distance-ratio mixtures");
  f->add_option("--data", fit.data)->required();
  f->add_option("--components", fit.em.components);
  f->add_option("--tol", fit.em.tol);
  f->add_option("--max-iter", fit.em.max_iter);
  f->add_option("--seed", fit.em.seed);
  f->add_option("-o,--out", fit.out);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the relation network");
  t->add_option("--data", tr.data)->required();
  t->add_option("--priors", tr.priors)->required();
  t->add_option("--epochs", tr.config.epochs);
  t->add_option("--lr", tr.config.learning_rate);
  t->add_option("--momentum", tr.config.momentum);
  t->add_option("--neg-weight", tr.config.neg_weight);
  t->add_option("--batch-size", tr.config.batch_size);
  t->add_option("--neg-drop", tr.config.neg_drop_ratio);
  t->add_option("--grad-clip", tr.config.grad_clip, "Max global gradient norm per batch, 0 disables");
  t->add_flag("--no-small-mask", tr.no_small_mask);
  t->add_option("--seed", tr.config.seed);
  t->add_option("--loss-log", tr.loss_log, "Per-epoch loss output");
  t->add_option("-o,--out", tr.out, "Checkpoint output");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Write retained pairs per scene");
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--priors", pr.priors)->required();
  p->add_option("--data", pr.data)->required();
  p->add_option("--threshold", pr.threshold);
  p->add_flag("--no-small-mask", pr.no_small_mask);
  p->add_option("-o,--out", pr.out);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Pair accuracy on easy, hard and mixed splits");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--priors", ev.priors)->required();
  e->add_option("--data", ev.data)->required();
  e->add_flag("--baseline", ev.baseline, "Add logic model rows");
  e->add_option("--mixed-per-side", ev.mixed_per_side);
  e->add_flag("--no-small-mask", ev.no_small_mask);
  e->add_option("--seed", ev.seed);
  e->add_option("--json", ev.json);
  e->add_option("-o,--out", ev.out);

  RenderArgs re;
  auto* r = app.add_subcommand("render", "Draw one scene as SVG");
  r->add_option("--data", re.data)->required();
  r->add_option("--scene", re.scene)->required();
  r->add_option("--predictions", re.predictions, "Prediction file; ground truth when omitted");
  r->add_option("-o,--out", re.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  }

  try {
    if (g->parsed()) do_generate(gen, out);
    else if (f->parsed()) do_fit(fit, out);
    else if (t->parsed()) do_train(tr, out);
    else if (p->parsed()) do_predict(pr, out);
    else if (e->parsed()) do_eval(ev, out);
    else if (r->parsed()) do_render(re, out);
  } catch (const Error& ex) {
    err << "error [" << to_string(ex.code()) << "]: " << ex.what() << '\n';
    return kExitError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace ownerrel::cli
