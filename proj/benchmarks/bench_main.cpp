#include <benchmark/benchmark.h>

#include "ownerrel/baseline.hpp"
#include "ownerrel/datagen.hpp"
#include "ownerrel/matrix.hpp"
#include "ownerrel/priors.hpp"
#include "ownerrel/relgraph.hpp"
#include "ownerrel/runtime.hpp"
#include "ownerrel/training.hpp"

using namespace ownerrel;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// A busy scene and priors fitted on its neighbours.
struct Fixture {
  std::vector<Scene> scenes;
  PriorModel priors;
  Scene scene;

  Fixture() {
    GenConfig g;
    g.scene_count = 200;
    g.seed = 3;
    g.ambiguity_rate = 0.5;
    scenes = generate_dataset(g);
    priors = fit_priors(scenes, {});
    scene = scenes.front();
    for (const auto& s : scenes) {
      if (s.boxes.size() > scene.boxes.size()) scene = s;
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Extractor shapes: N nodes × flattened input against a 64-wide layer.
void BM_MatmulNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, kInputSize, 1);
  const Matrix w = random_matrix(64, kInputSize, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_nt(x, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * kInputSize * 64));
}
BENCHMARK(BM_MatmulNT)->Arg(4)->Arg(12)->Arg(18);

void BM_MatmulTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix g = random_matrix(n, 64, 1);
  const Matrix x = random_matrix(n, kInputSize, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_tn(g, x));
}
BENCHMARK(BM_MatmulTN)->Arg(12);

void BM_RenderSceneInputs(benchmark::State& state) {
  const Scene& s = fixture().scene;
  for (auto _ : state) benchmark::DoNotOptimize(render_scene_inputs(s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.boxes.size()));
}
BENCHMARK(BM_RenderSceneInputs);

void BM_Forward(benchmark::State& state) {
  const Fixture& f = fixture();
  const ModelParams model = ModelParams::init({}, 1);
  const auto inputs = render_scene_inputs(f.scene);
  for (auto _ : state) benchmark::DoNotOptimize(forward(f.scene, inputs, f.priors, model));
}
BENCHMARK(BM_Forward);

void BM_SceneLossAndGrad(benchmark::State& state) {
  const Fixture& f = fixture();
  const ModelParams model = ModelParams::init({}, 1);
  const RelGraph g = build_graph(f.scene, f.priors);
  const Matrix weights = loss_weights(pair_targets(f.scene), g.mask, 0.1, 0.0, nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(scene_loss_and_grad(f.scene, f.priors, model, weights));
}
BENCHMARK(BM_SceneLossAndGrad);

void BM_LogicPredict(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(logic_predict(f.scene, f.priors));
}
BENCHMARK(BM_LogicPredict);

void BM_FitGmm(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (double& x : xs) x = rng.normal(rng.bernoulli(0.5) ? 1.0 : -1.0, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(xs, 2, 1e-6, 200, 0));
}
BENCHMARK(BM_FitGmm)->Arg(10000);

}  // namespace

int main(int argc, char** argv) {
  keep_large_allocations();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
