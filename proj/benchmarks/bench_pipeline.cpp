#include <benchmark/benchmark.h>

#include <random>

#include "aerodet/decode_fuse.hpp"
#include "aerodet/eval.hpp"
#include "aerodet/heatmap.hpp"
#include "aerodet/loss.hpp"
#include "aerodet/nmm.hpp"
#include "aerodet/synth.hpp"

using namespace aerodet;

namespace {

ImageRecord dense_scene(int clusters, std::uint64_t seed) {
  SceneConfig c;
  c.dims = {4000, 3000};
  c.n_dense_clusters = clusters;
  c.objects_per_cluster = {20, 40};
  c.cluster_spread = 120;
  c.seed = seed;
  return generate_scene(c);
}

void BM_Nmm(benchmark::State& state) {
  const ImageRecord r = dense_scene(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(nmm(r.annotations, r.dims, {}));
  state.counters["boxes"] = static_cast<double>(r.annotations.size());
}
BENCHMARK(BM_Nmm)->Arg(4)->Arg(16);

void BM_SplatTargets(benchmark::State& state) {
  const ImageRecord r = dense_scene(8, 2);
  const LabelTree tree = visdrone_label_tree();
  for (auto _ : state) benchmark::DoNotOptimize(splat_targets(r, tree, {}));
}
BENCHMARK(BM_SplatTargets);

void BM_FocalLoss(benchmark::State& state) {
  const ImageRecord r = dense_scene(4, 3);
  const DenseTargetSet t = splat_targets(r, visdrone_label_tree(), {});
  DenseGrid p(t.heatmap.width(), t.heatmap.height(), t.heatmap.channels());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (double& v : p.data()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(focal_loss_shm(t, p, {}));
}
BENCHMARK(BM_FocalLoss);

void BM_Fuse(benchmark::State& state) {
  const ImageRecord r = dense_scene(static_cast<int>(state.range(0)), 4);
  OracleConfig oc;
  oc.center_jitter_sd = 1.0;
  oc.fp_rate_per_image = 50;
  const ImageChipResults chips = oracle_chip_results(r, {}, oc);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_image(chips, {}));
}
BENCHMARK(BM_Fuse)->Arg(4)->Arg(16);

void BM_Eval(benchmark::State& state) {
  std::vector<ImageRecord> gts;
  std::vector<ImageDetections> dets;
  OracleConfig oc;
  oc.center_jitter_sd = 2.0;
  oc.size_jitter_sd = 0.1;
  oc.fp_rate_per_image = 30;
  for (int i = 0; i < state.range(0); ++i) {
    ImageRecord r = dense_scene(4, 100 + i);
    r.image_id = "img" + std::to_string(i);
    dets.push_back({r.image_id, oracle_detect(r, image_box(r.dims), oc)});
    gts.push_back(std::move(r));
  }
  for (auto _ : state) benchmark::DoNotOptimize(ap_summary(dets, gts, {}));
}
BENCHMARK(BM_Eval)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
