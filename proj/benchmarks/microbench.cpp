// Micro benchmarks of the registration building blocks on synthetic scans.

#include <map>
#include <random>

#include <benchmark/benchmark.h>

#include <lodom/feature_registration.hpp>
#include <lodom/features.hpp>
#include <lodom/kdtree.hpp>
#include <lodom/odometry.hpp>
#include <lodom/registration.hpp>
#include <lodom/synthlidar.hpp>

namespace {

using namespace lodom;

struct Frames {
  PointCloud prev;
  PointCloud curr;
};

/// Two consecutive corridor scans, 0.5 m apart.
const Frames& corridor_frames(int rings) {
  static std::map<int, Frames> cache;
  auto it = cache.find(rings);
  if (it == cache.end()) {
    ScenarioSpec s;
    s.preset = "corridor";
    s.seed = 1;
    s.frames = 2;
    s.sensor.ring_count = rings;
    s.sensor.range_noise_sigma = 0.01;
    s.trajectory.step = Twist(Vec3(0.5, 0.0, 0.0), Vec3::Zero());
    const auto seq = generate_sequence(s);
    it = cache.emplace(rings, Frames{seq.scans[0], seq.scans[1]}).first;
  }
  return it->second;
}

void BM_KdTreeBuild(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Vec3> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  for (auto _ : state) benchmark::DoNotOptimize(KdTree(pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdTreeBuild)->Arg(10000)->Arg(100000);

void BM_KdTreeKnn(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Vec3> pts(100000);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  const KdTree tree(pts);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tree.knn(pts[i++ % pts.size()], static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_KdTreeKnn)->Arg(1)->Arg(20);

void BM_PointCovariances(benchmark::State& state) {
  const PointCloud c = downsample_first(corridor_frames(32).prev, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(point_covariances(c, 20, 1e-3));
  state.counters["points"] = static_cast<double>(c.size());
}
BENCHMARK(BM_PointCovariances)->Unit(benchmark::kMillisecond);

template <RegistrationResult (*Align)(const PointCloud&, const PointCloud&, const Pose&, const RegistrationParams&)>
void BM_Align(benchmark::State& state) {
  const Frames& f = corridor_frames(32);
  const PointCloud src = downsample_first(f.curr, 0.5), tgt = downsample_first(f.prev, 0.5);
  RegistrationParams p;
  p.voxel_resolution = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(Align(src, tgt, Pose::identity(), p));
  state.counters["points"] = static_cast<double>(src.size());
}
BENCHMARK_TEMPLATE(BM_Align, icp_align)->Name("BM_Icp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Align, gicp_align)->Name("BM_Gicp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Align, vgicp_align)->Name("BM_Vgicp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Align, ndt_align)->Name("BM_Ndt")->Unit(benchmark::kMillisecond);

void BM_LoamExtraction(benchmark::State& state) {
  const PointCloud& scan = corridor_frames(static_cast<int>(state.range(0))).curr;
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(scan, FeatureParams{}));
  state.counters["points"] = static_cast<double>(scan.size());
}
BENCHMARK(BM_LoamExtraction)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LoamOdometry(benchmark::State& state) {
  const Frames& f = corridor_frames(32);
  const FeatureSet prev = extract_features(f.prev, FeatureParams{}), curr = extract_features(f.curr, FeatureParams{});
  for (auto _ : state) benchmark::DoNotOptimize(feature_odometry(curr, prev, Pose::identity(), FeatureParams{}));
}
BENCHMARK(BM_LoamOdometry)->Unit(benchmark::kMillisecond);

void BM_LegoTwoStage(benchmark::State& state) {
  const Frames& f = corridor_frames(32);
  const SensorModel sensor;
  const LegoFrame prev = extract_lego_features(f.prev, sensor, FeatureParams{});
  const LegoFrame curr = extract_lego_features(f.curr, sensor, FeatureParams{});
  for (auto _ : state) benchmark::DoNotOptimize(lego_two_stage(curr, prev, Pose::identity(), FeatureParams{}));
}
BENCHMARK(BM_LegoTwoStage)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
