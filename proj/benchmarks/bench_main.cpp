#include <drivelab/optim.hpp>
#include <drivelab/policy.hpp>
#include <drivelab/rewards.hpp>
#include <drivelab/sim.hpp>
#include <drivelab/tokenizer.hpp>

#include <benchmark/benchmark.h>

using namespace drivelab;

namespace {

std::vector<Segment> corpus_segments(std::size_t n) {
  std::vector<Segment> segs;
  for (const auto& t : synthetic_corpus(7, n)) {
    for (const auto& s : segment(t)) segs.push_back(canonicalize(s));
  }
  return segs;
}

const Codebook& codebook() {
  static const Codebook cb = fit_codebook(corpus_segments(300), 64, 1, 20);
  return cb;
}

const Scenario& scenario() {
  static const Scenario sc = generate_scenario(11, Difficulty::turn);
  return sc;
}

}  // namespace

static void BM_FitCodebook(benchmark::State& state) {
  const auto segs = corpus_segments(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_codebook(segs, 32, 3, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(segs.size()));
}
BENCHMARK(BM_FitCodebook)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_Encode(benchmark::State& state) {
  const Trajectory& t = scenario().expert;
  const Codebook& cb = codebook();
  for (auto _ : state) benchmark::DoNotOptimize(encode(t, cb));
}
BENCHMARK(BM_Encode);

static void BM_Execute(benchmark::State& state) {
  const Trajectory plan = constant_velocity_plan(scenario());
  for (auto _ : state) benchmark::DoNotOptimize(execute(scenario(), plan));
}
BENCHMARK(BM_Execute);

static void BM_RolloutGroup(benchmark::State& state) {
  const RolloutEnv env{&codebook(), {}, {}};
  const PolicyParams p = init_policy(static_cast<Eigen::Index>(codebook().size()), 32, kFeatureDim, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout_group(p, scenario(), static_cast<std::size_t>(state.range(0)), 1.0,
                                           scenario().expected_tokens(), ++seed, env));
  }
}
BENCHMARK(BM_RolloutGroup)->Arg(8)->Arg(16);

static void BM_Surrogate(benchmark::State& state) {
  const RolloutEnv env{&codebook(), {}, {}};
  const PolicyParams p = init_policy(static_cast<Eigen::Index>(codebook().size()), 32, kFeatureDim, 2);
  const RolloutGroup g = rollout_group(p, scenario(), 8, 1.0, scenario().expected_tokens(), 5, env);
  const auto adv = compute_advantages(Algorithm::drgrpo, g.total_rewards());
  for (auto _ : state) benchmark::DoNotOptimize(surrogate_loss_and_grad(p, g, adv, ClipConfig{}));
}
BENCHMARK(BM_Surrogate);
BENCHMARK_MAIN();
