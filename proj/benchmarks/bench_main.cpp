#include <benchmark/benchmark.h>

#include <sstream>

#include "mgb/dominators.hpp"
#include "mgb/schedulers.hpp"
#include "mgb/sim_engine.hpp"
#include "mgb/task_builder.hpp"
#include "mgb/workload_gen.hpp"

using namespace mgb;

namespace {

// A chain of n diamonds, each arm with one launch.
Program diamonds(int n) {
  std::ostringstream os;
  os << "program d\nfunc d\nblock j0 succ l0 r0\n  malloc A 1024\n";
  for (int i = 0; i < n; ++i) {
    os << "block l" << i << " succ j" << i + 1 << "\n  launch kl" << i << " grid 4 1 1 block 128 1 1 args A dur 1\n";
    os << "block r" << i << " succ j" << i + 1 << "\n  launch kr" << i << " grid 4 1 1 block 128 1 1 args A dur 1\n";
    os << "block j" << i + 1;
    if (i + 1 < n) os << " succ l" << i + 1 << " r" << i + 1;
    os << "\n";
  }
  os << "  free A\nend\n";
  return parse_program(os.str());
}

void BM_Dominators(benchmark::State& state) {
  const auto p = diamonds(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_dominators(p.main_function()));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dominators)->RangeMultiplier(4)->Range(4, 256)->Complexity();

void BM_AnalyzeProgram(benchmark::State& state) {
  const auto p = diamonds(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(analyze_program(p));
}
BENCHMARK(BM_AnalyzeProgram)->RangeMultiplier(4)->Range(4, 64);

void BM_SchedWarps(benchmark::State& state) {
  ScheduleRequest req;
  req.resources.mem_bytes = kGiB;
  req.resources.threads_per_block = 256;
  req.resources.warps_per_block = 8;
  req.resources.thread_blocks = 64;
  req.resources.total_warps = 512;
  std::uint64_t id = 1;
  std::vector<DeviceState> devices;
  for (int i = 0; i < state.range(0); ++i) devices.emplace_back(DeviceSpec::v100());
  for (auto _ : state) {
    req.task_id = id++;
    const auto d = sched_mgb_warps(req, devices);
    if (d.outcome == Outcome::Assign) devices[d.device].release_task(req.task_id);
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_SchedWarps)->Arg(2)->Arg(8)->Arg(32);

void BM_SimTable1(benchmark::State& state) {
  const auto w = gen_workload(table1_mixes(1)[static_cast<std::size_t>(state.range(0))], builtin_catalog());
  SimConfig c;
  c.policy = PolicyConfig::parse("mgb-warps");
  c.devices = parse_device_inventory("p100:2");
  c.workers = 10;
  for (auto _ : state) benchmark::DoNotOptimize(run_sim(w, c));
}
BENCHMARK(BM_SimTable1)->DenseRange(0, 7)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
