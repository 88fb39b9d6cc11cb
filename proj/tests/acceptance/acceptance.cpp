// Prints one PASS/FAIL line per acceptance criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "mgb/dominators.hpp"
#include "mgb/metrics.hpp"
#include "mgb/sim_engine.hpp"
#include "mgb/task_builder.hpp"
#include "mgb/workload_gen.hpp"
#include "oracles.hpp"

using namespace mgb;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string list(const std::vector<double>& v, int digits = 2) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s + "]";
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

std::vector<Workload> table1(std::uint64_t seed) {
  std::vector<Workload> out;
  const auto mixes = table1_mixes(seed);
  for (std::size_t i = 0; i < mixes.size(); ++i) {
    auto w = gen_workload(mixes[i], builtin_catalog());
    w.name = table1_name(i);
    out.push_back(std::move(w));
  }
  return out;
}

// Mean of one metric per (workload, policy, workers) over the seeds.
using Key = std::tuple<std::string, std::string, std::uint32_t>;

std::map<Key, double> mean_by(const std::vector<MetricsRow>& rows, double MetricsRow::*field) {
  std::map<Key, std::vector<double>> acc;
  for (const auto& r : rows) acc[{r.workload, r.policy, r.workers}].push_back(r.*field);
  std::map<Key, double> out;
  for (const auto& [k, v] : acc) out[k] = mean(v);
  return out;
}

std::vector<MetricsRow> grid(const std::vector<std::string>& policies, const std::string& devices,
                             std::vector<std::uint32_t> workers, std::function<std::vector<Workload>(std::uint64_t)> w) {
  CompareSpec spec;
  spec.workloads = std::move(w);
  for (const auto& p : policies) spec.policies.push_back(PolicyConfig::parse(p));
  spec.devices = parse_device_inventory(devices);
  spec.workers = std::move(workers);
  spec.seeds = kSeeds;
  return compare(spec);
}

std::vector<std::string> workload_names() {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < 8; ++i) n.push_back(table1_name(i));
  return n;
}

// ---- 1 ----

Verdict task_construction() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t mismatches = 0, launches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = testkit::random_program(rng);
    const auto units = build_unit_tasks(p);
    const auto oracle = testkit::path_binding_oracle(p.main_function());
    launches += units.size();
    bool ok = units.size() == oracle.size();
    for (std::size_t k = 0; ok && k < units.size(); ++k) {
      auto as_set = [](const std::vector<OpId>& v) { return std::set<OpId>(v.begin(), v.end()); };
      ok = units[k].launch_op == oracle[k].launch_op && units[k].mem_objs == oracle[k].mem_objs &&
           as_set(units[k].alloc_ops) == oracle[k].alloc_ops && as_set(units[k].h2d_ops) == oracle[k].h2d_ops &&
           as_set(units[k].d2h_ops) == oracle[k].d2h_ops && as_set(units[k].free_ops) == oracle[k].free_ops;
    }
    std::vector<std::pair<OpId, std::set<std::string>>> in;
    for (const auto& u : units) in.emplace_back(u.launch_op, u.mem_objs);
    std::vector<std::vector<OpId>> got;
    for (const auto& t : merge_unit_tasks(units)) {
      got.emplace_back();
      for (const auto& u : t.unit_tasks) got.back().push_back(u.launch_op);
    }
    ok = ok && got == testkit::union_find_components(in);
    mismatches += !ok;
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 60.0,
          "1000 programs, " + std::to_string(launches) + " launches, " + std::to_string(mismatches) + " mismatches, " +
              fmt(s, 1) + " s"};
}

// ---- 2 ----

Verdict dominators() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2002);
  std::size_t mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = parse_program(testkit::cfg_text(testkit::random_cfg(rng, 1 + rng() % 20)));
    const auto& f = p.main_function();
    const auto dom = compute_dominators(f);
    const auto pdom = compute_postdominators(f);
    for (BlockIndex a = 0; a < f.blocks.size(); ++a) {
      for (BlockIndex b = 0; b < f.blocks.size(); ++b) {
        mismatches += dom.dominates(a, b) != testkit::removal_dominates(f, a, b);
        mismatches += pdom.dominates(a, b) != testkit::removal_postdominates(f, a, b);
      }
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 30.0,
          "200 CFGs, " + std::to_string(mismatches) + " mismatches, " + fmt(s, 1) + " s"};
}

// ---- 3 and 4 ----

struct SafetyResult {
  std::size_t workloads = 0, runs = 0, events = 0, ooms = 0, mem_breaches = 0, sm_breaches = 0;
  double seconds = 0;
};

SafetyResult safety_corpus() {
  const auto t0 = Clock::now();
  SafetyResult res;
  std::mt19937_64 rng(3003);
  testkit::ProgramOptions opt;
  opt.max_blocks = 8;
  opt.max_ops = 10;
  opt.lazy_prob = 0.15;
  opt.max_bytes = Bytes{6} << 30;
  for (int i = 0; i < 10000; ++i) {
    const auto w = testkit::random_workload(rng, 6, opt);
    const auto fleet = testkit::random_fleet(rng);
    ++res.workloads;
    for (const char* p : {"mgb-sm", "mgb-warps"}) {
      SimConfig c;
      c.policy = PolicyConfig::parse(p);
      c.devices = fleet;
      c.workers = 1 + static_cast<std::uint32_t>(rng() % 6);
      c.seed = rng();
      SimHooks hooks;
      hooks.observer = [&](const SimSnapshot& s) {
        ++res.events;
        for (const auto& dev : s.scheduler.devices()) {
          Bytes resident = 0;
          for (const auto& [id, t] : dev.resident()) resident += t.mem;
          res.mem_breaches += resident + dev.free_mem_bytes() != dev.spec().mem_bytes;
          for (const auto& sm : dev.sms()) {
            res.sm_breaches += sm.tbs > dev.spec().max_tbs_per_sm || sm.warps > dev.spec().max_warps_per_sm ||
                               sm.regs > dev.spec().regs_per_sm || sm.smem > dev.spec().smem_per_sm_bytes;
          }
        }
      };
      const auto r = run_sim(w, c, hooks);
      res.ooms += r.oom_crashes();
      ++res.runs;
    }
  }
  res.seconds = seconds_since(t0);
  return res;
}

// ---- 5 ----

Verdict cg_crash_trend() {
  const auto t0 = Clock::now();
  const auto rows = grid({"cg:6"}, "p100:2", {3, 4, 5, 6}, [](std::uint64_t seed) {
    auto w = gen_workload(table1_mixes(seed)[2], builtin_catalog());
    w.name = "W3";
    return std::vector<Workload>{w};
  });
  const auto crash = mean_by(rows, &MetricsRow::crash_pct);
  std::vector<double> pct;
  for (std::uint32_t k = 3; k <= 6; ++k) pct.push_back(crash.at({"W3", "cg:6", k}));
  const auto positive = std::count_if(pct.begin(), pct.end(), [](double v) { return v > 0; });
  const double s = seconds_since(t0);
  return {positive >= 3 && pct[3] >= pct[0] && s < 120.0,
          "3:1/16 jobs on 2xp100, cg:6 crash% at 3..6 workers " + list(pct, 2) + ", " + fmt(s, 1) + " s"};
}

// ---- 6 and 8 ----

struct P100Results {
  std::vector<double> warps_norm, speedup, best_cg, cg_min_crash, cg_max_norm;
};

P100Results p100_grid() {
  P100Results out;
  const auto main = grid({"sa", "mgb-warps"}, "p100:2", {10}, table1);
  const auto cg = grid({"cg:6"}, "p100:2", {3, 4, 5, 6}, table1);
  const auto norm = mean_by(main, &MetricsRow::norm_throughput);
  const auto sp = mean_by(main, &MetricsRow::speedup);
  const auto cg_norm = mean_by(cg, &MetricsRow::norm_throughput);
  const auto cg_crash = mean_by(cg, &MetricsRow::crash_pct);
  for (const auto& w : workload_names()) {
    out.warps_norm.push_back(norm.at({w, "mgb-warps", 10}));
    out.speedup.push_back(sp.at({w, "mgb-warps", 10}));
    double best = 0, min_crash = 100, max_norm = 0;
    for (std::uint32_t k = 3; k <= 6; ++k) {
      const double crash = cg_crash.at({w, "cg:6", k});
      const double n = cg_norm.at({w, "cg:6", k});
      if (crash == 0.0) best = std::max(best, n);
      min_crash = std::min(min_crash, crash);
      max_norm = std::max(max_norm, n);
    }
    out.best_cg.push_back(best);
    out.cg_min_crash.push_back(min_crash);
    out.cg_max_norm.push_back(max_norm);
  }
  return out;
}

Verdict throughput_ordering(const P100Results& r) {
  const double lo = *std::min_element(r.warps_norm.begin(), r.warps_norm.end());
  const double avg = mean(r.warps_norm);
  int wins = 0;
  for (std::size_t i = 0; i < r.warps_norm.size(); ++i) wins += r.warps_norm[i] >= r.best_cg[i];
  return {lo >= 1.5 && avg >= 1.8 && wins >= 6,
          "mgb-warps/SA " + list(r.warps_norm) + " min " + fmt(lo, 2) + " mean " + fmt(avg, 2) +
              "; best crash-free CG " + list(r.best_cg) + ", mgb-warps wins " + std::to_string(wins) +
              "/8 (CG lowest crash% " + list(r.cg_min_crash) + ", CG best norm incl. crashing " + list(r.cg_max_norm) +
              ")"};
}

Verdict turnaround(const P100Results& r) {
  const double lo = *std::min_element(r.speedup.begin(), r.speedup.end());
  return {lo >= 2.0, "mgb-warps turnaround speedup over SA " + list(r.speedup) + " min " + fmt(lo, 2)};
}

// ---- 7 and 11 ----

struct V100Results {
  std::vector<double> ratio;
  double sm_wait_ms = 0, warps_wait_ms = 0;
  double sm_max_slowdown = 0;
  std::vector<double> warps_slowdown;
  std::size_t crashes = 0;
};

V100Results v100_grid() {
  V100Results out;
  std::map<std::string, std::vector<double>> tp_sm, tp_warps, slow;
  std::vector<double> wait_sm, wait_warps;
  for (auto seed : kSeeds) {
    for (const auto& w : table1(seed)) {
      for (const char* p : {"mgb-sm", "mgb-warps"}) {
        SimConfig c;
        c.policy = PolicyConfig::parse(p);
        c.devices = parse_device_inventory("v100:4");
        c.workers = 16;
        c.seed = seed;
        const auto r = run_sim(w, c);
        out.crashes += r.crashed();
        if (c.policy.kind == PolicyKind::MgbSm) {
          tp_sm[w.name].push_back(throughput_per_min(r));
          wait_sm.push_back(avg_wait_ms(r));
          for (const auto& k : r.kernels) {
            out.sm_max_slowdown = std::max(out.sm_max_slowdown, static_cast<double>(k.actual_us() - k.solo_us));
          }
        } else {
          tp_warps[w.name].push_back(throughput_per_min(r));
          wait_warps.push_back(avg_wait_ms(r));
          slow[w.name].push_back(kernel_slowdown_pct(r));
        }
      }
    }
  }
  for (const auto& w : workload_names()) {
    out.ratio.push_back(mean(tp_warps[w]) / mean(tp_sm[w]));
    out.warps_slowdown.push_back(mean(slow[w]));
  }
  out.sm_wait_ms = mean(wait_sm);
  out.warps_wait_ms = mean(wait_warps);
  return out;
}

Verdict alg3_vs_alg2(const V100Results& r) {
  const double avg = mean(r.ratio);
  return {avg >= 1.0 && avg <= 1.5 && avg > 1.0 && r.sm_wait_ms > r.warps_wait_ms,
          "4xv100/16 workers, mgb-warps/mgb-sm throughput " + list(r.ratio) + " mean " + fmt(avg, 3) +
              "; mean job wait mgb-sm " + fmt(r.sm_wait_ms / 1000.0, 1) + " s vs mgb-warps " +
              fmt(r.warps_wait_ms / 1000.0, 1) + " s"};
}

Verdict slowdown(const V100Results& r) {
  const double avg = mean(r.warps_slowdown);
  return {r.sm_max_slowdown == 0.0 && avg <= 10.0,
          "mgb-sm max kernel stretch " + fmt(r.sm_max_slowdown, 0) + " us; mgb-warps slowdown % " +
              list(r.warps_slowdown) + " mean " + fmt(avg, 2)};
}

// ---- 9 ----

Verdict lazy_static_equivalence() {
  std::mt19937_64 rng(9009);
  std::size_t programs = 0, mismatches = 0, not_static = 0;
  for (int batch = 0; batch < 100; ++batch) {
    Workload w;
    w.name = "bindable";
    for (std::uint64_t j = 0; j < 5; ++j) {
      auto p = testkit::bindable_program(rng, {}, "b" + std::to_string(j));
      const auto analysis = analyze_program(p);
      for (const auto& b : analysis.program.main_function().blocks) {
        for (const auto& op : b.ops) not_static += op.lazy;
      }
      w.jobs.push_back({j, std::move(p), {}, {}});
      ++programs;
    }
    const auto fleet = testkit::random_fleet(rng);
    for (const char* policy : {"mgb-sm", "mgb-warps"}) {
      SimConfig c;
      c.policy = PolicyConfig::parse(policy);
      c.devices = fleet;
      c.workers = 1 + static_cast<std::uint32_t>(rng() % 5);
      c.seed = rng();
      const auto stat = run_sim(w, c);
      c.force_lazy = true;
      const auto lazy = run_sim(w, c);
      mismatches += stat.tasks != lazy.tasks || stat.decisions != lazy.decisions ||
                    stat.makespan_us != lazy.makespan_us || stat.crashes != lazy.crashes;
    }
  }
  return {mismatches == 0 && not_static == 0,
          std::to_string(programs) + " programs in 100 batches x 2 policies, " + std::to_string(mismatches) +
              " differing runs, " + std::to_string(not_static) + " ops left unbound statically"};
}

// ---- 10 ----

Verdict determinism() {
  std::mt19937_64 rng(10010);
  std::size_t runs = 0, diffs = 0;
  auto check = [&](const Workload& w, SimConfig c) {
    diffs += report_to_json(run_sim(w, c)) != report_to_json(run_sim(w, c));
    ++runs;
  };
  for (const char* p : {"sa", "cg:6", "mgb-sm", "mgb-warps"}) {
    for (const auto& w : table1(rng() % 100)) {
      SimConfig c;
      c.policy = PolicyConfig::parse(p);
      c.devices = parse_device_inventory(rng() % 2 ? "p100:2" : "v100:4");
      c.workers = 1 + static_cast<std::uint32_t>(rng() % 16);
      c.seed = rng();
      check(w, c);
    }
    for (int i = 0; i < 25; ++i) {
      SimConfig c;
      c.policy = PolicyConfig::parse(p);
      c.devices = testkit::random_fleet(rng);
      c.workers = 1 + static_cast<std::uint32_t>(rng() % 8);
      c.seed = rng();
      check(testkit::random_workload(rng, 8, {}), c);
    }
  }
  return {diffs == 0, std::to_string(runs) + " runs repeated, " + std::to_string(diffs) + " differing reports"};
}

void report(int id, const char* name, const Verdict& v, bool& all) {
  std::printf("criterion %2d %-30s %s  %s\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::fflush(stdout);
  all = all && v.pass;
}

}  // namespace

int main() {
  bool all = true;
  report(1, "task construction oracles", task_construction(), all);
  report(2, "dominator oracle", dominators(), all);

  const auto safety = safety_corpus();
  const std::string corpus = std::to_string(safety.workloads) + " workloads, " + std::to_string(safety.runs) +
                             " runs, " + std::to_string(safety.events) + " events, " + fmt(safety.seconds, 1) + " s";
  report(3, "memory safety",
         {safety.ooms == 0 && safety.mem_breaches == 0 && safety.workloads >= 10000,
          corpus + "; " + std::to_string(safety.ooms) + " OOMs, " + std::to_string(safety.mem_breaches) +
              " conservation breaches"},
         all);
  report(4, "per-SM compute safety",
         {safety.sm_breaches == 0, corpus + "; " + std::to_string(safety.sm_breaches) + " SM limit breaches"}, all);

  report(5, "CG crash trend", cg_crash_trend(), all);
  const auto p100 = p100_grid();
  report(6, "throughput ordering", throughput_ordering(p100), all);
  const auto v100 = v100_grid();
  report(7, "mgb-warps vs mgb-sm", alg3_vs_alg2(v100), all);
  report(8, "turnaround speedup", turnaround(p100), all);
  report(9, "lazy/static equivalence", lazy_static_equivalence(), all);
  report(10, "determinism", determinism(), all);
  report(11, "kernel slowdown bound", slowdown(v100), all);
  return all ? 0 : 1;
}
