#include <gtest/gtest.h>

#include <random>

#include "mgb/error.hpp"
#include "mgb/schedulers.hpp"

using namespace mgb;

namespace {

ScheduleRequest req(std::uint64_t id, Bytes mem, std::uint64_t tbs = 1, std::uint32_t threads = 32) {
  ScheduleRequest r;
  r.task_id = id;
  r.job_id = id;
  r.resources.mem_bytes = mem;
  r.resources.thread_blocks = tbs;
  r.resources.threads_per_block = threads;
  r.resources.warps_per_block = (threads + kWarpSize - 1) / kWarpSize;
  r.resources.total_warps = tbs * r.resources.warps_per_block;
  return r;
}

std::vector<DeviceState> fleet(std::size_t n) {
  return std::vector<DeviceState>(n, DeviceState(DeviceSpec::p100()));
}

}  // namespace

TEST(PolicyConfig, ParseAndName) {
  for (const char* s : {"sa", "cg:6", "cg:1", "mgb-sm", "mgb-warps"}) EXPECT_EQ(PolicyConfig::parse(s).name(), s);
  EXPECT_EQ(PolicyConfig::parse("cg:6").cg_ratio, 6u);
  EXPECT_TRUE(PolicyConfig::parse("sa").job_level());
  EXPECT_FALSE(PolicyConfig::parse("mgb-sm").job_level());
  EXPECT_THROW(PolicyConfig::parse("cg:0"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("cg:x"), ConfigError);
  EXPECT_THROW(PolicyConfig::parse("fifo"), ConfigError);
}

TEST(MgbSm, EmptyFleetFirstFit) {
  auto d = fleet(2);
  const auto dec = sched_mgb_sm(req(1, 9 * kGiB, 56), d);
  EXPECT_EQ(dec.outcome, Outcome::Assign);
  EXPECT_EQ(dec.device, 0u);
  EXPECT_EQ(d[0].free_mem_bytes(), 7 * kGiB);
  EXPECT_EQ(d[0].in_use_warps(), 56u);
}

TEST(MgbSm, SkipsDeviceShortOnMemory) {
  auto d = fleet(2);
  ASSERT_TRUE(d[0].reserve_memory(99, 8 * kGiB));
  const auto dec = sched_mgb_sm(req(1, 9 * kGiB), d);
  EXPECT_EQ(dec.outcome, Outcome::Assign);
  EXPECT_EQ(dec.device, 1u);
}

TEST(MgbSm, DefersOnComputeThenAssignsAfterRelease) {
  Scheduler s(PolicyConfig::parse("mgb-sm"), {DeviceSpec::p100()});
  // Two blocks of 32 warps fill every SM.
  EXPECT_EQ(s.submit(req(1, kGiB, 112, 1024), 0).outcome, Outcome::Assign);
  EXPECT_EQ(s.submit(req(2, kGiB, 1), 0).outcome, Outcome::Defer);
  EXPECT_EQ(s.pending().size(), 1u);
  s.release(0, 1);
  const auto out = s.on_release(10);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second.outcome, Outcome::Assign);
  EXPECT_EQ(s.devices()[0].sms()[0].tbs + s.devices()[0].sms()[55].tbs, 1u);
  EXPECT_TRUE(s.pending().empty());
}

TEST(MgbSm, RejectsWhatCanNeverFit) {
  auto d = fleet(2);
  EXPECT_EQ(sched_mgb_sm(req(1, 17 * kGiB), d).outcome, Outcome::Reject);
  // 113 blocks of 32 warps exceed one wave on a p100.
  EXPECT_EQ(sched_mgb_sm(req(2, kGiB, 113, 1024), d).outcome, Outcome::Reject);
  EXPECT_EQ(d[0].free_mem_bytes(), 16 * kGiB);
}

TEST(MgbWarps, LeastLoaded) {
  auto d = fleet(2);
  d[0].add_warps(90, 500);
  d[1].add_warps(91, 200);
  EXPECT_EQ(sched_mgb_warps(req(1, kGiB), d).device, 1u);
}

TEST(MgbWarps, TieGoesToLowestIndex) {
  auto d = fleet(3);
  const auto dec = sched_mgb_warps(req(1, kGiB), d);
  EXPECT_EQ(dec.outcome, Outcome::Assign);
  EXPECT_EQ(dec.device, 0u);
}

TEST(MgbWarps, MemoryDominatesLoad) {
  auto d = fleet(2);
  ASSERT_TRUE(d[0].reserve_memory(90, 15 * kGiB));
  d[1].add_warps(91, 100000);
  EXPECT_EQ(sched_mgb_warps(req(1, 2 * kGiB), d).device, 1u);
}

TEST(MgbWarps, NeverDefersOnCompute) {
  auto d = fleet(1);
  for (std::uint64_t i = 0; i < 10; ++i) {
    EXPECT_EQ(sched_mgb_warps(req(i, kGiB, 1000, 1024), d).outcome, Outcome::Assign);
  }
  EXPECT_EQ(sched_mgb_warps(req(20, 7 * kGiB), d).outcome, Outcome::Defer);
  EXPECT_EQ(sched_mgb_warps(req(21, 17 * kGiB), d).outcome, Outcome::Reject);
}

TEST(MgbWarps, ScaleInvariance) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 5;
    auto a = fleet(n);
    auto b = fleet(n);
    const std::uint64_t k = 1 + rng() % 7;
    for (std::size_t j = 0; j < n; ++j) {
      const auto w = rng() % 1000;
      a[j].add_warps(100, w);
      b[j].add_warps(100, w * k);
      const Bytes m = (rng() % 17) * kGiB;
      if (m <= 16 * kGiB) {
        a[j].reserve_memory(101, m);
        b[j].reserve_memory(101, m);
      }
    }
    const auto r = req(1, (1 + rng() % 8) * kGiB);
    const auto x = sched_mgb_warps(r, a);
    const auto y = sched_mgb_warps(r, b);
    ASSERT_EQ(x.outcome, y.outcome);
    ASSERT_EQ(x.device, y.device);
  }
}

TEST(Sa, ExclusiveDevices) {
  Scheduler s(PolicyConfig::parse("sa"), {DeviceSpec::p100(), DeviceSpec::p100()});
  EXPECT_EQ(s.submit(req(1, 0), 0).device, 0u);
  EXPECT_EQ(s.submit(req(2, 0), 0).device, 1u);
  EXPECT_EQ(s.submit(req(3, 0), 0).outcome, Outcome::Defer);
  s.release(1, 2);
  const auto out = s.on_release(5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second.device, 1u);
  EXPECT_EQ(s.jobs_on(1), 1u);
}

TEST(Sa, SingleJobDeviceZeroWithoutMemoryCheck) {
  std::vector<std::uint32_t> jobs(2, 0);
  const auto d = sched_sa(req(1, 20 * kGiB), jobs);
  EXPECT_EQ(d.outcome, Outcome::Assign);
  EXPECT_EQ(d.device, 0u);
}

TEST(Cg, RatioSixFillsSixPerDevice) {
  std::vector<std::uint32_t> jobs(2, 0);
  std::uint32_t cursor = 0;
  for (std::uint64_t i = 0; i < 12; ++i) {
    const auto d = sched_cg(req(i, 9 * kGiB), jobs, 6, cursor);
    ASSERT_EQ(d.outcome, Outcome::Assign);
    EXPECT_EQ(d.device, i % 2);
  }
  EXPECT_EQ(jobs, (std::vector<std::uint32_t>{6, 6}));
  EXPECT_EQ(sched_cg(req(13, 0), jobs, 6, cursor).outcome, Outcome::Defer);
}

TEST(Cg, RatioOneMatchesSa) {
  std::vector<std::uint32_t> cg(3, 0), sa(3, 0);
  std::uint32_t cursor = 0;
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto a = sched_cg(req(i, 0), cg, 1, cursor);
    const auto b = sched_sa(req(i, 0), sa);
    EXPECT_EQ(a.outcome, b.outcome);
    EXPECT_EQ(a.device, b.device);
  }
  EXPECT_EQ(cg, sa);
}

TEST(OnRelease, SkipAheadVersusStrictFifo) {
  for (bool skip : {true, false}) {
    auto policy = PolicyConfig::parse("mgb-warps");
    policy.skip_ahead = skip;
    Scheduler s(policy, {DeviceSpec::p100()});
    ASSERT_EQ(s.submit(req(1, 8 * kGiB), 0).outcome, Outcome::Assign);
    ASSERT_EQ(s.submit(req(2, 8 * kGiB), 0).outcome, Outcome::Assign);
    ASSERT_EQ(s.submit(req(3, 9 * kGiB), 0).outcome, Outcome::Defer);
    ASSERT_EQ(s.submit(req(4, 2 * kGiB), 0).outcome, Outcome::Defer);
    s.release(0, 1);
    const auto out = s.on_release(1);
    if (skip) {
      ASSERT_EQ(out.size(), 2u);
      EXPECT_EQ(out[0].second.outcome, Outcome::Defer);
      EXPECT_EQ(out[1].second.outcome, Outcome::Assign);
      EXPECT_EQ(s.pending().size(), 1u);
    } else {
      ASSERT_EQ(out.size(), 1u);
      EXPECT_EQ(out[0].second.outcome, Outcome::Defer);
      EXPECT_EQ(s.pending().size(), 2u);
    }
  }
}

TEST(OnRelease, EmptyQueueAndNothingRelevant) {
  Scheduler s(PolicyConfig::parse("mgb-warps"), {DeviceSpec::p100()});
  EXPECT_TRUE(s.on_release(0).empty());
  ASSERT_EQ(s.submit(req(1, 15 * kGiB), 0).outcome, Outcome::Assign);
  ASSERT_EQ(s.submit(req(2, 1 * kGiB), 0).outcome, Outcome::Assign);
  ASSERT_EQ(s.submit(req(3, 10 * kGiB), 0).outcome, Outcome::Defer);
  s.release(0, 2);
  const auto out = s.on_release(1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].second.outcome, Outcome::Defer);
}

TEST(Scheduler, LogsEveryDecision) {
  Scheduler s(PolicyConfig::parse("mgb-warps"), {DeviceSpec::p100()});
  s.submit(req(1, 10 * kGiB), 3);
  s.submit(req(2, 10 * kGiB), 4);
  ASSERT_EQ(s.log().size(), 2u);
  EXPECT_EQ(s.log()[0].device, 0u);
  EXPECT_EQ(s.log()[0].free_mem_after, 6 * kGiB);
  EXPECT_EQ(s.log()[1].outcome, Outcome::Defer);
  EXPECT_FALSE(s.log()[1].device.has_value());
  EXPECT_THROW(s.release(3, 1), ContractViolation);
}

TEST(Scheduler, DeterministicDecisions) {
  auto run = [] {
    std::mt19937_64 rng(17);
    Scheduler s(PolicyConfig::parse("mgb-sm"), {DeviceSpec::p100(), DeviceSpec::v100()});
    std::vector<std::pair<std::uint32_t, std::uint64_t>> live;
    for (std::uint64_t i = 0; i < 300; ++i) {
      if (!live.empty() && rng() % 2) {
        const auto k = rng() % live.size();
        s.release(live[k].first, live[k].second);
        live.erase(live.begin() + static_cast<long>(k));
        for (const auto& [r, d] : s.on_release(i)) {
          if (d.outcome == Outcome::Assign) live.emplace_back(d.device, r.task_id);
        }
      } else {
        const auto d = s.submit(req(i, (1 + rng() % 6) * kGiB, 1 + rng() % 60, 32 * (1 + rng() % 32)), i);
        if (d.outcome == Outcome::Assign) live.emplace_back(d.device, i);
      }
    }
    return s.log();
  };
  EXPECT_EQ(run(), run());
}
