#include <gtest/gtest.h>

#include "mgb/error.hpp"
#include "mgb/lazy_runtime.hpp"

using namespace mgb;

namespace {

constexpr Bytes kGB = Bytes{1} << 30;

GpuOp mem(OpKind kind, const std::string& sym, Bytes bytes = 0) {
  GpuOp op;
  op.kind = kind;
  op.symbols = {sym};
  op.bytes = bytes;
  op.lazy = true;
  return op;
}

GpuOp launch(std::vector<std::string> args) {
  GpuOp op;
  op.kind = OpKind::Launch;
  op.name = "k";
  op.symbols = std::move(args);
  op.grid = {4, 1, 1};
  op.block = {64, 1, 1};
  op.duration_us = 1000;
  return op;
}

}  // namespace

TEST(LazyAlloc, FirstIdIsOneAndQueueStartsWithMalloc) {
  LazyState s;
  const auto a = s.lazy_alloc("A", kGB);
  EXPECT_EQ(a.id, 1u);
  ASSERT_EQ(s.queue(a).size(), 1u);
  EXPECT_EQ(s.queue(a)[0].kind, OpKind::Malloc);
  EXPECT_EQ(s.queue(a)[0].bytes, kGB);
}

TEST(LazyAlloc, DistinctIds) {
  LazyState s;
  EXPECT_NE(s.lazy_alloc("A", 1).id, s.lazy_alloc("B", 1).id);
}

TEST(LazyAlloc, ZeroBytesRejected) {
  LazyState s;
  EXPECT_THROW(s.lazy_alloc("A", 0), RuntimeError);
}

TEST(RecordOp, KeepsOrder) {
  LazyState s;
  const auto a = s.lazy_alloc("A", 64);
  s.record_op(a, mem(OpKind::Memset, "A", 64));
  s.record_op(a, mem(OpKind::MemcpyH2D, "A", 64));
  const auto& q = s.queue(a);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_EQ(q[1].kind, OpKind::Memset);
  EXPECT_EQ(q[2].kind, OpKind::MemcpyH2D);
}

TEST(RecordOp, HeapLimitUpdatesImmediately) {
  LazyState s;
  EXPECT_EQ(s.heap_limit_bytes(), kDefaultHeapLimit);
  const auto a = s.lazy_alloc("A", 64);
  GpuOp heap;
  heap.kind = OpKind::SetHeapLimit;
  heap.bytes = 32ull << 20;
  s.record_op(a, heap);
  EXPECT_EQ(s.heap_limit_bytes(), 32ull << 20);
  EXPECT_EQ(s.heap_limit_log().size(), 1u);
}

TEST(RecordOp, ErrorsAfterBindAndOnBadKinds) {
  LazyState s;
  const auto a = s.lazy_alloc("A", 64);
  EXPECT_THROW(s.record_op(a, launch({"A"})), ContractViolation);
  const auto prep = s.kernel_launch_prepare(launch({"A"}), std::nullopt);
  s.replay(prep, 0);
  EXPECT_TRUE(s.is_bound(a));
  EXPECT_THROW(s.record_op(a, mem(OpKind::MemcpyD2H, "A", 64)), RuntimeError);
  EXPECT_THROW(s.record_op(PseudoAddress{99, "Z"}, mem(OpKind::Free, "Z")), RuntimeError);
}

TEST(Prepare, SingleQueueAddsHeap) {
  LazyState s;
  const auto a = s.lazy_alloc("A", kGB);
  s.record_op(a, mem(OpKind::MemcpyH2D, "A", kGB));
  const auto prep = s.kernel_launch_prepare(launch({"A"}), std::nullopt);
  EXPECT_EQ(prep.request.mem_bytes, kGB + kDefaultHeapLimit);
  EXPECT_EQ(prep.lazy_bytes, kGB);
  EXPECT_EQ(prep.request.thread_blocks, 4u);
  EXPECT_EQ(prep.request.warps_per_block, 2u);
}

TEST(Prepare, StaticPartPlusLazyCountsHeapOnce) {
  LazyState s;
  s.lazy_alloc("L", kGB);
  ResourceRequest base;
  base.mem_bytes = 2 * kGB + kDefaultHeapLimit;
  const auto prep = s.kernel_launch_prepare(launch({"S", "L"}), base);
  EXPECT_EQ(prep.request.mem_bytes, 3 * kGB + kDefaultHeapLimit);
}

TEST(Prepare, SharedObjectBindsOnce) {
  LazyState s;
  s.lazy_alloc("A", kGB);
  const auto first = s.kernel_launch_prepare(launch({"A"}), std::nullopt);
  s.replay(first, 1);
  const auto second = s.kernel_launch_prepare(launch({"A"}), std::nullopt);
  EXPECT_EQ(second.lazy_bytes, 0u);
  EXPECT_TRUE(second.to_bind.empty());
}

TEST(Prepare, FreedBeforeLaunchIsNetZero) {
  LazyState s;
  const auto a = s.lazy_alloc("A", kGB);
  s.record_op(a, mem(OpKind::Free, "A"));
  EXPECT_EQ(s.kernel_launch_prepare(launch({"A"}), std::nullopt).lazy_bytes, 0u);
}

TEST(Prepare, UnknownArgWithoutStaticPartIsFatal) {
  LazyState s;
  EXPECT_THROW(s.kernel_launch_prepare(launch({"nope"}), std::nullopt), RuntimeError);
}

TEST(Replay, RunsEachOpOnceInOrder) {
  LazyState s;
  const auto a = s.lazy_alloc("A", 128);
  const auto b = s.lazy_alloc("B", 256);
  s.record_op(a, mem(OpKind::MemcpyH2D, "A", 128));
  s.record_op(b, mem(OpKind::Memset, "B", 256));
  const auto prep = s.kernel_launch_prepare(launch({"A", "B"}), std::nullopt);
  const auto ops = s.replay(prep, 2);
  ASSERT_EQ(ops.size(), 4u);
  EXPECT_EQ(ops[0].address, a);
  EXPECT_EQ(ops[0].op.kind, OpKind::Malloc);
  EXPECT_EQ(ops[1].op.kind, OpKind::MemcpyH2D);
  EXPECT_EQ(ops[2].address, b);
  EXPECT_EQ(ops[3].op.kind, OpKind::Memset);
  EXPECT_EQ(s.binding(a)->device, 2u);
  EXPECT_EQ(s.binding(b)->bytes, 256u);
  EXPECT_NE(s.binding(a)->address, s.binding(b)->address);
  // Bound addresses are never re-bound.
  EXPECT_THROW(s.replay(prep, 3), RuntimeError);
  EXPECT_EQ(s.binding(a)->device, 2u);
}

TEST(Describe, MentionsEverySymbol) {
  LazyState s;
  s.lazy_alloc("alpha", 1);
  s.lazy_alloc("beta", 2);
  const auto d = s.describe();
  EXPECT_NE(d.find("alpha"), std::string::npos);
  EXPECT_NE(d.find("beta"), std::string::npos);
}
