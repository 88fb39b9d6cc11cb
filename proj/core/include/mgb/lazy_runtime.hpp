#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgb/task_builder.hpp"
#include "mgb/trace_model.hpp"

namespace mgb {

/// Placeholder handed out instead of a device pointer until the object is
/// bound. Lives in its own type, so it can never be mistaken for (or compare
/// equal to) a real device address.
struct PseudoAddress {
  std::uint64_t id = 0;
  std::string symbol;

  auto operator<=>(const PseudoAddress&) const = default;
};

/// Real allocation an address was bound to by replay.
struct DeviceBinding {
  std::uint32_t device = 0;
  std::uint64_t address = 0;
  Bytes bytes = 0;

  bool operator==(const DeviceBinding&) const = default;
};

/// Result of kernelLaunchPrepare: the request to hand to the scheduler plus
/// the addresses whose queues must be replayed once a device is chosen.
struct LaunchPreparation {
  ResourceRequest request;
  Bytes lazy_bytes = 0;
  std::vector<PseudoAddress> to_bind;
};

struct ReplayedOp {
  PseudoAddress address;
  GpuOp op;
  std::uint32_t device = 0;
};

/// Per-job lazy-binding state: one FIFO of recorded ops per pseudo address.
class LazyState {
 public:
  /// Fresh address (ids start at 1); the queue starts with the Malloc.
  PseudoAddress lazy_alloc(const std::string& symbol, Bytes bytes, OpId op = 0);
  PseudoAddress lazy_alloc(const GpuOp& malloc_op);

  /// Appends to the address's queue. SetHeapLimit also updates the current
  /// heap limit immediately. Throws RuntimeError for bound or unknown
  /// addresses.
  void record_op(const PseudoAddress& addr, const GpuOp& op);

  /// Heap limits are process-wide; this records one not tied to an object.
  void record_heap_limit(const GpuOp& op);

  /// Request for `launch`: `static_req` (if any) plus the malloc bytes of
  /// every not-yet-bound address among the launch arguments, plus the heap
  /// limit when there is no static part. Addresses whose queue ends with a
  /// Free contribute nothing. Arguments without a pseudo address are only
  /// allowed when a static request covers them.
  LaunchPreparation kernel_launch_prepare(const GpuOp& launch, const std::optional<ResourceRequest>& static_req);

  /// Executes the queues of `prep.to_bind` on `device` in recorded order and
  /// binds the addresses. Returns the replayed ops.
  std::vector<ReplayedOp> replay(const LaunchPreparation& prep, std::uint32_t device);

  /// A non-lazy malloc of `symbol` shadows any earlier lazy object.
  void forget_symbol(const std::string& symbol) { by_symbol_.erase(symbol); }

  std::optional<PseudoAddress> address_of(const std::string& symbol) const;
  bool is_bound(const PseudoAddress& addr) const { return bound_.count(addr.id) > 0; }
  std::optional<DeviceBinding> binding(const PseudoAddress& addr) const;
  const std::vector<GpuOp>& queue(const PseudoAddress& addr) const;
  Bytes heap_limit_bytes() const { return heap_limit_; }
  const std::vector<GpuOp>& heap_limit_log() const { return heap_log_; }

  /// Human-readable dump of every queue, one line per address.
  std::string describe() const;

 private:
  struct Entry {
    PseudoAddress address;
    std::vector<GpuOp> ops;
  };

  Entry& entry(const PseudoAddress& addr);
  const Entry& entry(const PseudoAddress& addr) const;

  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, Entry> queues_;
  std::map<std::string, std::uint64_t> by_symbol_;
  std::set<std::uint64_t> claimed_;
  std::map<std::uint64_t, DeviceBinding> bound_;
  std::map<std::uint32_t, std::uint64_t> next_device_address_;
  Bytes heap_limit_ = kDefaultHeapLimit;
  std::vector<GpuOp> heap_log_;
};

}  // namespace mgb
