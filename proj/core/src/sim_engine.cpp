#include "mgb/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <tuple>

#include <json.hpp>

#include "mgb/error.hpp"
#include "mgb/lazy_runtime.hpp"
#include "mgb/task_builder.hpp"

namespace mgb {

const char* to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Blocked: return "blocked";
    case JobState::Done: return "done";
    case JobState::Crashed: return "crashed";
  }
  return "?";
}

const char* to_string(CrashKind k) { return k == CrashKind::Oom ? "oom" : "rejected"; }

void SimConfig::validate() const {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (devices.empty()) throw ConfigError("no devices configured");
  for (const auto& d : devices) d.validate();
  if (policy.kind == PolicyKind::CoreToGpu && policy.cg_ratio == 0) throw ConfigError("cg ratio must be positive");
  if (!(host_ns_per_byte >= 0.0)) throw ConfigError("host copy cost must be non-negative");
}

std::size_t SimReport::completed() const {
  return static_cast<std::size_t>(
      std::count_if(jobs.begin(), jobs.end(), [](const JobRecord& j) { return j.state == JobState::Done; }));
}

std::size_t SimReport::crashed() const {
  return static_cast<std::size_t>(
      std::count_if(jobs.begin(), jobs.end(), [](const JobRecord& j) { return j.state == JobState::Crashed; }));
}

std::size_t SimReport::oom_crashes() const {
  return static_cast<std::size_t>(
      std::count_if(crashes.begin(), crashes.end(), [](const CrashRecord& c) { return c.kind == CrashKind::Oom; }));
}

double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 job_rng(std::uint64_t seed, std::uint64_t job_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(job_id), static_cast<std::uint32_t>(job_id >> 32)};
  return std::mt19937_64(seq);
}

std::vector<BlockIndex> sample_path(const FunctionGraph& f, std::mt19937_64& rng) {
  const Cfg cfg = Cfg::of(f);
  std::vector<bool> visited(cfg.size(), false);

  // Can `from` reach the exit through unvisited blocks only?
  auto reaches_exit = [&](BlockIndex from) {
    std::vector<bool> seen = visited;
    std::vector<BlockIndex> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      auto b = stack.back();
      stack.pop_back();
      if (b == cfg.exit) return true;
      for (auto s : cfg.succs[b]) {
        if (!seen[s]) {
          seen[s] = true;
          stack.push_back(s);
        }
      }
    }
    return false;
  };

  std::vector<BlockIndex> path{cfg.entry};
  visited[cfg.entry] = true;
  BlockIndex cur = cfg.entry;
  while (cur != cfg.exit) {
    const auto& succs = cfg.succs[cur];
    std::vector<BlockIndex> open;
    for (auto s : succs) {
      if (!visited[s] && reaches_exit(s)) open.push_back(s);
    }
    if (open.empty()) throw ContractViolation("no simple path to the exit from block '" + f.blocks[cur].label + "'");
    BlockIndex next = open.front();
    if (succs.size() == 2) {
      const double p = f.blocks[cur].taken_prob.value_or(0.5);
      const bool first = unit_double(rng) < p;
      if (open.size() == 2) next = first ? succs[0] : succs[1];
    }
    visited[next] = true;
    path.push_back(next);
    cur = next;
  }
  return path;
}

namespace {

enum class EventKind : int { KernelEnd, TaskEnd, OomCrash, JobEnd, ReleaseRepack, TaskBegin, HostOpDone, WorkerPull };

struct Event {
  Micros time = 0;
  EventKind kind = EventKind::WorkerPull;
  std::uint64_t seq = 0;
  std::size_t job = 0;
  std::uint32_t device = 0;
  std::uint64_t epoch = 0;
  std::uint32_t worker = 0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.kind, a.seq) > std::tie(b.time, b.kind, b.seq);
  }
};

enum class StepKind { Acquire, Begin, Kernel, End, Alloc, Free, SetHeap, Delay };

struct Step {
  StepKind kind = StepKind::Kernel;
  const GpuOp* op = nullptr;
  std::size_t instance = 0;
  Micros delay = 0;
};

struct Instance {
  const GpuTask* task = nullptr;
  std::size_t task_index = 0;
  std::size_t first_flat = 0;
  // Memory ops on the task's objects and the task's launches, in path order.
  std::vector<const GpuOp*> ops;
  std::size_t last_launch = 0;
  std::uint64_t tenant = 0;
  bool requested = false;
  ResourceRequest request;
  std::vector<LaunchPreparation> preps;
  Bytes executed_static = 0;
};

struct JobRun {
  const WorkloadJob* src = nullptr;
  std::optional<TaskAnalysis> analysis;
  Program inlined;
  std::vector<const GpuOp*> flat;
  std::vector<std::pair<std::size_t, const GpuOp*>> heap_ops;
  std::size_t heap_fed = 0;
  std::vector<Instance> instances;
  std::vector<Step> steps;
  std::size_t pc = 0;
  JobRecord rec;
  std::optional<std::uint32_t> device;
  Micros blocked_since = 0;
  std::uint32_t worker = 0;
  LazyState lazy;
  std::map<std::string, std::vector<Bytes>> live;
  Bytes heap = kDefaultHeapLimit;
  bool heap_reserved = false;
  std::optional<std::size_t> active;
  bool crash_pending = false;
};

struct RunningKernel {
  std::size_t job = 0;
  std::string name;
  double remaining = 0;
  double demand = 0;
  Micros start = 0;
  Micros solo = 0;
};

struct DeviceRun {
  std::vector<RunningKernel> kernels;
  Micros last = 0;
  double rate = 1.0;
  std::uint64_t epoch = 0;
};

std::uint64_t kernel_warps(const GpuOp& launch) {
  return launch.grid.volume() * ((launch.block.volume() + kWarpSize - 1) / kWarpSize);
}

class Engine {
 public:
  Engine(const Workload& w, const SimConfig& cfg, const SimHooks& hooks)
      : workload_(w), cfg_(cfg), hooks_(hooks), sched_(cfg.policy, cfg.devices), devices_(cfg.devices.size()),
        running_(cfg.devices.size(), 0) {}

  SimReport run() {
    for (const auto& job : workload_.jobs) prepare(job);
    for (std::uint32_t w = 0; w < cfg_.workers; ++w) post({0, EventKind::WorkerPull, 0, 0, 0, 0, w});
    while (!events_.empty()) {
      Event e = events_.top();
      events_.pop();
      now_ = e.time;
      dispatch(e);
      if (hooks_.observer) {
        SimSnapshot snap{now_, sched_, running_, events_.empty() || events_.top().time > now_};
        hooks_.observer(snap);
      }
    }
    return finish();
  }

 private:
  // ---- setup ----

  void prepare(const WorkloadJob& src) {
    auto run = std::make_unique<JobRun>();
    run->src = &src;
    run->rec.job_id = src.job_id;
    const bool mgb = !cfg_.policy.job_level();
    if (mgb) {
      run->analysis = analyze_program(cfg_.force_lazy ? force_lazy(src.program) : src.program);
    } else {
      run->inlined = inline_calls(src.program);
    }
    const FunctionGraph& f = mgb ? run->analysis->program.main_function() : run->inlined.main_function();
    auto rng = job_rng(cfg_.seed, src.job_id);
    for (auto b : sample_path(f, rng)) {
      for (const auto& op : f.blocks[b].ops) {
        if (op.kind == OpKind::SetHeapLimit) run->heap_ops.emplace_back(run->flat.size(), &op);
        run->flat.push_back(&op);
      }
    }
    if (mgb) {
      build_task_steps(*run);
    } else {
      build_job_steps(*run);
    }
    job_index_.emplace(src.job_id, jobs_.size());
    jobs_.push_back(std::move(run));
  }

  Micros copy_cost(Bytes bytes) const {
    if (cfg_.host_ns_per_byte <= 0.0) return 0;
    return static_cast<Micros>(std::ceil(static_cast<double>(bytes) * cfg_.host_ns_per_byte / 1000.0));
  }

  void build_task_steps(JobRun& run) {
    const auto& tasks = run.analysis->tasks;
    std::map<OpId, std::size_t> task_of_launch;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      for (const auto& u : tasks[t].unit_tasks) task_of_launch.emplace(u.launch_op, t);
    }
    std::map<std::size_t, std::size_t> first_launch;
    for (std::size_t i = 0; i < run.flat.size(); ++i) {
      const auto* op = run.flat[i];
      if (op->kind == OpKind::Launch) first_launch.try_emplace(task_of_launch.at(op->id), i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (auto [t, pos] : first_launch) order.emplace_back(pos, t);
    std::sort(order.begin(), order.end());
    for (auto [pos, t] : order) {
      Instance inst;
      inst.task = &tasks[t];
      inst.task_index = t;
      inst.first_flat = pos;
      for (const auto* op : run.flat) {
        const bool mine = op->kind == OpKind::Launch ? task_of_launch.at(op->id) == t
                                                      : op->is_memory_op() && tasks[t].mem_objs.count(op->symbol());
        if (!mine) continue;
        if (op->kind == OpKind::Launch) inst.last_launch = inst.ops.size();
        inst.ops.push_back(op);
      }
      const std::size_t idx = run.instances.size();
      run.instances.push_back(std::move(inst));
      run.steps.push_back({StepKind::Begin, nullptr, idx, 0});
      Bytes copied = 0;
      for (const auto* op : run.instances.back().ops) {
        if (op->kind == OpKind::MemcpyH2D || op->kind == OpKind::MemcpyD2H || op->kind == OpKind::Memset) {
          copied += op->bytes;
        }
      }
      if (auto c = copy_cost(copied)) run.steps.push_back({StepKind::Delay, nullptr, idx, c});
      for (const auto* op : run.instances.back().ops) {
        if (op->kind == OpKind::Launch) run.steps.push_back({StepKind::Kernel, op, idx, 0});
      }
      run.steps.push_back({StepKind::End, nullptr, idx, 0});
    }
  }

  void build_job_steps(JobRun& run) {
    run.steps.push_back({StepKind::Acquire, nullptr, 0, 0});
    for (const auto* op : run.flat) {
      switch (op->kind) {
        case OpKind::Malloc: run.steps.push_back({StepKind::Alloc, op, 0, 0}); break;
        case OpKind::Free: run.steps.push_back({StepKind::Free, op, 0, 0}); break;
        case OpKind::SetHeapLimit: run.steps.push_back({StepKind::SetHeap, op, 0, 0}); break;
        case OpKind::Launch: run.steps.push_back({StepKind::Kernel, op, 0, 0}); break;
        case OpKind::MemcpyH2D:
        case OpKind::MemcpyD2H:
        case OpKind::Memset:
          if (auto c = copy_cost(op->bytes)) run.steps.push_back({StepKind::Delay, op, 0, c});
          break;
        case OpKind::Call: break;
      }
    }
  }

  // ---- event plumbing ----

  void post(Event e) {
    e.seq = seq_++;
    events_.push(e);
  }

  void post_repack() {
    if (repack_posted_) return;
    repack_posted_ = true;
    post({now_, EventKind::ReleaseRepack});
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::WorkerPull: on_worker_pull(e.worker); break;
      case EventKind::KernelEnd: on_kernel_end(e.device, e.epoch); break;
      case EventKind::TaskBegin: on_admitted(e.job, e.device); break;
      case EventKind::HostOpDone: advance(e.job); break;
      case EventKind::ReleaseRepack: on_repack(); break;
      case EventKind::OomCrash: on_crash(e.job); break;
      case EventKind::JobEnd: on_job_end(e.job); break;
      case EventKind::TaskEnd: on_task_end(e.job); break;
    }
  }

  void on_worker_pull(std::uint32_t worker) {
    if (next_job_ >= jobs_.size()) return;
    auto& run = *jobs_[next_job_];
    run.worker = worker;
    run.rec.state = JobState::Running;
    run.rec.start_us = now_;
    advance(next_job_++);
  }

  // ---- job execution ----

  void advance(std::size_t j) {
    auto& run = *jobs_[j];
    while (run.pc < run.steps.size()) {
      const Step& step = run.steps[run.pc];
      switch (step.kind) {
        case StepKind::Acquire:
          if (!request(j, job_request(run))) return;
          break;
        case StepKind::Begin:
          if (!request(j, task_request(j, step.instance))) return;
          if (run.crash_pending) return;
          break;
        case StepKind::Kernel:
          if (!run.heap_reserved && cfg_.policy.job_level()) {
            if (!charge(j, run.heap)) return;
            run.heap_reserved = true;
          }
          start_kernel(j, *step.op);
          ++run.pc;
          return;
        case StepKind::End:
          ++run.pc;
          post({now_, EventKind::TaskEnd, 0, j});
          return;
        case StepKind::Alloc:
          if (!charge(j, step.op->bytes)) return;
          run.live[step.op->symbol()].push_back(step.op->bytes);
          break;
        case StepKind::Free: {
          auto it = run.live.find(step.op->symbol());
          if (it != run.live.end() && !it->second.empty()) {
            sched_.devices()[*run.device].release_memory(run.src->job_id, it->second.back());
            it->second.pop_back();
          }
          break;
        }
        case StepKind::SetHeap:
          if (!run.heap_reserved) run.heap = step.op->bytes;
          break;
        case StepKind::Delay:
          ++run.pc;
          post({now_ + step.delay, EventKind::HostOpDone, 0, j});
          return;
      }
      ++run.pc;
    }
    post({now_, EventKind::JobEnd, 0, j});
  }

  // Job-level allocation on an uninstrumented job's device. False when the
  // job crashed.
  bool charge(std::size_t j, Bytes bytes) {
    auto& run = *jobs_[j];
    auto& dev = sched_.devices()[*run.device];
    if (dev.reserve_memory(run.src->job_id, bytes)) return true;
    crash(j, bytes, dev.free_mem_bytes(), CrashKind::Oom);
    return false;
  }

  void crash(std::size_t j, Bytes requested, Bytes free, CrashKind kind) {
    auto& run = *jobs_[j];
    run.crash_pending = true;
    crashes_.push_back({run.src->job_id, now_, requested, free, kind});
    post({now_, EventKind::OomCrash, 0, j});
  }

  ScheduleRequest job_request(const JobRun& run) const {
    ScheduleRequest req;
    req.task_id = run.src->job_id;
    req.job_id = run.src->job_id;
    Bytes mem = run.heap;
    std::uint64_t warps = 0;
    for (const auto* op : run.flat) {
      if (op->kind == OpKind::Malloc) mem += op->bytes;
      if (op->kind == OpKind::Launch) warps = std::max(warps, kernel_warps(*op));
    }
    req.resources.mem_bytes = mem;
    req.resources.total_warps = warps;
    return req;
  }

  ScheduleRequest task_request(std::size_t j, std::size_t i) {
    auto& run = *jobs_[j];
    auto& inst = run.instances[i];
    if (!inst.requested) {
      inst.requested = true;
      inst.tenant = next_tenant_++;
      while (run.heap_fed < run.heap_ops.size() && run.heap_ops[run.heap_fed].first < inst.first_flat) {
        run.lazy.record_heap_limit(*run.heap_ops[run.heap_fed++].second);
      }
      ResourceRequest base = inst.task->resources;
      if (!inst.task->unit_tasks.front().heap_op) {
        base.mem_bytes = base.mem_bytes - base.heap_limit_bytes + run.lazy.heap_limit_bytes();
        base.heap_limit_bytes = run.lazy.heap_limit_bytes();
      }
      Bytes lazy_bytes = 0;
      for (std::size_t k = 0; k < inst.ops.size(); ++k) {
        const GpuOp& op = *inst.ops[k];
        if (op.kind == OpKind::Malloc && !op.lazy) inst.executed_static += op.bytes;
        if (k > inst.last_launch) continue;
        if (op.kind == OpKind::Launch) {
          auto prep = run.lazy.kernel_launch_prepare(op, base);
          lazy_bytes += prep.lazy_bytes;
          if (hooks_.lazy_trace) hooks_.lazy_trace(run.src->job_id, run.lazy.describe());
          inst.preps.push_back(std::move(prep));
        } else {
          record_host_op(run, op);
        }
      }
      inst.request = base;
      inst.request.mem_bytes += lazy_bytes;
      tasks_.push_back({inst.tenant, run.src->job_id, inst.task_index, inst.request});
    }
    ScheduleRequest req;
    req.task_id = inst.tenant;
    req.job_id = run.src->job_id;
    req.resources = inst.request;
    return req;
  }

  static void record_host_op(JobRun& run, const GpuOp& op) {
    if (op.kind == OpKind::Malloc) {
      if (op.lazy) {
        run.lazy.lazy_alloc(op);
      } else {
        run.lazy.forget_symbol(op.symbol());
      }
      return;
    }
    if (!op.lazy) return;
    auto addr = run.lazy.address_of(op.symbol());
    if (addr && !run.lazy.is_bound(*addr)) run.lazy.record_op(*addr, op);
  }

  // Submits the step's request. True when the job may continue now.
  bool request(std::size_t j, const ScheduleRequest& req) {
    auto& run = *jobs_[j];
    auto d = sched_.submit(req, now_);
    switch (d.outcome) {
      case Outcome::Assign:
        assigned(j, d.device);
        return !run.crash_pending;
      case Outcome::Defer:
        run.rec.state = JobState::Blocked;
        run.blocked_since = now_;
        return false;
      case Outcome::Reject:
        crash(j, req.resources.mem_bytes, 0, CrashKind::Rejected);
        return false;
    }
    return false;
  }

  void assigned(std::size_t j, std::uint32_t device) {
    auto& run = *jobs_[j];
    run.device = device;
    const Step& step = run.steps[run.pc];
    if (step.kind != StepKind::Begin) return;
    run.active = step.instance;
    auto& inst = run.instances[step.instance];
    Bytes executed = inst.executed_static;
    for (const auto& prep : inst.preps) {
      for (const auto& r : run.lazy.replay(prep, device)) {
        if (r.op.kind == OpKind::Malloc) executed += run.lazy.binding(r.address)->bytes;
      }
    }
    for (std::size_t k = inst.last_launch + 1; k < inst.ops.size(); ++k) record_host_op(run, *inst.ops[k]);
    const Bytes used = executed + inst.request.heap_limit_bytes;
    if (used > inst.request.mem_bytes) {
      crash(j, used, sched_.devices()[device].free_mem_bytes(), CrashKind::Oom);
    }
  }

  void on_admitted(std::size_t j, std::uint32_t device) {
    auto& run = *jobs_[j];
    run.rec.state = JobState::Running;
    run.rec.wait_us += now_ - run.blocked_since;
    assigned(j, device);
    if (run.crash_pending) return;
    ++run.pc;
    advance(j);
  }

  void on_repack() {
    repack_posted_ = false;
    for (auto& [req, d] : sched_.on_release(now_)) {
      const std::size_t j = job_index_.at(req.job_id);
      if (d.outcome == Outcome::Assign) {
        post({now_, EventKind::TaskBegin, 0, j, d.device});
      } else if (d.outcome == Outcome::Reject) {
        crash(j, req.resources.mem_bytes, 0, CrashKind::Rejected);
      }
    }
  }

  void on_task_end(std::size_t j) {
    auto& run = *jobs_[j];
    sched_.release(*run.device, run.instances[*run.active].tenant);
    run.active.reset();
    post_repack();
    advance(j);
  }

  void release_worker(JobRun& run) { post({now_, EventKind::WorkerPull, 0, 0, 0, 0, run.worker}); }

  void on_job_end(std::size_t j) {
    auto& run = *jobs_[j];
    run.rec.state = JobState::Done;
    run.rec.completion_us = now_;
    if (cfg_.policy.job_level() && run.device) {
      sched_.release(*run.device, run.src->job_id);
      post_repack();
    }
    release_worker(run);
  }

  void on_crash(std::size_t j) {
    auto& run = *jobs_[j];
    if (run.rec.state == JobState::Blocked) run.rec.wait_us += now_ - run.blocked_since;
    run.rec.state = JobState::Crashed;
    run.rec.completion_us = now_;
    if (run.device) {
      if (cfg_.policy.job_level()) {
        sched_.release(*run.device, run.src->job_id);
      } else if (run.active) {
        sched_.release(*run.device, run.instances[*run.active].tenant);
      }
      post_repack();
    }
    release_worker(run);
  }

  // ---- kernels ----

  void start_kernel(std::size_t j, const GpuOp& launch) {
    const auto d = *jobs_[j]->device;
    auto& dev = devices_[d];
    progress(d);
    const double cap = static_cast<double>(cfg_.devices[d].warp_capacity());
    dev.kernels.push_back({j, launch.name, static_cast<double>(launch.duration_us),
                           std::min(cap, static_cast<double>(kernel_warps(launch))), now_, launch.duration_us});
    running_[d] = dev.kernels.size();
    reschedule(d);
  }

  void progress(std::uint32_t d) {
    auto& dev = devices_[d];
    const double dt = static_cast<double>(now_ - dev.last);
    if (dt > 0) {
      for (auto& k : dev.kernels) k.remaining -= dev.rate * dt;
    }
    dev.last = now_;
  }

  void reschedule(std::uint32_t d) {
    auto& dev = devices_[d];
    ++dev.epoch;
    if (dev.kernels.empty()) return;
    double demand = 0;
    for (const auto& k : dev.kernels) demand += k.demand;
    const double cap = static_cast<double>(cfg_.devices[d].warp_capacity());
    dev.rate = (cfg_.interference == InterferenceModel::None || demand <= cap) ? 1.0 : cap / demand;
    double soonest = 0;
    bool first = true;
    for (const auto& k : dev.kernels) {
      const double left = std::max(0.0, k.remaining) / dev.rate;
      if (first || left < soonest) soonest = left;
      first = false;
    }
    const auto delta = static_cast<Micros>(std::ceil(soonest - 1e-9));
    post({now_ + std::max<Micros>(0, delta), EventKind::KernelEnd, 0, 0, d, dev.epoch});
  }

  void on_kernel_end(std::uint32_t d, std::uint64_t epoch) {
    auto& dev = devices_[d];
    if (epoch != dev.epoch) return;
    progress(d);
    std::vector<std::size_t> done;
    std::vector<RunningKernel> keep;
    for (auto& k : dev.kernels) {
      if (k.remaining <= 1e-6) {
        kernels_.push_back({jobs_[k.job]->src->job_id, k.name, d, k.start, now_, k.solo});
        done.push_back(k.job);
      } else {
        keep.push_back(std::move(k));
      }
    }
    dev.kernels = std::move(keep);
    running_[d] = dev.kernels.size();
    reschedule(d);
    for (auto j : done) advance(j);
  }

  SimReport finish() {
    SimReport r;
    r.policy = cfg_.policy.name();
    r.workers = cfg_.workers;
    r.seed = cfg_.seed;
    r.workload_hash = workload_.hash();
    for (const auto& d : cfg_.devices) r.devices.push_back(d.name);
    for (const auto& run : jobs_) {
      if (run->rec.state != JobState::Done && run->rec.state != JobState::Crashed) {
        throw ContractViolation("job " + std::to_string(run->src->job_id) + " never finished");
      }
      r.makespan_us = std::max(r.makespan_us, run->rec.completion_us);
      r.jobs.push_back(run->rec);
    }
    r.kernels = std::move(kernels_);
    r.crashes = std::move(crashes_);
    r.tasks = std::move(tasks_);
    r.decisions = sched_.log();
    return r;
  }

  const Workload& workload_;
  const SimConfig& cfg_;
  const SimHooks& hooks_;
  Scheduler sched_;
  std::vector<DeviceRun> devices_;
  std::vector<std::size_t> running_;
  std::vector<std::unique_ptr<JobRun>> jobs_;
  std::map<std::uint64_t, std::size_t> job_index_;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::uint64_t seq_ = 0;
  Micros now_ = 0;
  std::size_t next_job_ = 0;
  std::uint64_t next_tenant_ = 1;
  bool repack_posted_ = false;
  std::vector<KernelRecord> kernels_;
  std::vector<CrashRecord> crashes_;
  std::vector<TaskRecord> tasks_;
};

}  // namespace

SimReport run_sim(const Workload& workload, const SimConfig& config, const SimHooks& hooks) {
  config.validate();
  if (workload.jobs.empty()) throw ConfigError("workload has no jobs");
  return Engine(workload, config, hooks).run();
}

std::string report_to_json(const SimReport& r) {
  using nlohmann::json;
  json j;
  j["policy"] = r.policy;
  j["workers"] = r.workers;
  j["seed"] = r.seed;
  j["workload_hash"] = r.workload_hash;
  j["devices"] = r.devices;
  j["makespan_us"] = r.makespan_us;
  j["jobs"] = json::array();
  for (const auto& x : r.jobs) {
    j["jobs"].push_back({{"job_id", x.job_id},
                         {"state", to_string(x.state)},
                         {"start_us", x.start_us},
                         {"completion_us", x.completion_us},
                         {"turnaround_us", x.turnaround_us()},
                         {"wait_us", x.wait_us}});
  }
  j["kernels"] = json::array();
  for (const auto& k : r.kernels) {
    j["kernels"].push_back({{"job_id", k.job_id},
                            {"kernel", k.kernel},
                            {"device", k.device},
                            {"start_us", k.start_us},
                            {"end_us", k.end_us},
                            {"solo_us", k.solo_us},
                            {"actual_us", k.actual_us()}});
  }
  j["crashes"] = json::array();
  for (const auto& c : r.crashes) {
    j["crashes"].push_back({{"job_id", c.job_id},
                            {"time_us", c.time_us},
                            {"requested_bytes", c.requested_bytes},
                            {"free_bytes", c.free_bytes},
                            {"kind", to_string(c.kind)}});
  }
  j["tasks"] = json::array();
  for (const auto& t : r.tasks) {
    j["tasks"].push_back({{"instance", t.instance},
                          {"job_id", t.job_id},
                          {"task", t.task},
                          {"mem_bytes", t.request.mem_bytes},
                          {"heap_limit_bytes", t.request.heap_limit_bytes},
                          {"thread_blocks", t.request.thread_blocks},
                          {"warps_per_block", t.request.warps_per_block},
                          {"total_warps", t.request.total_warps}});
  }
  j["decisions"] = json::array();
  for (const auto& d : r.decisions) {
    json rec{{"time_ms", static_cast<double>(d.time_us) / 1000.0},
             {"task_id", d.task_id},
             {"job_id", d.job_id},
             {"policy", r.policy},
             {"outcome", to_string(d.outcome)},
             {"requested_bytes", d.requested_bytes},
             {"free_mem_after", d.free_mem_after},
             {"in_use_warps_after", d.in_use_warps_after}};
    rec["device"] = d.device ? json(*d.device) : json(nullptr);
    j["decisions"].push_back(std::move(rec));
  }
  return j.dump(1);
}

}  // namespace mgb
