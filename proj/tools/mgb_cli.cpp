// mgb: run scheduling simulations, generate workloads, inspect GPU tasks.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgb/error.hpp"
#include "mgb/metrics.hpp"
#include "mgb/sim_engine.hpp"
#include "mgb/task_builder.hpp"
#include "mgb/workload_gen.hpp"

namespace {

struct Globals {
  std::string devices = "p100:2";
  std::vector<std::string> sched{"mgb-warps"};
  std::vector<std::uint32_t> workers{10};
  std::vector<std::uint64_t> seeds{0};
  std::string out;
  std::string format = "json";
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw mgb::ConfigError("cannot write '" + path + "'");
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mgb::ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

mgb::Catalog catalog_arg(const std::string& name) {
  if (name == "rodinia") return mgb::builtin_catalog();
  if (name == "darknet") return mgb::darknet_catalog();
  return mgb::load_catalog(name);
}

mgb::InterferenceModel interference_arg(const std::string& s) {
  if (s == "ps") return mgb::InterferenceModel::ProcessorSharing;
  if (s == "none") return mgb::InterferenceModel::None;
  throw mgb::ConfigError("unknown interference model '" + s + "'");
}

std::string decisions_jsonl(const mgb::SimReport& r) {
  std::string out;
  for (const auto& d : r.decisions) {
    nlohmann::ordered_json j;
    j["time_ms"] = static_cast<double>(d.time_us) / 1000.0;
    j["task_id"] = d.task_id;
    j["policy"] = r.policy;
    j["outcome"] = mgb::to_string(d.outcome);
    j["device"] = d.device ? nlohmann::ordered_json(*d.device) : nlohmann::ordered_json(nullptr);
    j["free_mem_after"] = d.free_mem_after;
    j["in_use_warps_after"] = d.in_use_warps_after;
    out += j.dump() + "\n";
  }
  return out;
}

std::string tasks_jsonl(const mgb::TaskAnalysis& a) {
  std::string out;
  for (const auto& t : a.tasks) {
    nlohmann::ordered_json j;
    j["task_id"] = t.id;
    j["launches"] = nlohmann::ordered_json::array();
    for (const auto& u : t.unit_tasks) j["launches"].push_back(u.kernel);
    j["mem_objs"] = t.mem_objs;
    j["mem_bytes"] = t.resources.mem_bytes;
    j["thread_blocks"] = t.resources.thread_blocks;
    j["warps_per_block"] = t.resources.warps_per_block;
    j["probe"] = {{"block", t.probe.block}, {"index", t.probe.index}};
    j["lazy"] = t.lazy;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-GPU sharing simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--devices", g.devices, "Device inventory: p100:2, v100:4 or a JSON file")->capture_default_str();
  app.add_option("--sched", g.sched, "Policy: sa, cg:<ratio>, mgb-sm, mgb-warps")->delimiter(',')->capture_default_str();
  app.add_option("--workers", g.workers, "Worker pool size")->delimiter(',')->capture_default_str();
  app.add_option("--seed,--seeds", g.seeds, "Run seed(s)")->delimiter(',')->capture_default_str();
  app.add_option("--out", g.out, "Output file (stdout when omitted)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Simulate one workload under one policy");
  run->fallthrough();
  std::string workload_path, decision_log, interference = "ps";
  bool trace_lazy = false, strict_fifo = false, force_lazy = false;
  double host_ns_per_byte = 0;
  run->add_option("--workload", workload_path, "Workload JSON Lines file")->required();
  run->add_option("--decision-log", decision_log, "Write scheduler decisions as JSON Lines");
  run->add_option("--interference", interference, "ps or none")->capture_default_str();
  run->add_option("--host-ns-per-byte", host_ns_per_byte, "Host copy cost");
  run->add_flag("--trace-lazy", trace_lazy, "Dump lazy queues at every launch preparation");
  run->add_flag("--strict-fifo", strict_fifo, "Never admit past a deferred request");
  run->add_flag("--force-lazy", force_lazy, "Bind all memory through the lazy runtime");

  // gen-workload
  auto* gen = app.add_subcommand("gen-workload", "Generate a seeded large:small job mix");
  gen->fallthrough();
  std::string mix = "1:1", catalog = "rodinia";
  std::uint32_t jobs = 16;
  bool gen_lazy = false;
  gen->add_option("--mix", mix, "large:small ratio")->capture_default_str();
  gen->add_option("--jobs", jobs, "Number of jobs")->capture_default_str();
  gen->add_option("--catalog", catalog, "rodinia, darknet or a catalog JSON file")->capture_default_str();
  gen->add_flag("--lazy", gen_lazy, "Mark every generated allocation lazy");

  // build-tasks
  auto* build = app.add_subcommand("build-tasks", "Construct GPU tasks for a trace");
  build->fallthrough();
  std::string trace_path;
  bool dump_tasks = false, build_force_lazy = false, print_inlined = false;
  build->add_option("trace", trace_path, "Trace file (.gput)")->required();
  build->add_flag("--dump-tasks", dump_tasks, "One JSON object per task (default)");
  build->add_flag("--force-lazy", build_force_lazy, "Treat every memory op as lazy");
  build->add_flag("--print-inlined", print_inlined, "Print the inlined, lazy-annotated trace instead");

  // compare
  auto* cmp = app.add_subcommand("compare", "Policy grid over workloads, worker counts and seeds");
  cmp->fallthrough();
  std::vector<std::string> workloads;
  bool table1 = false;
  std::string summary_path, cmp_catalog = "rodinia", cmp_interference = "ps";
  cmp->add_option("--workload", workloads, "Workload file (repeatable)");
  cmp->add_flag("--table1", table1, "Generate W1-W8 for each seed");
  cmp->add_option("--catalog", cmp_catalog, "Catalog for --table1")->capture_default_str();
  cmp->add_option("--summary", summary_path, "Write mean/stddev summary CSV here");
  cmp->add_option("--interference", cmp_interference, "ps or none")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto devices = mgb::load_device_inventory(g.devices);
    if (*run) {
      mgb::SimConfig cfg;
      cfg.devices = devices;
      cfg.policy = mgb::PolicyConfig::parse(g.sched.at(0));
      cfg.policy.skip_ahead = !strict_fifo;
      cfg.workers = g.workers.at(0);
      cfg.seed = g.seeds.at(0);
      cfg.interference = interference_arg(interference);
      cfg.host_ns_per_byte = host_ns_per_byte;
      cfg.force_lazy = force_lazy;
      const auto w = mgb::load_workload(workload_path);
      mgb::SimHooks hooks;
      if (trace_lazy) {
        hooks.lazy_trace = [](std::uint64_t job, const std::string& dump) {
          std::cerr << "[lazy] job " << job << "\n" << dump;
        };
      }
      const auto report = mgb::run_sim(w, cfg, hooks);
      if (!decision_log.empty()) emit(decision_log, decisions_jsonl(report));
      if (g.format == "json") {
        emit(g.out, mgb::report_to_json(report) + "\n");
      } else {
        auto base_cfg = cfg;
        base_cfg.policy = mgb::PolicyConfig::parse("sa");
        const auto base = mgb::run_sim(w, base_cfg);
        auto row = mgb::compute_metrics(report, base);
        row.workload = w.name;
        emit(g.out, mgb::rows_to_csv({row}));
      }
    } else if (*gen) {
      auto spec = mgb::MixSpec::parse_ratio(mix);
      spec.n_jobs = jobs;
      spec.seed = g.seeds.at(0);
      auto cat = catalog_arg(catalog);
      if (gen_lazy) {
        for (auto& t : cat.templates) t.lazy = true;
      }
      emit(g.out, mgb::serialize_workload(mgb::gen_workload(spec, cat)));
    } else if (*build) {
      auto program = mgb::parse_program(read_text(trace_path));
      if (build_force_lazy) program = mgb::force_lazy(program);
      const auto analysis = mgb::analyze_program(program);
      (void)dump_tasks;
      emit(g.out, print_inlined ? mgb::print_program(analysis.program) : tasks_jsonl(analysis));
    } else if (*cmp) {
      mgb::CompareSpec spec;
      spec.devices = devices;
      spec.workers = g.workers;
      spec.seeds = g.seeds;
      spec.interference = interference_arg(cmp_interference);
      for (const auto& s : g.sched) spec.policies.push_back(mgb::PolicyConfig::parse(s));
      if (table1) {
        const auto cat = catalog_arg(cmp_catalog);
        spec.workloads = [cat](std::uint64_t seed) {
          std::vector<mgb::Workload> out;
          const auto mixes = mgb::table1_mixes(seed);
          for (std::size_t i = 0; i < mixes.size(); ++i) {
            auto w = mgb::gen_workload(mixes[i], cat);
            w.name = mgb::table1_name(i);
            out.push_back(std::move(w));
          }
          return out;
        };
      } else {
        if (workloads.empty()) throw mgb::ConfigError("compare needs --workload or --table1");
        std::vector<mgb::Workload> loaded;
        for (const auto& p : workloads) loaded.push_back(mgb::load_workload(p));
        spec.workloads = [loaded](std::uint64_t) { return loaded; };
      }
      const auto rows = mgb::compare(spec);
      emit(g.out, g.format == "json" ? mgb::rows_to_json(rows) : mgb::rows_to_csv(rows));
      if (!summary_path.empty()) emit(summary_path, mgb::summary_to_csv(mgb::summarize(rows)));
    }
  } catch (const mgb::ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const mgb::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mgb::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mgb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
