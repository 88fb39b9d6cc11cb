#include "mgb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mgb/error.hpp"

namespace mgb {

double throughput_per_min(const SimReport& r) {
  if (r.makespan_us <= 0) return 0.0;
  return static_cast<double>(r.completed()) * 60e6 / static_cast<double>(r.makespan_us);
}

double avg_turnaround_ms(const SimReport& r) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& j : r.jobs) {
    if (j.state != JobState::Done) continue;
    sum += static_cast<double>(j.turnaround_us()) / 1000.0;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double avg_wait_ms(const SimReport& r) {
  if (r.jobs.empty()) return 0.0;
  double sum = 0;
  for (const auto& j : r.jobs) sum += static_cast<double>(j.wait_us) / 1000.0;
  return sum / static_cast<double>(r.jobs.size());
}

double kernel_slowdown_pct(const SimReport& r) {
  if (r.kernels.empty()) return 0.0;
  double sum = 0;
  for (const auto& k : r.kernels) {
    sum += static_cast<double>(k.actual_us()) / static_cast<double>(k.solo_us) - 1.0;
  }
  return 100.0 * sum / static_cast<double>(r.kernels.size());
}

double crash_pct(const SimReport& r) {
  if (r.jobs.empty()) return 0.0;
  return 100.0 * static_cast<double>(r.crashed()) / static_cast<double>(r.jobs.size());
}

MetricsRow compute_metrics(const SimReport& report, const SimReport& baseline) {
  if (report.workload_hash != baseline.workload_hash) throw ConfigError("baseline was run on a different workload");
  if (report.seed != baseline.seed) throw ConfigError("baseline was run with a different seed");
  MetricsRow m;
  m.policy = report.policy;
  m.workers = report.workers;
  m.seed = report.seed;
  m.throughput = throughput_per_min(report);
  const double base_tp = throughput_per_min(baseline);
  m.norm_throughput = base_tp > 0 ? m.throughput / base_tp : 0.0;
  m.avg_turnaround_ms = avg_turnaround_ms(report);
  const double base_tat = avg_turnaround_ms(baseline);
  m.speedup = m.avg_turnaround_ms > 0 ? base_tat / m.avg_turnaround_ms : 0.0;
  m.crash_pct = crash_pct(report);
  m.slowdown_pct = kernel_slowdown_pct(report);
  m.makespan_ms = static_cast<double>(report.makespan_us) / 1000.0;
  return m;
}

std::vector<MetricsRow> compare(const CompareSpec& spec) {
  if (!spec.workloads) throw ConfigError("compare needs a workload source");
  if (spec.policies.empty() || spec.workers.empty() || spec.seeds.empty()) {
    throw ConfigError("compare needs at least one policy, worker count and seed");
  }
  std::vector<MetricsRow> rows;
  for (auto seed : spec.seeds) {
    for (const auto& w : spec.workloads(seed)) {
      for (auto workers : spec.workers) {
        SimConfig cfg;
        cfg.workers = workers;
        cfg.seed = seed;
        cfg.devices = spec.devices;
        cfg.interference = spec.interference;
        cfg.policy = PolicyConfig::parse("sa");
        const SimReport base = run_sim(w, cfg);
        for (const auto& p : spec.policies) {
          cfg.policy = p;
          const SimReport r = p.kind == PolicyKind::SingleAssignment ? base : run_sim(w, cfg);
          auto row = compute_metrics(r, base);
          row.workload = w.name;
          rows.push_back(std::move(row));
        }
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.workload, a.policy, a.seed, a.workers) < std::tie(b.workload, b.policy, b.seed, b.workers);
  });
  return rows;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Row values in CSV column order, with their printed precision.
std::vector<std::pair<double, int>> row_values(const MetricsRow& r) {
  return {{r.throughput, 6}, {r.norm_throughput, 6}, {r.avg_turnaround_ms, 3}, {r.speedup, 6},
          {r.crash_pct, 6},  {r.slowdown_pct, 6},    {r.makespan_ms, 3}};
}

double as_printed(double v, int digits) { return std::stod(fixed(v, digits)); }

}  // namespace

std::string metrics_csv_header() {
  return "workload,policy,workers,seed,throughput,norm_throughput,avg_turnaround_ms,speedup,crash_pct,slowdown_pct,"
         "makespan_ms\n";
}

std::string rows_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_csv_header();
  for (const auto& r : rows) {
    out += r.workload + ',' + r.policy + ',' + std::to_string(r.workers) + ',' + std::to_string(r.seed);
    for (auto [v, d] : row_values(r)) out += ',' + fixed(v, d);
    out += '\n';
  }
  return out;
}

std::string rows_to_json(const std::vector<MetricsRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"workload", r.workload},
                   {"policy", r.policy},
                   {"workers", r.workers},
                   {"seed", r.seed},
                   {"throughput", r.throughput},
                   {"norm_throughput", r.norm_throughput},
                   {"avg_turnaround_ms", r.avg_turnaround_ms},
                   {"speedup", r.speedup},
                   {"crash_pct", r.crash_pct},
                   {"slowdown_pct", r.slowdown_pct},
                   {"makespan_ms", r.makespan_ms}});
  }
  return arr.dump(1) + "\n";
}

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names{"throughput", "norm_throughput", "avg_turnaround_ms", "speedup",
                                              "crash_pct",  "slowdown_pct",    "makespan_ms"};
  return names;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::uint32_t>;
  std::map<Key, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.workload, r.policy, r.workers}].push_back(&r);
  std::vector<SummaryRow> out;
  const std::size_t m = summary_metrics().size();
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    std::tie(s.workload, s.policy, s.workers) = key;
    s.runs = members.size();
    s.mean.assign(m, 0.0);
    s.stddev.assign(m, 0.0);
    const double n = static_cast<double>(members.size());
    for (const auto* r : members) {
      auto vals = row_values(*r);
      for (std::size_t i = 0; i < m; ++i) s.mean[i] += as_printed(vals[i].first, vals[i].second);
    }
    for (auto& v : s.mean) v /= n;
    for (const auto* r : members) {
      auto vals = row_values(*r);
      for (std::size_t i = 0; i < m; ++i) {
        const double d = as_printed(vals[i].first, vals[i].second) - s.mean[i];
        s.stddev[i] += d * d;
      }
    }
    for (auto& v : s.stddev) v = std::sqrt(v / n);
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "workload,policy,workers,runs";
  for (const auto& name : summary_metrics()) out += ',' + name + "_mean," + name + "_std";
  out += '\n';
  for (const auto& s : rows) {
    out += s.workload + ',' + s.policy + ',' + std::to_string(s.workers) + ',' + std::to_string(s.runs);
    for (std::size_t i = 0; i < s.mean.size(); ++i) out += ',' + fixed(s.mean[i], 6) + ',' + fixed(s.stddev[i], 6);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_rows_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != metrics_csv_header()) throw ConfigError("unexpected metrics CSV header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw ConfigError("metrics CSV row has " + std::to_string(f.size()) + " fields");
    try {
      MetricsRow r;
      r.workload = f[0];
      r.policy = f[1];
      r.workers = static_cast<std::uint32_t>(std::stoul(f[2]));
      r.seed = std::stoull(f[3]);
      r.throughput = std::stod(f[4]);
      r.norm_throughput = std::stod(f[5]);
      r.avg_turnaround_ms = std::stod(f[6]);
      r.speedup = std::stod(f[7]);
      r.crash_pct = std::stod(f[8]);
      r.slowdown_pct = std::stod(f[9]);
      r.makespan_ms = std::stod(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("malformed metrics CSV row: " + line);
    }
  }
  return rows;
}

}  // namespace mgb
