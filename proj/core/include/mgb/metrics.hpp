#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgb/sim_engine.hpp"

namespace mgb {

/// One policy run scored against the single-assignment run of the same
/// workload and seed. Throughput is completed jobs per minute.
struct MetricsRow {
  std::string workload;
  std::string policy;
  std::uint32_t workers = 0;
  std::uint64_t seed = 0;
  double throughput = 0;
  double norm_throughput = 0;
  double avg_turnaround_ms = 0;
  double speedup = 0;
  double crash_pct = 0;
  double slowdown_pct = 0;
  double makespan_ms = 0;

  bool operator==(const MetricsRow&) const = default;
};

/// Completed jobs per minute of makespan.
double throughput_per_min(const SimReport& r);
/// Mean turnaround of completed jobs; 0 when none completed.
double avg_turnaround_ms(const SimReport& r);
/// Mean deferral time over all jobs.
double avg_wait_ms(const SimReport& r);
/// Mean over kernels of (actual / solo - 1), as a percentage.
double kernel_slowdown_pct(const SimReport& r);
double crash_pct(const SimReport& r);

/// Throws ConfigError when the reports come from different workloads or
/// seeds.
MetricsRow compute_metrics(const SimReport& report, const SimReport& baseline);

struct CompareSpec {
  // Workloads for a given seed; each workload's name labels its rows.
  std::function<std::vector<Workload>(std::uint64_t seed)> workloads;
  std::vector<PolicyConfig> policies;
  std::vector<DeviceSpec> devices;
  std::vector<std::uint32_t> workers;
  std::vector<std::uint64_t> seeds;
  InterferenceModel interference = InterferenceModel::ProcessorSharing;
};

/// Full grid of runs, sorted by (workload, policy, seed, workers).
std::vector<MetricsRow> compare(const CompareSpec& spec);

std::string metrics_csv_header();
std::string rows_to_csv(const std::vector<MetricsRow>& rows);
std::string rows_to_json(const std::vector<MetricsRow>& rows);

/// Mean and population standard deviation per (workload, policy, workers),
/// computed from the values exactly as printed in the row CSV.
struct SummaryRow {
  std::string workload;
  std::string policy;
  std::uint32_t workers = 0;
  std::size_t runs = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Names of the summarized metrics, in column order.
const std::vector<std::string>& summary_metrics();
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

/// Parses rows written by rows_to_csv. Throws ConfigError.
std::vector<MetricsRow> parse_rows_csv(const std::string& csv);

}  // namespace mgb
