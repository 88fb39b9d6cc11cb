#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/workload.hpp"

namespace mgb {

struct KernelShape {
  std::string name;
  Dim3 grid;
  Dim3 block;
  std::uint32_t regs_per_thread = 0;
  Bytes smem_per_block = 0;
  Micros duration_us = 0;

  bool operator==(const KernelShape&) const = default;
};

struct JobTemplate {
  std::string name;
  JobClass job_class = JobClass::Small;
  Bytes mem_footprint_bytes = 0;
  std::uint32_t buffers = 1;
  std::vector<KernelShape> kernels;
  // Allocations go through the lazy runtime.
  bool lazy = false;

  bool operator==(const JobTemplate&) const = default;
  Micros solo_duration_us() const;
};

struct Catalog {
  std::string name;
  std::vector<JobTemplate> templates;

  std::vector<const JobTemplate*> of_class(JobClass c) const;
};

/// Throws ConfigError on malformed catalogs.
Catalog parse_catalog(std::string_view json);
Catalog load_catalog(const std::string& path);

/// 7 small and 10 large templates with synthetic Rodinia-like footprints.
const Catalog& builtin_catalog();
/// Small neural-network training jobs (0.5 to 1.5 GiB).
const Catalog& darknet_catalog();

struct MixSpec {
  std::uint32_t large_ratio = 1;
  std::uint32_t small_ratio = 1;
  std::uint32_t n_jobs = 16;
  std::uint64_t seed = 0;

  /// `3:1` style ratio string. Throws ConfigError.
  static MixSpec parse_ratio(std::string_view ratio);
  std::uint32_t large_count() const;
};

/// The eight standard mixes: 16 then 32 jobs, each at 1:1, 2:1, 3:1, 5:1.
std::vector<MixSpec> table1_mixes(std::uint64_t seed);
std::string table1_name(std::size_t index);

/// Uniform integer in [0, n) without modulo bias.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// Trace program for one job built from a template.
Program make_job_program(const JobTemplate& t, std::uint64_t job_id);

/// Samples templates per class with replacement and shuffles the order.
/// Throws ConfigError when n_jobs is below the ratio sum or a class is empty.
Workload gen_workload(const MixSpec& mix, const Catalog& catalog);

}  // namespace mgb
