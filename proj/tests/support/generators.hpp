#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mgb/device_model.hpp"
#include "mgb/trace_model.hpp"
#include "mgb/workload.hpp"

namespace mgb::testkit {

/// Successor lists of a random single-exit CFG. Block 0 is the entry and the
/// last block is the exit; every block is reachable and reaches the exit.
struct CfgShape {
  std::vector<std::vector<std::size_t>> succs;
};

CfgShape random_cfg(std::mt19937_64& rng, std::size_t n_blocks);

/// `program <name>` with one function and no ops, labels b0..bN.
std::string cfg_text(const CfgShape& cfg, const std::string& name = "g");

struct ProgramOptions {
  std::size_t max_blocks = 20;
  std::size_t max_ops = 12;
  std::size_t symbols = 4;
  double lazy_prob = 0.1;
  Bytes min_bytes = 1 << 20;
  Bytes max_bytes = Bytes{512} << 20;
  std::uint32_t max_grid = 64;
};

/// Random single-function program. Every symbol an op touches is malloc'd
/// somewhere in the function.
std::string random_program_text(std::mt19937_64& rng, const ProgramOptions& opt = {}, const std::string& name = "p");
Program random_program(std::mt19937_64& rng, const ProgramOptions& opt = {}, const std::string& name = "p");

/// Random program whose GPU ops all bind statically: ops sit only in blocks
/// that dominate the exit, each symbol is malloc'd once before its first use
/// and freed after its last use.
Program bindable_program(std::mt19937_64& rng, const ProgramOptions& opt = {}, const std::string& name = "p");

/// Small random batch for safety sweeps.
Workload random_workload(std::mt19937_64& rng, std::size_t max_jobs, const ProgramOptions& opt);

/// One to three devices drawn from the presets and a small 4 GiB part.
std::vector<DeviceSpec> random_fleet(std::mt19937_64& rng);

}  // namespace mgb::testkit
