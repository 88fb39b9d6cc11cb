#include "mgb/workload.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mgb/error.hpp"

namespace mgb {

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t Workload::hash() const {
  std::uint64_t h = fnv1a("workload");
  for (const auto& j : jobs) {
    h = fnv1a(std::to_string(j.job_id), h);
    h = fnv1a(j.job_class ? to_string(*j.job_class) : "-", h);
    h = fnv1a(print_program(j.program), h);
  }
  return h;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Workload parse_workload(std::string_view jsonl, const std::string& base_dir) {
  Workload w;
  std::set<std::uint64_t> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "workload line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + e.what());
    }
    if (!j.is_object() || !j.contains("job_id")) throw ConfigError(where + "expected an object with job_id");
    WorkloadJob job;
    try {
      job.job_id = j.at("job_id").get<std::uint64_t>();
      std::string text;
      if (j.contains("inline_trace")) {
        text = j.at("inline_trace").get<std::string>();
      } else if (j.contains("trace_path")) {
        job.trace_path = j.at("trace_path").get<std::string>();
        std::filesystem::path p(job.trace_path);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        text = read_file(p);
      } else {
        throw ConfigError(where + "needs inline_trace or trace_path");
      }
      job.program = parse_program(text);
      if (j.contains("class")) {
        auto c = job_class_from_string(j.at("class").get<std::string>());
        if (!c) throw ConfigError(where + "unknown class '" + j.at("class").get<std::string>() + "'");
        job.job_class = c;
      } else {
        job.job_class = job.program.job_class;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + e.what());
    } catch (const ParseError& e) {
      throw ConfigError(where + e.what());
    }
    if (!seen.insert(job.job_id).second) throw ConfigError(where + "duplicate job_id " + std::to_string(job.job_id));
    w.jobs.push_back(std::move(job));
  }
  if (w.jobs.empty()) throw ConfigError("workload has no jobs");
  return w;
}

Workload load_workload(const std::string& path) {
  auto w = parse_workload(read_file(path), std::filesystem::path(path).parent_path().string());
  w.name = std::filesystem::path(path).stem().string();
  return w;
}

std::string serialize_workload(const Workload& w) {
  std::string out;
  for (const auto& job : w.jobs) {
    nlohmann::ordered_json j;
    j["job_id"] = job.job_id;
    if (job.job_class) j["class"] = to_string(*job.job_class);
    j["inline_trace"] = print_program(job.program);
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mgb
