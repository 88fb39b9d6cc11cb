#include "mgb/workload_gen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mgb/catalog_data.hpp"
#include "mgb/device_model.hpp"
#include "mgb/error.hpp"

namespace mgb {

Micros JobTemplate::solo_duration_us() const {
  Micros total = 0;
  for (const auto& k : kernels) total += k.duration_us;
  return total;
}

std::vector<const JobTemplate*> Catalog::of_class(JobClass c) const {
  std::vector<const JobTemplate*> out;
  for (const auto& t : templates) {
    if (t.job_class == c) out.push_back(&t);
  }
  return out;
}

namespace {

Dim3 dim_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<std::uint32_t>>();
  if (v.empty() || v.size() > 3) throw ConfigError("dimensions need one to three values");
  Dim3 d;
  d.x = v[0];
  if (v.size() > 1) d.y = v[1];
  if (v.size() > 2) d.z = v[2];
  if (d.x == 0 || d.y == 0 || d.z == 0) throw ConfigError("dimensions must be positive");
  return d;
}

JobTemplate template_from_json(const nlohmann::json& j) {
  JobTemplate t;
  t.name = j.at("name").get<std::string>();
  auto cls = job_class_from_string(j.at("class").get<std::string>());
  if (!cls) throw ConfigError("template '" + t.name + "': unknown class");
  t.job_class = *cls;
  t.mem_footprint_bytes = static_cast<Bytes>(std::llround(j.at("footprint_gb").get<double>() * static_cast<double>(kGiB)));
  t.buffers = j.value("buffers", 1u);
  t.lazy = j.value("lazy", false);
  if (t.buffers == 0 || t.mem_footprint_bytes < t.buffers) throw ConfigError("template '" + t.name + "': bad buffers");
  for (const auto& k : j.at("kernels")) {
    KernelShape s;
    s.name = k.at("name").get<std::string>();
    s.grid = dim_from_json(k.at("grid"));
    s.block = dim_from_json(k.at("block"));
    s.regs_per_thread = k.value("regs", 0u);
    s.smem_per_block = k.value("smem", Bytes{0});
    s.duration_us = static_cast<Micros>(std::llround(k.at("dur_ms").get<double>() * 1000.0));
    if (s.duration_us <= 0) throw ConfigError("template '" + t.name + "': kernel duration must be positive");
    if (s.block.volume() > kMaxThreadsPerBlock) throw ConfigError("template '" + t.name + "': block too large");
    t.kernels.push_back(std::move(s));
  }
  if (t.kernels.empty()) throw ConfigError("template '" + t.name + "' has no kernels");
  return t;
}

}  // namespace

Catalog parse_catalog(std::string_view json) {
  Catalog c;
  try {
    const auto j = nlohmann::json::parse(json);
    c.name = j.value("name", std::string("catalog"));
    for (const auto& t : j.at("templates")) c.templates.push_back(template_from_json(t));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("catalog: ") + e.what());
  }
  if (c.templates.empty()) throw ConfigError("catalog has no templates");
  return c;
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read catalog '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_catalog(ss.str());
}

const Catalog& builtin_catalog() {
  static const Catalog c = parse_catalog(catalog_data::kRodinia);
  return c;
}

const Catalog& darknet_catalog() {
  static const Catalog c = parse_catalog(catalog_data::kDarknet);
  return c;
}

MixSpec MixSpec::parse_ratio(std::string_view ratio) {
  MixSpec m;
  const auto colon = ratio.find(':');
  if (colon == std::string_view::npos) throw ConfigError("mix must look like L:S, got '" + std::string(ratio) + "'");
  auto num = [&](std::string_view s) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) {
      throw ConfigError("mix ratios must be positive integers, got '" + std::string(ratio) + "'");
    }
    return v;
  };
  m.large_ratio = num(ratio.substr(0, colon));
  m.small_ratio = num(ratio.substr(colon + 1));
  return m;
}

std::uint32_t MixSpec::large_count() const {
  const std::uint64_t sum = std::uint64_t{large_ratio} + small_ratio;
  return static_cast<std::uint32_t>((std::uint64_t{large_ratio} * n_jobs + sum - 1) / sum);
}

std::vector<MixSpec> table1_mixes(std::uint64_t seed) {
  std::vector<MixSpec> out;
  for (std::uint32_t n : {16u, 32u}) {
    for (std::uint32_t l : {1u, 2u, 3u, 5u}) out.push_back({l, 1, n, seed});
  }
  return out;
}

std::string table1_name(std::size_t index) { return "W" + std::to_string(index + 1); }

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ContractViolation("uniform_index over an empty range");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

namespace {

std::string format_ms(Micros us) {
  std::ostringstream os;
  os << us / 1000;
  if (us % 1000) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ".%03lld", static_cast<long long>(us % 1000));
    std::string frac(buf);
    while (frac.back() == '0') frac.pop_back();
    os << frac;
  }
  return os.str();
}

}  // namespace

Program make_job_program(const JobTemplate& t, std::uint64_t job_id) {
  const std::string name = t.name + "_j" + std::to_string(job_id);
  const char* lazy = t.lazy ? " lazy" : "";
  std::vector<std::string> bufs;
  std::vector<Bytes> sizes;
  for (std::uint32_t i = 0; i < t.buffers; ++i) {
    bufs.push_back("buf" + std::to_string(i));
    sizes.push_back(t.mem_footprint_bytes / t.buffers + (i == 0 ? t.mem_footprint_bytes % t.buffers : 0));
  }
  std::string args;
  for (const auto& b : bufs) args += (args.empty() ? "" : ",") + b;

  std::ostringstream os;
  os << "program " << name << "\nclass " << to_string(t.job_class) << "\nfunc " << name << "\n";
  for (std::size_t i = 0; i < bufs.size(); ++i) os << "  malloc " << bufs[i] << ' ' << sizes[i] << lazy << '\n';
  for (std::size_t i = 0; i < bufs.size(); ++i) os << "  memcpy_h2d " << bufs[i] << ' ' << sizes[i] << lazy << '\n';
  for (const auto& k : t.kernels) {
    os << "  launch " << k.name << " grid " << k.grid.x << ' ' << k.grid.y << ' ' << k.grid.z << " block " << k.block.x
       << ' ' << k.block.y << ' ' << k.block.z << " args " << args << " dur " << format_ms(k.duration_us);
    if (k.regs_per_thread) os << " regs " << k.regs_per_thread;
    if (k.smem_per_block) os << " smem " << k.smem_per_block;
    os << '\n';
  }
  os << "  memcpy_d2h " << bufs[0] << ' ' << sizes[0] << lazy << '\n';
  for (const auto& b : bufs) os << "  free " << b << lazy << '\n';
  os << "end\n";
  return parse_program(os.str());
}

Workload gen_workload(const MixSpec& mix, const Catalog& catalog) {
  const std::uint64_t sum = std::uint64_t{mix.large_ratio} + mix.small_ratio;
  if (mix.large_ratio == 0 || mix.small_ratio == 0) throw ConfigError("mix ratios must be positive");
  if (mix.n_jobs < sum) throw ConfigError("job count " + std::to_string(mix.n_jobs) + " is below the ratio sum");
  const auto large = catalog.of_class(JobClass::Large);
  const auto small = catalog.of_class(JobClass::Small);
  if (large.empty() || small.empty()) throw ConfigError("catalog needs both small and large templates");

  std::mt19937_64 rng(mix.seed);
  const std::uint32_t n_large = mix.large_count();
  std::vector<const JobTemplate*> picks;
  for (std::uint32_t i = 0; i < mix.n_jobs; ++i) {
    const auto& pool = i < n_large ? large : small;
    picks.push_back(pool[uniform_index(rng, pool.size())]);
  }
  for (std::size_t i = picks.size(); i > 1; --i) std::swap(picks[i - 1], picks[uniform_index(rng, i)]);

  Workload w;
  w.name = std::to_string(mix.n_jobs) + "-job," + std::to_string(mix.large_ratio) + ":" +
           std::to_string(mix.small_ratio) + "-mix";
  for (std::size_t i = 0; i < picks.size(); ++i) {
    WorkloadJob job;
    job.job_id = i;
    job.program = make_job_program(*picks[i], i);
    job.job_class = picks[i]->job_class;
    w.jobs.push_back(std::move(job));
  }
  return w;
}

}  // namespace mgb
