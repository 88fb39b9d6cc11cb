#include "mgb/trace_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mgb/error.hpp"

namespace mgb {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::Syntax: return "syntax error";
    case ParseErrorKind::UnknownSymbol: return "unknown symbol";
    case ParseErrorKind::UnresolvedLabel: return "unresolved label";
    case ParseErrorKind::UnresolvedFunction: return "unresolved function";
    case ParseErrorKind::ThreadLimit: return "thread limit exceeded";
    case ParseErrorKind::Recursion: return "recursive call graph";
    case ParseErrorKind::Structure: return "invalid structure";
  }
  return "error";
}

namespace {

std::string format_parse_error(ParseErrorKind kind, std::size_t line,
                               std::size_t column, const std::string& msg) {
  std::ostringstream os;
  if (line > 0) {
    os << "line " << line;
    if (column > 0) os << ", column " << column;
    os << ": ";
  }
  os << to_string(kind) << ": " << msg;
  return os.str();
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, std::size_t line,
                       std::size_t column, const std::string& message)
    : Error(format_parse_error(kind, line, column, message)),
      kind_(kind),
      line_(line),
      column_(column) {}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Malloc: return "malloc";
    case OpKind::MemcpyH2D: return "memcpy_h2d";
    case OpKind::MemcpyD2H: return "memcpy_d2h";
    case OpKind::Memset: return "memset";
    case OpKind::Free: return "free";
    case OpKind::SetHeapLimit: return "set_heap_limit";
    case OpKind::Launch: return "launch";
    case OpKind::Call: return "call";
  }
  return "?";
}

bool GpuOp::is_memory_op() const {
  switch (kind) {
    case OpKind::Malloc:
    case OpKind::MemcpyH2D:
    case OpKind::MemcpyD2H:
    case OpKind::Memset:
    case OpKind::Free:
      return true;
    default:
      return false;
  }
}

const char* to_string(JobClass c) {
  return c == JobClass::Small ? "small" : "large";
}

std::optional<JobClass> job_class_from_string(std::string_view s) {
  if (s == "small") return JobClass::Small;
  if (s == "large") return JobClass::Large;
  return std::nullopt;
}

std::optional<BlockIndex> FunctionGraph::find(std::string_view label) const {
  for (BlockIndex i = 0; i < blocks.size(); ++i) {
    if (blocks[i].label == label) return i;
  }
  return std::nullopt;
}

BlockIndex FunctionGraph::index_of(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw ContractViolation("no block '" + std::string(label) + "' in function " + name);
}

BlockIndex FunctionGraph::exit_index() const {
  for (BlockIndex i = 0; i < blocks.size(); ++i) {
    if (blocks[i].succs.empty()) return i;
  }
  throw ContractViolation("function " + name + " has no exit block");
}

std::size_t FunctionGraph::op_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.ops.size();
  return n;
}

const FunctionGraph& Program::main_function() const {
  auto it = functions.find(main);
  if (it == functions.end()) throw ContractViolation("program has no main function '" + main + "'");
  return it->second;
}

FunctionGraph& Program::main_function() {
  auto it = functions.find(main);
  if (it == functions.end()) throw ContractViolation("program has no main function '" + main + "'");
  return it->second;
}

Cfg Cfg::of(const FunctionGraph& f) {
  Cfg cfg;
  const std::size_t n = f.blocks.size();
  cfg.succs.resize(n);
  cfg.preds.resize(n);
  std::unordered_map<std::string_view, BlockIndex> index;
  index.reserve(n);
  for (BlockIndex i = 0; i < n; ++i) index.emplace(f.blocks[i].label, i);
  bool found_exit = false;
  for (BlockIndex i = 0; i < n; ++i) {
    for (const auto& s : f.blocks[i].succs) {
      auto it = index.find(s);
      if (it == index.end()) throw ContractViolation("unresolved successor '" + s + "'");
      cfg.succs[i].push_back(it->second);
      cfg.preds[it->second].push_back(i);
    }
    if (f.blocks[i].succs.empty() && !found_exit) {
      cfg.exit = i;
      found_exit = true;
    }
  }
  return cfg;
}

std::unordered_map<OpId, OpLocation> locate_ops(const FunctionGraph& f) {
  std::unordered_map<OpId, OpLocation> out;
  for (BlockIndex b = 0; b < f.blocks.size(); ++b) {
    const auto& ops = f.blocks[b].ops;
    for (std::size_t i = 0; i < ops.size(); ++i) out.emplace(ops[i].id, OpLocation{b, i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back({line.substr(i, j - i), i + 1});
    i = j;
  }
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = static_cast<unsigned char>(s.front());
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_' || c == '.';
  });
}

struct OpSite {
  std::size_t line;
  std::size_t column;
};

struct BlockSite {
  std::size_t line = 0;
  std::vector<std::size_t> succ_columns;
};

struct FunctionSite {
  std::size_t line = 0;
  std::vector<BlockSite> blocks;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Program run() {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      std::size_t nl = text_.find('\n', pos);
      std::string_view line = text_.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line_ = line_no;
      auto toks = tokenize(line);
      if (!toks.empty()) handle_line(toks);
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    if (!seen_program_) fail(ParseErrorKind::Syntax, 0, 0, "missing 'program' header");
    if (current_) fail(ParseErrorKind::Syntax, line_, 0, "function '" + current_->name + "' is missing 'end'");
    validate();
    canonicalize_ids();
    return std::move(program_);
  }

 private:
  [[noreturn]] void fail(ParseErrorKind kind, std::size_t line, std::size_t col, const std::string& msg) {
    throw ParseError(kind, line, col, msg);
  }
  [[noreturn]] void fail_at(const Token& t, ParseErrorKind kind, const std::string& msg) {
    fail(kind, line_, t.column, msg);
  }

  void expect_identifier(const Token& t, const char* what) {
    if (!is_identifier(t.text)) fail_at(t, ParseErrorKind::Syntax, std::string("expected ") + what + ", got '" + std::string(t.text) + "'");
  }

  std::uint64_t parse_u64(const Token& t, const char* what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size()) {
      fail_at(t, ParseErrorKind::Syntax, std::string("expected ") + what + " (non-negative integer), got '" + std::string(t.text) + "'");
    }
    return v;
  }

  std::uint32_t parse_dim(const Token& t) {
    auto v = parse_u64(t, "dimension");
    if (v == 0 || v > 0xffffffffull) fail_at(t, ParseErrorKind::Syntax, "dimension must be a positive 32-bit integer");
    return static_cast<std::uint32_t>(v);
  }

  double parse_double(const Token& t, const char* what) {
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size() || !std::isfinite(v)) {
      fail_at(t, ParseErrorKind::Syntax, std::string("expected ") + what + ", got '" + std::string(t.text) + "'");
    }
    return v;
  }

  void handle_line(const std::vector<Token>& toks) {
    const auto& head = toks.front();
    const auto kw = head.text;
    if (kw == "program") {
      if (seen_program_) fail_at(head, ParseErrorKind::Structure, "duplicate 'program' header");
      if (toks.size() != 2) fail_at(head, ParseErrorKind::Syntax, "usage: program <name>");
      expect_identifier(toks[1], "program name");
      program_.name = std::string(toks[1].text);
      program_.main = program_.name;
      seen_program_ = true;
      return;
    }
    if (!seen_program_) fail_at(head, ParseErrorKind::Syntax, "expected 'program' header first");
    if (kw == "class") {
      if (current_) fail_at(head, ParseErrorKind::Syntax, "'class' must precede functions");
      if (toks.size() != 2) fail_at(head, ParseErrorKind::Syntax, "usage: class <small|large>");
      auto c = job_class_from_string(toks[1].text);
      if (!c) fail_at(toks[1], ParseErrorKind::Syntax, "class must be 'small' or 'large'");
      program_.job_class = c;
      return;
    }
    if (kw == "func") {
      if (current_) fail_at(head, ParseErrorKind::Syntax, "nested 'func' (missing 'end' for '" + current_->name + "')");
      if (toks.size() != 2) fail_at(head, ParseErrorKind::Syntax, "usage: func <name>");
      expect_identifier(toks[1], "function name");
      std::string name(toks[1].text);
      if (program_.functions.count(name)) fail_at(toks[1], ParseErrorKind::Structure, "duplicate function '" + name + "'");
      auto [it, _] = program_.functions.emplace(name, FunctionGraph{name, {}});
      current_ = &it->second;
      current_site_ = &sites_[name];
      current_site_->line = line_;
      declared_order_.push_back(name);
      return;
    }
    if (!current_) fail_at(head, ParseErrorKind::Syntax, "'" + std::string(kw) + "' outside of a function");
    if (kw == "end") {
      if (toks.size() != 1) fail_at(toks[1], ParseErrorKind::Syntax, "unexpected token after 'end'");
      if (current_->blocks.empty()) open_block("entry", {});
      current_ = nullptr;
      current_site_ = nullptr;
      return;
    }
    if (kw == "block") {
      parse_block_header(toks);
      return;
    }
    if (current_->blocks.empty()) open_block("entry", {});
    current_->blocks.back().ops.push_back(parse_op(toks));
  }

  void open_block(std::string label, BlockSite site) {
    BasicBlock b;
    b.label = std::move(label);
    current_->blocks.push_back(std::move(b));
    if (site.line == 0) site.line = line_;
    current_site_->blocks.push_back(std::move(site));
  }

  void parse_block_header(const std::vector<Token>& toks) {
    if (toks.size() < 2) fail_at(toks[0], ParseErrorKind::Syntax, "usage: block <label> [succ <label> [<label>]] [prob <p>]");
    expect_identifier(toks[1], "block label");
    std::string label(toks[1].text);
    if (current_->find(label)) fail_at(toks[1], ParseErrorKind::Structure, "duplicate block label '" + label + "'");
    BlockSite site;
    site.line = line_;
    std::vector<std::string> succs;
    std::optional<double> prob;
    std::size_t i = 2;
    if (i < toks.size() && toks[i].text == "succ") {
      ++i;
      while (i < toks.size() && toks[i].text != "prob") {
        expect_identifier(toks[i], "successor label");
        succs.emplace_back(toks[i].text);
        site.succ_columns.push_back(toks[i].column);
        ++i;
      }
      if (succs.empty()) fail_at(toks[i - 1], ParseErrorKind::Syntax, "'succ' needs one or two labels");
      if (succs.size() > 2) fail_at(toks[2], ParseErrorKind::Syntax, "a block has at most two successors");
    }
    if (i < toks.size() && toks[i].text == "prob") {
      if (i + 1 >= toks.size()) fail_at(toks[i], ParseErrorKind::Syntax, "'prob' needs a value");
      double p = parse_double(toks[i + 1], "probability");
      if (p < 0.0 || p > 1.0) fail_at(toks[i + 1], ParseErrorKind::Syntax, "probability must be in [0, 1]");
      if (succs.size() != 2) fail_at(toks[i], ParseErrorKind::Syntax, "'prob' requires two successors");
      prob = p;
      i += 2;
    }
    if (i < toks.size()) fail_at(toks[i], ParseErrorKind::Syntax, "unexpected token '" + std::string(toks[i].text) + "'");
    open_block(label, std::move(site));
    current_->blocks.back().succs = std::move(succs);
    current_->blocks.back().taken_prob = prob;
  }

  GpuOp parse_op(const std::vector<Token>& toks) {
    const auto& head = toks.front();
    GpuOp op;
    op_sites_.push_back({line_, head.column});
    const auto kw = head.text;
    auto trailing_lazy = [&](std::size_t fixed) {
      if (toks.size() == fixed) return;
      if (toks.size() == fixed + 1 && toks[fixed].text == "lazy") {
        op.lazy = true;
        return;
      }
      fail_at(toks[std::min(fixed, toks.size() - 1)], ParseErrorKind::Syntax, "unexpected token '" + std::string(toks[fixed].text) + "'");
    };
    auto sym_bytes = [&](OpKind kind) {
      op.kind = kind;
      if (toks.size() < 3) fail_at(head, ParseErrorKind::Syntax, "usage: " + std::string(kw) + " <sym> <bytes> [lazy]");
      expect_identifier(toks[1], "symbol");
      op.symbols.emplace_back(toks[1].text);
      op.bytes = parse_u64(toks[2], "byte count");
      trailing_lazy(3);
    };
    if (kw == "malloc") {
      sym_bytes(OpKind::Malloc);
      if (op.bytes == 0) fail_at(toks[2], ParseErrorKind::Syntax, "malloc size must be positive");
    } else if (kw == "memcpy_h2d") {
      sym_bytes(OpKind::MemcpyH2D);
    } else if (kw == "memcpy_d2h") {
      sym_bytes(OpKind::MemcpyD2H);
    } else if (kw == "memset") {
      sym_bytes(OpKind::Memset);
    } else if (kw == "free") {
      op.kind = OpKind::Free;
      if (toks.size() < 2) fail_at(head, ParseErrorKind::Syntax, "usage: free <sym> [lazy]");
      expect_identifier(toks[1], "symbol");
      op.symbols.emplace_back(toks[1].text);
      trailing_lazy(2);
    } else if (kw == "set_heap_limit") {
      op.kind = OpKind::SetHeapLimit;
      if (toks.size() < 2) fail_at(head, ParseErrorKind::Syntax, "usage: set_heap_limit <bytes>");
      op.bytes = parse_u64(toks[1], "byte count");
      trailing_lazy(2);
    } else if (kw == "call") {
      op.kind = OpKind::Call;
      if (toks.size() != 2) fail_at(head, ParseErrorKind::Syntax, "usage: call <fname>");
      expect_identifier(toks[1], "function name");
      op.name = std::string(toks[1].text);
    } else if (kw == "launch") {
      parse_launch(toks, op);
    } else {
      fail_at(head, ParseErrorKind::Syntax, "unknown operation '" + std::string(kw) + "'");
    }
    return op;
  }

  void parse_launch(const std::vector<Token>& toks, GpuOp& op) {
    op.kind = OpKind::Launch;
    if (toks.size() < 2) fail_at(toks[0], ParseErrorKind::Syntax, "launch needs a kernel name");
    expect_identifier(toks[1], "kernel name");
    op.name = std::string(toks[1].text);
    std::set<std::string_view> seen;
    std::size_t i = 2;
    auto need = [&](std::size_t n) {
      if (i + n >= toks.size()) {
        fail_at(toks[i], ParseErrorKind::Syntax, "'" + std::string(toks[i].text) + "' needs " + std::to_string(n) + " value(s)");
      }
    };
    while (i < toks.size()) {
      const auto& kwt = toks[i];
      const auto kw = kwt.text;
      if (!seen.insert(kw).second) fail_at(kwt, ParseErrorKind::Syntax, "duplicate launch clause '" + std::string(kw) + "'");
      if (kw == "grid" || kw == "block") {
        need(3);
        Dim3 d{parse_dim(toks[i + 1]), parse_dim(toks[i + 2]), parse_dim(toks[i + 3])};
        if (kw == "grid") {
          op.grid = d;
        } else {
          if (d.volume() > kMaxThreadsPerBlock) {
            fail_at(kwt, ParseErrorKind::ThreadLimit, "block of " + std::to_string(d.volume()) + " threads exceeds 1024");
          }
          op.block = d;
        }
        i += 4;
      } else if (kw == "args") {
        need(1);
        std::string_view list = toks[i + 1].text;
        std::size_t start = 0;
        while (true) {
          auto comma = list.find(',', start);
          auto part = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
          if (!is_identifier(part)) fail_at(toks[i + 1], ParseErrorKind::Syntax, "bad kernel argument list '" + std::string(list) + "'");
          op.symbols.emplace_back(part);
          if (comma == std::string_view::npos) break;
          start = comma + 1;
        }
        i += 2;
      } else if (kw == "dur") {
        need(1);
        double ms = parse_double(toks[i + 1], "duration in ms");
        if (ms <= 0.0) fail_at(toks[i + 1], ParseErrorKind::Syntax, "duration must be positive");
        op.duration_us = static_cast<Micros>(std::llround(ms * 1000.0));
        if (op.duration_us <= 0) fail_at(toks[i + 1], ParseErrorKind::Syntax, "duration below 1 microsecond");
        i += 2;
      } else if (kw == "regs") {
        need(1);
        auto v = parse_u64(toks[i + 1], "registers per thread");
        if (v > 0xffffffffull) fail_at(toks[i + 1], ParseErrorKind::Syntax, "register count too large");
        op.regs_per_thread = static_cast<std::uint32_t>(v);
        i += 2;
      } else if (kw == "smem") {
        need(1);
        op.smem_per_block = parse_u64(toks[i + 1], "shared memory bytes");
        i += 2;
      } else {
        fail_at(kwt, ParseErrorKind::Syntax, "unknown launch clause '" + std::string(kw) + "'");
      }
    }
    for (const char* required : {"grid", "block", "dur"}) {
      if (!seen.count(required)) fail_at(toks[0], ParseErrorKind::Syntax, std::string("launch is missing '") + required + "'");
    }
  }

  // Post-parse checks run in a fixed order so the first reported diagnostic
  // is deterministic.
  void validate() {
    if (!program_.functions.count(program_.main)) {
      fail(ParseErrorKind::UnresolvedFunction, 0, 0, "no function named after program '" + program_.main + "'");
    }
    std::size_t op_cursor = 0;
    // op_sites_ is in textual order; map each op to its site by walking in
    // the same order functions were declared.
    std::unordered_map<const GpuOp*, OpSite> op_site;
    for (const auto& name : declared_order_) {
      for (const auto& b : program_.functions.at(name).blocks) {
        for (const auto& op : b.ops) op_site.emplace(&op, op_sites_[op_cursor++]);
      }
    }
    std::set<std::string> declared;
    for (const auto& [_, f] : program_.functions) {
      for (const auto& b : f.blocks) {
        for (const auto& op : b.ops) {
          if (op.kind == OpKind::Malloc) declared.insert(op.symbol());
        }
      }
    }
    for (const auto& name : declared_order_) {
      const auto& f = program_.functions.at(name);
      const auto& site = sites_.at(name);
      validate_function(f, site);
      for (const auto& b : f.blocks) {
        for (const auto& op : b.ops) {
          const auto& s = op_site.at(&op);
          if (op.kind == OpKind::Call && !program_.functions.count(op.name)) {
            fail(ParseErrorKind::UnresolvedFunction, s.line, s.column, "call to undefined function '" + op.name + "'");
          }
          for (const auto& sym : op.symbols) {
            if (!declared.count(sym)) fail(ParseErrorKind::UnknownSymbol, s.line, s.column, "symbol '" + sym + "' is never allocated");
          }
        }
      }
    }
    check_recursion(op_site);
  }

  void validate_function(const FunctionGraph& f, const FunctionSite& site) {
    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
      const auto& b = f.blocks[bi];
      for (std::size_t s = 0; s < b.succs.size(); ++s) {
        if (!f.find(b.succs[s])) {
          fail(ParseErrorKind::UnresolvedLabel, site.blocks[bi].line, site.blocks[bi].succ_columns[s],
               "successor '" + b.succs[s] + "' is not a block of function '" + f.name + "'");
        }
      }
    }
    std::vector<BlockIndex> exits;
    for (BlockIndex i = 0; i < f.blocks.size(); ++i) {
      if (f.blocks[i].succs.empty()) exits.push_back(i);
    }
    if (exits.size() != 1) {
      fail(ParseErrorKind::Structure, exits.empty() ? site.line : site.blocks[exits[1]].line, 0,
           "function '" + f.name + "' must have exactly one exit block, found " + std::to_string(exits.size()));
    }
    const Cfg cfg = Cfg::of(f);
    auto reach = [&](BlockIndex root, const std::vector<std::vector<BlockIndex>>& adj) {
      std::vector<bool> seen(cfg.size(), false);
      std::vector<BlockIndex> stack{root};
      seen[root] = true;
      while (!stack.empty()) {
        auto b = stack.back();
        stack.pop_back();
        for (auto s : adj[b]) {
          if (!seen[s]) {
            seen[s] = true;
            stack.push_back(s);
          }
        }
      }
      return seen;
    };
    auto fwd = reach(cfg.entry, cfg.succs);
    for (BlockIndex i = 0; i < cfg.size(); ++i) {
      if (!fwd[i]) fail(ParseErrorKind::Structure, site.blocks[i].line, 0, "block '" + f.blocks[i].label + "' is unreachable from entry");
    }
    auto bwd = reach(cfg.exit, cfg.preds);
    for (BlockIndex i = 0; i < cfg.size(); ++i) {
      if (!bwd[i]) fail(ParseErrorKind::Structure, site.blocks[i].line, 0, "block '" + f.blocks[i].label + "' cannot reach the exit block");
    }
  }

  void check_recursion(const std::unordered_map<const GpuOp*, OpSite>& op_site) {
    enum class Color { White, Grey, Black };
    std::map<std::string, Color, std::less<>> color;
    for (const auto& [name, _] : program_.functions) color[name] = Color::White;
    std::function<void(const std::string&)> visit = [&](const std::string& name) {
      color[name] = Color::Grey;
      for (const auto& b : program_.functions.at(name).blocks) {
        for (const auto& op : b.ops) {
          if (op.kind != OpKind::Call) continue;
          auto c = color.at(op.name);
          if (c == Color::Grey) {
            const auto& s = op_site.at(&op);
            fail(ParseErrorKind::Recursion, s.line, s.column, "call from '" + name + "' to '" + op.name + "' closes a cycle");
          }
          if (c == Color::White) visit(op.name);
        }
      }
      color[name] = Color::Black;
    };
    for (const auto& name : declared_order_) {
      if (color.at(name) == Color::White) visit(name);
    }
  }

  void canonicalize_ids() {
    OpId next = 0;
    for (auto& [_, f] : program_.functions) {
      for (auto& b : f.blocks) {
        for (auto& op : b.ops) {
          op.id = next;
          op.origin = next;
          ++next;
        }
      }
    }
  }

  std::string_view text_;
  std::size_t line_ = 0;
  bool seen_program_ = false;
  Program program_;
  FunctionGraph* current_ = nullptr;
  FunctionSite* current_site_ = nullptr;
  std::map<std::string, FunctionSite, std::less<>> sites_;
  std::vector<OpSite> op_sites_;
  std::vector<std::string> declared_order_;
};

}  // namespace

Program parse_program(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_ms(Micros us) {
  std::string out = std::to_string(us / 1000);
  if (auto frac = us % 1000; frac != 0) {
    std::string digits = std::to_string(frac);
    digits.insert(0, 3 - digits.size(), '0');
    while (digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

void print_op(std::ostringstream& os, const GpuOp& op) {
  os << "  " << to_string(op.kind);
  switch (op.kind) {
    case OpKind::Malloc:
    case OpKind::MemcpyH2D:
    case OpKind::MemcpyD2H:
    case OpKind::Memset:
      os << ' ' << op.symbol() << ' ' << op.bytes;
      break;
    case OpKind::Free:
      os << ' ' << op.symbol();
      break;
    case OpKind::SetHeapLimit:
      os << ' ' << op.bytes;
      break;
    case OpKind::Call:
      os << ' ' << op.name;
      break;
    case OpKind::Launch: {
      os << ' ' << op.name << " grid " << op.grid.x << ' ' << op.grid.y << ' ' << op.grid.z
         << " block " << op.block.x << ' ' << op.block.y << ' ' << op.block.z;
      if (!op.symbols.empty()) {
        os << " args ";
        for (std::size_t i = 0; i < op.symbols.size(); ++i) os << (i ? "," : "") << op.symbols[i];
      }
      os << " dur " << format_ms(op.duration_us);
      if (op.regs_per_thread) os << " regs " << op.regs_per_thread;
      if (op.smem_per_block) os << " smem " << op.smem_per_block;
      break;
    }
  }
  if (op.lazy) os << " lazy";
  os << '\n';
}

}  // namespace

std::string print_program(const Program& p) {
  std::ostringstream os;
  os << "program " << p.name << '\n';
  if (p.job_class) os << "class " << to_string(*p.job_class) << '\n';
  for (const auto& [name, f] : p.functions) {
    os << "func " << name << '\n';
    for (const auto& b : f.blocks) {
      os << "block " << b.label;
      if (!b.succs.empty()) {
        os << " succ";
        for (const auto& s : b.succs) os << ' ' << s;
      }
      if (b.taken_prob) os << " prob " << format_double(*b.taken_prob);
      os << '\n';
      for (const auto& op : b.ops) print_op(os, op);
    }
    os << "end\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Inlining

namespace {

class Inliner {
 public:
  explicit Inliner(const Program& p) : program_(p) {
    OpId max_id = 0;
    bool any = false;
    for (const auto& [_, f] : p.functions) {
      for (const auto& b : f.blocks) {
        for (const auto& op : b.ops) {
          max_id = std::max(max_id, op.id);
          any = true;
        }
      }
    }
    next_id_ = any ? max_id + 1 : 0;
  }

  FunctionGraph run() {
    const auto& main = program_.main_function();
    for (const auto& b : main.blocks) used_.insert(b.label);
    FunctionGraph out{main.name, {}};
    expand(main, false, out.blocks);
    return out;
  }

 private:
  std::string fresh(const std::string& base) {
    std::string candidate = base;
    for (std::size_t k = 1; used_.count(candidate); ++k) candidate = base + "_" + std::to_string(k);
    used_.insert(candidate);
    return candidate;
  }

  // Appends the call-free expansion of `f` to `out` and returns the label of
  // its entry block.
  std::string expand(const FunctionGraph& f, bool clone, std::vector<BasicBlock>& out) {
    std::unordered_map<std::string, std::string> rename;
    if (clone) {
      const std::string prefix = f.name + "." + std::to_string(++expansions_) + ".";
      for (const auto& b : f.blocks) rename.emplace(b.label, fresh(prefix + b.label));
    } else {
      for (const auto& b : f.blocks) rename.emplace(b.label, b.label);
    }
    for (const auto& b : f.blocks) {
      BasicBlock cur;
      cur.label = rename.at(b.label);
      for (const auto& op : b.ops) {
        if (op.kind != OpKind::Call) {
          GpuOp copy = op;
          if (clone) copy.id = next_id_++;
          cur.ops.push_back(std::move(copy));
          continue;
        }
        const auto& callee = program_.functions.at(op.name);
        std::vector<BasicBlock> body;
        std::string callee_entry = expand(callee, true, body);
        std::string cont = fresh(cur.label + ".ret");
        for (auto& cb : body) {
          if (cb.succs.empty()) cb.succs.push_back(cont);
        }
        cur.succs = {callee_entry};
        out.push_back(std::move(cur));
        std::move(body.begin(), body.end(), std::back_inserter(out));
        cur = BasicBlock{};
        cur.label = cont;
      }
      for (const auto& s : b.succs) cur.succs.push_back(rename.at(s));
      cur.taken_prob = b.taken_prob;
      out.push_back(std::move(cur));
    }
    return rename.at(f.blocks.front().label);
  }

  const Program& program_;
  OpId next_id_ = 0;
  std::size_t expansions_ = 0;
  std::unordered_set<std::string> used_;
};

}  // namespace

Program inline_calls(const Program& p) {
  Program out;
  out.name = p.name;
  out.main = p.main;
  out.job_class = p.job_class;
  out.functions.emplace(p.main, Inliner(p).run());
  return out;
}

}  // namespace mgb
