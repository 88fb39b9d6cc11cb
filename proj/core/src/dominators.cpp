#include "mgb/dominators.hpp"

#include <algorithm>
#include <bit>

#include "mgb/error.hpp"

namespace mgb {

namespace {

using Bits = std::vector<std::uint64_t>;

std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

void set_bit(Bits& b, std::size_t i) { b[i / 64] |= std::uint64_t{1} << (i % 64); }

// Reverse postorder from `root` following `succs`.
std::vector<BlockIndex> reverse_postorder(const std::vector<std::vector<BlockIndex>>& succs, BlockIndex root) {
  std::vector<BlockIndex> order;
  std::vector<bool> seen(succs.size(), false);
  std::vector<std::pair<BlockIndex, std::size_t>> stack{{root, 0}};
  seen[root] = true;
  while (!stack.empty()) {
    auto& [b, next] = stack.back();
    if (next < succs[b].size()) {
      BlockIndex s = succs[b][next++];
      if (!seen[s]) {
        seen[s] = true;
        stack.push_back({s, 0});
      }
    } else {
      order.push_back(b);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

std::vector<Bits> solve(const std::vector<std::vector<BlockIndex>>& succs,
                        const std::vector<std::vector<BlockIndex>>& preds, BlockIndex root) {
  const std::size_t n = succs.size();
  const std::size_t w = words_for(n);
  Bits all(w, ~std::uint64_t{0});
  if (n % 64) all.back() = (std::uint64_t{1} << (n % 64)) - 1;

  std::vector<Bits> dom(n, all);
  dom[root].assign(w, 0);
  set_bit(dom[root], root);

  const auto order = reverse_postorder(succs, root);
  Bits scratch(w);
  bool changed = true;
  while (changed) {
    changed = false;
    for (BlockIndex b : order) {
      if (b == root) continue;
      scratch = all;
      for (BlockIndex p : preds[b]) {
        for (std::size_t i = 0; i < w; ++i) scratch[i] &= dom[p][i];
      }
      set_bit(scratch, b);
      if (scratch != dom[b]) {
        dom[b] = scratch;
        changed = true;
      }
    }
  }
  return dom;
}

std::vector<std::string> labels_of(const FunctionGraph& f) {
  std::vector<std::string> out;
  out.reserve(f.blocks.size());
  for (const auto& b : f.blocks) out.push_back(b.label);
  return out;
}

}  // namespace

DominatorMap::DominatorMap(std::vector<std::string> labels, BlockIndex root,
                           std::vector<std::vector<std::uint64_t>> sets)
    : labels_(std::move(labels)), root_(root), sets_(std::move(sets)) {
  const std::size_t n = labels_.size();
  depth_.resize(n);
  idom_.resize(n);
  for (BlockIndex b = 0; b < n; ++b) {
    std::size_t count = 0;
    for (auto word : sets_[b]) count += static_cast<std::size_t>(std::popcount(word));
    depth_[b] = count;
  }
  // The strict dominators of b form a chain; the immediate one is the deepest.
  for (BlockIndex b = 0; b < n; ++b) {
    std::optional<BlockIndex> best;
    for (BlockIndex a = 0; a < n; ++a) {
      if (a == b || !dominates(a, b)) continue;
      if (!best || depth_[a] > depth_[*best]) best = a;
    }
    idom_[b] = best;
  }
}

BlockIndex DominatorMap::index_of(std::string_view label) const {
  for (BlockIndex i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  throw ContractViolation("unknown block label '" + std::string(label) + "'");
}

bool DominatorMap::dominates(std::string_view a, std::string_view b) const {
  return dominates(index_of(a), index_of(b));
}

std::vector<BlockIndex> DominatorMap::dominators_of(BlockIndex b) const {
  std::vector<BlockIndex> out;
  for (BlockIndex a = 0; a < labels_.size(); ++a) {
    if (dominates(a, b)) out.push_back(a);
  }
  return out;
}

std::set<std::string> DominatorMap::dominators_of(std::string_view label) const {
  std::set<std::string> out;
  for (BlockIndex a : dominators_of(index_of(label))) out.insert(labels_[a]);
  return out;
}

std::optional<std::string> DominatorMap::idom(std::string_view label) const {
  if (auto i = idom_[index_of(label)]) return labels_[*i];
  return std::nullopt;
}

DominatorMap compute_dominators(const FunctionGraph& f) {
  const Cfg cfg = Cfg::of(f);
  return DominatorMap(labels_of(f), cfg.entry, solve(cfg.succs, cfg.preds, cfg.entry));
}

DominatorMap compute_postdominators(const FunctionGraph& f) {
  const Cfg cfg = Cfg::of(f);
  return DominatorMap(labels_of(f), cfg.exit, solve(cfg.preds, cfg.succs, cfg.exit));
}

}  // namespace mgb
