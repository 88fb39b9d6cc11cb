#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/trace_model.hpp"

namespace mgb {

/// Dominance (or post-dominance) facts for one function, exposed both as
/// full dominator sets and as the immediate-dominator tree.
class DominatorMap {
 public:
  DominatorMap() = default;
  DominatorMap(std::vector<std::string> labels, BlockIndex root,
               std::vector<std::vector<std::uint64_t>> sets);

  std::size_t size() const { return labels_.size(); }
  BlockIndex root() const { return root_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// True when `a` dominates `b` (reflexive).
  bool dominates(BlockIndex a, BlockIndex b) const {
    return (sets_[b][a / 64] >> (a % 64)) & 1u;
  }
  bool dominates(std::string_view a, std::string_view b) const;

  std::vector<BlockIndex> dominators_of(BlockIndex b) const;
  std::set<std::string> dominators_of(std::string_view label) const;

  /// Immediate dominator; empty for the root.
  std::optional<BlockIndex> idom(BlockIndex b) const { return idom_[b]; }
  std::optional<std::string> idom(std::string_view label) const;

  /// |dom(b)|, i.e. depth in the dominator tree counting the root as 1.
  std::size_t depth(BlockIndex b) const { return depth_[b]; }

 private:
  BlockIndex index_of(std::string_view label) const;

  std::vector<std::string> labels_;
  BlockIndex root_ = 0;
  std::vector<std::vector<std::uint64_t>> sets_;
  std::vector<std::optional<BlockIndex>> idom_;
  std::vector<std::size_t> depth_;
};

/// Iterative dataflow dominators rooted at the entry block.
DominatorMap compute_dominators(const FunctionGraph& f);

/// Dominators of the edge-reversed CFG rooted at the single exit block.
DominatorMap compute_postdominators(const FunctionGraph& f);

}  // namespace mgb
