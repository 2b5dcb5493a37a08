#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "quadboost/blocks.hpp"
#include "quadboost/common.hpp"

namespace quadboost {

// ---- Bitmap ----

// Placement bitmap: bit i set means instance i goes left. Serialized length
// is always ceil(nbits / 8) bytes.
struct Bitmap {
  std::uint64_t nbits = 0;
  std::vector<std::uint8_t> bytes;

  Bitmap() = default;
  explicit Bitmap(std::uint64_t n) : nbits(n), bytes((n + 7) / 8, 0) {}

  void set(std::uint64_t i) { bytes[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7)); }
  bool get(std::uint64_t i) const { return (bytes[i >> 3] >> (i & 7)) & 1u; }

  std::uint64_t byte_size() const { return bytes.size(); }

  void merge_from(const Bitmap& o) {
    if (o.nbits != nbits) throw DataError("bitmap size mismatch");
    for (std::size_t k = 0; k < bytes.size(); ++k) bytes[k] |= o.bytes[k];
  }
};

// ---- Row store ----

// Binned rows of one worker. Horizontal workers hold a single block over
// their shard in the global feature domain; vertical workers hold the
// repartitioned blocks of their feature group over every instance.
struct RowStore {
  BlockList list;
  int num_features = 0;  // feature id domain of the stored pairs

  RowSlice row(std::uint64_t global_row) const { return list.row(global_row); }
};

// ---- Column store ----

// Per-feature arrays of (instance id, bin), each sorted by instance id.
struct ColumnStore {
  struct Column {
    std::vector<std::uint32_t> instances;
    std::vector<std::uint16_t> bins;
    std::size_t size() const { return instances.size(); }
  };

  std::vector<Column> columns;

  int num_features() const { return static_cast<int>(columns.size()); }

  static ColumnStore from_blocks(const BlockList& list, int num_features) {
    ColumnStore cs;
    cs.columns.resize(num_features);
    const std::uint64_t base = list.base();
    const std::uint64_t rows = list.total_rows();
    for (std::uint64_t r = 0; r < rows; ++r) {
      const RowSlice s = list.row(base + r);
      for (std::size_t k = 0; k < s.count; ++k) {
        Column& col = cs.columns[s.fids[k]];
        col.instances.push_back(static_cast<std::uint32_t>(base + r));
        col.bins.push_back(s.bins[k]);
      }
    }
    return cs;
  }

  // Bin of `instance` in column f, or -1 when the value is missing.
  int find_bin(int f, std::uint32_t instance) const {
    const Column& col = columns[f];
    std::size_t lo = 0, hi = col.instances.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (col.instances[mid] < instance) lo = mid + 1; else hi = mid;
    }
    if (lo < col.instances.size() && col.instances[lo] == instance) return col.bins[lo];
    return -1;
  }
};

// ---- Node / instance indexes ----

// Node-to-instance: one permutation of instance ids, a (begin, end) range
// per open node. Splits partition a parent's range in place; the partition
// is stable so every node's list stays ascending.
class NodeToInstanceIndex {
 public:
  void init_root(std::uint64_t base, std::uint64_t count) {
    order_.resize(count);
    for (std::uint64_t i = 0; i < count; ++i)
      order_[i] = static_cast<std::uint32_t>(base + i);
    ranges_.assign(2, {0, 0});
    ranges_[1] = {0, count};
  }

  std::uint64_t count(int node) const {
    const auto& r = range(node);
    return r.second - r.first;
  }

  const std::uint32_t* begin(int node) const { return order_.data() + range(node).first; }
  const std::uint32_t* end(int node) const { return order_.data() + range(node).second; }

  // Moves instances with a set bitmap bit to child 2n, the rest to 2n+1.
  void split(int node, const Bitmap& left_mask) {
    const auto r = range(node);
    auto* base = order_.data();
    std::stable_partition(base + r.first, base + r.second,
                          [&left_mask](std::uint32_t id) { return left_mask.get(id); });
    std::uint64_t mid = r.first;
    while (mid < r.second && left_mask.get(base[mid])) ++mid;
    set_range(2 * node, {r.first, mid});
    set_range(2 * node + 1, {mid, r.second});
  }

  bool has(int node) const {
    return node >= 1 && node < static_cast<int>(ranges_.size()) &&
           (ranges_[node].second > ranges_[node].first || node == 1);
  }

 private:
  using Range = std::pair<std::uint64_t, std::uint64_t>;

  const Range& range(int node) const {
    if (node < 1 || node >= static_cast<int>(ranges_.size()))
      throw DataError("node index: unknown node");
    return ranges_[node];
  }

  void set_range(int node, Range r) {
    if (node >= static_cast<int>(ranges_.size())) ranges_.resize(node + 1, {0, 0});
    ranges_[node] = r;
  }

  std::vector<std::uint32_t> order_;
  std::vector<Range> ranges_;
};

// Instance-to-node: node id per instance, indexed by instance id - base.
class InstanceToNodeIndex {
 public:
  void init_root(std::uint64_t base, std::uint64_t count) {
    base_ = base;
    node_of_.assign(count, 1);
  }

  std::uint32_t node_of(std::uint64_t instance) const { return node_of_[instance - base_]; }

  // Reassigns every instance of `node` to a child by the bitmap.
  void split(int node, const Bitmap& left_mask) {
    split_layer({node}, left_mask);
  }

  // Same, for all splitting nodes of a layer in one pass.
  void split_layer(const std::vector<int>& nodes, const Bitmap& left_mask) {
    int mx = 0;
    for (int n : nodes) mx = std::max(mx, n);
    std::vector<bool> splitting(mx + 1, false);
    for (int n : nodes) splitting[n] = true;
    for (std::uint64_t i = 0; i < node_of_.size(); ++i) {
      const std::uint32_t n = node_of_[i];
      if (n <= static_cast<std::uint32_t>(mx) && splitting[n]) {
        const std::uint64_t id = base_ + i;
        node_of_[i] = static_cast<std::uint32_t>(left_mask.get(id) ? 2 * n : 2 * n + 1);
      }
    }
  }

  std::uint64_t size() const { return node_of_.size(); }
  std::uint64_t base() const { return base_; }

 private:
  std::uint64_t base_ = 0;
  std::vector<std::uint32_t> node_of_;
};

// Column-wise index: each column's entry positions partitioned per node,
// kept in instance order inside every node range.
class ColumnWiseIndex {
 public:
  void init_root(const ColumnStore& cs) {
    cols_.clear();
    cols_.resize(cs.columns.size());
    for (std::size_t f = 0; f < cs.columns.size(); ++f) {
      auto& c = cols_[f];
      c.order.resize(cs.columns[f].size());
      for (std::size_t i = 0; i < c.order.size(); ++i)
        c.order[i] = static_cast<std::uint32_t>(i);
      c.ranges.assign(2, {0, 0});
      c.ranges[1] = {0, c.order.size()};
    }
  }

  // Positions of `node`'s entries inside column f.
  std::pair<const std::uint32_t*, const std::uint32_t*> positions(int f, int node) const {
    const auto& c = cols_[f];
    if (node < 1 || node >= static_cast<int>(c.ranges.size()))
      return {c.order.data(), c.order.data()};
    const auto& r = c.ranges[node];
    return {c.order.data() + r.first, c.order.data() + r.second};
  }

  void split(int node, const Bitmap& left_mask, const ColumnStore& cs) {
    for (std::size_t f = 0; f < cols_.size(); ++f) {
      auto& c = cols_[f];
      if (node >= static_cast<int>(c.ranges.size())) c.ranges.resize(node + 1, {0, 0});
      const auto r = c.ranges[node];
      const auto& col = cs.columns[f];
      auto* base = c.order.data();
      std::stable_partition(base + r.first, base + r.second,
                            [&](std::uint32_t pos) { return left_mask.get(col.instances[pos]); });
      std::size_t mid = r.first;
      while (mid < r.second && left_mask.get(col.instances[base[mid]])) ++mid;
      const int l = 2 * node, rgt = 2 * node + 1;
      if (rgt >= static_cast<int>(c.ranges.size())) c.ranges.resize(rgt + 1, {0, 0});
      c.ranges[l] = {r.first, mid};
      c.ranges[rgt] = {mid, r.second};
    }
  }

 private:
  struct PerColumn {
    std::vector<std::uint32_t> order;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
  };

  std::vector<PerColumn> cols_;
};

}  // namespace quadboost
