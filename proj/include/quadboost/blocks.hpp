#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/wire.hpp"

namespace quadboost {

// One repartitioned chunk of binned data: every (local feature id, bin) pair
// of a contiguous row range, plus instance pointers delimiting rows. Rows
// with no pairs still count; `rows` covers the whole origin range so row ids
// stay dense when blocks are lined up.
//
// Wire layout, little-endian:
//   split_index u32 | rows u32 | pairs u64 | fid_width u8 | bin_width u8 |
//   fids packed fid_width each | bins packed bin_width each |
//   instance_ptrs u64 x (rows + 1)
struct Block {
  std::uint32_t split_index = 0;
  std::uint32_t rows = 0;
  int fid_width = 0;
  int bin_width = 0;
  std::vector<std::uint32_t> fids;
  std::vector<std::uint16_t> bins;
  std::vector<std::uint64_t> instance_ptrs{0};

  std::uint64_t pairs() const { return fids.size(); }

  static constexpr std::uint64_t kHeaderBytes = 18;

  std::uint64_t wire_bytes() const {
    return kHeaderBytes + pairs() * static_cast<std::uint64_t>(fid_width + bin_width) +
           8 * (static_cast<std::uint64_t>(rows) + 1);
  }

  void validate() const {
    if (instance_ptrs.size() != static_cast<std::size_t>(rows) + 1)
      throw DataError("block: instance_ptrs length must be rows + 1");
    if (instance_ptrs.front() != 0 || instance_ptrs.back() != pairs())
      throw DataError("block: instance_ptrs must span all pairs");
    for (std::size_t i = 1; i < instance_ptrs.size(); ++i)
      if (instance_ptrs[i] < instance_ptrs[i - 1])
        throw DataError("block: instance_ptrs must be non-decreasing");
    if (bins.size() != fids.size()) throw DataError("block: fid/bin length mismatch");
  }

  void serialize(ByteWriter& w) const {
    validate();
    w.u32(split_index);
    w.u32(rows);
    w.u64(pairs());
    w.u8(static_cast<std::uint8_t>(fid_width));
    w.u8(static_cast<std::uint8_t>(bin_width));
    for (std::uint32_t f : fids) w.packed(f, fid_width);
    for (std::uint16_t b : bins) w.packed(b, bin_width);
    for (std::uint64_t p : instance_ptrs) w.u64(p);
  }

  static Block deserialize(ByteReader& r) {
    Block b;
    b.split_index = r.u32();
    b.rows = r.u32();
    const std::uint64_t pairs = r.u64();
    b.fid_width = r.u8();
    b.bin_width = r.u8();
    if (b.fid_width > 4 || b.bin_width > 2) throw DataError("block: widths out of range");
    b.fids.resize(pairs);
    b.bins.resize(pairs);
    for (std::uint64_t i = 0; i < pairs; ++i)
      b.fids[i] = static_cast<std::uint32_t>(r.packed(b.fid_width));
    for (std::uint64_t i = 0; i < pairs; ++i)
      b.bins[i] = static_cast<std::uint16_t>(r.packed(b.bin_width));
    b.instance_ptrs.resize(b.rows + 1);
    for (std::uint32_t i = 0; i <= b.rows; ++i) b.instance_ptrs[i] = r.u64();
    b.validate();
    return b;
  }
};

// A row's pair slice inside one block.
struct RowSlice {
  const std::uint32_t* fids = nullptr;
  const std::uint16_t* bins = nullptr;
  std::size_t count = 0;
};

// Blocks of one worker ordered by origin split index. `base` is the global
// id of the first covered row; after assembly row ids are dense over
// [base, base + total_rows).
class BlockList {
 public:
  BlockList() = default;

  explicit BlockList(std::vector<Block> blocks, std::uint64_t base = 0) : base_(base) {
    std::sort(blocks.begin(), blocks.end(),
              [](const Block& a, const Block& b) { return a.split_index < b.split_index; });
    blocks_ = std::move(blocks);
    reindex();
  }

  std::uint64_t base() const { return base_; }
  std::uint64_t total_rows() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::uint64_t total_pairs() const {
    std::uint64_t s = 0;
    for (const Block& b : blocks_) s += b.pairs();
    return s;
  }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Two-phase indexing: binary search the block by row offset, then use
  // the block's instance pointers.
  RowSlice row(std::uint64_t global_row) const {
    if (global_row < base_ || global_row - base_ >= total_rows())
      throw DataError("row id outside block list");
    const std::uint64_t rel = global_row - base_;
    std::size_t lo = 0, hi = blocks_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (offsets_[mid + 1] <= rel) lo = mid + 1; else hi = mid;
    }
    const Block& b = blocks_[lo];
    const std::uint64_t local = rel - offsets_[lo];
    const std::uint64_t p0 = b.instance_ptrs[local];
    const std::uint64_t p1 = b.instance_ptrs[local + 1];
    return {b.fids.data() + p0, b.bins.data() + p0, static_cast<std::size_t>(p1 - p0)};
  }

  // Concatenates runs of adjacent blocks until at most `target` remain.
  // Pair data and row coverage are preserved; a merged block keeps the first
  // member's split index.
  void merge_to(std::size_t target = 5) {
    if (target < 1) throw ConfigError("merge target must be >= 1");
    if (blocks_.size() <= target) return;
    const std::size_t groups = target;
    std::vector<Block> merged;
    merged.reserve(groups);
    const std::size_t n = blocks_.size();
    std::size_t at = 0;
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const std::size_t end = n * (gi + 1) / groups;
      Block acc = std::move(blocks_[at++]);
      while (at < end) {
        Block& b = blocks_[at++];
        if (b.fid_width != acc.fid_width || b.bin_width != acc.bin_width)
          throw DataError("merge: block widths differ");
        const std::uint64_t pair_base = acc.pairs();
        acc.fids.insert(acc.fids.end(), b.fids.begin(), b.fids.end());
        acc.bins.insert(acc.bins.end(), b.bins.begin(), b.bins.end());
        for (std::size_t i = 1; i < b.instance_ptrs.size(); ++i)
          acc.instance_ptrs.push_back(pair_base + b.instance_ptrs[i]);
        acc.rows += b.rows;
      }
      merged.push_back(std::move(acc));
    }
    blocks_ = std::move(merged);
    reindex();
  }

 private:
  void reindex() {
    offsets_.assign(1, 0);
    for (const Block& b : blocks_) {
      b.validate();
      offsets_.push_back(offsets_.back() + b.rows);
    }
  }

  std::vector<Block> blocks_;
  std::vector<std::uint64_t> offsets_{0};
  std::uint64_t base_ = 0;
};

}  // namespace quadboost
