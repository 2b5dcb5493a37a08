#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "quadboost/blocks.hpp"
#include "quadboost/common.hpp"
#include "quadboost/dataset.hpp"
#include "quadboost/ledger.hpp"
#include "quadboost/sketch.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

// ---- Feature assignment ----

// Result of column balancing: a partition of the feature space into one
// group per worker, with stable local ids (ascending global id order).
struct FeatureAssignment {
  std::vector<int> owner;               // global fid -> worker
  std::vector<int> local_id;            // global fid -> position in its group
  std::vector<std::vector<int>> group;  // worker -> sorted global fids
  std::vector<std::uint64_t> load;      // worker -> assigned value count

  int group_size(int w) const { return static_cast<int>(group[w].size()); }
};

// Greedy longest-processing-time balance: features in decreasing value
// count (ties toward the lower feature id) each go to the least loaded
// worker, ties toward the lower worker id.
inline FeatureAssignment balance_columns(const std::vector<std::uint64_t>& counts,
                                         int workers) {
  if (workers < 1) throw ConfigError("balance needs at least one worker");
  const int d = static_cast<int>(counts.size());
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&counts](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });

  FeatureAssignment out;
  out.owner.assign(d, 0);
  out.local_id.assign(d, -1);
  out.group.resize(workers);
  out.load.assign(workers, 0);
  for (const int f : order) {
    int w = 0;
    for (int k = 1; k < workers; ++k)
      if (out.load[k] < out.load[w]) w = k;
    out.owner[f] = w;
    out.load[w] += counts[f];
    out.group[w].push_back(f);
  }
  for (int w = 0; w < workers; ++w) {
    std::sort(out.group[w].begin(), out.group[w].end());
    for (int i = 0; i < static_cast<int>(out.group[w].size()); ++i)
      out.local_id[out.group[w][i]] = i;
  }
  return out;
}

// ---- Candidate split table ----

inline std::uint64_t splits_table_bytes(const CandidateSplits& s) {
  std::uint64_t b = 4;  // feature count
  for (const auto& sp : s.per_feature) b += 2 + 8 * sp.size();
  return b;
}

inline void serialize_splits(ByteWriter& w, const CandidateSplits& s) {
  w.u32(static_cast<std::uint32_t>(s.per_feature.size()));
  for (const auto& sp : s.per_feature) {
    w.u16(static_cast<std::uint16_t>(sp.size()));
    for (double v : sp) w.f64(v);
  }
}

inline CandidateSplits deserialize_splits(ByteReader& r) {
  CandidateSplits s;
  s.per_feature.resize(r.u32());
  for (auto& sp : s.per_feature) {
    sp.resize(r.u16());
    for (double& v : sp) v = r.f64();
  }
  s.validate();
  return s;
}

// ---- Sketch and propose ----

// Both partitioning families find candidate splits the same way: workers
// sketch their shard, feature f's sketches merge at worker f mod W in
// ascending worker order, the merge owners report proposals and value
// counts to the master, and the master broadcasts the assembled table.
struct SketchPhaseResult {
  CandidateSplits splits;
  std::vector<int> nsplits;                // per feature proposed split count
  std::vector<std::uint64_t> value_counts; // per feature global occurrences
};

inline SketchPhaseResult sketch_and_propose(const std::vector<SparseDataset>& shards,
                                            int num_features, int bins, double eps,
                                            MessageLedger& ledger, std::uint32_t round = 0) {
  const int workers = static_cast<int>(shards.size());
  if (workers < 1) throw ConfigError("sketch phase needs at least one shard");

  std::uint64_t total_rows = 0;
  for (const auto& s : shards) total_rows += s.rows();
  const std::uint64_t n_est = std::max<std::uint64_t>(total_rows, 2);

  // local sketches; worker -> feature -> sketch
  std::vector<std::vector<QuantileSketch>> local;
  local.reserve(workers);
  for (const auto& shard : shards) {
    std::vector<QuantileSketch> per_f(num_features, QuantileSketch(eps, n_est));
    for (std::uint64_t i = 0; i < shard.rows(); ++i)
      for (std::uint64_t k = shard.row_ptr[i]; k < shard.row_ptr[i + 1]; ++k)
        per_f[shard.feat_ids[k]].update(shard.values[k]);
    local.push_back(std::move(per_f));
  }

  // repartition to merge owners: one message per (src, owner) pair carrying
  // every non-empty sketch record, 4 bytes of feature id plus the record
  for (int src = 0; src < workers; ++src) {
    std::vector<std::uint64_t> to_owner(workers, 0);
    for (int f = 0; f < num_features; ++f) {
      if (local[src][f].count() == 0) continue;
      const int owner = f % workers;
      if (owner != src) to_owner[owner] += 4 + local[src][f].serialized_bytes();
    }
    for (int dst = 0; dst < workers; ++dst)
      if (to_owner[dst] > 0) ledger.log(round, Phase::kSketch, src, dst, to_owner[dst]);
  }

  // merge in ascending worker order and propose
  SketchPhaseResult out;
  out.splits.per_feature.resize(num_features);
  out.nsplits.assign(num_features, 0);
  out.value_counts.assign(num_features, 0);
  std::vector<std::uint64_t> owner_report(workers, 0);
  for (int f = 0; f < num_features; ++f) {
    QuantileSketch merged(eps, n_est);
    for (int w = 0; w < workers; ++w)
      if (local[w][f].count() > 0) merged = sketch_merge(merged, local[w][f]);
    out.value_counts[f] = merged.count();
    if (merged.count() == 0) continue;
    out.splits.per_feature[f] = propose_splits(merged, bins);
    out.nsplits[f] = static_cast<int>(out.splits.per_feature[f].size());
    // owner -> master: fid u32, count u64, k u16, split values
    owner_report[f % workers] += 14 + 8 * out.splits.per_feature[f].size();
  }
  for (int w = 0; w < workers; ++w)
    if (owner_report[w] > 0) ledger.log(round, Phase::kSplits, w, kMaster, owner_report[w]);

  // master broadcasts the dense table
  const std::uint64_t table = splits_table_bytes(out.splits);
  for (int w = 0; w < workers; ++w) ledger.log(round, Phase::kSplits, kMaster, w, table);
  return out;
}

// ---- Encoding ----

// Encodes the pairs of `shard` rows [row_lo, row_hi) (local indices) that
// belong to worker `dst` into one block. Pair widths come from the
// destination group size and the configured bin count; local feature ids
// ascend within each row because groups are sorted by global id.
inline Block encode_group_rows(const SparseDataset& shard, std::uint64_t row_lo,
                               std::uint64_t row_hi, std::uint64_t global_base,
                               const FeatureAssignment& assign, int dst,
                               const CandidateSplits& splits, int bins_cfg) {
  Block b;
  b.split_index = static_cast<std::uint32_t>(global_base + row_lo);
  b.rows = static_cast<std::uint32_t>(row_hi - row_lo);
  b.fid_width = byte_width(assign.group[dst].size());
  b.bin_width = byte_width(static_cast<std::uint64_t>(bins_cfg));
  for (std::uint64_t i = row_lo; i < row_hi; ++i) {
    for (std::uint64_t k = shard.row_ptr[i]; k < shard.row_ptr[i + 1]; ++k) {
      const int f = shard.feat_ids[k];
      if (assign.owner[f] != dst) continue;
      b.fids.push_back(static_cast<std::uint32_t>(assign.local_id[f]));
      b.bins.push_back(
          static_cast<std::uint16_t>(bin_of(splits.per_feature[f], shard.values[k])));
    }
    b.instance_ptrs.push_back(b.fids.size());
  }
  b.validate();
  return b;
}

// Horizontal workers keep their shard as one block in the global feature
// domain. These blocks never cross the wire; widths are bookkeeping only.
inline Block encode_shard_full(const SparseDataset& shard, std::uint64_t global_base,
                               const CandidateSplits& splits, int bins_cfg) {
  Block b;
  b.split_index = static_cast<std::uint32_t>(global_base);
  b.rows = static_cast<std::uint32_t>(shard.rows());
  b.fid_width = byte_width(static_cast<std::uint64_t>(shard.num_features));
  b.bin_width = byte_width(static_cast<std::uint64_t>(bins_cfg));
  for (std::uint64_t i = 0; i < shard.rows(); ++i) {
    for (std::uint64_t k = shard.row_ptr[i]; k < shard.row_ptr[i + 1]; ++k) {
      const int f = shard.feat_ids[k];
      if (splits.per_feature[f].empty()) continue;  // feature absent globally
      b.fids.push_back(static_cast<std::uint32_t>(f));
      b.bins.push_back(
          static_cast<std::uint16_t>(bin_of(splits.per_feature[f], shard.values[k])));
    }
    b.instance_ptrs.push_back(b.fids.size());
  }
  b.validate();
  return b;
}

// ---- Repartition ----

// Accounting mode for repartition traffic. The naive baseline ships every
// pair as instance id u32 + feature id u32 + value f32; compressed pairs
// cost their packed widths; blockified messages cost full block wire bytes.
enum class RepartitionCosting { kNaive, kCompress, kBlockify };

inline const char* costing_name(RepartitionCosting m) {
  switch (m) {
    case RepartitionCosting::kNaive: return "naive";
    case RepartitionCosting::kCompress: return "compress";
    case RepartitionCosting::kBlockify: return "blockify";
  }
  return "?";
}

inline std::uint64_t repartition_bytes(const Block& b, RepartitionCosting mode) {
  switch (mode) {
    case RepartitionCosting::kNaive: return 12 * b.pairs();
    case RepartitionCosting::kCompress:
      return b.pairs() * static_cast<std::uint64_t>(b.fid_width + b.bin_width);
    case RepartitionCosting::kBlockify: return b.wire_bytes();
  }
  throw ConfigError("unknown repartition costing");
}

struct RepartitionResult {
  std::vector<BlockList> per_worker;  // dst -> blocks covering all rows
};

// The vertical repartition: the master broadcasts the feature assignment
// (one owner byte per feature), then every source shard encodes one block
// per destination (or rows_per_block sized chunks) and ships the foreign
// ones. Block split indices are first-row global ids, so destination lists
// assemble in row order regardless of arrival order.
inline RepartitionResult vertical_repartition(
    const std::vector<SparseDataset>& shards, const std::vector<ShardRange>& ranges,
    const FeatureAssignment& assign, const CandidateSplits& splits, int bins_cfg,
    std::uint64_t rows_per_block, RepartitionCosting mode, MessageLedger& ledger,
    std::uint32_t round = 0) {
  const int workers = static_cast<int>(shards.size());
  if (static_cast<int>(ranges.size()) != workers)
    throw ConfigError("repartition: shard/range count mismatch");
  if (workers > 255) throw ConfigError("repartition: at most 255 workers");

  const std::uint64_t assign_msg = 4 + assign.owner.size();
  for (int w = 0; w < workers; ++w)
    ledger.log(round, Phase::kRepartition, kMaster, w, assign_msg);

  std::vector<std::vector<Block>> inbox(workers);
  for (int src = 0; src < workers; ++src) {
    const std::uint64_t n = shards[src].rows();
    const std::uint64_t chunk = rows_per_block == 0 ? std::max<std::uint64_t>(n, 1)
                                                    : rows_per_block;
    for (int dst = 0; dst < workers; ++dst) {
      std::uint64_t sent = 0;
      for (std::uint64_t lo = 0; lo < n; lo += chunk) {
        const std::uint64_t hi = std::min(n, lo + chunk);
        Block b = encode_group_rows(shards[src], lo, hi, ranges[src].lo, assign, dst,
                                    splits, bins_cfg);
        if (dst != src) sent += repartition_bytes(b, mode);
        inbox[dst].push_back(std::move(b));
      }
      if (dst != src && sent > 0) ledger.log(round, Phase::kRepartition, src, dst, sent);
    }
  }

  RepartitionResult out;
  out.per_worker.reserve(workers);
  for (int dst = 0; dst < workers; ++dst)
    out.per_worker.emplace_back(std::move(inbox[dst]), 0);
  return out;
}

// ---- Label exchange ----

// Vertical workers need every instance's label: shards flow to the master
// and the full vector returns to each worker. Classification labels are
// small integers and travel as f32; square loss labels as f64.
inline void exchange_labels(const std::vector<ShardRange>& ranges, Loss loss,
                            MessageLedger& ledger, std::uint32_t round = 0) {
  const std::uint64_t width = loss == Loss::kSquare ? 8 : 4;
  std::uint64_t total = 0;
  for (const ShardRange& r : ranges) total += r.size();
  for (int w = 0; w < static_cast<int>(ranges.size()); ++w)
    if (ranges[w].size() > 0)
      ledger.log(round, Phase::kLabels, w, kMaster, ranges[w].size() * width);
  for (int w = 0; w < static_cast<int>(ranges.size()); ++w)
    ledger.log(round, Phase::kLabels, kMaster, w, total * width);
}

}  // namespace quadboost
