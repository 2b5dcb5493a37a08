#pragma once

#include <cstdint>
#include <vector>

#include "quadboost/dataset.hpp"
#include "quadboost/ledger.hpp"
#include "quadboost/transform.hpp"

namespace quadboost {

struct BenchRow {
  RepartitionCosting mode = RepartitionCosting::kNaive;
  std::uint64_t bytes = 0;     // repartition traffic under this accounting
  std::uint64_t messages = 0;  // charged repartition messages
};

// Runs the vertical repartition of one dataset under each accounting mode
// and reports the shipped bytes. The sketch phase runs once; the candidate
// table and feature assignment are shared by all three rows.
inline std::vector<BenchRow> bench_transform(const SparseDataset& data, int workers,
                                             int bins, double eps,
                                             std::uint64_t rows_per_block) {
  data.validate();
  std::vector<SparseDataset> shards(workers);
  std::vector<ShardRange> ranges(workers);
  for (int w = 0; w < workers; ++w) {
    ranges[w] = shard_range(data.rows(), workers, w);
    shards[w].num_features = data.num_features;
    for (std::uint64_t i = ranges[w].lo; i < ranges[w].hi; ++i)
      shards[w].push_row(data.row(i), data.labels[i]);
    shards[w].num_features = data.num_features;
  }

  MessageLedger sketch_ledger;
  const SketchPhaseResult sk =
      sketch_and_propose(shards, data.num_features, bins, eps, sketch_ledger, 0);
  const FeatureAssignment assign = balance_columns(sk.value_counts, workers);

  std::vector<BenchRow> out;
  for (const RepartitionCosting mode :
       {RepartitionCosting::kNaive, RepartitionCosting::kCompress,
        RepartitionCosting::kBlockify}) {
    MessageLedger ledger;
    vertical_repartition(shards, ranges, assign, sk.splits, bins, rows_per_block, mode,
                         ledger, 0);
    BenchRow row;
    row.mode = mode;
    for (const auto& r : ledger.records())
      if (r.phase == Phase::kRepartition && r.src != kMaster) {
        row.bytes += r.bytes;
        ++row.messages;
      }
    out.push_back(row);
  }
  return out;
}

}  // namespace quadboost
