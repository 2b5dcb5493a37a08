#include <cstdint>
#include <vector>

#include "doctest.h"
#include "quadboost/synth.hpp"
#include "quadboost/transform.hpp"

using namespace quadboost;

namespace {

SparseDataset two_row_shard(std::vector<std::vector<std::pair<int, double>>> rows) {
  SparseDataset d;
  for (auto& r : rows) {
    SparseVector x;
    x.pairs = std::move(r);
    d.push_row(x, 0.0);
  }
  return d;
}

// shard0: f0 {1,2}, f1 {10,20}; shard1: f0 {3,4}
std::vector<SparseDataset> fixture_shards() {
  std::vector<SparseDataset> shards;
  shards.push_back(two_row_shard({{{0, 1.0}, {1, 10.0}}, {{0, 2.0}, {1, 20.0}}}));
  shards.push_back(two_row_shard({{{0, 3.0}}, {{0, 4.0}}}));
  shards[1].num_features = 2;
  return shards;
}

FeatureAssignment fixture_assignment() {
  FeatureAssignment a;
  a.owner = {1, 0};
  a.local_id = {0, 0};
  a.group = {{1}, {0}};
  a.load = {2, 2};
  return a;
}

CandidateSplits fixture_splits() {
  CandidateSplits s;
  s.per_feature = {{1.0, 2.0, 3.0, 4.0}, {10.0, 20.0}};
  return s;
}

}  // namespace

TEST_CASE("column balancing follows longest-processing-time order") {
  const FeatureAssignment a = balance_columns({5, 4, 3, 2, 1}, 2);
  CHECK(a.load == std::vector<std::uint64_t>{8, 7});
  CHECK(a.group[0] == std::vector<int>{0, 3, 4});
  CHECK(a.group[1] == std::vector<int>{1, 2});
  CHECK(a.owner == std::vector<int>{0, 1, 1, 0, 0});
  CHECK(a.local_id == std::vector<int>{0, 0, 1, 1, 2});
  CHECK(a.group_size(0) == 3);

  // equal counts tie toward lower feature and worker ids
  const FeatureAssignment t = balance_columns({3, 3, 3}, 3);
  CHECK(t.owner == std::vector<int>{0, 1, 2});

  CHECK_THROWS_AS(balance_columns({1}, 0), ConfigError);
}

TEST_CASE("candidate split table bytes and round-trip") {
  CandidateSplits s;
  s.per_feature = {{1.5, 2.5}, {}, {7.0}};
  CHECK(splits_table_bytes(s) == 4 + (2 + 16) + 2 + (2 + 8));

  ByteWriter w;
  serialize_splits(w, s);
  CHECK(w.size() == splits_table_bytes(s));
  ByteReader r(w.data());
  const CandidateSplits back = deserialize_splits(r);
  CHECK(r.done());
  CHECK(back.per_feature == s.per_feature);
}

TEST_CASE("sketch phase: proposals, counts, and exact message bytes") {
  const auto shards = fixture_shards();
  MessageLedger ledger;
  const SketchPhaseResult res = sketch_and_propose(shards, 2, 4, 0.1, ledger);

  // four distinct values per feature stream, exact sketches at this size
  CHECK(res.splits.per_feature[0] == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(res.splits.per_feature[1] == std::vector<double>{10.0, 20.0});
  CHECK(res.nsplits == std::vector<int>{4, 2});
  CHECK(res.value_counts == std::vector<std::uint64_t>{4, 2});

  // feature owners are f mod W: worker 0 ships its f1 sketch, worker 1 its
  // f0 sketch; a two-entry sketch record is 12 + 32 bytes, plus 4 of fid
  const auto& recs = ledger.records();
  REQUIRE(ledger.message_count() == 6);
  CHECK(recs[0].phase == Phase::kSketch);
  CHECK(recs[0].src == 0);
  CHECK(recs[0].dst == 1);
  CHECK(recs[0].bytes == 48);
  CHECK(recs[1].src == 1);
  CHECK(recs[1].dst == 0);
  CHECK(recs[1].bytes == 48);

  // owner reports: fid u32 + count u64 + k u16 + k f64
  CHECK(recs[2].phase == Phase::kSplits);
  CHECK(recs[2].src == 0);
  CHECK(recs[2].dst == kMaster);
  CHECK(recs[2].bytes == 14 + 32);
  CHECK(recs[3].src == 1);
  CHECK(recs[3].bytes == 14 + 16);

  // master broadcasts the dense table to both workers
  const std::uint64_t table = splits_table_bytes(res.splits);
  CHECK(table == 4 + (2 + 32) + (2 + 16));
  for (int k = 4; k < 6; ++k) {
    CHECK(recs[k].src == kMaster);
    CHECK(recs[k].dst == k - 4);
    CHECK(recs[k].bytes == table);
  }
}

TEST_CASE("sketch phase handles a globally absent feature") {
  auto shards = fixture_shards();
  shards[0].num_features = 3;
  shards[1].num_features = 3;
  MessageLedger ledger;
  const SketchPhaseResult res = sketch_and_propose(shards, 3, 4, 0.1, ledger);
  CHECK(res.value_counts[2] == 0);
  CHECK(res.nsplits[2] == 0);
  CHECK(res.splits.per_feature[2].empty());
  CHECK(splits_table_bytes(res.splits) == 4 + (2 + 32) + (2 + 16) + 2);
}

TEST_CASE("sketch phase is deterministic") {
  const auto shards = fixture_shards();
  MessageLedger l1, l2;
  const SketchPhaseResult a = sketch_and_propose(shards, 2, 4, 0.1, l1);
  const SketchPhaseResult b = sketch_and_propose(shards, 2, 4, 0.1, l2);
  CHECK(a.splits.per_feature == b.splits.per_feature);
  REQUIRE(l1.message_count() == l2.message_count());
  for (std::size_t i = 0; i < l1.records().size(); ++i) {
    CHECK(l1.records()[i].bytes == l2.records()[i].bytes);
    CHECK(l1.records()[i].src == l2.records()[i].src);
    CHECK(l1.records()[i].dst == l2.records()[i].dst);
  }
}

TEST_CASE("group encoding: widths, split index, and pair content") {
  const auto shards = fixture_shards();
  const FeatureAssignment assign = fixture_assignment();
  const CandidateSplits splits = fixture_splits();

  // worker 0 owns f1 only; its group has one feature so fids pack to zero
  const Block b0 = encode_group_rows(shards[0], 0, 2, 100, assign, 0, splits, 4);
  CHECK(b0.split_index == 100);
  CHECK(b0.rows == 2);
  CHECK(b0.fid_width == 0);
  CHECK(b0.bin_width == 1);
  CHECK(b0.fids == std::vector<std::uint32_t>{0, 0});
  CHECK(b0.bins == std::vector<std::uint16_t>{0, 1});
  CHECK(b0.instance_ptrs == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(b0.wire_bytes() == 18 + 2 * 1 + 8 * 3);

  const Block b1 = encode_group_rows(shards[0], 1, 2, 100, assign, 1, splits, 4);
  CHECK(b1.split_index == 101);
  CHECK(b1.rows == 1);
  CHECK(b1.bins == std::vector<std::uint16_t>{1});  // f0 value 2.0 -> bin 1

  // shard1 has no f1 values: worker 0's block from it is empty but row-dense
  const Block b2 = encode_group_rows(shards[1], 0, 2, 102, assign, 0, splits, 4);
  CHECK(b2.pairs() == 0);
  CHECK(b2.rows == 2);
}

TEST_CASE("repartition byte accounting per mode") {
  Block b;
  b.split_index = 0;
  b.rows = 4;
  b.fid_width = 2;
  b.bin_width = 1;
  for (int i = 0; i < 10; ++i) {
    b.fids.push_back(static_cast<std::uint32_t>(i));
    b.bins.push_back(0);
  }
  b.instance_ptrs = {0, 2, 5, 7, 10};
  CHECK(repartition_bytes(b, RepartitionCosting::kNaive) == 120);
  CHECK(repartition_bytes(b, RepartitionCosting::kCompress) == 30);
  CHECK(repartition_bytes(b, RepartitionCosting::kBlockify) == 18 + 30 + 8 * 5);
}

TEST_CASE("vertical repartition: coverage, charging, and modes") {
  const auto shards = fixture_shards();
  const std::vector<ShardRange> ranges{{0, 2}, {2, 4}};
  const FeatureAssignment assign = fixture_assignment();
  const CandidateSplits splits = fixture_splits();

  MessageLedger ledger;
  const RepartitionResult res = vertical_repartition(shards, ranges, assign, splits, 4, 0,
                                                     RepartitionCosting::kBlockify, ledger);

  // every worker covers all four rows with its own features
  REQUIRE(res.per_worker.size() == 2);
  CHECK(res.per_worker[0].total_rows() == 4);
  CHECK(res.per_worker[1].total_rows() == 4);
  for (int r = 0; r < 4; ++r) {
    const RowSlice f1_row = res.per_worker[0].row(r);
    const RowSlice f0_row = res.per_worker[1].row(r);
    CHECK(f1_row.count == (r < 2 ? 1 : 0));  // f1 present only in shard 0
    REQUIRE(f0_row.count == 1);
    CHECK(f0_row.bins[0] == r);  // f0 value r+1 against splits {1,2,3,4}
  }

  // assignment broadcast: 4 + one owner byte per feature, to each worker
  const auto& recs = ledger.records();
  REQUIRE(ledger.message_count() == 4);
  for (int k = 0; k < 2; ++k) {
    CHECK(recs[k].src == kMaster);
    CHECK(recs[k].bytes == 4 + 2);
  }
  // foreign blocks: src0 -> 1 carries two packed f0 pairs, src1 -> 0 an
  // empty but row-dense block (header + instance pointers only)
  CHECK(recs[2].src == 0);
  CHECK(recs[2].dst == 1);
  CHECK(recs[2].bytes == 18 + 2 * 1 + 8 * 3);
  CHECK(recs[3].src == 1);
  CHECK(recs[3].dst == 0);
  CHECK(recs[3].bytes == 18 + 0 + 8 * 3);

  // compress mode charges packed pair bytes only; empty flows vanish
  MessageLedger lc;
  vertical_repartition(shards, ranges, assign, splits, 4, 0, RepartitionCosting::kCompress, lc);
  REQUIRE(lc.message_count() == 3);
  CHECK(lc.records()[2].src == 0);
  CHECK(lc.records()[2].dst == 1);
  CHECK(lc.records()[2].bytes == 2);  // two pairs, widths 0 + 1

  MessageLedger ln;
  vertical_repartition(shards, ranges, assign, splits, 4, 0, RepartitionCosting::kNaive, ln);
  CHECK(ln.records()[2].bytes == 24);  // 12 bytes per shipped pair
}

TEST_CASE("vertical repartition chunking preserves rows and sums charges") {
  const auto shards = fixture_shards();
  const std::vector<ShardRange> ranges{{0, 2}, {2, 4}};
  const FeatureAssignment assign = fixture_assignment();
  const CandidateSplits splits = fixture_splits();

  MessageLedger ledger;
  const RepartitionResult res = vertical_repartition(shards, ranges, assign, splits, 4, 1,
                                                     RepartitionCosting::kBlockify, ledger);
  CHECK(res.per_worker[1].blocks().size() == 4);  // one block per row per source
  for (int r = 0; r < 4; ++r) {
    const RowSlice row = res.per_worker[1].row(r);
    REQUIRE(row.count == 1);
    CHECK(row.bins[0] == r);
  }
  // still one ledger record per (src, dst): two single-pair blocks from
  // src 0, each 18 + 1 + 16 bytes
  REQUIRE(ledger.message_count() == 4);
  CHECK(ledger.records()[2].bytes == 2 * (18 + 1 + 16));
}

TEST_CASE("repartition reassembles every pair of a synthetic dataset") {
  SynthConfig cfg;
  cfg.instances = 200;
  cfg.features = 30;
  cfg.density = 0.3;
  cfg.seed = 9;
  const SparseDataset data = synth_dataset(cfg);

  const int workers = 4;
  std::vector<SparseDataset> shards;
  std::vector<ShardRange> ranges;
  for (int w = 0; w < workers; ++w) {
    const ShardRange r = shard_range(data.rows(), workers, w);
    ranges.push_back(r);
    SparseDataset s;
    s.num_features = data.num_features;
    for (std::uint64_t i = r.lo; i < r.hi; ++i) s.push_row(data.row(i), data.labels[i]);
    shards.push_back(std::move(s));
  }

  MessageLedger ledger;
  const SketchPhaseResult sk = sketch_and_propose(shards, data.num_features, 8, 0.05, ledger);
  const FeatureAssignment assign = balance_columns(sk.value_counts, workers);
  const RepartitionResult res =
      vertical_repartition(shards, ranges, assign, sk.splits, 8, 16,
                           RepartitionCosting::kBlockify, ledger);

  for (std::uint64_t i = 0; i < data.rows(); ++i) {
    const SparseVector x = data.row(i);
    std::size_t recovered = 0;
    for (int w = 0; w < workers; ++w) {
      const RowSlice s = res.per_worker[w].row(i);
      for (std::size_t k = 0; k < s.count; ++k) {
        const int gf = assign.group[w][s.fids[k]];
        const double* v = x.find(gf);
        REQUIRE(v != nullptr);
        CHECK(s.bins[k] == bin_of(sk.splits.per_feature[gf], *v));
        ++recovered;
      }
    }
    CHECK(recovered == x.pairs.size());
  }
}

TEST_CASE("label exchange charges shard gathers and full broadcasts") {
  const std::vector<ShardRange> ranges{{0, 2}, {2, 4}};
  MessageLedger ledger;
  exchange_labels(ranges, Loss::kSquare, ledger);
  const auto& recs = ledger.records();
  REQUIRE(ledger.message_count() == 4);
  CHECK(recs[0].phase == Phase::kLabels);
  CHECK(recs[0].src == 0);
  CHECK(recs[0].dst == kMaster);
  CHECK(recs[0].bytes == 16);
  CHECK(recs[1].bytes == 16);
  CHECK(recs[2].src == kMaster);
  CHECK(recs[2].bytes == 32);
  CHECK(recs[3].bytes == 32);

  // classification labels travel as f32
  MessageLedger lc;
  exchange_labels(ranges, Loss::kLogistic, lc);
  CHECK(lc.records()[0].bytes == 8);
  CHECK(lc.records()[2].bytes == 16);
}
