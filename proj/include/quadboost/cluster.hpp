#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "quadboost/costmodel.hpp"
#include "quadboost/dataset.hpp"
#include "quadboost/engine.hpp"
#include "quadboost/ledger.hpp"
#include "quadboost/store.hpp"
#include "quadboost/transform.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

// ---- Quadrants ----

// QD1: horizontal partitioning, column store, instance-to-node index.
// QD2: horizontal partitioning, row store, node-to-instance index.
// QD3: vertical partitioning, column store, hybrid index (both directions).
// QD4: vertical partitioning, row store, node-to-instance index.
enum class Quadrant { kQD1 = 1, kQD2 = 2, kQD3 = 3, kQD4 = 4 };

inline bool is_vertical(Quadrant q) { return q == Quadrant::kQD3 || q == Quadrant::kQD4; }
inline bool is_column_store(Quadrant q) { return q == Quadrant::kQD1 || q == Quadrant::kQD3; }

inline std::string quadrant_name(Quadrant q) {
  return "qd" + std::to_string(static_cast<int>(q));
}

inline Quadrant parse_quadrant(const std::string& s) {
  std::string t = s;
  if (t.size() == 3 && (t[0] == 'q' || t[0] == 'Q') && (t[1] == 'd' || t[1] == 'D'))
    t = t.substr(2);
  if (t == "1") return Quadrant::kQD1;
  if (t == "2") return Quadrant::kQD2;
  if (t == "3") return Quadrant::kQD3;
  if (t == "4") return Quadrant::kQD4;
  throw ConfigError("unknown quadrant '" + s + "'");
}

// ---- Configuration ----

struct ClusterConfig {
  int workers = 4;
  Quadrant quadrant = Quadrant::kQD4;
  Hyperparams hyper;
  bool subtraction = true;
  double sketch_eps = 0.0;  // 0 picks 1 / (2 * bins)
  std::uint64_t mem_cap_bytes = UINT64_MAX;  // per tracker (worker or master)
  std::uint64_t rows_per_block = 0;          // vertical encode chunk; 0 = per shard
  std::size_t merge_target = 0;              // >0 merges each worker's blocks
  RepartitionCosting costing = RepartitionCosting::kBlockify;

  double eps() const { return sketch_eps > 0.0 ? sketch_eps : 1.0 / (2.0 * hyper.bins); }

  void validate() const {
    hyper.validate();
    if (workers < 1 || workers > 255) throw ConfigError("workers must be in [1, 255]");
    if (sketch_eps < 0.0 || sketch_eps >= 0.5)
      throw ConfigError("sketch eps must be in [0, 0.5)");
  }
};

// ---- Metrics ----

struct TreeMetrics {
  std::uint32_t round = 0;  // 1-based; round 0 is the data transform
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // NaN for square loss
  std::uint64_t bytes_total = 0;
  std::uint64_t bytes_histogram = 0;
  std::uint64_t bytes_local_best = 0;
  std::uint64_t bytes_placement = 0;
  int splits = 0;
  int splitting_layers = 0;
};

struct TrainResult {
  ModelSet model;
  std::vector<TreeMetrics> per_tree;
  std::uint64_t transform_bytes = 0;
  std::uint64_t peak_hist_bytes = 0;  // max live histogram bytes over trackers
};

// ---- Cluster ----

// A simulated cluster: one master plus `workers` workers, all in-process.
// Data-plane traffic (sketches, split tables, repartition blocks, labels,
// histograms, best-split records, placement bitmaps) is charged to the
// ledger with exact payload byte counts; tiny bookkeeping (node stats,
// child counts, subtraction schema) rides an uncharged control plane.
class Cluster {
 public:
  Cluster(const ClusterConfig& cfg, const SparseDataset& data) : cfg_(cfg) {
    cfg_.validate();
    data.validate();
    if (data.rows() == 0) throw DataError("cluster: empty dataset");
    if (data.rows() > UINT32_MAX) throw DataError("cluster: too many instances");
    n_ = data.rows();
    num_features_ = data.num_features;
    if (num_features_ < 1) throw DataError("cluster: dataset has no features");
    labels_ = data.labels;
    classes_ = cfg_.hyper.loss == Loss::kSoftmax ? data.infer_classes() : 1;
    if (cfg_.hyper.loss == Loss::kLogistic)
      for (double y : labels_)
        if (y != 0.0 && y != 1.0) throw DataError("logistic labels must be 0 or 1");

    setup(data);
  }

  const MessageLedger& ledger() const { return ledger_; }
  int classes() const { return classes_; }
  const CandidateSplits& splits() const { return splits_; }
  const FeatureAssignment& assignment() const { return assign_; }

  TrainResult train() {
    TrainResult out;
    out.model.splits = splits_;
    out.model.bins = cfg_.hyper.bins;
    out.model.classes = classes_;
    out.model.eta = cfg_.hyper.eta;

    for (int t = 0; t < cfg_.hyper.trees; ++t) {
      const std::uint32_t round = static_cast<std::uint32_t>(t) + 1;
      reset_tree_state();
      compute_round_gradients();

      TreeModel tree;
      TreeMetrics m;
      m.round = round;
      m.splitting_layers = build_tree(round, tree);
      tree.validate();
      apply_tree(tree);

      m.train_loss = mean_loss();
      m.train_accuracy = accuracy();
      m.bytes_histogram = ledger_.round_phase_bytes(round, Phase::kHistogram);
      m.bytes_local_best = ledger_.round_phase_bytes(round, Phase::kLocalBest);
      m.bytes_placement = ledger_.round_phase_bytes(round, Phase::kPlacement);
      m.bytes_total = m.bytes_histogram + m.bytes_local_best + m.bytes_placement;
      m.splits = tree.num_splits();
      out.per_tree.push_back(m);
      out.model.trees.push_back(std::move(tree));
    }

    out.transform_bytes = ledger_.round_phase_bytes(0, Phase::kSketch) +
                          ledger_.round_phase_bytes(0, Phase::kSplits) +
                          ledger_.round_phase_bytes(0, Phase::kRepartition) +
                          ledger_.round_phase_bytes(0, Phase::kLabels);
    out.peak_hist_bytes = master_tracker_.peak();
    for (const Worker& w : workers_)
      out.peak_hist_bytes = std::max(out.peak_hist_bytes, w.tracker.peak());
    return out;
  }

 private:
  struct Worker {
    int id = 0;
    ShardRange shard;  // source rows (identity for horizontal training)

    int feature_domain = 0;     // local feature id space size
    std::vector<int> fid_map;   // local -> global; empty means identity
    std::vector<int> nsplits;   // per local feature

    RowStore rows;
    ColumnStore cols;
    NodeToInstanceIndex n2i;
    InstanceToNodeIndex i2n;

    // gradient view domain: shard rows (horizontal) or all rows (vertical)
    std::uint64_t grad_lo = 0;
    std::uint64_t grad_hi = 0;

    HistogramTracker tracker;
    std::unordered_map<int, NodeHistogramSet> sets;      // this layer's local sets
    std::unordered_map<int, NodeHistogramSet> retained;  // split parents, for subtraction
  };

  // ---- setup ----

  void setup(const SparseDataset& data) {
    const int W = cfg_.workers;
    std::vector<SparseDataset> shards(W);
    std::vector<ShardRange> ranges(W);
    for (int w = 0; w < W; ++w) {
      ranges[w] = shard_range(n_, W, w);
      shards[w].num_features = num_features_;
      for (std::uint64_t i = ranges[w].lo; i < ranges[w].hi; ++i)
        shards[w].push_row(data.row(i), data.labels[i]);
      shards[w].num_features = num_features_;
    }

    SketchPhaseResult sk =
        sketch_and_propose(shards, num_features_, cfg_.hyper.bins, cfg_.eps(), ledger_, 0);
    splits_ = std::move(sk.splits);
    nsplits_global_.assign(sk.nsplits.begin(), sk.nsplits.end());

    workers_.resize(W);
    for (int w = 0; w < W; ++w) {
      workers_[w].id = w;
      workers_[w].shard = ranges[w];
      workers_[w].tracker = HistogramTracker(cfg_.mem_cap_bytes);
    }
    master_tracker_ = HistogramTracker(cfg_.mem_cap_bytes);

    if (is_vertical(cfg_.quadrant)) {
      assign_ = balance_columns(sk.value_counts, W);
      RepartitionResult rep =
          vertical_repartition(shards, ranges, assign_, splits_, cfg_.hyper.bins,
                               cfg_.rows_per_block, cfg_.costing, ledger_, 0);
      exchange_labels(ranges, cfg_.hyper.loss, ledger_, 0);
      for (int w = 0; w < W; ++w) {
        Worker& wk = workers_[w];
        BlockList list = std::move(rep.per_worker[w]);
        if (cfg_.merge_target > 0) list.merge_to(cfg_.merge_target);
        wk.feature_domain = assign_.group_size(w);
        wk.fid_map = assign_.group[w];
        wk.nsplits.resize(wk.feature_domain);
        for (int f = 0; f < wk.feature_domain; ++f)
          wk.nsplits[f] = nsplits_global_[wk.fid_map[f]];
        if (is_column_store(cfg_.quadrant)) {
          wk.cols = ColumnStore::from_blocks(list, wk.feature_domain);
        } else {
          wk.rows = RowStore{std::move(list), wk.feature_domain};
        }
        wk.grad_lo = 0;
        wk.grad_hi = n_;
      }
      scores_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
      grad_g_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
      grad_h_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
    } else {
      for (int w = 0; w < W; ++w) {
        Worker& wk = workers_[w];
        wk.feature_domain = num_features_;
        wk.nsplits = nsplits_global_;
        Block b = encode_shard_full(shards[w], ranges[w].lo, splits_, cfg_.hyper.bins);
        BlockList list(std::vector<Block>{std::move(b)}, ranges[w].lo);
        if (is_column_store(cfg_.quadrant)) {
          wk.cols = ColumnStore::from_blocks(list, num_features_);
        } else {
          wk.rows = RowStore{std::move(list), num_features_};
        }
        wk.grad_lo = ranges[w].lo;
        wk.grad_hi = ranges[w].hi;
      }
      scores_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
      grad_g_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
      grad_h_.assign(n_ * static_cast<std::uint64_t>(classes_), 0.0);
    }
  }

  // ---- per-tree state ----

  void reset_tree_state() {
    for (Worker& w : workers_) {
      w.sets.clear();
      w.retained.clear();
      if (is_vertical(cfg_.quadrant)) {
        w.n2i.init_root(0, n_);
        if (cfg_.quadrant == Quadrant::kQD3) w.i2n.init_root(0, n_);
      } else {
        if (cfg_.quadrant == Quadrant::kQD2) w.n2i.init_root(w.shard.lo, w.shard.size());
        else w.i2n.init_root(w.shard.lo, w.shard.size());
      }
    }
    master_sets_.clear();
    master_retained_.clear();
    stats_.clear();
    schema_.direct.clear();
  }

  // Horizontal workers score their shard; vertical workers replicate the
  // full score vector, so one shared array stands in for all replicas.
  void compute_round_gradients() {
    compute_gradients_range(labels_.data(), scores_.data(), 0, n_, cfg_.hyper.loss,
                            classes_, grad_g_.data(), grad_h_.data());
    // root stats: vertical sums the flat array; horizontal adds per-shard
    // partial sums in worker order (the grouping the aggregation would give)
    NodeStats root(classes_);
    if (is_vertical(cfg_.quadrant)) {
      for (std::uint64_t i = 0; i < n_; ++i)
        for (int c = 0; c < classes_; ++c) {
          root.g[c] += grad_g_[i * classes_ + c];
          root.h[c] += grad_h_[i * classes_ + c];
        }
    } else {
      for (const Worker& w : workers_) {
        std::vector<double> pg(classes_, 0.0), ph(classes_, 0.0);
        for (std::uint64_t i = w.shard.lo; i < w.shard.hi; ++i)
          for (int c = 0; c < classes_; ++c) {
            pg[c] += grad_g_[i * classes_ + c];
            ph[c] += grad_h_[i * classes_ + c];
          }
        for (int c = 0; c < classes_; ++c) {
          root.g[c] += pg[c];
          root.h[c] += ph[c];
        }
      }
    }
    root.count = n_;
    stats_[1] = std::move(root);
  }

  GradView grad_view(const Worker& w) const {
    GradView gv;
    gv.g = grad_g_.data() + w.grad_lo * classes_;
    gv.h = grad_h_.data() + w.grad_lo * classes_;
    gv.base = w.grad_lo;
    gv.classes = classes_;
    return gv;
  }

  // ---- tree construction ----

  // Returns the number of layers that executed at least one split.
  int build_tree(std::uint32_t round, TreeModel& tree) {
    std::vector<int> frontier{1};
    int layers_split = 0;

    for (int l = 1; l <= cfg_.hyper.layers && !frontier.empty(); ++l) {
      if (l == cfg_.hyper.layers) {
        for (int n : frontier) finalize_leaf(tree, n);
        frontier.clear();
        break;
      }

      const std::vector<int> direct = direct_nodes(frontier, l);
      std::map<int, SplitResult> best;
      if (is_vertical(cfg_.quadrant)) {
        build_layer_vertical(round, frontier, direct);
        best = decide_vertical(round, frontier);
      } else {
        build_layer_horizontal(round, frontier, direct);
        best = decide_horizontal(round, frontier);
      }

      std::vector<int> splitting;
      for (int n : frontier) {
        const SplitResult& b = best[n];
        if (b.found && b.gain > kMinSplitGain) splitting.push_back(n);
      }

      if (splitting.empty()) {
        release_layer_sets(frontier, {}, l);
        for (int n : frontier) finalize_leaf(tree, n);
        frontier.clear();
        break;
      }
      ++layers_split;

      // record splits and child stats
      for (int n : splitting) {
        const SplitResult& b = best[n];
        TreeNode& nd = tree.ensure(n);
        nd.kind = TreeNode::Kind::kSplit;
        nd.feature = b.feature;
        nd.bin = b.bin;
        nd.default_left = b.default_left;
        NodeStats ls(classes_), rs(classes_);
        ls.g = b.gl;
        ls.h = b.hl;
        rs.g = b.gr;
        rs.h = b.hr;
        stats_[2 * n] = std::move(ls);
        stats_[2 * n + 1] = std::move(rs);
      }
      for (int n : frontier)
        if (!best[n].found || best[n].gain <= kMinSplitGain) finalize_leaf(tree, n);

      const auto counts = execute_splits(round, splitting, best);
      for (const auto& [node, c] : counts) stats_[node].count = c;

      release_layer_sets(frontier, splitting, l);

      // subtraction schema for the children layer
      schema_.direct.clear();
      if (cfg_.subtraction) {
        std::vector<std::pair<int, std::uint64_t>> child_counts;
        for (int n : splitting) {
          child_counts.emplace_back(2 * n, stats_[2 * n].count);
          child_counts.emplace_back(2 * n + 1, stats_[2 * n + 1].count);
        }
        schema_ = plan_subtraction(child_counts);
      }

      std::vector<int> next;
      for (int n : splitting) {
        next.push_back(2 * n);
        next.push_back(2 * n + 1);
      }
      std::sort(next.begin(), next.end());
      frontier = std::move(next);
    }
    return layers_split;
  }

  void finalize_leaf(TreeModel& tree, int n) {
    const NodeStats& s = stats_.at(n);
    TreeNode& nd = tree.ensure(n);
    nd.kind = TreeNode::Kind::kLeaf;
    nd.weights = leaf_weight(s.g, s.h, cfg_.hyper.lambda_);
  }

  std::vector<int> direct_nodes(const std::vector<int>& frontier, int layer) const {
    if (!cfg_.subtraction || layer == 1) return frontier;
    std::vector<int> out;
    for (int n : frontier)
      if (schema_.is_direct(n)) out.push_back(n);
    return out;
  }

  // ---- histogram layers ----

  // Horizontal: each worker builds its local histograms for the direct
  // nodes and ships them to the master (one size_hist payload per node per
  // worker). The master reduces in worker order and derives siblings.
  void build_layer_horizontal(std::uint32_t round, const std::vector<int>& frontier,
                              const std::vector<int>& direct) {
    const std::uint64_t payload =
        2ull * num_features_ * cfg_.hyper.bins * classes_ * 8;

    for (Worker& w : workers_) {
      const GradView gv = grad_view(w);
      if (cfg_.quadrant == Quadrant::kQD1) {
        std::vector<NodeHistogramSet*> set_of_node(max_node(direct) + 1, nullptr);
        for (int n : direct) {
          w.sets.emplace(n, NodeHistogramSet(w.feature_domain, cfg_.hyper.bins, classes_,
                                             &w.tracker));
          set_of_node[n] = &w.sets.at(n);
        }
        build_hist_columns_i2n(set_of_node, w.cols, w.i2n, gv);
      } else {
        for (int n : direct) {
          NodeHistogramSet set(w.feature_domain, cfg_.hyper.bins, classes_, &w.tracker);
          build_hist_rows(set, w.rows, w.n2i.begin(n), w.n2i.end(n), gv);
          w.sets.emplace(n, std::move(set));
        }
      }
    }

    // reduce at the master, worker order, node by node
    for (int n : direct) {
      master_sets_.emplace(
          n, NodeHistogramSet(num_features_, cfg_.hyper.bins, classes_, &master_tracker_));
      NodeHistogramSet& agg = master_sets_.at(n);
      for (Worker& w : workers_) {
        ledger_.log(round, Phase::kHistogram, w.id, kMaster, payload);
        agg.add_set(w.sets.at(n));
        w.sets.erase(n);
      }
    }

    // derive the non-direct siblings from retained parents
    for (int n : frontier) {
      if (master_sets_.count(n)) continue;
      const int parent = n / 2;
      const int sib = n ^ 1;
      NodeHistogramSet d(num_features_, cfg_.hyper.bins, classes_, &master_tracker_);
      d.add_set(master_retained_.at(parent));
      d.subtract_set(master_sets_.at(sib));
      master_sets_.emplace(n, std::move(d));
    }
  }

  // Vertical: every worker builds histograms over its own feature group
  // only; nothing is transmitted in the histogram phase.
  void build_layer_vertical(std::uint32_t, const std::vector<int>& frontier,
                            const std::vector<int>& direct) {
    for (Worker& w : workers_) {
      const GradView gv = grad_view(w);
      if (cfg_.quadrant == Quadrant::kQD3) {
        std::vector<HybridNodeRef> refs;
        for (int n : direct) {
          w.sets.emplace(n, NodeHistogramSet(w.feature_domain, cfg_.hyper.bins, classes_,
                                             &w.tracker));
          refs.push_back({n, &w.sets.at(n), w.n2i.begin(n), w.n2i.end(n)});
        }
        build_hist_columns_hybrid(refs, w.cols, w.i2n, gv);
      } else {
        for (int n : direct) {
          NodeHistogramSet set(w.feature_domain, cfg_.hyper.bins, classes_, &w.tracker);
          build_hist_rows(set, w.rows, w.n2i.begin(n), w.n2i.end(n), gv);
          w.sets.emplace(n, std::move(set));
        }
      }
      for (int n : frontier) {
        if (w.sets.count(n)) continue;
        const int parent = n / 2;
        const int sib = n ^ 1;
        NodeHistogramSet d(w.feature_domain, cfg_.hyper.bins, classes_, &w.tracker);
        d.add_set(w.retained.at(parent));
        d.subtract_set(w.sets.at(sib));
        w.sets.emplace(n, std::move(d));
      }
    }
  }

  // ---- decisions ----

  std::map<int, SplitResult> decide_horizontal(std::uint32_t round,
                                               const std::vector<int>& frontier) {
    std::map<int, SplitResult> best;
    for (int n : frontier)
      best[n] = find_best_split(master_sets_.at(n), stats_.at(n), nsplits_global_, nullptr,
                                cfg_.hyper.lambda_, cfg_.hyper.gamma_);
    const std::uint64_t msg = frontier.size() * SplitResult::wire_bytes(classes_);
    for (const Worker& w : workers_)
      ledger_.log(round, Phase::kLocalBest, kMaster, w.id, msg);
    return best;
  }

  std::map<int, SplitResult> decide_vertical(std::uint32_t round,
                                             const std::vector<int>& frontier) {
    const std::uint64_t rec = SplitResult::wire_bytes(classes_);
    std::map<int, SplitResult> best;
    for (Worker& w : workers_) {
      for (int n : frontier) {
        SplitResult local =
            find_best_split(w.sets.at(n), stats_.at(n), w.nsplits, &w.fid_map,
                            cfg_.hyper.lambda_, cfg_.hyper.gamma_);
        reduce_best(best[n], local);
      }
      ledger_.log(round, Phase::kLocalBest, w.id, kMaster, frontier.size() * rec);
    }
    const std::uint64_t msg = frontier.size() * rec;
    for (const Worker& w : workers_)
      ledger_.log(round, Phase::kLocalBest, kMaster, w.id, msg);
    return best;
  }

  // ---- split execution ----

  std::map<int, std::uint64_t> execute_splits(std::uint32_t round,
                                              const std::vector<int>& splitting,
                                              std::map<int, SplitResult>& best) {
    std::map<int, std::uint64_t> counts;
    if (is_vertical(cfg_.quadrant)) {
      // owners compute their nodes' placements; the combined layer bitmap
      // is broadcast once from the first splitting node's owner
      Bitmap layer(n_);
      for (int n : splitting) {
        const SplitResult& b = best[n];
        const int owner = assign_.owner[b.feature];
        Worker& w = workers_[owner];
        const int local_fid = assign_.local_id[b.feature];
        Placement p =
            cfg_.quadrant == Quadrant::kQD3
                ? place_columns(w.cols, local_fid, b.bin, b.default_left, w.n2i.begin(n),
                                w.n2i.end(n), n_)
                : place_rows(w.rows, local_fid, b.bin, b.default_left, w.n2i.begin(n),
                             w.n2i.end(n), n_);
        counts[2 * n] = p.left;
        counts[2 * n + 1] = p.right;
        layer.merge_from(p.bitmap);
      }
      const int origin = assign_.owner[best[splitting.front()].feature];
      for (const Worker& w : workers_)
        if (w.id != origin)
          ledger_.log(round, Phase::kPlacement, origin, w.id, layer.byte_size());
      for (Worker& w : workers_) {
        for (int n : splitting) w.n2i.split(n, layer);
        if (cfg_.quadrant == Quadrant::kQD3) w.i2n.split_layer(splitting, layer);
      }
    } else if (cfg_.quadrant == Quadrant::kQD2) {
      for (Worker& w : workers_) {
        for (int n : splitting) {
          const SplitResult& b = best[n];
          Placement p = place_rows(w.rows, b.feature, b.bin, b.default_left,
                                   w.n2i.begin(n), w.n2i.end(n), n_);
          w.n2i.split(n, p.bitmap);
          counts[2 * n] += p.left;
          counts[2 * n + 1] += p.right;
        }
      }
    } else {  // QD1
      for (Worker& w : workers_) {
        std::vector<LayerDecision> decisions;
        for (int n : splitting) {
          const SplitResult& b = best[n];
          decisions.push_back({n, b.feature, b.bin, b.default_left});
        }
        const auto local = apply_layer_splits_i2n(w.i2n, w.cols, decisions);
        for (const auto& [node, c] : local) counts[node] += c;
      }
    }
    return counts;
  }

  // Frees decided sets; retains split nodes' sets when the next layer will
  // derive siblings from them.
  void release_layer_sets(const std::vector<int>& frontier, const std::vector<int>& splitting,
                          int layer) {
    const bool retain = cfg_.subtraction && !splitting.empty() &&
                        layer + 1 < cfg_.hyper.layers;
    if (is_vertical(cfg_.quadrant)) {
      for (Worker& w : workers_) {
        w.retained.clear();
        if (retain)
          for (int n : splitting) {
            auto it = w.sets.find(n);
            w.retained.emplace(n, std::move(it->second));
          }
        w.sets.clear();
      }
    } else {
      master_retained_.clear();
      if (retain)
        for (int n : splitting) {
          auto it = master_sets_.find(n);
          master_retained_.emplace(n, std::move(it->second));
        }
      master_sets_.clear();
    }
    (void)frontier;
  }

  // ---- scoring and metrics ----

  void apply_tree(const TreeModel& tree) {
    // leaf weights per node id
    std::vector<const std::vector<double>*> leaf_w(tree.nodes.size(), nullptr);
    std::vector<int> leaves;
    for (int nid = 1; nid < static_cast<int>(tree.nodes.size()); ++nid)
      if (tree.nodes[nid].kind == TreeNode::Kind::kLeaf) {
        leaf_w[nid] = &tree.nodes[nid].weights;
        leaves.push_back(nid);
      }

    const double eta = cfg_.hyper.eta;
    if (is_vertical(cfg_.quadrant)) {
      // all replicas hold identical state; apply through worker 0's index
      const Worker& w = workers_[0];
      for (int leaf : leaves) {
        const std::vector<double>& wt = *leaf_w[leaf];
        for (const std::uint32_t* p = w.n2i.begin(leaf); p != w.n2i.end(leaf); ++p)
          for (int c = 0; c < classes_; ++c)
            scores_[static_cast<std::uint64_t>(*p) * classes_ + c] += eta * wt[c];
      }
    } else if (cfg_.quadrant == Quadrant::kQD2) {
      for (const Worker& w : workers_)
        for (int leaf : leaves) {
          const std::vector<double>& wt = *leaf_w[leaf];
          for (const std::uint32_t* p = w.n2i.begin(leaf); p != w.n2i.end(leaf); ++p)
            for (int c = 0; c < classes_; ++c)
              scores_[static_cast<std::uint64_t>(*p) * classes_ + c] += eta * wt[c];
        }
    } else {  // QD1: sweep the instance-to-node map
      for (const Worker& w : workers_)
        for (std::uint64_t i = w.shard.lo; i < w.shard.hi; ++i) {
          const std::uint32_t node = w.i2n.node_of(i);
          if (node < leaf_w.size() && leaf_w[node])
            for (int c = 0; c < classes_; ++c)
              scores_[i * classes_ + c] += eta * (*leaf_w[node])[c];
        }
    }
  }

  double mean_loss() const {
    return metric_loss(labels_, scores_, 0, n_, cfg_.hyper.loss, classes_) /
           static_cast<double>(n_);
  }

  double accuracy() const {
    if (cfg_.hyper.loss == Loss::kSquare) return std::nan("");
    return static_cast<double>(metric_correct(labels_, scores_, 0, n_, cfg_.hyper.loss,
                                              classes_)) /
           static_cast<double>(n_);
  }

  static int max_node(const std::vector<int>& nodes) {
    int m = 1;
    for (int n : nodes) m = std::max(m, n);
    return m;
  }

  ClusterConfig cfg_;
  std::uint64_t n_ = 0;
  int num_features_ = 0;
  int classes_ = 1;

  std::vector<double> labels_;
  std::vector<double> scores_;
  std::vector<double> grad_g_, grad_h_;

  CandidateSplits splits_;
  std::vector<int> nsplits_global_;
  FeatureAssignment assign_;

  std::vector<Worker> workers_;
  HistogramTracker master_tracker_;
  std::unordered_map<int, NodeHistogramSet> master_sets_;
  std::unordered_map<int, NodeHistogramSet> master_retained_;

  std::unordered_map<int, NodeStats> stats_;
  SubtractionSchema schema_;

  MessageLedger ledger_;
};

}  // namespace quadboost
