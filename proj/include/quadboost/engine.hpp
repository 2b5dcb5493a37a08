#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/math.hpp"
#include "quadboost/store.hpp"
#include "quadboost/types.hpp"
#include "quadboost/wire.hpp"

namespace quadboost {

// ---- Gradients ----

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Writes g/h for instances [lo, hi) into flat arrays indexed, like `scores`,
// by (instance - lo) * classes + c. Scores are raw boosting margins.
inline void compute_gradients_range(const double* labels, const double* scores,
                                    std::uint64_t lo, std::uint64_t hi, Loss loss,
                                    int classes, double* g, double* h) {
  const std::uint64_t n = hi - lo;
  switch (loss) {
    case Loss::kSquare:
      if (classes != 1) throw ConfigError("square loss needs one class");
      for (std::uint64_t i = 0; i < n; ++i) {
        g[i] = scores[i] - labels[i];
        h[i] = 1.0;
      }
      return;
    case Loss::kLogistic:
      if (classes != 1) throw ConfigError("logistic loss needs one class");
      for (std::uint64_t i = 0; i < n; ++i) {
        const double p = sigmoid(scores[i]);
        g[i] = p - labels[i];
        h[i] = p * (1.0 - p);
      }
      return;
    case Loss::kSoftmax: {
      if (classes < 2) throw ConfigError("softmax needs at least two classes");
      std::vector<double> p(classes);
      for (std::uint64_t i = 0; i < n; ++i) {
        const double* s = scores + i * classes;
        double m = s[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, s[c]);
        double z = 0.0;
        for (int c = 0; c < classes; ++c) z += (p[c] = std::exp(s[c] - m));
        const int y = static_cast<int>(labels[i]);
        if (y < 0 || y >= classes) throw DataError("label out of class range");
        for (int c = 0; c < classes; ++c) {
          const double pc = p[c] / z;
          g[i * classes + c] = pc - (c == y ? 1.0 : 0.0);
          h[i * classes + c] = pc * (1.0 - pc);
        }
      }
      return;
    }
  }
  throw ConfigError("unknown loss");
}

inline std::vector<GradientPair> compute_gradients(const std::vector<double>& labels,
                                                   const std::vector<double>& scores,
                                                   Loss loss, int classes) {
  const std::uint64_t n = labels.size();
  if (scores.size() != n * static_cast<std::uint64_t>(classes))
    throw DataError("scores shape mismatch");
  std::vector<double> g(n * classes), h(n * classes);
  compute_gradients_range(labels.data(), scores.data(), 0, n, loss, classes, g.data(), h.data());
  std::vector<GradientPair> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out[i].g.assign(g.begin() + i * classes, g.begin() + (i + 1) * classes);
    out[i].h.assign(h.begin() + i * classes, h.begin() + (i + 1) * classes);
  }
  return out;
}

// Gradient arrays of one worker, addressed by global instance id.
struct GradView {
  const double* g = nullptr;
  const double* h = nullptr;
  std::uint64_t base = 0;
  int classes = 1;

  const double* g_at(std::uint64_t id) const { return g + (id - base) * classes; }
  const double* h_at(std::uint64_t id) const { return h + (id - base) * classes; }
};

// ---- Training metrics ----

inline double metric_loss(const std::vector<double>& labels, const std::vector<double>& scores,
                          std::uint64_t lo, std::uint64_t hi, Loss loss, int classes) {
  double s = 0.0;
  for (std::uint64_t i = lo; i < hi; ++i) {
    const double* sc = scores.data() + (i - lo) * classes;
    switch (loss) {
      case Loss::kSquare: {
        const double d = sc[0] - labels[i];
        s += 0.5 * d * d;
        break;
      }
      case Loss::kLogistic: {
        // log(1 + e^yhat) - y * yhat, computed without overflow
        const double m = sc[0] > 0.0 ? sc[0] : 0.0;
        s += m + std::log(std::exp(-m) + std::exp(sc[0] - m)) - labels[i] * sc[0];
        break;
      }
      case Loss::kSoftmax: {
        double mx = sc[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, sc[c]);
        double z = 0.0;
        for (int c = 0; c < classes; ++c) z += std::exp(sc[c] - mx);
        const int y = static_cast<int>(labels[i]);
        s += mx + std::log(z) - sc[y];
        break;
      }
    }
  }
  return s;
}

inline std::uint64_t metric_correct(const std::vector<double>& labels,
                                    const std::vector<double>& scores, std::uint64_t lo,
                                    std::uint64_t hi, Loss loss, int classes) {
  std::uint64_t correct = 0;
  for (std::uint64_t i = lo; i < hi; ++i) {
    const double* sc = scores.data() + (i - lo) * classes;
    int pred = 0;
    if (loss == Loss::kSoftmax) {
      for (int c = 1; c < classes; ++c)
        if (sc[c] > sc[pred]) pred = c;
    } else if (loss == Loss::kLogistic) {
      pred = sc[0] > 0.0 ? 1 : 0;
    } else {
      continue;  // accuracy undefined for regression
    }
    correct += pred == static_cast<int>(labels[i]);
  }
  return correct;
}

// ---- Histogram storage ----

// Tracks live histogram bytes of one worker. The cap models the memory
// budget; crossing it raises the distinct out-of-memory failure.
class HistogramTracker {
 public:
  explicit HistogramTracker(std::uint64_t cap = UINT64_MAX) : cap_(cap) {}

  void alloc(std::uint64_t bytes) {
    live_ += bytes;
    peak_ = std::max(peak_, live_);
    if (live_ > cap_)
      throw OomGuardError("live histogram bytes " + std::to_string(live_) +
                          " exceed cap " + std::to_string(cap_));
  }

  void release(std::uint64_t bytes) { live_ -= bytes; }

  std::uint64_t live() const { return live_; }
  std::uint64_t peak() const { return peak_; }

 private:
  std::uint64_t live_ = 0;
  std::uint64_t peak_ = 0;
  std::uint64_t cap_;
};

// One node's histograms over a contiguous feature domain, stored flat.
// Feature f occupies 2 * bins * classes doubles: G values bin-major, then H.
// The serialized payload is exactly 2 * features * bins * classes f64.
class NodeHistogramSet {
 public:
  NodeHistogramSet() = default;

  NodeHistogramSet(int features, int bins, int classes, HistogramTracker* tracker = nullptr)
      : features_(features), bins_(bins), classes_(classes), tracker_(tracker) {
    data_.assign(cells(), 0.0);
    if (tracker_) tracker_->alloc(byte_size());
  }

  NodeHistogramSet(NodeHistogramSet&& o) noexcept { steal(o); }
  NodeHistogramSet& operator=(NodeHistogramSet&& o) noexcept {
    if (this != &o) {
      drop();
      steal(o);
    }
    return *this;
  }
  NodeHistogramSet(const NodeHistogramSet&) = delete;
  NodeHistogramSet& operator=(const NodeHistogramSet&) = delete;
  ~NodeHistogramSet() { drop(); }

  int features() const { return features_; }
  int bins() const { return bins_; }
  int classes() const { return classes_; }
  bool empty() const { return data_.empty(); }

  std::uint64_t byte_size() const { return cells() * 8; }

  double* g_ptr(int f, int bin) {
    return data_.data() + stride() * f + static_cast<std::size_t>(bin) * classes_;
  }
  double* h_ptr(int f, int bin) {
    return data_.data() + stride() * f + static_cast<std::size_t>(bins_ + bin) * classes_;
  }
  const double* g_ptr(int f, int bin) const {
    return data_.data() + stride() * f + static_cast<std::size_t>(bin) * classes_;
  }
  const double* h_ptr(int f, int bin) const {
    return data_.data() + stride() * f + static_cast<std::size_t>(bins_ + bin) * classes_;
  }

  void add(int f, int bin, const double* g, const double* h) {
    double* gd = g_ptr(f, bin);
    double* hd = h_ptr(f, bin);
    for (int c = 0; c < classes_; ++c) {
      gd[c] += g[c];
      hd[c] += h[c];
    }
  }

  void add_set(const NodeHistogramSet& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  }

  void subtract_set(const NodeHistogramSet& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  }

  // Extracts one feature as a core Histogram; the missing accumulator is
  // node totals minus the feature's bin mass.
  Histogram extract(int f, const std::vector<double>& g_total,
                    const std::vector<double>& h_total) const {
    Histogram out(bins_, classes_);
    std::vector<double> gs(classes_, 0.0), hs(classes_, 0.0);
    for (int b = 0; b < bins_; ++b) {
      const double* g = g_ptr(f, b);
      const double* h = h_ptr(f, b);
      for (int c = 0; c < classes_; ++c) {
        out.g[static_cast<std::size_t>(b) * classes_ + c] = g[c];
        out.h[static_cast<std::size_t>(b) * classes_ + c] = h[c];
        gs[c] += g[c];
        hs[c] += h[c];
      }
    }
    for (int c = 0; c < classes_; ++c) {
      out.g_miss[c] = g_total[c] - gs[c];
      out.h_miss[c] = h_total[c] - hs[c];
    }
    return out;
  }

  void serialize(ByteWriter& w) const {
    for (double v : data_) w.f64(v);
  }

  static NodeHistogramSet deserialize(ByteReader& r, int features, int bins, int classes,
                                      HistogramTracker* tracker = nullptr) {
    NodeHistogramSet s(features, bins, classes, tracker);
    for (double& v : s.data_) v = r.f64();
    return s;
  }

 private:
  std::size_t stride() const { return 2 * static_cast<std::size_t>(bins_) * classes_; }
  std::uint64_t cells() const {
    return 2ull * static_cast<std::uint64_t>(features_) * bins_ * classes_;
  }

  void check_shape(const NodeHistogramSet& o) const {
    if (features_ != o.features_ || bins_ != o.bins_ || classes_ != o.classes_)
      throw DataError("histogram set shape mismatch");
  }

  void drop() {
    if (tracker_ && !data_.empty()) tracker_->release(byte_size());
    data_.clear();
    tracker_ = nullptr;
  }

  void steal(NodeHistogramSet& o) {
    features_ = o.features_;
    bins_ = o.bins_;
    classes_ = o.classes_;
    tracker_ = o.tracker_;
    data_ = std::move(o.data_);
    o.data_.clear();
    o.tracker_ = nullptr;
  }

  int features_ = 0;
  int bins_ = 0;
  int classes_ = 0;
  HistogramTracker* tracker_ = nullptr;
  std::vector<double> data_;
};

// ---- Histogram construction ----
//
// Every strategy feeds each histogram cell in ascending instance order, so
// for one partitioning layout all strategies produce bit-identical sums.

// Row store: one pass over the node's instance list.
inline void build_hist_rows(NodeHistogramSet& out, const RowStore& store,
                            const std::uint32_t* ib, const std::uint32_t* ie,
                            const GradView& gv) {
  const int threads = thread_cap();
  parallel_chunks(static_cast<std::size_t>(out.features()), threads,
                  [&](std::size_t flo, std::size_t fhi) {
                    for (const std::uint32_t* p = ib; p != ie; ++p) {
                      const RowSlice s = store.row(*p);
                      const double* g = gv.g_at(*p);
                      const double* h = gv.h_at(*p);
                      for (std::size_t k = 0; k < s.count; ++k) {
                        const std::uint32_t f = s.fids[k];
                        if (f < flo || f >= fhi) continue;
                        out.add(static_cast<int>(f), s.bins[k], g, h);
                      }
                    }
                  });
}

// Column store, instance-to-node index: one pass over whole columns, routing
// each entry through node_of. Builds every requested node simultaneously;
// this strategy cannot restrict its scan to a node subset.
inline void build_hist_columns_i2n(std::vector<NodeHistogramSet*>& set_of_node,
                                   const ColumnStore& cs, const InstanceToNodeIndex& idx,
                                   const GradView& gv) {
  const int threads = thread_cap();
  parallel_chunks(cs.columns.size(), threads, [&](std::size_t flo, std::size_t fhi) {
    for (std::size_t f = flo; f < fhi; ++f) {
      const auto& col = cs.columns[f];
      for (std::size_t k = 0; k < col.size(); ++k) {
        const std::uint32_t node = idx.node_of(col.instances[k]);
        NodeHistogramSet* set =
            node < set_of_node.size() ? set_of_node[node] : nullptr;
        if (set) set->add(static_cast<int>(f), col.bins[k], gv.g_at(col.instances[k]),
                          gv.h_at(col.instances[k]));
      }
    }
  });
}

// Column store, node-to-instance index: per column, binary search each of
// the node's instances.
inline void build_hist_columns_n2i(NodeHistogramSet& out, const ColumnStore& cs,
                                   const std::uint32_t* ib, const std::uint32_t* ie,
                                   const GradView& gv) {
  const int threads = thread_cap();
  parallel_chunks(cs.columns.size(), threads, [&](std::size_t flo, std::size_t fhi) {
    for (std::size_t f = flo; f < fhi; ++f) {
      for (const std::uint32_t* p = ib; p != ie; ++p) {
        const int bin = cs.find_bin(static_cast<int>(f), *p);
        if (bin >= 0) out.add(static_cast<int>(f), bin, gv.g_at(*p), gv.h_at(*p));
      }
    }
  });
}

// Column-wise index: per column, walk the node's own entry positions.
inline void build_hist_columnwise(NodeHistogramSet& out, const ColumnStore& cs,
                                  const ColumnWiseIndex& idx, int node, const GradView& gv) {
  const int threads = thread_cap();
  parallel_chunks(cs.columns.size(), threads, [&](std::size_t flo, std::size_t fhi) {
    for (std::size_t f = flo; f < fhi; ++f) {
      const auto [pb, pe] = idx.positions(static_cast<int>(f), node);
      const auto& col = cs.columns[f];
      for (const std::uint32_t* p = pb; p != pe; ++p) {
        out.add(static_cast<int>(f), col.bins[*p], gv.g_at(col.instances[*p]),
                gv.h_at(col.instances[*p]));
      }
    }
  });
}

// Hybrid strategy: short columns are scanned linearly with instance-to-node
// lookups, long ones answered by per-instance binary search. The choice only
// moves work around; accumulation order per cell is ascending instance id
// either way.
struct HybridNodeRef {
  int node = 0;
  NodeHistogramSet* set = nullptr;
  const std::uint32_t* ib = nullptr;
  const std::uint32_t* ie = nullptr;
};

inline void build_hist_columns_hybrid(std::vector<HybridNodeRef>& nodes, const ColumnStore& cs,
                                      const InstanceToNodeIndex& idx, const GradView& gv) {
  std::uint64_t direct_total = 0;
  std::uint32_t max_node = 1;
  for (const auto& n : nodes) {
    direct_total += static_cast<std::uint64_t>(n.ie - n.ib);
    max_node = std::max(max_node, static_cast<std::uint32_t>(n.node));
  }
  std::vector<NodeHistogramSet*> set_of_node(max_node + 1, nullptr);
  for (const auto& n : nodes) set_of_node[n.node] = n.set;

  const int threads = thread_cap();
  parallel_chunks(cs.columns.size(), threads, [&](std::size_t flo, std::size_t fhi) {
    for (std::size_t f = flo; f < fhi; ++f) {
      const auto& col = cs.columns[f];
      const double log_len =
          col.size() > 2 ? std::log2(static_cast<double>(col.size())) : 1.0;
      const bool linear =
          static_cast<double>(col.size()) <= static_cast<double>(direct_total) * log_len;
      if (linear) {
        for (std::size_t k = 0; k < col.size(); ++k) {
          const std::uint32_t node = idx.node_of(col.instances[k]);
          NodeHistogramSet* set = node < set_of_node.size() ? set_of_node[node] : nullptr;
          if (set) set->add(static_cast<int>(f), col.bins[k], gv.g_at(col.instances[k]),
                            gv.h_at(col.instances[k]));
        }
      } else {
        for (const auto& n : nodes) {
          for (const std::uint32_t* p = n.ib; p != n.ie; ++p) {
            const int bin = cs.find_bin(static_cast<int>(f), *p);
            if (bin >= 0) n.set->add(static_cast<int>(f), bin, gv.g_at(*p), gv.h_at(*p));
          }
        }
      }
    }
  });
}

// ---- Subtraction planning ----

// For every sibling pair the smaller child is built directly and the other
// derived as parent minus sibling. Equal counts make the left child direct.
struct SubtractionSchema {
  std::unordered_map<int, bool> direct;  // child node -> built directly

  bool is_direct(int node) const {
    const auto it = direct.find(node);
    if (it == direct.end()) throw DataError("subtraction schema: unknown node");
    return it->second;
  }
};

inline SubtractionSchema plan_subtraction(
    const std::vector<std::pair<int, std::uint64_t>>& child_counts) {
  std::unordered_map<int, std::uint64_t> count;
  for (const auto& [node, c] : child_counts) count[node] = c;
  SubtractionSchema schema;
  for (const auto& [node, c] : count) {
    if (node % 2 != 0) continue;  // visit each pair once via the left child
    const auto sib = count.find(node + 1);
    if (sib == count.end())
      throw DataError("subtraction schema: sibling of " + std::to_string(node) + " missing");
    const bool left_direct = c <= sib->second;
    schema.direct[node] = left_direct;
    schema.direct[node + 1] = !left_direct;
  }
  return schema;
}

// ---- Split search ----

struct NodeStats {
  std::vector<double> g;
  std::vector<double> h;
  std::uint64_t count = 0;

  NodeStats() = default;
  NodeStats(int classes) : g(classes, 0.0), h(classes, 0.0) {}
};

struct SplitResult {
  bool found = false;
  int feature = -1;  // global feature id
  int bin = -1;
  bool default_left = false;
  double gain = -std::numeric_limits<double>::infinity();
  std::vector<double> gl, hl, gr, hr;

  static std::uint64_t wire_bytes(int classes) { return 20 + 32ull * classes; }

  void serialize(ByteWriter& w, std::uint32_t node) const {
    w.u32(node);
    w.u32(static_cast<std::uint32_t>(feature));
    w.u16(static_cast<std::uint16_t>(bin < 0 ? 0 : bin));
    w.u8(default_left ? 1 : 0);
    w.u8(found ? 1 : 0);
    w.f64(gain);
    for (const auto* v : {&gl, &hl, &gr, &hr})
      for (double x : *v) w.f64(x);
  }
};

// Scans features [0, set.features) of one node's histograms. `nsplits[f]`
// is the feature's proposed split count (bins above it are empty), and
// `fid_map` translates local ids to global ones for candidate ordering.
// Both missing-value directions are scored. Candidates whose present-value
// side is provably empty are skipped; the returned best may still have
// gain <= 0, the caller applies the acceptance threshold.
inline SplitResult find_best_split(const NodeHistogramSet& set, const NodeStats& totals,
                                   const std::vector<int>& nsplits,
                                   const std::vector<int>* fid_map, double lambda,
                                   double gamma) {
  const int classes = set.classes();
  SplitResult best;
  SplitCandidateKey best_key;

  std::vector<double> suffix_g, suffix_h;
  std::vector<double> pre_g(classes), pre_h(classes);
  std::vector<double> lg(classes), lh(classes), rg(classes), rh(classes);

  for (int f = 0; f < set.features(); ++f) {
    const int k = f < static_cast<int>(nsplits.size()) ? nsplits[f] : 0;
    if (k < 2) continue;
    const int gf = fid_map ? (*fid_map)[f] : f;

    // suffix[t] = sum over bins >= t; untouched cells stay exactly zero,
    // which makes empty-side detection reliable
    suffix_g.assign(static_cast<std::size_t>(k + 1) * classes, 0.0);
    suffix_h.assign(static_cast<std::size_t>(k + 1) * classes, 0.0);
    for (int t = k - 1; t >= 0; --t) {
      const double* g = set.g_ptr(f, t);
      const double* h = set.h_ptr(f, t);
      for (int c = 0; c < classes; ++c) {
        suffix_g[static_cast<std::size_t>(t) * classes + c] =
            suffix_g[static_cast<std::size_t>(t + 1) * classes + c] + g[c];
        suffix_h[static_cast<std::size_t>(t) * classes + c] =
            suffix_h[static_cast<std::size_t>(t + 1) * classes + c] + h[c];
      }
    }

    // missing mass = node totals - all present bins. The difference picks up
    // cancellation noise, and a truly empty missing set must stay exactly
    // zero on every build path or default-direction ties break differently
    // across quadrants. Any real missing instance contributes strictly
    // positive hessian mass far above the noise floor, so sub-epsilon
    // hessian mass clamps to nothing.
    bool missing_nonzero = false;
    std::vector<double> miss_g(classes), miss_h(classes);
    double mh_sum = 0.0, th_sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      miss_g[c] = totals.g[c] - suffix_g[c];
      miss_h[c] = totals.h[c] - suffix_h[c];
      mh_sum += miss_h[c];
      th_sum += totals.h[c];
    }
    if (mh_sum < 1e-9 * th_sum) {
      std::fill(miss_g.begin(), miss_g.end(), 0.0);
      std::fill(miss_h.begin(), miss_h.end(), 0.0);
    } else {
      for (int c = 0; c < classes; ++c)
        missing_nonzero |= miss_g[c] != 0.0 || miss_h[c] != 0.0;
    }

    std::fill(pre_g.begin(), pre_g.end(), 0.0);
    std::fill(pre_h.begin(), pre_h.end(), 0.0);
    for (int t = 0; t <= k - 2; ++t) {
      const double* g = set.g_ptr(f, t);
      const double* h = set.h_ptr(f, t);
      for (int c = 0; c < classes; ++c) {
        pre_g[c] += g[c];
        pre_h[c] += h[c];
      }
      bool left_zero = true, right_zero = true;
      for (int c = 0; c < classes; ++c) {
        left_zero &= pre_g[c] == 0.0 && pre_h[c] == 0.0;
        right_zero &= suffix_g[static_cast<std::size_t>(t + 1) * classes + c] == 0.0 &&
                      suffix_h[static_cast<std::size_t>(t + 1) * classes + c] == 0.0;
      }

      for (const bool dleft : {false, true}) {
        if (dleft) {
          if (right_zero) continue;  // all present mass plus missing on one side
          if (left_zero && !missing_nonzero) continue;
        } else {
          if (left_zero) continue;
          if (right_zero && !missing_nonzero) continue;
        }
        for (int c = 0; c < classes; ++c) {
          const double sg = suffix_g[static_cast<std::size_t>(t + 1) * classes + c];
          const double sh = suffix_h[static_cast<std::size_t>(t + 1) * classes + c];
          lg[c] = dleft ? pre_g[c] + miss_g[c] : pre_g[c];
          lh[c] = dleft ? pre_h[c] + miss_h[c] : pre_h[c];
          rg[c] = dleft ? sg : sg + miss_g[c];
          rh[c] = dleft ? sh : sh + miss_h[c];
        }
        const GainAccum acc = split_gain_guarded(lg.data(), lh.data(), rg.data(), rh.data(),
                                                 totals.g.data(), totals.h.data(), classes,
                                                 lambda, gamma);
        if (!acc.ok) continue;
        const SplitCandidateKey key{acc.value, gf, t, dleft};
        if (!best.found || candidate_better(key, best_key)) {
          best.found = true;
          best_key = key;
          best.feature = gf;
          best.bin = t;
          best.default_left = dleft;
          best.gain = acc.value;
          best.gl = lg;
          best.hl = lh;
          best.gr = rg;
          best.hr = rh;
        }
      }
    }
  }
  return best;
}

// Reduces split candidates the way a master would over per-worker bests:
// the comparator is a total order, so the result equals a flat scan.
inline void reduce_best(SplitResult& best, const SplitResult& cand) {
  if (!cand.found) return;
  if (!best.found) {
    best = cand;
    return;
  }
  const SplitCandidateKey a{best.gain, best.feature, best.bin, best.default_left};
  const SplitCandidateKey b{cand.gain, cand.feature, cand.bin, cand.default_left};
  if (candidate_better(b, a)) best = cand;
}

// ---- Placement ----

struct Placement {
  Bitmap bitmap;
  std::uint64_t left = 0;
  std::uint64_t right = 0;
};

// Routes the given instances by (feature, bin threshold, default direction)
// against a row store. Bit i set means instance i goes left.
inline Placement place_rows(const RowStore& store, int local_fid, int bin, bool default_left,
                            const std::uint32_t* ib, const std::uint32_t* ie,
                            std::uint64_t nbits) {
  Placement p;
  p.bitmap = Bitmap(nbits);
  for (const std::uint32_t* it = ib; it != ie; ++it) {
    const RowSlice s = store.row(*it);
    std::size_t lo = 0, hi = s.count;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (static_cast<int>(s.fids[mid]) < local_fid) lo = mid + 1; else hi = mid;
    }
    bool left;
    if (lo < s.count && static_cast<int>(s.fids[lo]) == local_fid)
      left = s.bins[lo] <= bin;
    else
      left = default_left;
    if (left) {
      p.bitmap.set(*it);
      ++p.left;
    } else {
      ++p.right;
    }
  }
  return p;
}

inline Placement place_columns(const ColumnStore& cs, int local_fid, int bin,
                               bool default_left, const std::uint32_t* ib,
                               const std::uint32_t* ie, std::uint64_t nbits) {
  Placement p;
  p.bitmap = Bitmap(nbits);
  for (const std::uint32_t* it = ib; it != ie; ++it) {
    const int b = cs.find_bin(local_fid, *it);
    const bool left = b < 0 ? default_left : b <= bin;
    if (left) {
      p.bitmap.set(*it);
      ++p.left;
    } else {
      ++p.right;
    }
  }
  return p;
}

// Layer split application for an instance-to-node index over a column store:
// mark phase scans each split feature's column, sweep phase sends untouched
// (missing) instances down their default direction. Returns per-child counts.
struct LayerDecision {
  int node = 0;
  int local_fid = -1;
  int bin = -1;
  bool default_left = false;
};

inline std::unordered_map<int, std::uint64_t> apply_layer_splits_i2n(
    InstanceToNodeIndex& idx, const ColumnStore& cs,
    const std::vector<LayerDecision>& decisions) {
  std::unordered_map<int, int> splitting;  // node -> decision index
  for (std::size_t d = 0; d < decisions.size(); ++d)
    splitting[decisions[d].node] = static_cast<int>(d);

  // mark phase: instances present in their node's split column route by value
  Bitmap left_mask(idx.base() + idx.size());
  std::vector<bool> has_value(idx.size(), false);
  for (const LayerDecision& d : decisions) {
    const auto& col = cs.columns[d.local_fid];
    for (std::size_t k = 0; k < col.size(); ++k) {
      if (idx.node_of(col.instances[k]) != static_cast<std::uint32_t>(d.node)) continue;
      has_value[col.instances[k] - idx.base()] = true;
      if (col.bins[k] <= d.bin) left_mask.set(col.instances[k]);
    }
  }

  std::unordered_map<int, std::uint64_t> counts;
  const std::uint64_t base = idx.base();
  for (std::uint64_t i = 0; i < idx.size(); ++i) {
    const int node = static_cast<int>(idx.node_of(base + i));
    const auto it = splitting.find(node);
    if (it == splitting.end()) continue;
    const LayerDecision& d = decisions[it->second];
    if (!has_value[i] && d.default_left) left_mask.set(base + i);
  }
  for (const LayerDecision& d : decisions) {
    counts[2 * d.node] = 0;
    counts[2 * d.node + 1] = 0;
  }
  std::vector<int> split_nodes;
  for (const auto& [node, _] : splitting) split_nodes.push_back(node);
  idx.split_layer(split_nodes, left_mask);
  for (std::uint64_t i = 0; i < idx.size(); ++i) {
    const int node = static_cast<int>(idx.node_of(base + i));
    const auto it = counts.find(node);
    if (it != counts.end()) ++it->second;
  }
  return counts;
}

}  // namespace quadboost
