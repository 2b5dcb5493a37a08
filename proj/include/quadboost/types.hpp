#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "quadboost/common.hpp"

namespace quadboost {

// ---- Loss ----

enum class Loss { kSquare, kLogistic, kSoftmax };

inline std::string loss_name(Loss l) {
  switch (l) {
    case Loss::kSquare: return "square";
    case Loss::kLogistic: return "logistic";
    case Loss::kSoftmax: return "softmax";
  }
  throw ConfigError("unknown loss");
}

inline Loss parse_loss(const std::string& s) {
  if (s == "square") return Loss::kSquare;
  if (s == "logistic") return Loss::kLogistic;
  if (s == "softmax") return Loss::kSoftmax;
  throw ConfigError("unknown loss '" + s + "'");
}

// ---- Hyperparams ----

struct Hyperparams {
  int trees = 100;
  int layers = 8;       // levels on the longest root-to-leaf path, root is level 1
  int bins = 20;        // histogram bins per feature (q)
  double eta = 0.1;
  double lambda_ = 1.0;
  double gamma_ = 0.0;
  Loss loss = Loss::kLogistic;

  void validate() const {
    if (trees < 1) throw ConfigError("trees must be >= 1");
    if (layers < 2) throw ConfigError("layers must be >= 2");
    if (bins < 1 || bins > 65535) throw ConfigError("bins must be in [1, 65535]");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (!(lambda_ >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(gamma_ >= 0.0)) throw ConfigError("gamma must be >= 0");
  }
};

// ---- SparseVector ----

// One instance: (feature_id, value) pairs with strictly increasing ids.
struct SparseVector {
  std::vector<std::pair<int, double>> pairs;

  void validate() const {
    int prev = -1;
    for (const auto& [fid, val] : pairs) {
      if (fid <= prev) throw DataError("feature ids must be strictly increasing");
      if (!std::isfinite(val)) throw DataError("feature value must be finite");
      prev = fid;
    }
  }

  // Returns nullptr when the feature is absent (a missing value).
  const double* find(int fid) const {
    std::size_t lo = 0, hi = pairs.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (pairs[mid].first < fid) lo = mid + 1; else hi = mid;
    }
    if (lo < pairs.size() && pairs[lo].first == fid) return &pairs[lo].second;
    return nullptr;
  }
};

// ---- GradientPair ----

// First and second order gradient vectors of one instance. C is 1 for square
// and logistic losses and the class count for softmax.
struct GradientPair {
  std::vector<double> g;
  std::vector<double> h;

  GradientPair() = default;
  explicit GradientPair(int classes) : g(classes, 0.0), h(classes, 0.0) {}

  int classes() const { return static_cast<int>(g.size()); }

  void validate() const {
    if (g.size() != h.size()) throw DataError("gradient pair shape mismatch");
    for (double v : g) if (!std::isfinite(v)) throw DataError("gradient not finite");
    for (double v : h) if (!std::isfinite(v)) throw DataError("hessian not finite");
  }
};

// ---- Histogram ----

// Per-feature gradient histogram: q bins of (G, H) class vectors plus one
// missing-value accumulator. Bin b class c lives at g[b * classes + c].
struct Histogram {
  int bins = 0;
  int classes = 0;
  std::vector<double> g;       // bins * classes
  std::vector<double> h;       // bins * classes
  std::vector<double> g_miss;  // classes
  std::vector<double> h_miss;  // classes

  Histogram() = default;
  Histogram(int q, int c)
      : bins(q), classes(c),
        g(static_cast<std::size_t>(q) * c, 0.0),
        h(static_cast<std::size_t>(q) * c, 0.0),
        g_miss(c, 0.0), h_miss(c, 0.0) {}

  bool same_shape(const Histogram& o) const {
    return bins == o.bins && classes == o.classes;
  }

  void accumulate(int bin, const double* gi, const double* hi) {
    double* gd = g.data() + static_cast<std::size_t>(bin) * classes;
    double* hd = h.data() + static_cast<std::size_t>(bin) * classes;
    for (int c = 0; c < classes; ++c) {
      gd[c] += gi[c];
      hd[c] += hi[c];
    }
  }

  void accumulate_missing(const double* gi, const double* hi) {
    for (int c = 0; c < classes; ++c) {
      g_miss[c] += gi[c];
      h_miss[c] += hi[c];
    }
  }
};

// ---- CandidateSplits ----

// Per-feature ordered split values. A feature that never occurs in the data
// has an empty list and is never proposed as a split.
struct CandidateSplits {
  std::vector<std::vector<double>> per_feature;

  int num_features() const { return static_cast<int>(per_feature.size()); }

  void validate() const {
    for (const auto& sp : per_feature) {
      for (std::size_t k = 1; k < sp.size(); ++k)
        if (!(sp[k - 1] < sp[k])) throw DataError("split values must be strictly increasing");
    }
  }
};

// ---- TreeModel ----

// Heap indexing: root is node 1, children of n are 2n and 2n+1. Internal
// nodes hold (feature, bin, default_left); leaves hold a weight per class.
struct TreeNode {
  enum class Kind : std::uint8_t { kAbsent, kSplit, kLeaf };

  Kind kind = Kind::kAbsent;
  int feature = -1;
  int bin = -1;
  bool default_left = false;
  std::vector<double> weights;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // index 0 unused

  const TreeNode& node(int nid) const {
    if (nid < 1 || nid >= static_cast<int>(nodes.size()) ||
        nodes[nid].kind == TreeNode::Kind::kAbsent)
      throw DataError("tree node " + std::to_string(nid) + " absent");
    return nodes[nid];
  }

  TreeNode& ensure(int nid) {
    if (nid < 1) throw DataError("node id must be >= 1");
    if (nid >= static_cast<int>(nodes.size())) nodes.resize(nid + 1);
    return nodes[nid];
  }

  int num_splits() const {
    int n = 0;
    for (const auto& nd : nodes) n += nd.kind == TreeNode::Kind::kSplit;
    return n;
  }

  int num_leaves() const {
    int n = 0;
    for (const auto& nd : nodes) n += nd.kind == TreeNode::Kind::kLeaf;
    return n;
  }

  // Structural soundness: split children exist, leaves have no children,
  // leaf weight arrays share one length.
  void validate() const {
    if (nodes.size() < 2 || nodes[1].kind == TreeNode::Kind::kAbsent)
      throw DataError("tree has no root");
    int classes = -1;
    for (int nid = 1; nid < static_cast<int>(nodes.size()); ++nid) {
      const TreeNode& nd = nodes[nid];
      if (nd.kind == TreeNode::Kind::kSplit) {
        node(2 * nid);
        node(2 * nid + 1);
        if (nd.feature < 0 || nd.bin < 0) throw DataError("split node malformed");
      } else if (nd.kind == TreeNode::Kind::kLeaf) {
        if (nd.weights.empty()) throw DataError("leaf has no weights");
        if (classes < 0) classes = static_cast<int>(nd.weights.size());
        if (classes != static_cast<int>(nd.weights.size()))
          throw DataError("leaf weight lengths differ");
        const int l = 2 * nid, r = 2 * nid + 1;
        if (l < static_cast<int>(nodes.size()) && nodes[l].kind != TreeNode::Kind::kAbsent)
          throw DataError("leaf has a child");
        if (r < static_cast<int>(nodes.size()) && nodes[r].kind != TreeNode::Kind::kAbsent)
          throw DataError("leaf has a child");
      }
    }
  }
};

// A trained model: the boosted trees plus everything needed to route a raw
// instance (split values, class count, shrinkage).
struct ModelSet {
  std::vector<TreeModel> trees;
  CandidateSplits splits;
  int bins = 0;
  int classes = 1;
  double eta = 0.1;
};

}  // namespace quadboost
