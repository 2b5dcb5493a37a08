#pragma once

// Exhaustive single-process trainer used as a correctness oracle. Every
// (feature, threshold, default-direction) candidate of every node is scored
// by direct summation over the node's instances: no histograms, no
// subtraction, no sharding. Intended for tiny datasets only.

#include <cmath>
#include <cstdint>
#include <vector>

#include "quadboost/dataset.hpp"
#include "quadboost/math.hpp"
#include "quadboost/sketch.hpp"
#include "quadboost/types.hpp"

namespace qbref {

using namespace quadboost;

class ReferenceTrainer {
 public:
  ReferenceTrainer(const SparseDataset& data, const CandidateSplits& splits,
                   const Hyperparams& hp, int classes)
      : data_(data), splits_(splits), hp_(hp), classes_(classes),
        n_(data.rows()), d_(data.num_features) {
    bin_.assign(n_, std::vector<int>(d_, -1));
    for (std::uint64_t i = 0; i < n_; ++i)
      for (std::uint64_t k = data.row_ptr[i]; k < data.row_ptr[i + 1]; ++k) {
        const int f = data.feat_ids[k];
        if (!splits_.per_feature[f].empty())
          bin_[i][f] = bin_of(splits_.per_feature[f], data.values[k]);
      }
    scores_.assign(n_ * classes_, 0.0);
  }

  ModelSet train() {
    ModelSet model;
    model.splits = splits_;
    model.bins = hp_.bins;
    model.classes = classes_;
    model.eta = hp_.eta;
    for (int t = 0; t < hp_.trees; ++t) {
      gradients();
      TreeModel tree;
      std::vector<std::uint64_t> all(n_);
      for (std::uint64_t i = 0; i < n_; ++i) all[i] = i;
      grow(tree, 1, all, 1);
      tree.validate();
      apply(tree);
      model.trees.push_back(std::move(tree));
    }
    return model;
  }

 private:
  struct Mass {
    std::vector<double> g, h;
    std::uint64_t count = 0;
    explicit Mass(int classes) : g(classes, 0.0), h(classes, 0.0) {}

    void add(const double* gi, const double* hi, int classes) {
      for (int c = 0; c < classes; ++c) {
        g[c] += gi[c];
        h[c] += hi[c];
      }
      ++count;
    }
  };

  void gradients() {
    g_.assign(n_ * classes_, 0.0);
    h_.assign(n_ * classes_, 0.0);
    std::vector<double> p(classes_);
    for (std::uint64_t i = 0; i < n_; ++i) {
      const double y = data_.labels[i];
      const double* s = scores_.data() + i * classes_;
      switch (hp_.loss) {
        case Loss::kSquare:
          g_[i] = s[0] - y;
          h_[i] = 1.0;
          break;
        case Loss::kLogistic: {
          const double pr = s[0] >= 0.0 ? 1.0 / (1.0 + std::exp(-s[0]))
                                        : std::exp(s[0]) / (1.0 + std::exp(s[0]));
          g_[i] = pr - y;
          h_[i] = pr * (1.0 - pr);
          break;
        }
        case Loss::kSoftmax: {
          double m = s[0];
          for (int c = 1; c < classes_; ++c) m = std::max(m, s[c]);
          double z = 0.0;
          for (int c = 0; c < classes_; ++c) z += (p[c] = std::exp(s[c] - m));
          for (int c = 0; c < classes_; ++c) {
            const double pc = p[c] / z;
            g_[i * classes_ + c] = pc - (static_cast<int>(y) == c ? 1.0 : 0.0);
            h_[i * classes_ + c] = pc * (1.0 - pc);
          }
          break;
        }
      }
    }
  }

  void grow(TreeModel& tree, int node, const std::vector<std::uint64_t>& ids, int level) {
    Mass total(classes_);
    for (const std::uint64_t i : ids)
      total.add(g_.data() + i * classes_, h_.data() + i * classes_, classes_);

    bool found = false;
    SplitCandidateKey best;

    if (level < hp_.layers) {
      for (int f = 0; f < d_; ++f) {
        const int k = static_cast<int>(splits_.per_feature[f].size());
        if (k < 2) continue;
        for (int t = 0; t <= k - 2; ++t) {
          for (const bool dleft : {false, true}) {
            Mass left(classes_), right(classes_), miss(classes_);
            std::uint64_t lpresent = 0, rpresent = 0;
            for (const std::uint64_t i : ids) {
              const int b = bin_[i][f];
              const double* gi = g_.data() + i * classes_;
              const double* hi = h_.data() + i * classes_;
              if (b < 0) {
                miss.add(gi, hi, classes_);
                (dleft ? left : right).add(gi, hi, classes_);
              } else if (b <= t) {
                left.add(gi, hi, classes_);
                ++lpresent;
              } else {
                right.add(gi, hi, classes_);
                ++rpresent;
              }
            }
            if (dleft) {
              if (rpresent == 0) continue;
              if (lpresent == 0 && miss.count == 0) continue;
            } else {
              if (lpresent == 0) continue;
              if (rpresent == 0 && miss.count == 0) continue;
            }
            double gain = -hp_.gamma_;
            bool ok = true;
            for (int c = 0; c < classes_; ++c) {
              gain += 0.5 * (term(left.g[c], left.h[c], ok) + term(right.g[c], right.h[c], ok) -
                             term(total.g[c], total.h[c], ok));
            }
            if (!ok) continue;
            // ordered by the engine's published candidate order so exact
            // mathematical ties resolve identically on both sides
            const SplitCandidateKey key{gain, f, t, dleft};
            if (!found || candidate_better(key, best)) {
              found = true;
              best = key;
            }
          }
        }
      }
    }

    if (found && best.gain > kMinSplitGain) {
      TreeNode& nd = tree.ensure(node);
      nd.kind = TreeNode::Kind::kSplit;
      nd.feature = best.feature;
      nd.bin = best.bin;
      nd.default_left = best.default_left;
      std::vector<std::uint64_t> lids, rids;
      for (const std::uint64_t i : ids) {
        const int b = bin_[i][best.feature];
        const bool go_left = b < 0 ? best.default_left : b <= best.bin;
        (go_left ? lids : rids).push_back(i);
      }
      grow(tree, 2 * node, lids, level + 1);
      grow(tree, 2 * node + 1, rids, level + 1);
      return;
    }

    TreeNode& nd = tree.ensure(node);
    nd.kind = TreeNode::Kind::kLeaf;
    nd.weights.resize(classes_);
    for (int c = 0; c < classes_; ++c)
      nd.weights[c] = -total.g[c] / (total.h[c] + hp_.lambda_);
  }

  double term(double g, double h, bool& ok) const {
    const double d = h + hp_.lambda_;
    if (d == 0.0) {
      if (g != 0.0) ok = false;
      return 0.0;
    }
    return g * g / d;
  }

  void apply(const TreeModel& tree) {
    for (std::uint64_t i = 0; i < n_; ++i) {
      int node = 1;
      while (tree.node(node).kind == TreeNode::Kind::kSplit) {
        const TreeNode& nd = tree.node(node);
        const int b = bin_[i][nd.feature];
        const bool left = b < 0 ? nd.default_left : b <= nd.bin;
        node = left ? 2 * node : 2 * node + 1;
      }
      const TreeNode& leaf = tree.node(node);
      for (int c = 0; c < classes_; ++c)
        scores_[i * classes_ + c] += hp_.eta * leaf.weights[c];
    }
  }

  const SparseDataset& data_;
  CandidateSplits splits_;
  Hyperparams hp_;
  int classes_;
  std::uint64_t n_;
  int d_;
  std::vector<std::vector<int>> bin_;
  std::vector<double> scores_;
  std::vector<double> g_, h_;
};

// Structural tree equality with a weight tolerance; reports the first
// difference through doctest-friendly return semantics.
inline bool trees_equal(const TreeModel& a, const TreeModel& b, double tol,
                        std::string* why = nullptr) {
  const int n = static_cast<int>(std::max(a.nodes.size(), b.nodes.size()));
  for (int nid = 1; nid < n; ++nid) {
    const bool in_a = nid < static_cast<int>(a.nodes.size()) &&
                      a.nodes[nid].kind != TreeNode::Kind::kAbsent;
    const bool in_b = nid < static_cast<int>(b.nodes.size()) &&
                      b.nodes[nid].kind != TreeNode::Kind::kAbsent;
    if (in_a != in_b) {
      if (why) *why = "node " + std::to_string(nid) + " present on one side only";
      return false;
    }
    if (!in_a) continue;
    const TreeNode& x = a.nodes[nid];
    const TreeNode& y = b.nodes[nid];
    if (x.kind != y.kind) {
      if (why) *why = "node " + std::to_string(nid) + " kind differs";
      return false;
    }
    if (x.kind == TreeNode::Kind::kSplit) {
      if (x.feature != y.feature || x.bin != y.bin || x.default_left != y.default_left) {
        if (why)
          *why = "split node " + std::to_string(nid) + " differs: (" +
                 std::to_string(x.feature) + "," + std::to_string(x.bin) + "," +
                 std::to_string(x.default_left) + ") vs (" + std::to_string(y.feature) +
                 "," + std::to_string(y.bin) + "," + std::to_string(y.default_left) + ")";
        return false;
      }
    } else {
      if (x.weights.size() != y.weights.size()) {
        if (why) *why = "leaf " + std::to_string(nid) + " class count differs";
        return false;
      }
      for (std::size_t c = 0; c < x.weights.size(); ++c)
        if (std::abs(x.weights[c] - y.weights[c]) > tol) {
          if (why)
            *why = "leaf " + std::to_string(nid) + " weight " + std::to_string(c) +
                   ": " + std::to_string(x.weights[c]) + " vs " + std::to_string(y.weights[c]);
          return false;
        }
    }
  }
  return true;
}

inline bool models_equal(const ModelSet& a, const ModelSet& b, double tol,
                         std::string* why = nullptr) {
  if (a.trees.size() != b.trees.size()) {
    if (why) *why = "tree counts differ";
    return false;
  }
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    std::string inner;
    if (!trees_equal(a.trees[t], b.trees[t], tol, &inner)) {
      if (why) *why = "tree " + std::to_string(t) + ": " + inner;
      return false;
    }
  }
  return true;
}

}  // namespace qbref
