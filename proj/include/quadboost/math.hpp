#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "quadboost/types.hpp"

namespace quadboost {

// Gains at or below this threshold do not split a node. Strictly positive so
// that histogram round-off noise (for example a pure node whose candidate
// gains are all exact zeros up to last-ulp division error) can never flip a
// leaf decision between two runs that differ only in accumulation grouping.
inline constexpr double kMinSplitGain = 1e-9;

// ---- Leaf weight ----

// w* = -G / (H + lambda), per class.
inline std::vector<double> leaf_weight(const std::vector<double>& g_sum,
                                       const std::vector<double>& h_sum,
                                       double lambda) {
  if (g_sum.size() != h_sum.size()) throw DataError("leaf weight shape mismatch");
  std::vector<double> w(g_sum.size());
  for (std::size_t c = 0; c < g_sum.size(); ++c) {
    const double denom = h_sum[c] + lambda;
    if (denom == 0.0) throw DataError("degenerate node: H + lambda is zero");
    w[c] = -g_sum[c] / denom;
  }
  return w;
}

// ---- Split gain ----

// One class's contribution, G^2 / (H + lambda). The guarded variant treats
// the empty-side 0/0 case as zero mass and reports an untakeable candidate
// (nonzero gradient over zero curvature) through `ok`.
inline double gain_term_guarded(double g, double h, double lambda, bool& ok) {
  const double denom = h + lambda;
  if (denom == 0.0) {
    if (g == 0.0) return 0.0;
    ok = false;
    return 0.0;
  }
  return g * g / denom;
}

struct GainAccum {
  double value = 0.0;
  bool ok = true;
};

inline GainAccum split_gain_guarded(const double* gl, const double* hl,
                                    const double* gr, const double* hr,
                                    const double* gp, const double* hp,
                                    int classes, double lambda, double gamma) {
  GainAccum out;
  double s = 0.0;
  for (int c = 0; c < classes; ++c) {
    s += gain_term_guarded(gl[c], hl[c], lambda, out.ok);
    s += gain_term_guarded(gr[c], hr[c], lambda, out.ok);
    s -= gain_term_guarded(gp[c], hp[c], lambda, out.ok);
  }
  out.value = 0.5 * s - gamma;
  return out;
}

// Classwise-summed second order gain. Parent sums must equal left + right
// (checked within 1e-9 relative); any zero denominator is an error here, the
// search path uses the guarded variant instead.
inline double split_gain(const GradientPair& left, const GradientPair& right,
                         const GradientPair& parent, double lambda, double gamma) {
  const int classes = parent.classes();
  if (left.classes() != classes || right.classes() != classes)
    throw DataError("split gain class mismatch");
  for (int c = 0; c < classes; ++c) {
    const double sg = left.g[c] + right.g[c];
    const double sh = left.h[c] + right.h[c];
    const double tol_g = 1e-9 * std::max({1.0, std::abs(sg), std::abs(parent.g[c])});
    const double tol_h = 1e-9 * std::max({1.0, std::abs(sh), std::abs(parent.h[c])});
    if (std::abs(sg - parent.g[c]) > tol_g || std::abs(sh - parent.h[c]) > tol_h)
      throw DataError("split gain: children do not sum to parent");
  }
  double s = 0.0;
  for (int c = 0; c < classes; ++c) {
    const double dl = left.h[c] + lambda;
    const double dr = right.h[c] + lambda;
    const double dp = parent.h[c] + lambda;
    if (dl == 0.0 || dr == 0.0 || dp == 0.0)
      throw DataError("split gain: zero denominator");
    s += left.g[c] * left.g[c] / dl;
    s += right.g[c] * right.g[c] / dr;
    s -= parent.g[c] * parent.g[c] / dp;
  }
  return 0.5 * s - gamma;
}

// ---- Histogram arithmetic ----

inline Histogram histogram_add(const Histogram& a, const Histogram& b) {
  if (!a.same_shape(b)) throw DataError("histogram add shape mismatch");
  Histogram out = a;
  for (std::size_t i = 0; i < out.g.size(); ++i) {
    out.g[i] += b.g[i];
    out.h[i] += b.h[i];
  }
  for (std::size_t c = 0; c < out.g_miss.size(); ++c) {
    out.g_miss[c] += b.g_miss[c];
    out.h_miss[c] += b.h_miss[c];
  }
  return out;
}

inline Histogram histogram_subtract(const Histogram& parent, const Histogram& child) {
  if (!parent.same_shape(child)) throw DataError("histogram subtract shape mismatch");
  Histogram out = parent;
  for (std::size_t i = 0; i < out.g.size(); ++i) {
    out.g[i] -= child.g[i];
    out.h[i] -= child.h[i];
  }
  for (std::size_t c = 0; c < out.g_miss.size(); ++c) {
    out.g_miss[c] -= child.g_miss[c];
    out.h_miss[c] -= child.h_miss[c];
  }
  return out;
}

// ---- Candidate ordering ----

// Total order over split candidates: highest gain first, then lower feature,
// lower bin, and a non-default-left direction wins the final tie.
struct SplitCandidateKey {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  int bin = -1;
  bool default_left = false;
};

// The gain leg compares through float. One mathematical gain reached along
// different accumulation orders (shard-merged sums, histogram subtraction, a
// dense re-computation) lands on slightly different doubles; rounding to
// float collapses them to one value so the lexicographic legs break such
// ties the same way on every path.
inline bool candidate_better(const SplitCandidateKey& a, const SplitCandidateKey& b) {
  const float ga = static_cast<float>(a.gain);
  const float gb = static_cast<float>(b.gain);
  if (ga != gb) return ga > gb;
  if (a.feature != b.feature) return a.feature < b.feature;
  if (a.bin != b.bin) return a.bin < b.bin;
  return !a.default_left && b.default_left;
}

// ---- Prediction ----

// Routes one raw instance down one tree. Bin threshold t of feature f sends
// the instance left iff value <= splits[f][t]; missing features follow the
// recorded default direction.
inline const TreeNode& route(const TreeModel& tree, const SparseVector& x,
                             const CandidateSplits& splits) {
  int nid = 1;
  for (;;) {
    const TreeNode& nd = tree.node(nid);
    if (nd.kind == TreeNode::Kind::kLeaf) return nd;
    const double* val = x.find(nd.feature);
    bool left;
    if (val == nullptr) {
      left = nd.default_left;
    } else {
      if (nd.feature >= splits.num_features() ||
          nd.bin >= static_cast<int>(splits.per_feature[nd.feature].size()))
        throw DataError("model references unknown split value");
      left = *val <= splits.per_feature[nd.feature][nd.bin];
    }
    nid = left ? 2 * nid : 2 * nid + 1;
  }
}

// y_hat = sum over trees of eta * f_t(x), one score per class.
inline std::vector<double> predict(const std::vector<TreeModel>& trees,
                                   const SparseVector& x, double eta,
                                   const CandidateSplits& splits, int classes) {
  std::vector<double> score(classes, 0.0);
  for (const TreeModel& t : trees) {
    const TreeNode& leaf = route(t, x, splits);
    if (static_cast<int>(leaf.weights.size()) != classes)
      throw DataError("leaf class count mismatch");
    for (int c = 0; c < classes; ++c) score[c] += eta * leaf.weights[c];
  }
  return score;
}

inline std::vector<double> predict(const ModelSet& m, const SparseVector& x) {
  return predict(m.trees, x, m.eta, m.splits, m.classes);
}

}  // namespace quadboost
