#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "quadboost/blocks.hpp"
#include "quadboost/engine.hpp"
#include "quadboost/store.hpp"
#include "quadboost/synth.hpp"

using namespace quadboost;

namespace {

// Random binned sparse data in block form, plus per-instance gradients.
struct Fixture {
  int features;
  int bins;
  int classes;
  std::uint64_t n;
  RowStore rows;
  ColumnStore cols;
  std::vector<double> g, h;

  GradView gv() const { return {g.data(), h.data(), 0, classes}; }
};

Fixture make_fixture(std::uint64_t seed, std::uint64_t n, int features, int bins,
                     int classes, double density) {
  Fixture fx;
  fx.features = features;
  fx.bins = bins;
  fx.classes = classes;
  fx.n = n;
  Rng rng(seed);

  Block b;
  b.split_index = 0;
  b.rows = static_cast<std::uint32_t>(n);
  b.fid_width = byte_width(features);
  b.bin_width = byte_width(bins);
  b.instance_ptrs = {0};
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int f = 0; f < features; ++f) {
      if (rng.uniform() >= density) continue;
      b.fids.push_back(static_cast<std::uint32_t>(f));
      b.bins.push_back(static_cast<std::uint16_t>(rng.below(bins)));
    }
    b.instance_ptrs.push_back(b.fids.size());
  }
  BlockList list(std::vector<Block>{std::move(b)}, 0);
  fx.cols = ColumnStore::from_blocks(list, features);
  fx.rows = RowStore{std::move(list), features};

  fx.g.resize(n * classes);
  fx.h.resize(n * classes);
  for (auto& v : fx.g) v = rng.normal();
  for (auto& v : fx.h) v = rng.uniform() + 0.01;
  return fx;
}

// A depth-`layers` random node partition maintained in all index forms.
struct Partition {
  NodeToInstanceIndex n2i;
  InstanceToNodeIndex i2n;
  ColumnWiseIndex cw;
  std::vector<int> frontier;
};

Partition make_partition(const Fixture& fx, std::uint64_t seed, int layers) {
  Partition p;
  p.n2i.init_root(0, fx.n);
  p.i2n.init_root(0, fx.n);
  p.cw.init_root(fx.cols);
  p.frontier = {1};
  Rng rng(seed);
  for (int l = 1; l < layers; ++l) {
    std::vector<int> next;
    for (const int node : p.frontier) {
      Bitmap mask(fx.n);
      for (const std::uint32_t* it = p.n2i.begin(node); it != p.n2i.end(node); ++it)
        if (rng.uniform() < 0.5) mask.set(*it);
      p.n2i.split(node, mask);
      p.i2n.split(node, mask);
      p.cw.split(node, mask, fx.cols);
      next.push_back(2 * node);
      next.push_back(2 * node + 1);
    }
    p.frontier = std::move(next);
  }
  return p;
}

NodeStats node_stats(const Fixture& fx, const Partition& p, int node) {
  NodeStats s(fx.classes);
  for (const std::uint32_t* it = p.n2i.begin(node); it != p.n2i.end(node); ++it) {
    for (int c = 0; c < fx.classes; ++c) {
      s.g[c] += fx.g[*it * fx.classes + c];
      s.h[c] += fx.h[*it * fx.classes + c];
    }
    ++s.count;
  }
  return s;
}

bool sets_equal(const NodeHistogramSet& a, const NodeHistogramSet& b) {
  ByteWriter wa, wb;
  a.serialize(wa);
  b.serialize(wb);
  return wa.data() == wb.data();
}

}  // namespace

TEST_CASE("gradient oracles") {
  SUBCASE("square") {
    std::vector<double> g(1), h(1);
    const double label = 3.0, score = 5.0;
    compute_gradients_range(&label, &score, 0, 1, Loss::kSquare, 1, g.data(), h.data());
    CHECK(g[0] == 2.0);
    CHECK(h[0] == 1.0);
  }
  SUBCASE("logistic at zero margin") {
    std::vector<double> g(1), h(1);
    const double label = 1.0, score = 0.0;
    compute_gradients_range(&label, &score, 0, 1, Loss::kLogistic, 1, g.data(), h.data());
    CHECK(g[0] == -0.5);
    CHECK(h[0] == 0.25);
  }
  SUBCASE("softmax at uniform scores") {
    std::vector<double> g(3), h(3);
    const double label = 0.0;
    const std::vector<double> scores{1.0, 1.0, 1.0};
    compute_gradients_range(&label, scores.data(), 0, 1, Loss::kSoftmax, 3, g.data(),
                            h.data());
    CHECK(g[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    for (int c = 0; c < 3; ++c)
      CHECK(h[c] == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  }
  SUBCASE("softmax is shift invariant") {
    std::vector<double> g1(2), h1(2), g2(2), h2(2);
    const double label = 1.0;
    const std::vector<double> a{2.0, -1.0}, b{1002.0, 999.0};
    compute_gradients_range(&label, a.data(), 0, 1, Loss::kSoftmax, 2, g1.data(), h1.data());
    compute_gradients_range(&label, b.data(), 0, 1, Loss::kSoftmax, 2, g2.data(), h2.data());
    for (int c = 0; c < 2; ++c) {
      CHECK(g1[c] == doctest::Approx(g2[c]).epsilon(1e-12));
      CHECK(h1[c] == doctest::Approx(h2[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("metric oracles") {
  SUBCASE("logistic loss at zero margin is log 2") {
    const std::vector<double> labels{1.0}, scores{0.0};
    CHECK(metric_loss(labels, scores, 0, 1, Loss::kLogistic, 1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("logistic loss survives extreme margins") {
    const std::vector<double> labels{0.0}, scores{800.0};
    const double l = metric_loss(labels, scores, 0, 1, Loss::kLogistic, 1);
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx(800.0).epsilon(1e-9));
  }
  SUBCASE("square loss is half squared error") {
    const std::vector<double> labels{3.0}, scores{5.0};
    CHECK(metric_loss(labels, scores, 0, 1, Loss::kSquare, 1) == 2.0);
  }
  SUBCASE("softmax correctness counts argmax, logistic thresholds at zero") {
    const std::vector<double> labels{2.0, 0.0};
    const std::vector<double> scores{0.0, 1.0, 3.0, 2.0, 1.0, 0.0};
    CHECK(metric_correct(labels, scores, 0, 2, Loss::kSoftmax, 3) == 2);
    const std::vector<double> l2{1.0, 0.0}, s2{0.25, -0.25};
    CHECK(metric_correct(l2, s2, 0, 2, Loss::kLogistic, 1) == 2);
  }
}

TEST_CASE("histogram strategies agree bit-exactly") {
  for (const int classes : {1, 3}) {
    const Fixture fx = make_fixture(100 + classes, 48, 6, 4, classes, 0.55);
    const Partition p = make_partition(fx, 200 + classes, 3);
    const GradView gv = fx.gv();

    // instance-to-node scan builds all frontier nodes at once
    std::vector<NodeHistogramSet> i2n_sets;
    std::vector<NodeHistogramSet*> by_node(*std::max_element(p.frontier.begin(),
                                                             p.frontier.end()) +
                                               1,
                                           nullptr);
    i2n_sets.reserve(p.frontier.size());
    for (const int node : p.frontier) {
      i2n_sets.emplace_back(fx.features, fx.bins, classes, nullptr);
      by_node[node] = &i2n_sets.back();
    }
    build_hist_columns_i2n(by_node, fx.cols, p.i2n, gv);

    std::vector<HybridNodeRef> refs;
    std::vector<NodeHistogramSet> hybrid_sets;
    hybrid_sets.reserve(p.frontier.size());
    for (const int node : p.frontier) {
      hybrid_sets.emplace_back(fx.features, fx.bins, classes, nullptr);
      refs.push_back({node, &hybrid_sets.back(), p.n2i.begin(node), p.n2i.end(node)});
    }
    build_hist_columns_hybrid(refs, fx.cols, p.i2n, gv);

    for (std::size_t k = 0; k < p.frontier.size(); ++k) {
      const int node = p.frontier[k];
      NodeHistogramSet rows_set(fx.features, fx.bins, classes, nullptr);
      build_hist_rows(rows_set, fx.rows, p.n2i.begin(node), p.n2i.end(node), gv);

      NodeHistogramSet n2i_set(fx.features, fx.bins, classes, nullptr);
      build_hist_columns_n2i(n2i_set, fx.cols, p.n2i.begin(node), p.n2i.end(node), gv);

      NodeHistogramSet cw_set(fx.features, fx.bins, classes, nullptr);
      build_hist_columnwise(cw_set, fx.cols, p.cw, node, gv);

      CHECK(sets_equal(rows_set, i2n_sets[k]));
      CHECK(sets_equal(rows_set, n2i_set));
      CHECK(sets_equal(rows_set, cw_set));
      CHECK(sets_equal(rows_set, hybrid_sets[k]));
    }
  }
}

TEST_CASE("histogram conservation: bins plus missing reproduce node totals") {
  const Fixture fx = make_fixture(7, 64, 5, 4, 2, 0.5);
  const Partition p = make_partition(fx, 8, 3);
  const GradView gv = fx.gv();
  for (const int node : p.frontier) {
    NodeHistogramSet set(fx.features, fx.bins, fx.classes, nullptr);
    build_hist_rows(set, fx.rows, p.n2i.begin(node), p.n2i.end(node), gv);
    const NodeStats s = node_stats(fx, p, node);
    for (int f = 0; f < fx.features; ++f) {
      const Histogram hist = set.extract(f, s.g, s.h);
      for (int c = 0; c < fx.classes; ++c) {
        double sg = hist.g_miss[c], sh = hist.h_miss[c];
        for (int b = 0; b < fx.bins; ++b) {
          sg += hist.g[static_cast<std::size_t>(b) * fx.classes + c];
          sh += hist.h[static_cast<std::size_t>(b) * fx.classes + c];
        }
        CHECK(sg == doctest::Approx(s.g[c]).epsilon(1e-6));
        CHECK(sh == doctest::Approx(s.h[c]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("sibling derived by subtraction matches its direct build") {
  const Fixture fx = make_fixture(21, 120, 6, 5, 2, 0.6);
  Partition p = make_partition(fx, 22, 2);  // root split into nodes 2 and 3
  const GradView gv = fx.gv();

  NodeHistogramSet parent(fx.features, fx.bins, fx.classes, nullptr);
  NodeToInstanceIndex root_idx;
  root_idx.init_root(0, fx.n);
  build_hist_rows(parent, fx.rows, root_idx.begin(1), root_idx.end(1), gv);

  NodeHistogramSet left(fx.features, fx.bins, fx.classes, nullptr);
  build_hist_rows(left, fx.rows, p.n2i.begin(2), p.n2i.end(2), gv);
  NodeHistogramSet right(fx.features, fx.bins, fx.classes, nullptr);
  build_hist_rows(right, fx.rows, p.n2i.begin(3), p.n2i.end(3), gv);

  NodeHistogramSet derived(fx.features, fx.bins, fx.classes, nullptr);
  derived.add_set(parent);
  derived.subtract_set(left);

  for (int f = 0; f < fx.features; ++f)
    for (int b = 0; b < fx.bins; ++b)
      for (int c = 0; c < fx.classes; ++c) {
        const double want_g = right.g_ptr(f, b)[c];
        const double got_g = derived.g_ptr(f, b)[c];
        const double tol = 1e-6 * std::max(1.0, std::abs(want_g));
        CHECK(std::abs(got_g - want_g) <= tol);
        const double want_h = right.h_ptr(f, b)[c];
        const double got_h = derived.h_ptr(f, b)[c];
        CHECK(std::abs(got_h - want_h) <= 1e-6 * std::max(1.0, std::abs(want_h)));
      }
}

TEST_CASE("histogram set serialization is bare payload and round-trips") {
  const Fixture fx = make_fixture(31, 30, 4, 3, 2, 0.7);
  NodeToInstanceIndex idx;
  idx.init_root(0, fx.n);
  NodeHistogramSet set(fx.features, fx.bins, fx.classes, nullptr);
  build_hist_rows(set, fx.rows, idx.begin(1), idx.end(1), fx.gv());

  ByteWriter w;
  set.serialize(w);
  CHECK(w.size() == 2ull * fx.features * fx.bins * fx.classes * 8);
  CHECK(w.size() == set.byte_size());

  ByteReader r(w.data());
  const NodeHistogramSet back =
      NodeHistogramSet::deserialize(r, fx.features, fx.bins, fx.classes, nullptr);
  CHECK(r.done());
  CHECK(sets_equal(set, back));
}

TEST_CASE("histogram memory tracker enforces the cap and balances to zero") {
  HistogramTracker t(1000);
  {
    NodeHistogramSet a(2, 5, 1, &t);  // 2*2*5*1*8 = 160 bytes
    CHECK(t.live() == 160);
    {
      NodeHistogramSet b(2, 5, 1, &t);
      CHECK(t.live() == 320);
      CHECK(t.peak() == 320);
    }
    CHECK(t.live() == 160);
  }
  CHECK(t.live() == 0);
  CHECK(t.peak() == 320);

  HistogramTracker tight(1000);
  // 2*7*5*2*8 = 1120 bytes crosses the cap during construction
  CHECK_THROWS_AS([&] { NodeHistogramSet big(7, 5, 2, &tight); }(), OomGuardError);
}

TEST_CASE("subtraction planning builds the smaller child") {
  const SubtractionSchema s =
      plan_subtraction({{2, 10}, {3, 90}, {4, 50}, {5, 50}, {6, 7}, {7, 3}});
  CHECK(s.is_direct(2));
  CHECK_FALSE(s.is_direct(3));
  CHECK(s.is_direct(4));  // tie goes to the left child
  CHECK_FALSE(s.is_direct(5));
  CHECK_FALSE(s.is_direct(6));
  CHECK(s.is_direct(7));
  CHECK_THROWS_AS(plan_subtraction({{2, 1}}), DataError);
  CHECK_THROWS_AS(s.is_direct(8), DataError);
}

TEST_CASE("best split on a hand-built node") {
  // one feature, three bins; instances: bin0 g=-4 h=1, bin1 g=+1 h=1,
  // bin2 g=+2 h=1, one missing instance g=+3 h=1, lambda=1, gamma=0
  NodeHistogramSet set(1, 3, 1, nullptr);
  const double g0 = -4.0, h0 = 1.0, g1 = 1.0, h1 = 1.0, g2 = 2.0, h2 = 1.0;
  set.add(0, 0, &g0, &h0);
  set.add(0, 1, &g1, &h1);
  set.add(0, 2, &g2, &h2);
  NodeStats totals(1);
  totals.g = {2.0};  // -4 + 1 + 2 + 3
  totals.h = {4.0};
  totals.count = 4;

  const SplitResult best = find_best_split(set, totals, {3}, nullptr, 1.0, 0.0);
  REQUIRE(best.found);
  CHECK(best.feature == 0);
  // threshold after bin 0, missing goes right:
  //   left {-4,h1}, right {1+2+3, h3}: 0.5*(16/2 + 36/4 - 4/5) = 8.1
  CHECK(best.bin == 0);
  CHECK_FALSE(best.default_left);
  CHECK(best.gain == doctest::Approx(8.1).epsilon(1e-12));
  CHECK(best.gl[0] == -4.0);
  CHECK(best.hl[0] == 1.0);
  CHECK(best.gr[0] == 6.0);
  CHECK(best.hr[0] == 3.0);
}

TEST_CASE("best split skips candidates with an empty present side") {
  // all mass in bin 0: threshold 0 with default-right puts nothing right
  NodeHistogramSet set(1, 2, 1, nullptr);
  const double g0 = 1.0, h0 = 1.0;
  set.add(0, 0, &g0, &h0);
  NodeStats totals(1);
  totals.g = {1.0};
  totals.h = {1.0};
  totals.count = 1;
  const SplitResult best = find_best_split(set, totals, {2}, nullptr, 1.0, 0.0);
  CHECK_FALSE(best.found);
}

TEST_CASE("best split agrees with an independent enumeration") {
  for (const std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const int classes = seed % 2 == 0 ? 2 : 1;
    const Fixture fx = make_fixture(400 + seed, 60, 5, 4, classes, 0.55);
    const Partition p = make_partition(fx, 500 + seed, 2);
    const GradView gv = fx.gv();
    const double lambda = 1.0, gamma = 0.1;

    for (const int node : p.frontier) {
      NodeHistogramSet set(fx.features, fx.bins, classes, nullptr);
      build_hist_rows(set, fx.rows, p.n2i.begin(node), p.n2i.end(node), gv);
      const NodeStats totals = node_stats(fx, p, node);
      const std::vector<int> nsplits(fx.features, fx.bins);
      const SplitResult got = find_best_split(set, totals, nsplits, nullptr, lambda, gamma);

      // reference: prefix scan over extracted histograms, ordered by the
      // published candidate order
      bool found = false;
      SplitCandidateKey best_key;
      double best_gain = 0.0;
      int best_f = -1, best_t = -1;
      bool best_dl = false;
      for (int f = 0; f < fx.features; ++f) {
        const Histogram hist = set.extract(f, totals.g, totals.h);
        for (int t = 0; t <= fx.bins - 2; ++t) {
          for (const bool dleft : {false, true}) {
            std::vector<double> gl(classes, 0.0), hl(classes, 0.0);
            std::vector<double> gr(classes, 0.0), hr(classes, 0.0);
            bool lz = true, rz = true;
            for (int c = 0; c < classes; ++c) {
              for (int b = 0; b <= t; ++b) {
                gl[c] += hist.g[static_cast<std::size_t>(b) * classes + c];
                hl[c] += hist.h[static_cast<std::size_t>(b) * classes + c];
              }
              for (int b = t + 1; b < fx.bins; ++b) {
                gr[c] += hist.g[static_cast<std::size_t>(b) * classes + c];
                hr[c] += hist.h[static_cast<std::size_t>(b) * classes + c];
              }
              lz &= gl[c] == 0.0 && hl[c] == 0.0;
              rz &= gr[c] == 0.0 && hr[c] == 0.0;
            }
            bool mz = true;
            for (int c = 0; c < classes; ++c)
              mz &= hist.g_miss[c] == 0.0 && hist.h_miss[c] == 0.0;
            if (dleft && (rz || (lz && mz))) continue;
            if (!dleft && (lz || (rz && mz))) continue;
            double gain = -gamma;
            bool ok = true;
            for (int c = 0; c < classes; ++c) {
              const double lg = gl[c] + (dleft ? hist.g_miss[c] : 0.0);
              const double lh = hl[c] + (dleft ? hist.h_miss[c] : 0.0);
              const double rg = gr[c] + (dleft ? 0.0 : hist.g_miss[c]);
              const double rh = hr[c] + (dleft ? 0.0 : hist.h_miss[c]);
              const auto term = [&ok, lambda](double g2, double h2) {
                const double d = h2 + lambda;
                if (d == 0.0) {
                  if (g2 != 0.0) ok = false;
                  return 0.0;
                }
                return g2 * g2 / d;
              };
              gain += 0.5 * (term(lg, lh) + term(rg, rh) - term(totals.g[c], totals.h[c]));
            }
            if (!ok) continue;
            const SplitCandidateKey key{gain, f, t, dleft};
            if (!found || candidate_better(key, best_key)) {
              found = true;
              best_key = key;
              best_gain = gain;
              best_f = f;
              best_t = t;
              best_dl = dleft;
            }
          }
        }
      }

      CHECK(got.found == found);
      if (found && got.found) {
        CHECK(got.feature == best_f);
        CHECK(got.bin == best_t);
        CHECK(got.default_left == best_dl);
        CHECK(got.gain == doctest::Approx(best_gain).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("reduce over worker bests equals the flat scan") {
  SplitResult a, b, c;
  a.found = true;
  a.feature = 3;
  a.bin = 1;
  a.gain = 2.0;
  b.found = true;
  b.feature = 1;
  b.bin = 0;
  b.gain = 2.0;
  c.found = false;

  SplitResult best;
  reduce_best(best, a);
  reduce_best(best, c);
  reduce_best(best, b);
  CHECK(best.feature == 1);  // equal gain, lower feature id wins

  SplitResult other;
  reduce_best(other, b);
  reduce_best(other, a);
  CHECK(other.feature == 1);  // order independent
}

TEST_CASE("placement: row store, column store, and layer application agree") {
  const Fixture fx = make_fixture(61, 80, 5, 4, 1, 0.5);
  Partition p = make_partition(fx, 62, 2);  // nodes 2, 3

  const int fid = 2, bin = 1;
  for (const bool dleft : {false, true}) {
    // against the row store
    const Placement pr =
        place_rows(fx.rows, fid, bin, dleft, p.n2i.begin(2), p.n2i.end(2), fx.n);
    // against the column store
    const Placement pc =
        place_columns(fx.cols, fid, bin, dleft, p.n2i.begin(2), p.n2i.end(2), fx.n);
    CHECK(pr.left == pc.left);
    CHECK(pr.right == pc.right);
    CHECK(pr.bitmap.bytes == pc.bitmap.bytes);
    CHECK(pr.left + pr.right == p.n2i.count(2));
  }

  // layer application over the instance-to-node index gives the same children
  InstanceToNodeIndex i2n_copy = p.i2n;
  const Placement pr2 =
      place_rows(fx.rows, fid, bin, true, p.n2i.begin(2), p.n2i.end(2), fx.n);
  const Placement pr3 =
      place_rows(fx.rows, fid, bin, true, p.n2i.begin(3), p.n2i.end(3), fx.n);
  const auto counts =
      apply_layer_splits_i2n(i2n_copy, fx.cols,
                             {{2, fid, bin, true}, {3, fid, bin, true}});
  CHECK(counts.at(4) == pr2.left);
  CHECK(counts.at(5) == pr2.right);
  CHECK(counts.at(6) == pr3.left);
  CHECK(counts.at(7) == pr3.right);

  NodeToInstanceIndex n2i_copy = p.n2i;
  n2i_copy.split(2, pr2.bitmap);
  n2i_copy.split(3, pr3.bitmap);
  for (const int child : {4, 5, 6, 7}) {
    for (const std::uint32_t* it = n2i_copy.begin(child); it != n2i_copy.end(child); ++it)
      CHECK(i2n_copy.node_of(*it) == static_cast<std::uint32_t>(child));
  }
}

TEST_CASE("placement routes missing values by the default direction") {
  // instance 0 has feature 0, instance 1 lacks it
  Block b;
  b.split_index = 0;
  b.rows = 2;
  b.fid_width = 1;
  b.bin_width = 1;
  b.fids = {0};
  b.bins = {0};
  b.instance_ptrs = {0, 1, 1};
  BlockList list(std::vector<Block>{std::move(b)}, 0);
  RowStore rows{std::move(list), 1};

  NodeToInstanceIndex idx;
  idx.init_root(0, 2);
  const Placement keep_left = place_rows(rows, 0, 0, true, idx.begin(1), idx.end(1), 2);
  CHECK(keep_left.left == 2);  // present value in bin 0 <= 0 and missing default-left
  const Placement to_right = place_rows(rows, 0, 0, false, idx.begin(1), idx.end(1), 2);
  CHECK(to_right.left == 1);
  CHECK(to_right.right == 1);
  CHECK(to_right.bitmap.get(0));
  CHECK_FALSE(to_right.bitmap.get(1));
}
