#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/wire.hpp"

namespace quadboost {

// Greenwald-Khanna style quantile summary.
//
// Tuples (value, g, delta) sorted by value; g is the rank mass the tuple
// carries, delta the extra rank uncertainty. Prefix sums of g give each
// tuple's minimum rank, plus delta its maximum. The stream updates keep the
// invariant g_i + delta_i <= floor(2 * eps * n), which bounds any rank query
// by eps * n. Merging keeps tuples from both inputs and widens delta by the
// other side's local slack, so merge error is the sum of the inputs' bounds.
// Merges never compress: that keeps merge trees associative at query level.
// The summary retains the exact stream minimum and maximum.
class QuantileSketch {
 public:
  struct Entry {
    double value = 0.0;
    std::uint64_t g = 0;
    std::uint64_t delta = 0;
  };

  explicit QuantileSketch(double eps = 0.01, std::uint64_t n_est = 1'000'000) : eps_(eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("sketch eps must be in (0, 0.5)");
    capacity_ = capacity_for(eps, n_est);
  }

  static int capacity_for(double eps, std::uint64_t n_est) {
    const double span = std::max(2.0, eps * static_cast<double>(n_est));
    return static_cast<int>(std::ceil(std::log2(span) / (2.0 * eps)));
  }

  std::uint64_t count() const { return n_; }
  double eps() const { return eps_; }
  int capacity() const { return capacity_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void update(double v) {
    if (!std::isfinite(v)) throw DataError("sketch update: value must be finite");
    std::size_t pos = entries_.size();
    std::size_t lo = 0, hi = entries_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (entries_[mid].value < v) lo = mid + 1; else hi = mid;
    }
    pos = lo;  // first entry with value >= v
    std::uint64_t delta = 0;
    if (pos > 0 && pos < entries_.size()) {
      const std::uint64_t band = static_cast<std::uint64_t>(2.0 * eps_ * static_cast<double>(n_));
      delta = band > 0 ? band - 1 : 0;
    }
    entries_.insert(entries_.begin() + pos, Entry{v, 1, delta});
    ++n_;
    if (entries_.size() > static_cast<std::size_t>(capacity_) + compress_block()) compress();
  }

  // Smallest-deviation answer for a 1-based target rank. The invariant
  // guarantees some tuple deviates at most eps * n in rank.
  double query_rank(std::uint64_t r) const {
    if (n_ == 0) throw DataError("sketch query: empty sketch");
    if (r < 1) r = 1;
    if (r > n_) r = n_;
    std::uint64_t rmin = 0;
    double best_val = entries_.front().value;
    std::uint64_t best_m = UINT64_MAX;
    for (const Entry& e : entries_) {
      rmin += e.g;
      const std::uint64_t rmax = rmin + e.delta;
      const std::uint64_t m = std::max(rmax > r ? rmax - r : 0, r > rmin ? r - rmin : 0);
      if (m < best_m) {
        best_m = m;
        best_val = e.value;
      }
    }
    return best_val;
  }

  // Serialized record: entry count u32, observation count u64, then per
  // entry (value f64, rank_lo u32, rank_hi u32) with cumulative ranks.
  void serialize(ByteWriter& w) const {
    if (n_ > UINT32_MAX) throw DataError("sketch too large to serialize");
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    w.u64(n_);
    std::uint64_t rmin = 0;
    for (const Entry& e : entries_) {
      rmin += e.g;
      w.f64(e.value);
      w.u32(static_cast<std::uint32_t>(rmin));
      w.u32(static_cast<std::uint32_t>(rmin + e.delta));
    }
  }

  std::size_t serialized_bytes() const { return 12 + 16 * entries_.size(); }

  static QuantileSketch deserialize(ByteReader& r, double eps = 0.01,
                                    std::uint64_t n_est = 1'000'000) {
    QuantileSketch s(eps, n_est);
    const std::uint32_t cnt = r.u32();
    s.n_ = r.u64();
    s.entries_.resize(cnt);
    std::uint64_t prev = 0;
    for (std::uint32_t i = 0; i < cnt; ++i) {
      s.entries_[i].value = r.f64();
      const std::uint64_t rlo = r.u32();
      const std::uint64_t rhi = r.u32();
      if (rlo <= prev || rhi < rlo) throw DataError("sketch record: rank bounds malformed");
      s.entries_[i].g = rlo - prev;
      s.entries_[i].delta = rhi - rlo;
      prev = rlo;
    }
    if (cnt > 0 && prev != s.n_) throw DataError("sketch record: rank mass mismatch");
    return s;
  }

  // Merge keeps every tuple. A tuple's delta grows by the other side's rank
  // slack at its value; on equal values `this` tuples sort first. Error
  // bounds add, and chained merges in a fixed left-to-right orientation are
  // associative at query level.
  friend QuantileSketch sketch_merge(const QuantileSketch& a, const QuantileSketch& b) {
    QuantileSketch out(a.eps_, 2);
    out.capacity_ = std::max(a.capacity_, b.capacity_);
    out.n_ = a.n_ + b.n_;
    out.entries_.reserve(a.entries_.size() + b.entries_.size());

    const Bounds ba(a.entries_), bb(b.entries_);
    std::size_t ia = 0, ib = 0;
    while (ia < a.entries_.size() || ib < b.entries_.size()) {
      const bool take_a =
          ib == b.entries_.size() ||
          (ia < a.entries_.size() && a.entries_[ia].value <= b.entries_[ib].value);
      if (take_a) {
        Entry e = a.entries_[ia++];
        // left-side tuple: other values strictly below / at-or-above
        e.delta += bb.slack(e.value, /*left_side=*/true);
        out.entries_.push_back(e);
      } else {
        Entry e = b.entries_[ib++];
        // right-side tuple: other values at-or-below / strictly above
        e.delta += ba.slack(e.value, /*left_side=*/false);
        out.entries_.push_back(e);
      }
    }
    return out;
  }

 private:
  // Cumulative bounds of one input, used to compute merge slack by value.
  struct Bounds {
    explicit Bounds(const std::vector<Entry>& es) : entries(es) {
      rmin.reserve(es.size());
      std::uint64_t acc = 0;
      for (const Entry& e : es) {
        acc += e.g;
        rmin.push_back(acc);
      }
      total = acc;
    }

    // Max-minus-min count of values this side can place before value v.
    std::uint64_t slack(double v, bool left_side) const {
      // lb: rank mass known to lie before v.
      std::size_t lo = 0, hi = entries.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const bool below = left_side ? entries[mid].value < v : entries[mid].value <= v;
        if (below) lo = mid + 1; else hi = mid;
      }
      // entries[0..lo) lie before v, entries[lo] is the successor.
      const std::uint64_t lb = lo > 0 ? rmin[lo - 1] : 0;
      const std::uint64_t ub =
          lo < entries.size() ? rmin[lo] - entries[lo].g + entries[lo].delta : total;
      return ub - lb;
    }

    const std::vector<Entry>& entries;
    std::vector<std::uint64_t> rmin;
    std::uint64_t total = 0;
  };

  std::size_t compress_block() const {
    return static_cast<std::size_t>(std::ceil(1.0 / (2.0 * eps_)));
  }

  void compress() {
    const std::uint64_t band = static_cast<std::uint64_t>(2.0 * eps_ * static_cast<double>(n_));
    if (entries_.size() < 3 || band < 2) return;
    std::vector<Entry> kept;
    kept.reserve(entries_.size());
    kept.push_back(entries_.front());  // exact minimum stays
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      Entry e = entries_[i];
      // fold the previous kept tuple into e when the pair stays inside the band;
      // the first and last tuples are never folded away
      while (kept.size() > 1 && kept.back().g + e.g + e.delta <= band) {
        e.g += kept.back().g;
        kept.pop_back();
      }
      kept.push_back(e);
    }
    entries_ = std::move(kept);
  }

  double eps_;
  int capacity_ = 0;
  std::uint64_t n_ = 0;
  std::vector<Entry> entries_;
};

// ---- Split proposal and binning ----

// Quantile values at ranks ceil(k * n / q), deduplicated. Strictly
// increasing, at most q values, and the last one is the exact stream max.
inline std::vector<double> propose_splits(const QuantileSketch& s, int q) {
  if (q < 1) throw ConfigError("split count must be >= 1");
  if (s.count() == 0) throw DataError("propose splits: empty sketch");
  std::vector<double> out;
  out.reserve(q);
  for (int k = 1; k <= q; ++k) {
    const std::uint64_t r = ceil_div(static_cast<std::uint64_t>(k) * s.count(),
                                     static_cast<std::uint64_t>(q));
    const double v = s.query_rank(r);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

// Smallest k with value <= splits[k]; values above every split fall into the
// last bin. A value equal to a split boundary belongs to the lower bin.
inline int bin_of(const std::vector<double>& splits, double value) {
  if (splits.empty()) throw DataError("bin_of: no splits");
  std::size_t lo = 0, hi = splits.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (splits[mid] < value) lo = mid + 1; else hi = mid;
  }
  if (lo == splits.size()) return static_cast<int>(splits.size()) - 1;
  return static_cast<int>(lo);
}

}  // namespace quadboost
