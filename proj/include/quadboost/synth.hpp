#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/dataset.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

// Deterministic PRNG with a fixed cross-platform sequence (splitmix64), so
// generated datasets are reproducible from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller; the paired value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Floyd's subset sampling: k distinct values from [0, n), returned sorted.
inline std::vector<int> sample_distinct(Rng& rng, int n, int k) {
  if (k > n) throw ConfigError("cannot sample more features than exist");
  std::unordered_set<int> seen;
  std::vector<int> out;
  out.reserve(k);
  for (int j = n - k; j < n; ++j) {
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (seen.insert(t).second) out.push_back(t);
    else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Sparse synthetic data with a planted linear signal. An informative subset
// of features carries one dense standard-normal weight vector per output
// column; every instance holds standard-normal values on a random distinct
// feature subset. Labels come from the planted margins:
//   square    y = margin + 0.1 * noise      (continuous)
//   logistic  y = [margin > 0]
//   softmax   y = argmax_c margin_c         (first class wins ties)
struct SynthConfig {
  std::uint64_t instances = 1000;
  int features = 100;
  int classes = 2;           // label arity for softmax; ignored otherwise
  double density = 0.2;      // fraction of features present per instance
  double informative = 0.2;  // fraction of features carrying signal
  Loss loss = Loss::kLogistic;
  std::uint64_t seed = 1;

  void validate() const {
    if (instances < 1) throw ConfigError("synth: instances must be >= 1");
    if (features < 1) throw ConfigError("synth: features must be >= 1");
    if (density <= 0.0 || density > 1.0) throw ConfigError("synth: density must be in (0, 1]");
    if (informative <= 0.0 || informative > 1.0)
      throw ConfigError("synth: informative must be in (0, 1]");
    if (loss == Loss::kSoftmax && classes < 2)
      throw ConfigError("synth: softmax needs at least two classes");
  }
};

inline SparseDataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int d = cfg.features;
  const int cols = cfg.loss == Loss::kSoftmax ? cfg.classes : 1;
  const int nnz = std::max<int>(1, static_cast<int>(std::llround(cfg.density * d)));
  const int signal = std::max<int>(1, static_cast<int>(std::llround(cfg.informative * d)));

  const std::vector<int> informative = sample_distinct(rng, d, signal);
  std::vector<double> weights(static_cast<std::size_t>(d) * cols, 0.0);
  for (const int f : informative)
    for (int c = 0; c < cols; ++c)
      weights[static_cast<std::size_t>(f) * cols + c] = rng.normal();

  SparseDataset out;
  out.num_features = d;
  std::vector<double> margin(cols);
  for (std::uint64_t i = 0; i < cfg.instances; ++i) {
    const std::vector<int> fids = sample_distinct(rng, d, nnz);
    SparseVector x;
    x.pairs.reserve(fids.size());
    std::fill(margin.begin(), margin.end(), 0.0);
    for (const int f : fids) {
      const double v = rng.normal();
      x.pairs.emplace_back(f, v);
      for (int c = 0; c < cols; ++c)
        margin[c] += v * weights[static_cast<std::size_t>(f) * cols + c];
    }
    double y = 0.0;
    switch (cfg.loss) {
      case Loss::kSquare: y = margin[0] + 0.1 * rng.normal(); break;
      case Loss::kLogistic: y = margin[0] > 0.0 ? 1.0 : 0.0; break;
      case Loss::kSoftmax: {
        int best = 0;
        for (int c = 1; c < cols; ++c)
          if (margin[c] > margin[best]) best = c;
        y = best;
        break;
      }
    }
    out.push_row(x, y);
  }
  out.num_features = d;
  return out;
}

}  // namespace quadboost
