#pragma once

#include <cstdint>

#include "quadboost/common.hpp"

namespace quadboost {

// Closed-form memory and communication costs of histogram aggregation for
// both partitioning families, per tree.
struct CostParams {
  std::uint64_t instances = 0;  // N
  std::uint64_t features = 0;   // D
  std::uint64_t bins = 0;       // q
  std::uint64_t classes = 0;    // C
  std::uint64_t layers = 0;     // L, leaves appear at depth L - 1
  std::uint64_t workers = 0;    // W
};

struct CostReport {
  std::uint64_t size_hist = 0;       // bytes of one node's histograms
  std::uint64_t mem_horizontal = 0;  // peak live histogram bytes per worker
  std::uint64_t comm_horizontal = 0; // aggregation traffic per tree
  double mem_vertical = 0.0;         // horizontal peak split across workers
  std::uint64_t comm_vertical = 0;   // placement bitmap traffic per tree
};

// size_hist = 2 * D * q * C * 8. Horizontal peak memory holds one full
// layer of direct histograms, 2^(L-2) nodes; aggregation moves W copies of
// every built layer, 2^(L-1) - 1 nodes. Vertical splits the feature space,
// dividing memory by W, and ships one N-bit placement bitmap per worker per
// layer instead of histograms.
inline CostReport analytic_costs(const CostParams& p) {
  if (p.layers < 2) throw ConfigError("cost model needs at least two layers");
  if (p.workers < 1) throw ConfigError("cost model needs at least one worker");
  CostReport r;
  r.size_hist = checked_mul(checked_mul(2 * p.features, p.bins), p.classes * 8);
  r.mem_horizontal = checked_mul(r.size_hist, std::uint64_t{1} << (p.layers - 2));
  r.comm_horizontal =
      checked_mul(checked_mul(r.size_hist, p.workers), (std::uint64_t{1} << (p.layers - 1)) - 1);
  r.mem_vertical = static_cast<double>(r.mem_horizontal) / static_cast<double>(p.workers);
  r.comm_vertical = checked_mul(ceil_div(p.instances, 8) * p.workers, p.layers);
  return r;
}

inline double as_gib(double bytes) { return bytes / (1024.0 * 1024.0 * 1024.0); }
inline double as_gib(std::uint64_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0 * 1024.0); }

}  // namespace quadboost
