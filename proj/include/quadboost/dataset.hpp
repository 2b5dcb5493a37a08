#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

// Raw instances in CSR form: row i owns pairs [row_ptr[i], row_ptr[i+1]) of
// (feat_ids, values). Feature ids are 0-based and strictly increasing within
// a row; absent features are missing values.
struct SparseDataset {
  int num_features = 0;
  std::vector<double> labels;
  std::vector<std::uint64_t> row_ptr{0};
  std::vector<int> feat_ids;
  std::vector<double> values;

  std::uint64_t rows() const { return labels.size(); }
  std::uint64_t nnz() const { return feat_ids.size(); }

  void push_row(const SparseVector& x, double label) {
    x.validate();
    for (const auto& [fid, val] : x.pairs) {
      if (fid >= num_features) num_features = fid + 1;
      feat_ids.push_back(fid);
      values.push_back(val);
    }
    labels.push_back(label);
    row_ptr.push_back(feat_ids.size());
  }

  SparseVector row(std::uint64_t i) const {
    SparseVector x;
    for (std::uint64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      x.pairs.emplace_back(feat_ids[k], values[k]);
    return x;
  }

  void validate() const {
    if (row_ptr.size() != labels.size() + 1 || row_ptr.back() != feat_ids.size() ||
        feat_ids.size() != values.size())
      throw DataError("dataset: csr shape mismatch");
    for (std::uint64_t i = 0; i < rows(); ++i) {
      int prev = -1;
      for (std::uint64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        if (feat_ids[k] <= prev || feat_ids[k] >= num_features)
          throw DataError("dataset: bad feature id in row " + std::to_string(i));
        if (!std::isfinite(values[k])) throw DataError("dataset: non-finite value");
        prev = feat_ids[k];
      }
      if (!std::isfinite(labels[i])) throw DataError("dataset: non-finite label");
    }
  }

  // Class count for classification losses: labels must be non-negative
  // integers; the count is max label + 1 (at least 2).
  int infer_classes() const {
    double m = 1.0;
    for (double y : labels) {
      if (y < 0.0 || y != std::floor(y))
        throw DataError("classification labels must be non-negative integers");
      if (y > m) m = y;
    }
    if (m > 100000.0) throw DataError("label range implausibly large");
    return static_cast<int>(m) + 1;
  }
};

// Contiguous shard of rows assigned to one worker: [lo, hi).
struct ShardRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  std::uint64_t size() const { return hi - lo; }
};

inline ShardRange shard_range(std::uint64_t n, int workers, int w) {
  if (workers < 1 || w < 0 || w >= workers) throw ConfigError("bad shard index");
  const std::uint64_t lo = n * static_cast<std::uint64_t>(w) / workers;
  const std::uint64_t hi = n * (static_cast<std::uint64_t>(w) + 1) / workers;
  return {lo, hi};
}

}  // namespace quadboost
