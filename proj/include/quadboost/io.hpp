#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "quadboost/common.hpp"
#include "quadboost/dataset.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

// Text rows "label fid:value ...", feature ids 1-based on disk, 0-based in
// memory. Values print at full round-trip precision.
inline void save_libsvm(const std::string& path, const SparseDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  char buf[64];
  for (std::uint64_t i = 0; i < data.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data.labels[i]);
    out << buf;
    for (std::uint64_t k = data.row_ptr[i]; k < data.row_ptr[i + 1]; ++k) {
      std::snprintf(buf, sizeof buf, " %d:%.17g", data.feat_ids[k] + 1, data.values[k]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline SparseDataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  SparseDataset data;
  std::string line;
  std::uint64_t lineno = 0;
  int max_fid = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const char* p = line.c_str();
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0' || *p == '#') continue;

    char* end = nullptr;
    const double label = std::strtod(p, &end);
    if (end == p) throw DataError(path + ":" + std::to_string(lineno) + ": bad label");
    p = end;

    SparseVector x;
    while (true) {
      while (*p == ' ' || *p == '\t') ++p;
      if (*p == '\0' || *p == '#') break;
      const long fid1 = std::strtol(p, &end, 10);
      if (end == p || *end != ':' || fid1 < 1 || fid1 > INT32_MAX)
        throw DataError(path + ":" + std::to_string(lineno) + ": bad feature id");
      p = end + 1;
      const double val = std::strtod(p, &end);
      if (end == p) throw DataError(path + ":" + std::to_string(lineno) + ": bad value");
      p = end;
      x.pairs.emplace_back(static_cast<int>(fid1 - 1), val);
    }
    try {
      x.validate();
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!x.pairs.empty()) max_fid = std::max(max_fid, x.pairs.back().first);
    data.push_row(x, label);
  }
  data.num_features = max_fid + 1;
  data.validate();
  return data;
}

}  // namespace quadboost
