#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quadboost/common.hpp"

namespace quadboost {

// Communication phases of one boosting round. Transform-time phases (sketch,
// splits, repartition, labels) occur once per training run, the rest per tree.
enum class Phase {
  kSketch,
  kSplits,
  kRepartition,
  kLabels,
  kHistogram,
  kLocalBest,
  kPlacement,
};

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kSketch: return "sketch";
    case Phase::kSplits: return "splits";
    case Phase::kRepartition: return "repartition";
    case Phase::kLabels: return "labels";
    case Phase::kHistogram: return "histogram";
    case Phase::kLocalBest: return "local_best";
    case Phase::kPlacement: return "placement";
  }
  return "?";
}

inline constexpr int kMaster = -1;

// Append-only record of every simulated message. Broadcasts are charged as
// one record per receiver; nothing is ever merged or elided.
class MessageLedger {
 public:
  struct Record {
    std::uint32_t round;
    Phase phase;
    int src;  // worker id, or kMaster
    int dst;
    std::uint64_t bytes;
  };

  void log(std::uint32_t round, Phase phase, int src, int dst, std::uint64_t bytes) {
    if (src == dst) throw DataError("ledger: message to self");
    records_.push_back({round, phase, src, dst, bytes});
    total_ += bytes;
    phase_total_[phase] += bytes;
  }

  const std::vector<Record>& records() const { return records_; }
  std::uint64_t total_bytes() const { return total_; }

  std::uint64_t phase_bytes(Phase p) const {
    const auto it = phase_total_.find(p);
    return it == phase_total_.end() ? 0 : it->second;
  }

  std::uint64_t round_phase_bytes(std::uint32_t round, Phase p) const {
    std::uint64_t s = 0;
    for (const Record& r : records_)
      if (r.round == round && r.phase == p) s += r.bytes;
    return s;
  }

  std::uint64_t message_count() const { return records_.size(); }

  std::string to_csv() const {
    std::string out = "round,phase,src,dst,bytes\n";
    for (const Record& r : records_) {
      out += std::to_string(r.round);
      out += ',';
      out += phase_name(r.phase);
      out += ',';
      out += std::to_string(r.src);
      out += ',';
      out += std::to_string(r.dst);
      out += ',';
      out += std::to_string(r.bytes);
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<Record> records_;
  std::uint64_t total_ = 0;
  std::map<Phase, std::uint64_t> phase_total_;
};

}  // namespace quadboost
