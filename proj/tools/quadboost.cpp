// Single-binary laboratory for distributed GBDT data-management studies:
// generate synthetic data, train under one of four partitioning/storage
// quadrants on a simulated cluster, benchmark the vertical repartition, and
// evaluate the analytic cost model.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quadboost/bench.hpp"
#include "quadboost/cluster.hpp"
#include "quadboost/costmodel.hpp"
#include "quadboost/io.hpp"
#include "quadboost/model_json.hpp"
#include "quadboost/synth.hpp"

namespace {

using namespace quadboost;

std::string human_bytes(double b) {
  char buf[64];
  if (b >= 1024.0 * 1024.0 * 1024.0)
    std::snprintf(buf, sizeof buf, "%.2f GiB", b / (1024.0 * 1024.0 * 1024.0));
  else if (b >= 1024.0 * 1024.0)
    std::snprintf(buf, sizeof buf, "%.2f MiB", b / (1024.0 * 1024.0));
  else if (b >= 1024.0)
    std::snprintf(buf, sizeof buf, "%.2f KiB", b / 1024.0);
  else
    std::snprintf(buf, sizeof buf, "%.0f B", b);
  return buf;
}

struct CostArgs {
  CostParams p;
  bool as_json = false;
};

int run_cost(const CostArgs& a) {
  const CostReport r = analytic_costs(a.p);
  const double gib = 1024.0 * 1024.0 * 1024.0;
  if (a.as_json) {
    nlohmann::json j{{"size_hist_bytes", r.size_hist},
                     {"size_hist_mib", r.size_hist / (1024.0 * 1024.0)},
                     {"mem_horizontal_bytes", r.mem_horizontal},
                     {"mem_horizontal_gib", r.mem_horizontal / gib},
                     {"comm_horizontal_bytes", r.comm_horizontal},
                     {"comm_horizontal_gib", r.comm_horizontal / gib},
                     {"mem_vertical_bytes", r.mem_vertical},
                     {"mem_vertical_gib", r.mem_vertical / gib},
                     {"comm_vertical_bytes", r.comm_vertical}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
  }
  std::printf("size_hist:       %" PRIu64 " B  (%s)\n", r.size_hist,
              human_bytes(static_cast<double>(r.size_hist)).c_str());
  std::printf("mem_horizontal:  %" PRIu64 " B  (%s)\n", r.mem_horizontal,
              human_bytes(static_cast<double>(r.mem_horizontal)).c_str());
  std::printf("comm_horizontal: %" PRIu64 " B  (%s)\n", r.comm_horizontal,
              human_bytes(static_cast<double>(r.comm_horizontal)).c_str());
  std::printf("mem_vertical:    %.0f B  (%s)\n", r.mem_vertical,
              human_bytes(r.mem_vertical).c_str());
  std::printf("comm_vertical:   %" PRIu64 " B  (%s)\n", r.comm_vertical,
              human_bytes(static_cast<double>(r.comm_vertical)).c_str());
  return 0;
}

struct GenArgs {
  SynthConfig cfg;
  std::string loss = "logistic";
  std::string out;
};

int run_gen(GenArgs& a) {
  a.cfg.loss = parse_loss(a.loss);
  const SparseDataset data = synth_dataset(a.cfg);
  save_libsvm(a.out, data);
  std::printf("wrote %" PRIu64 " instances, %d features, %" PRIu64 " values to %s\n",
              data.rows(), data.num_features, data.nnz(), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string quadrant = "qd4";
  std::string loss = "logistic";
  std::string costing = "blockify";
  ClusterConfig cfg;
  std::uint64_t mem_cap = 0;  // 0 = unlimited
  std::string model_out, ledger_out, metrics_out;
  bool quiet = false;
};

int run_train(TrainArgs& a) {
  a.cfg.quadrant = parse_quadrant(a.quadrant);
  a.cfg.hyper.loss = parse_loss(a.loss);
  a.cfg.costing = a.costing == "naive"      ? RepartitionCosting::kNaive
                  : a.costing == "compress" ? RepartitionCosting::kCompress
                                            : RepartitionCosting::kBlockify;
  a.cfg.mem_cap_bytes = a.mem_cap == 0 ? UINT64_MAX : a.mem_cap;

  const SparseDataset data = load_libsvm(a.data);
  Cluster cluster(a.cfg, data);
  const TrainResult res = cluster.train();

  if (!a.quiet) {
    for (const TreeMetrics& m : res.per_tree) {
      std::printf("tree %3u  loss %.6f", m.round, m.train_loss);
      if (a.cfg.hyper.loss != Loss::kSquare) std::printf("  acc %.4f", m.train_accuracy);
      std::printf("  bytes %" PRIu64 " (hist %" PRIu64 " best %" PRIu64 " place %" PRIu64
                  ")  splits %d  layers %d\n",
                  m.bytes_total, m.bytes_histogram, m.bytes_local_best, m.bytes_placement,
                  m.splits, m.splitting_layers);
    }
  }
  std::uint64_t total = 0;
  for (const TreeMetrics& m : res.per_tree) total += m.bytes_total;
  std::printf("quadrant %s  workers %d  trees %zu\n", quadrant_name(a.cfg.quadrant).c_str(),
              a.cfg.workers, res.per_tree.size());
  std::printf("transform bytes: %" PRIu64 "  (%s)\n", res.transform_bytes,
              human_bytes(static_cast<double>(res.transform_bytes)).c_str());
  std::printf("training bytes:  %" PRIu64 "  (%s)\n", total,
              human_bytes(static_cast<double>(total)).c_str());
  std::printf("peak hist bytes: %" PRIu64 "  (%s)\n", res.peak_hist_bytes,
              human_bytes(static_cast<double>(res.peak_hist_bytes)).c_str());

  if (!a.model_out.empty()) save_model(a.model_out, res.model);
  if (!a.ledger_out.empty()) {
    std::ofstream out(a.ledger_out);
    if (!out) throw DataError("cannot open '" + a.ledger_out + "' for writing");
    out << cluster.ledger().to_csv();
  }
  if (!a.metrics_out.empty()) {
    nlohmann::json per = nlohmann::json::array();
    for (const TreeMetrics& m : res.per_tree)
      per.push_back({{"round", m.round},
                     {"loss", m.train_loss},
                     {"accuracy", m.train_accuracy},
                     {"bytes_total", m.bytes_total},
                     {"bytes_histogram", m.bytes_histogram},
                     {"bytes_local_best", m.bytes_local_best},
                     {"bytes_placement", m.bytes_placement},
                     {"splits", m.splits},
                     {"splitting_layers", m.splitting_layers}});
    nlohmann::json j{{"per_tree", std::move(per)},
                     {"transform_bytes", res.transform_bytes},
                     {"training_bytes", total},
                     {"peak_hist_bytes", res.peak_hist_bytes}};
    std::ofstream out(a.metrics_out);
    if (!out) throw DataError("cannot open '" + a.metrics_out + "' for writing");
    out << j.dump(2) << '\n';
  }
  return 0;
}

struct BenchArgs {
  std::string data;
  SynthConfig synth;
  int workers = 8;
  int bins = 20;
  double sketch_eps = 0.0;
  std::uint64_t rows_per_block = 0;
};

int run_bench(BenchArgs& a) {
  const SparseDataset data = a.data.empty() ? synth_dataset(a.synth) : load_libsvm(a.data);
  const double eps = a.sketch_eps > 0.0 ? a.sketch_eps : 1.0 / (2.0 * a.bins);
  const std::vector<BenchRow> rows =
      bench_transform(data, a.workers, a.bins, eps, a.rows_per_block);
  const double naive = static_cast<double>(rows.front().bytes);
  std::printf("%-10s %14s %10s %9s\n", "mode", "bytes", "messages", "vs-naive");
  for (const BenchRow& r : rows)
    std::printf("%-10s %14" PRIu64 " %10" PRIu64 " %9.3f\n", costing_name(r.mode), r.bytes,
                r.messages, naive > 0.0 ? static_cast<double>(r.bytes) / naive : 0.0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed GBDT data-management laboratory"};
  app.require_subcommand(1);

  CostArgs cost;
  CLI::App* cost_cmd = app.add_subcommand("cost", "evaluate the analytic cost model");
  cost_cmd->add_option("-n,--instances", cost.p.instances, "instance count")->required();
  cost_cmd->add_option("-d,--features", cost.p.features, "feature count")->required();
  cost_cmd->add_option("-q,--bins", cost.p.bins, "histogram bins per feature")
      ->default_val(20);
  cost_cmd->add_option("-c,--classes", cost.p.classes, "class count")->default_val(1);
  cost_cmd->add_option("-l,--layers", cost.p.layers, "tree layers")->default_val(8);
  cost_cmd->add_option("-w,--workers", cost.p.workers, "worker count")->default_val(8);
  cost_cmd->add_flag("--json", cost.as_json, "print a JSON object");

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("-o,--out", gen.out, "output path (libsvm text)")->required();
  gen_cmd->add_option("-n,--instances", gen.cfg.instances, "instance count")->required();
  gen_cmd->add_option("-d,--features", gen.cfg.features, "feature count")->required();
  gen_cmd->add_option("-c,--classes", gen.cfg.classes, "classes (softmax)")->default_val(2);
  gen_cmd->add_option("--density", gen.cfg.density, "present-feature fraction per instance")
      ->default_val(0.2);
  gen_cmd->add_option("--informative", gen.cfg.informative, "signal-feature fraction")
      ->default_val(0.2);
  gen_cmd->add_option("--loss", gen.loss, "label shape: square|logistic|softmax")
      ->check(CLI::IsMember({"square", "logistic", "softmax"}));
  gen_cmd->add_option("--seed", gen.cfg.seed, "rng seed")->default_val(1);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train on a simulated cluster");
  train_cmd->add_option("--data", train.data, "training data (libsvm text)")->required();
  train_cmd->add_option("--quadrant", train.quadrant, "qd1|qd2|qd3|qd4")
      ->check(CLI::IsMember({"qd1", "qd2", "qd3", "qd4", "1", "2", "3", "4"}));
  train_cmd->add_option("-w,--workers", train.cfg.workers, "worker count")->default_val(4);
  train_cmd->add_option("-t,--trees", train.cfg.hyper.trees, "boosting rounds")
      ->default_val(100);
  train_cmd->add_option("-l,--layers", train.cfg.hyper.layers, "tree layers")
      ->default_val(8);
  train_cmd->add_option("-q,--bins", train.cfg.hyper.bins, "histogram bins")
      ->default_val(20);
  train_cmd->add_option("--eta", train.cfg.hyper.eta, "shrinkage")->default_val(0.1);
  train_cmd->add_option("--lambda", train.cfg.hyper.lambda_, "l2 regularization")
      ->default_val(1.0);
  train_cmd->add_option("--gamma", train.cfg.hyper.gamma_, "split gain penalty")
      ->default_val(0.0);
  train_cmd->add_option("--loss", train.loss, "square|logistic|softmax")
      ->check(CLI::IsMember({"square", "logistic", "softmax"}));
  train_cmd->add_flag("!--no-subtraction", train.cfg.subtraction,
                      "disable the histogram subtraction trick");
  train_cmd->add_option("--sketch-eps", train.cfg.sketch_eps,
                        "quantile sketch accuracy (0 = 1/(2*bins))");
  train_cmd->add_option("--mem-cap", train.mem_cap,
                        "per-worker live histogram byte cap (0 = unlimited)");
  train_cmd->add_option("--rows-per-block", train.cfg.rows_per_block,
                        "repartition block row granularity (0 = one per shard)");
  train_cmd->add_option("--merge-target", train.cfg.merge_target,
                        "merge shipped blocks down to this many (0 = keep)");
  train_cmd->add_option("--costing", train.costing, "repartition accounting")
      ->check(CLI::IsMember({"naive", "compress", "blockify"}));
  train_cmd->add_option("--model-out", train.model_out, "write the model as JSON");
  train_cmd->add_option("--ledger-out", train.ledger_out, "write the message ledger CSV");
  train_cmd->add_option("--metrics-out", train.metrics_out, "write per-tree metrics JSON");
  train_cmd->add_flag("--quiet", train.quiet, "suppress per-tree lines");

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "benchmark the vertical repartition encodings");
  bench_cmd->add_option("--data", bench.data, "dataset (libsvm text); omit to synthesize");
  bench_cmd->add_option("-n,--instances", bench.synth.instances, "synthetic instances")
      ->default_val(10000);
  bench_cmd->add_option("-d,--features", bench.synth.features, "synthetic features")
      ->default_val(47000);
  bench_cmd->add_option("--density", bench.synth.density, "synthetic density")
      ->default_val(0.001);
  bench_cmd->add_option("--seed", bench.synth.seed, "rng seed")->default_val(1);
  bench_cmd->add_option("-w,--workers", bench.workers, "worker count")->default_val(8);
  bench_cmd->add_option("-q,--bins", bench.bins, "histogram bins")->default_val(20);
  bench_cmd->add_option("--sketch-eps", bench.sketch_eps, "sketch accuracy (0 = default)");
  bench_cmd->add_option("--rows-per-block", bench.rows_per_block,
                        "block row granularity (0 = one per shard)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*cost_cmd) return run_cost(cost);
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*bench_cmd) return run_bench(bench);
  } catch (const OomGuardError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
