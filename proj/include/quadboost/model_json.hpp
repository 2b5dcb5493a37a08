#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "quadboost/common.hpp"
#include "quadboost/types.hpp"

namespace quadboost {

inline nlohmann::json model_to_json(const ModelSet& model) {
  nlohmann::json j;
  j["meta"] = {{"bins", model.bins},
               {"classes", model.classes},
               {"eta", model.eta},
               {"trees", model.trees.size()}};
  j["splits"] = model.splits.per_feature;
  nlohmann::json trees = nlohmann::json::array();
  for (const TreeModel& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (int nid = 1; nid < static_cast<int>(tree.nodes.size()); ++nid) {
      const TreeNode& nd = tree.nodes[nid];
      if (nd.kind == TreeNode::Kind::kSplit) {
        nodes.push_back({{"id", nid},
                         {"feature", nd.feature},
                         {"bin", nd.bin},
                         {"default_left", nd.default_left}});
      } else if (nd.kind == TreeNode::Kind::kLeaf) {
        nodes.push_back({{"id", nid}, {"weights", nd.weights}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j;
}

inline ModelSet model_from_json(const nlohmann::json& j) {
  ModelSet model;
  model.bins = j.at("meta").at("bins").get<int>();
  model.classes = j.at("meta").at("classes").get<int>();
  model.eta = j.at("meta").at("eta").get<double>();
  model.splits.per_feature = j.at("splits").get<std::vector<std::vector<double>>>();
  model.splits.validate();
  for (const auto& jt : j.at("trees")) {
    TreeModel tree;
    for (const auto& jn : jt.at("nodes")) {
      TreeNode& nd = tree.ensure(jn.at("id").get<int>());
      if (jn.contains("weights")) {
        nd.kind = TreeNode::Kind::kLeaf;
        nd.weights = jn.at("weights").get<std::vector<double>>();
      } else {
        nd.kind = TreeNode::Kind::kSplit;
        nd.feature = jn.at("feature").get<int>();
        nd.bin = jn.at("bin").get<int>();
        nd.default_left = jn.at("default_left").get<bool>();
      }
    }
    tree.validate();
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline void save_model(const std::string& path, const ModelSet& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline ModelSet load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace quadboost
