#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"
#include "surgnn/dataio.hpp"
#include "surgnn/features.hpp"
#include "surgnn/graph.hpp"

namespace surgnn {

/// A directory of graph JSON files plus an index carrying the feature schema, label metadata,
/// the split, and the scaler the features were standardized with.
struct GraphSet {
  struct Entry {
    SurgicalGraph graph;
    Split split = Split::kTrain;
    bool synthetic = false;
  };

  std::string schema_id = kFeatureSchemaId;
  std::vector<std::string> feature_names = default_feature_names();
  std::vector<std::string> categories;
  OrdinalScale ordinal_scale;
  Mode mode = Mode::k2D;
  std::optional<FeatureScaler> scaler;
  std::vector<Entry> entries;

  std::vector<const SurgicalGraph*> graphs(Split s) const {
    std::vector<const SurgicalGraph*> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(&e.graph);
    return out;
  }
};

inline void save_graphset(const GraphSet& gs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["schema_id"] = gs.schema_id;
  index["feature_names"] = gs.feature_names;
  index["categories"] = gs.categories;
  index["ordinal_scale"] = {{"min", gs.ordinal_scale.min}, {"max", gs.ordinal_scale.max}};
  index["mode"] = to_string(gs.mode);
  if (gs.scaler) index["scaler"] = scaler_to_json(*gs.scaler);
  index["graphs"] = nlohmann::json::array();
  for (const auto& e : gs.entries) {
    const std::string file = e.graph.clip_id + ".json";
    index["graphs"].push_back({{"clip_id", e.graph.clip_id},
                               {"file", file},
                               {"split", to_string(e.split)},
                               {"synthetic", e.synthetic}});
    write_text_file((dir / file).string(), graph_to_json(e.graph).dump(2) + "\n");
  }
  write_text_file((dir / "index.json").string(), index.dump(2) + "\n");
}

inline GraphSet load_graphset(const std::filesystem::path& dir_in) {
  std::filesystem::path dir = dir_in;
  std::filesystem::path index_path = dir / "index.json";
  if (!std::filesystem::is_directory(dir)) {
    index_path = dir;
    dir = dir.parent_path();
  }
  if (!std::filesystem::exists(index_path))
    throw ValidationError("missing graph index: " + index_path.string());
  GraphSet gs;
  try {
    const auto j = nlohmann::json::parse(read_text_file(index_path.string()));
    gs.schema_id = j.at("schema_id").get<std::string>();
    gs.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    gs.categories = j.at("categories").get<std::vector<std::string>>();
    gs.ordinal_scale.min = j.at("ordinal_scale").at("min").get<int>();
    gs.ordinal_scale.max = j.at("ordinal_scale").at("max").get<int>();
    gs.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("scaler")) gs.scaler = scaler_from_json(j["scaler"]);
    for (const auto& e : j.at("graphs")) {
      const auto file = dir / e.at("file").get<std::string>();
      if (!std::filesystem::exists(file)) throw ValidationError("missing graph file: " + file.string());
      GraphSet::Entry entry;
      entry.graph = graph_from_json(nlohmann::json::parse(read_text_file(file.string())));
      entry.split = parse_split(e.at("split").get<std::string>());
      entry.synthetic = e.value("synthetic", false);
      if (entry.graph.X.cols != gs.feature_names.size())
        throw ValidationError("graph '" + entry.graph.clip_id + "' feature width differs from index");
      gs.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(index_path.string() + ": " + e.what());
  }
  return gs;
}

/// Builds standardized graphs for every clip; the scaler is fitted on the training split only.
inline GraphSet build_graphset(const DatasetManifest& m, const std::vector<NodeFeatureVector>& table,
                               const EdgePolicy& policy = {}) {
  GraphSet gs;
  gs.categories = m.categories;
  gs.ordinal_scale = m.ordinal_scale;
  if (!m.clips.empty()) gs.mode = m.clips.front().mode;
  if (!table.empty()) gs.feature_names = table.front().feature_names;

  std::vector<NodeFeatureVector> train;
  for (const auto& v : table) {
    auto it = m.split.find(v.clip_id);
    if (it == m.split.end()) throw ValidationError("feature row for unknown clip '" + v.clip_id + "'");
    if (it->second == Split::kTrain) train.push_back(v);
  }
  if (train.size() < 2) throw ValidationError("need at least 2 training feature vectors to fit the scaler");
  gs.scaler = fit_scaler(train);

  for (const auto& clip : m.clips) {
    std::vector<NodeFeatureVector> nodes;
    for (const auto& v : table)
      if (v.clip_id == clip.clip_id) nodes.push_back(apply_scaler(*gs.scaler, v));
    if (nodes.empty()) throw ValidationError("clip '" + clip.clip_id + "' has no feature rows");
    std::vector<std::string> phase_order;
    for (const auto& p : clip.phases) phase_order.push_back(p.phase_name);
    GraphSet::Entry e;
    e.graph = build_graph(nodes, policy, phase_order);
    e.graph.labels = clip.labels;
    e.split = m.split.at(clip.clip_id);
    gs.entries.push_back(std::move(e));
  }
  return gs;
}

}  // namespace surgnn
