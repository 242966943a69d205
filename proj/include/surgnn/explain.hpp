#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgnn/core.hpp"
#include "surgnn/gnn.hpp"
#include "surgnn/graph.hpp"
#include "surgnn/graphset.hpp"

namespace surgnn {

inline constexpr const char* kGraphRowId = "GRAPH";

struct EmbeddingRow {
  std::string clip_id;
  std::string node_id;  // "instrument/phase", or GRAPH for the pooled row
  std::vector<double> vector;
  std::optional<int> label;
};

using EmbeddingTable = std::vector<EmbeddingRow>;

/// Node embeddings after layer 2 for every graph, followed per graph by the pooled row.
/// `label_category` selects which label (if any) is attached to each row.
inline EmbeddingTable export_embeddings(const GnnModel& model, const GraphSet& gs,
                                        const std::string& label_category = "") {
  if (model.feature_schema_id != gs.schema_id || model.num_node_features != gs.feature_names.size())
    throw ValidationError("checkpoint feature schema '" + model.feature_schema_id +
                          "' does not match dataset schema '" + gs.schema_id + "'");
  EmbeddingTable table;
  for (const auto& e : gs.entries) {
    const auto& g = e.graph;
    const Matrix Z = encode(model, model_input(model, g.X, g.A), g.A);
    std::optional<int> label;
    if (!label_category.empty())
      if (auto it = g.labels.find(label_category); it != g.labels.end()) label = it->second;
    for (std::size_t i = 0; i < g.size(); ++i)
      table.push_back({g.clip_id, g.node_ids[i].instrument_id + "/" + g.node_ids[i].phase_name,
                       std::vector<double>(Z.row(i).begin(), Z.row(i).end()), label});
    table.push_back({g.clip_id, kGraphRowId, global_mean_pool(Z), label});
  }
  return table;
}

inline std::string format_embeddings(const EmbeddingTable& t) {
  const std::size_t dim = t.empty() ? kEmbeddingDim : t.front().vector.size();
  std::string out = "clip_id,node_id";
  for (std::size_t k = 0; k < dim; ++k) out += ",e" + std::to_string(k);
  out += ",label\n";
  for (const auto& r : t) {
    out += r.clip_id + "," + r.node_id;
    for (double v : r.vector) out += "," + detail::fmt_double(v);
    out += "," + (r.label ? std::to_string(*r.label) : std::string()) + "\n";
  }
  return out;
}

inline EmbeddingTable parse_embeddings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty embedding file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "clip_id" || header[1] != "node_id" || header.back() != "label")
    throw ValidationError("bad embedding header");
  EmbeddingTable t;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = "embeddings row " + std::to_string(row);
    if (f.size() != header.size()) throw ValidationError(where + ": wrong field count");
    EmbeddingRow r{f[0], f[1], {}, std::nullopt};
    for (std::size_t k = 2; k + 1 < f.size(); ++k) r.vector.push_back(detail::parse_double(f[k], where));
    if (!f.back().empty()) r.label = static_cast<int>(detail::parse_long(f.back(), where));
    t.push_back(std::move(r));
  }
  return t;
}

struct Projection {
  struct Point {
    std::string clip_id;
    std::string node_id;
    std::vector<double> coords;
    std::optional<int> label;
  };
  std::vector<Point> points;
  std::vector<double> explained_variance_ratio;  // every component, descending
  Matrix components;                              // dim x D loadings, sign-fixed
  std::vector<double> mean;
};

/// Principal component projection: center, population covariance, eigendecomposition, keep the
/// top `dim` components with the largest loading of each made positive.
inline Projection pca_project(const EmbeddingTable& table, std::size_t dim = 2) {
  if (table.size() < 2) throw ValidationError("pca_project: need at least 2 rows");
  const std::size_t D = table.front().vector.size();
  if (dim < 1 || dim > D) throw ValidationError("pca_project: dim must be in [1, " + std::to_string(D) + "]");
  for (const auto& r : table)
    if (r.vector.size() != D) throw ValidationError("pca_project: ragged rows");
  const double n = static_cast<double>(table.size());
  Projection p;
  p.mean.assign(D, 0.0);
  for (const auto& r : table)
    for (std::size_t k = 0; k < D; ++k) p.mean[k] += r.vector[k];
  for (double& m : p.mean) m /= n;
  Matrix cov(D, D);
  for (const auto& r : table)
    for (std::size_t a = 0; a < D; ++a) {
      const double da = r.vector[a] - p.mean[a];
      for (std::size_t b = a; b < D; ++b) cov(a, b) += da * (r.vector[b] - p.mean[b]);
    }
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = a; b < D; ++b) cov(b, a) = (cov(a, b) /= n);

  const auto eig = symmetric_eigendecomposition(cov);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  p.components = Matrix(dim, D);
  for (std::size_t c = 0; c < D; ++c) {
    const std::size_t col = D - 1 - c;  // descending variance
    p.explained_variance_ratio.push_back(total > 0.0 ? std::max(eig.values[col], 0.0) / total : 0.0);
    if (c < dim)
      for (std::size_t k = 0; k < D; ++k) p.components(c, k) = eig.vectors(k, col);
  }
  for (const auto& r : table) {
    Projection::Point pt{r.clip_id, r.node_id, std::vector<double>(dim, 0.0), r.label};
    for (std::size_t c = 0; c < dim; ++c)
      for (std::size_t k = 0; k < D; ++k) pt.coords[c] += (r.vector[k] - p.mean[k]) * p.components(c, k);
    p.points.push_back(std::move(pt));
  }
  return p;
}

/// Projector hook: any callable mapping a table to a projection can replace PCA in the CLI.
using Projector = std::function<Projection(const EmbeddingTable&, std::size_t)>;

inline std::string format_projection(const Projection& p) {
  std::string out = "clip_id,node_id";
  const std::size_t dim = p.points.empty() ? 2 : p.points.front().coords.size();
  for (std::size_t c = 0; c < dim; ++c) out += ",pc" + std::to_string(c + 1);
  out += ",label\n";
  for (const auto& pt : p.points) {
    out += pt.clip_id + "," + pt.node_id;
    for (double v : pt.coords) out += "," + detail::fmt_double(v);
    out += "," + (pt.label ? std::to_string(*pt.label) : std::string()) + "\n";
  }
  return out;
}

/// k nearest graph-level rows to the query clip by Euclidean distance, excluding the query;
/// ties go to the smaller clip id.
inline std::vector<std::pair<std::string, double>> nearest_exemplars(const std::string& query,
                                                                     const EmbeddingTable& table, std::size_t k) {
  if (k < 1) throw ValidationError("nearest_exemplars: k must be >= 1");
  const EmbeddingRow* q = nullptr;
  for (const auto& r : table)
    if (r.clip_id == query && r.node_id == kGraphRowId) q = &r;
  if (!q) throw ValidationError("nearest_exemplars: unknown clip '" + query + "'");
  std::vector<std::pair<double, std::string>> d;
  for (const auto& r : table) {
    if (r.node_id != kGraphRowId || r.clip_id == query) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < r.vector.size(); ++i) s += (r.vector[i] - q->vector[i]) * (r.vector[i] - q->vector[i]);
    d.emplace_back(std::sqrt(s), r.clip_id);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(k, d.size()); ++i) out.emplace_back(d[i].second, d[i].first);
  return out;
}

}  // namespace surgnn
