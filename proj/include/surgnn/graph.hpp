#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"
#include "surgnn/dataio.hpp"
#include "surgnn/features.hpp"

namespace surgnn {

struct NodeId {
  std::string instrument_id;
  std::string phase_name;

  auto operator<=>(const NodeId&) const = default;
};

/// One clip as a graph: node features X (n x F) and a symmetric, non-negative, zero-diagonal
/// weighted adjacency A (n x n).
struct SurgicalGraph {
  std::string clip_id;
  std::vector<NodeId> node_ids;
  Matrix X;
  Matrix A;
  std::map<std::string, int> labels;

  std::size_t size() const { return node_ids.size(); }
};

struct EdgePolicy {
  double temporal_weight = 1.0;
  double cooccurrence_weight = 1.0;
};

inline void check_adjacency(const Matrix& A) {
  if (A.rows != A.cols) throw ValidationError("adjacency must be square");
  for (std::size_t i = 0; i < A.rows; ++i) {
    if (A(i, i) != 0.0) throw ValidationError("adjacency diagonal must be zero");
    for (std::size_t j = 0; j < A.cols; ++j) {
      if (!std::isfinite(A(i, j))) throw ValidationError("adjacency has non-finite entry");
      if (A(i, j) < 0.0) throw ValidationError("adjacency has negative entry");
      if (A(i, j) != A(j, i)) throw ValidationError("adjacency is not symmetric");
    }
  }
}

inline void check_graph(const SurgicalGraph& g) {
  if (g.size() == 0) throw ValidationError("graph '" + g.clip_id + "' has no nodes");
  if (g.X.rows != g.size() || g.A.rows != g.size())
    throw ValidationError("graph '" + g.clip_id + "': node count does not match X/A");
  check_adjacency(g.A);
  if (!all_finite(g.X.data)) throw ValidationError("graph '" + g.clip_id + "': non-finite features");
}

/// Builds the graph of one clip. phase_order fixes which phases are consecutive; when empty it is
/// the order of first appearance in `nodes`. Nodes are ordered by phase, then instrument id.
inline SurgicalGraph build_graph(const std::vector<NodeFeatureVector>& nodes, const EdgePolicy& policy,
                                 std::vector<std::string> phase_order = {}) {
  if (nodes.empty()) throw ValidationError("build_graph: no nodes");
  if (policy.temporal_weight < 0.0 || policy.cooccurrence_weight < 0.0 ||
      (policy.temporal_weight == 0.0 && policy.cooccurrence_weight == 0.0))
    throw ValidationError("build_graph: edge policy needs a positive weight");
  for (const auto& n : nodes) {
    if (n.clip_id != nodes.front().clip_id) throw ValidationError("build_graph: nodes span several clips");
    if (std::find(phase_order.begin(), phase_order.end(), n.phase_name) == phase_order.end())
      phase_order.push_back(n.phase_name);
  }
  auto phase_index = [&](const std::string& p) {
    return static_cast<std::size_t>(std::find(phase_order.begin(), phase_order.end(), p) -
                                    phase_order.begin());
  };
  std::vector<const NodeFeatureVector*> sorted;
  for (const auto& n : nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [&](const auto* a, const auto* b) {
    const auto pa = phase_index(a->phase_name), pb = phase_index(b->phase_name);
    if (pa != pb) return pa < pb;
    return a->instrument_id < b->instrument_id;
  });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->phase_name == sorted[i - 1]->phase_name &&
        sorted[i]->instrument_id == sorted[i - 1]->instrument_id)
      throw ValidationError("build_graph: duplicate node key (" + sorted[i]->instrument_id + ", " +
                            sorted[i]->phase_name + ")");

  SurgicalGraph g;
  g.clip_id = nodes.front().clip_id;
  const std::size_t n = sorted.size();
  const std::size_t f = sorted.front()->features.size();
  g.X = Matrix(n, f);
  g.A = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    g.node_ids.push_back({sorted[i]->instrument_id, sorted[i]->phase_name});
    if (sorted[i]->features.size() != f) throw ValidationError("build_graph: ragged feature vectors");
    std::copy(sorted[i]->features.begin(), sorted[i]->features.end(), g.X.row(i).begin());
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = g.node_ids[i];
      const auto& b = g.node_ids[j];
      const auto pa = phase_index(a.phase_name), pb = phase_index(b.phase_name);
      const bool temporal = a.instrument_id == b.instrument_id && (pa + 1 == pb || pb + 1 == pa);
      const bool cooccur = a.phase_name == b.phase_name && a.instrument_id != b.instrument_id;
      if (temporal && cooccur) throw Error("build_graph: edge rules overlap");
      const double w = (temporal ? policy.temporal_weight : 0.0) +
                       (cooccur ? policy.cooccurrence_weight : 0.0);
      g.A(i, j) = g.A(j, i) = w;
    }
  return g;
}

/// Row sums with the row entries added in sorted order, so the result does not depend on the
/// node ordering.
inline std::vector<double> degrees(const Matrix& A) {
  std::vector<double> d(A.rows);
  std::vector<double> row(A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    std::copy(A.row(i).begin(), A.row(i).end(), row.begin());
    std::sort(row.begin(), row.end());
    d[i] = std::accumulate(row.begin(), row.end(), 0.0);
  }
  return d;
}

/// L = I - D^-1/2 A D^-1/2. Isolated nodes get an all-zero row and column.
inline Matrix normalized_laplacian(const Matrix& A) {
  check_adjacency(A);
  const auto d = degrees(A);
  std::vector<double> inv_sqrt(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) inv_sqrt[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  Matrix L(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) {
      if (i == j)
        L(i, j) = d[i] > 0.0 ? 1.0 : 0.0;
      else
        L(i, j) = -A(i, j) * inv_sqrt[i] * inv_sqrt[j];
    }
  return L;
}

/// Unnormalized L = D - A, kept for reproduction experiments.
inline Matrix combinatorial_laplacian(const Matrix& A) {
  check_adjacency(A);
  const auto d = degrees(A);
  Matrix L(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) L(i, j) = i == j ? d[i] : -A(i, j);
  return L;
}

enum class LaplacianKind { kNormalized, kCombinatorial };

inline Matrix laplacian(const Matrix& A, LaplacianKind kind = LaplacianKind::kNormalized) {
  return kind == LaplacianKind::kNormalized ? normalized_laplacian(A) : combinatorial_laplacian(A);
}

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k pairs with values[k]
};

struct EigenOptions {
  double tol = 1e-8;              // reconstruction tolerance, relative Frobenius
  double off_diagonal_tol = 1e-12;
  int max_sweeps = 100;
  std::size_t max_n = 512;
};

/// Flips v so its largest-magnitude entry is positive. Entries within 1e-12 of the maximum
/// magnitude count as ties; the lowest index wins.
inline void fix_sign(std::span<double> v) {
  double max_abs = 0.0;
  for (double x : v) max_abs = std::max(max_abs, std::abs(x));
  for (double& x : v) {
    if (std::abs(x) >= max_abs - 1e-12) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Eigenvalues ascending, eigenvectors
/// orthonormal and sign-fixed; near-equal eigenvalues are ordered by their vectors'
/// lexicographic order.
inline EigenDecomposition symmetric_eigendecomposition(const Matrix& M, const EigenOptions& opt = {}) {
  if (M.rows != M.cols) throw Error("symmetric_eigendecomposition: matrix not square");
  const std::size_t n = M.rows;
  if (n > opt.max_n)
    throw Error("symmetric_eigendecomposition: n = " + std::to_string(n) + " exceeds max " +
                std::to_string(opt.max_n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(M(i, j) - M(j, i)) > 1e-12)
        throw Error("symmetric_eigendecomposition: matrix not symmetric");
  if (!all_finite(M.data)) throw Error("symmetric_eigendecomposition: non-finite entry");

  Matrix a = M;
  Matrix v = Matrix::identity(n);
  const double norm = frobenius_norm(M);
  bool converged = false;
  for (int sweep = 0; sweep <= opt.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= opt.off_diagonal_tol * norm) {
      converged = true;
      break;
    }
    if (sweep == opt.max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150)
          t = 0.5 / theta;
        else
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = a(p, k) = c * akp - s * akq;
            a(k, q) = a(q, k) = s * akp + c * akq;
          }
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  if (!converged)
    throw Error("symmetric_eigendecomposition: no convergence after " +
                std::to_string(opt.max_sweeps) + " sweeps");

  struct Pair {
    double value;
    std::vector<double> vec;
  };
  std::vector<Pair> pairs(n);
  for (std::size_t k = 0; k < n; ++k) {
    pairs[k].value = a(k, k);
    pairs[k].vec = v.column(k);
    fix_sign(pairs[k].vec);
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& x, const Pair& y) { return x.value < y.value; });
  const double tie_tol = 1e-10 * std::max(1.0, norm);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && pairs[end].value - pairs[end - 1].value <= tie_tol) ++end;
    std::sort(pairs.begin() + static_cast<long>(start), pairs.begin() + static_cast<long>(end),
              [](const Pair& x, const Pair& y) { return x.vec < y.vec; });
    start = end;
  }

  EigenDecomposition out;
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values.push_back(pairs[k].value);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = pairs[k].vec[i];
  }

  Matrix recon(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += out.vectors(i, k) * out.values[k] * out.vectors(j, k);
      recon(i, j) = M(i, j) - s;
    }
  if (frobenius_norm(recon) > opt.tol * std::max(norm, 1e-300) && frobenius_norm(recon) > 0.0)
    throw Error("symmetric_eigendecomposition: reconstruction error above tolerance");
  return out;
}

struct LaplacianDecomposition {
  Matrix L;
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

inline LaplacianDecomposition decompose_laplacian(const Matrix& A,
                                                  LaplacianKind kind = LaplacianKind::kNormalized) {
  LaplacianDecomposition d;
  d.L = laplacian(A, kind);
  auto e = symmetric_eigendecomposition(d.L);
  d.eigenvalues = std::move(e.values);
  d.eigenvectors = std::move(e.vectors);
  return d;
}

/// Eigenvectors of the k smallest eigenvalues as an n x k matrix. With clamp, k > n becomes n.
inline Matrix spectral_embedding(const LaplacianDecomposition& d, long k, bool clamp = true) {
  if (k < 1) throw ValidationError("spectral_embedding: k must be >= 1");
  const std::size_t n = d.eigenvectors.rows;
  std::size_t kk = static_cast<std::size_t>(k);
  if (kk > n) {
    if (!clamp) throw ValidationError("spectral_embedding: k exceeds node count");
    kk = n;
  }
  Matrix H(n, kk);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < kk; ++j) H(i, j) = d.eigenvectors(i, j);
  return H;
}

/// Spectral positional features of width exactly k: the spectral embedding, zero-padded on the
/// right when the graph has fewer than k nodes.
inline Matrix positional_features(const Matrix& A, std::size_t k) {
  Matrix out(A.rows, k);
  if (k == 0) return out;
  const auto H = spectral_embedding(decompose_laplacian(A), static_cast<long>(k));
  for (std::size_t i = 0; i < H.rows; ++i)
    for (std::size_t j = 0; j < H.cols; ++j) out(i, j) = H(i, j);
  return out;
}

/// Number of connected components (isolated nodes count as components).
inline std::size_t connected_components(const Matrix& A) {
  const std::size_t n = A.rows;
  std::vector<int> seen(n, 0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w)
        if (A(u, w) > 0.0 && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Graph JSON
// ---------------------------------------------------------------------------

inline nlohmann::json graph_to_json(const SurgicalGraph& g) {
  nlohmann::json j;
  j["clip_id"] = g.clip_id;
  j["node_ids"] = nlohmann::json::array();
  for (const auto& id : g.node_ids) j["node_ids"].push_back({id.instrument_id, id.phase_name});
  j["X"] = nlohmann::json::array();
  for (std::size_t i = 0; i < g.X.rows; ++i)
    j["X"].push_back(std::vector<double>(g.X.row(i).begin(), g.X.row(i).end()));
  j["A"] = nlohmann::json::array();
  for (std::size_t i = 0; i < g.A.rows; ++i)
    for (std::size_t k = i + 1; k < g.A.cols; ++k)
      if (g.A(i, k) != 0.0) j["A"].push_back({i, k, g.A(i, k)});
  j["labels"] = nlohmann::json::object();
  for (const auto& [k, v] : g.labels) j["labels"][k] = v;
  return j;
}

inline SurgicalGraph graph_from_json(const nlohmann::json& j) {
  SurgicalGraph g;
  try {
    g.clip_id = j.at("clip_id").get<std::string>();
    for (const auto& id : j.at("node_ids"))
      g.node_ids.push_back({id.at(0).get<std::string>(), id.at(1).get<std::string>()});
    const std::size_t n = g.node_ids.size();
    const auto& X = j.at("X");
    if (X.size() != n) throw ValidationError("graph JSON: X row count differs from node count");
    const std::size_t f = n == 0 ? 0 : X.at(0).size();
    g.X = Matrix(n, f);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = X.at(i).get<std::vector<double>>();
      if (row.size() != f) throw ValidationError("graph JSON: ragged X");
      std::copy(row.begin(), row.end(), g.X.row(i).begin());
    }
    g.A = Matrix(n, n);
    for (const auto& e : j.at("A")) {
      const auto a = e.at(0).get<std::size_t>();
      const auto b = e.at(1).get<std::size_t>();
      const double w = e.at(2).get<double>();
      if (a >= n || b >= n || a == b) throw ValidationError("graph JSON: bad edge index");
      g.A(a, b) = g.A(b, a) = w;
    }
    if (j.contains("labels"))
      for (auto it = j["labels"].begin(); it != j["labels"].end(); ++it) g.labels[it.key()] = it->get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph JSON: ") + e.what());
  }
  check_graph(g);
  return g;
}

}  // namespace surgnn
