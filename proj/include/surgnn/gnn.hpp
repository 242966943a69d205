#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"
#include "surgnn/graph.hpp"

namespace surgnn {

inline constexpr std::size_t kHiddenDim = 64;
inline constexpr std::size_t kEmbeddingDim = 32;
inline constexpr int kCheckpointSchemaVersion = 1;

/// Single-head additive attention layer: W is out x in, a_src/a_dst have length out.
struct GatLayerParams {
  Matrix W;
  std::vector<double> a_src;
  std::vector<double> a_dst;
  double leaky_slope = 0.2;

  std::size_t in_dim() const { return W.cols; }
  std::size_t out_dim() const { return W.rows; }
};

struct LinearHead {
  Matrix W;  // K x 32
  std::vector<double> b;
};

struct GnnParams {
  GatLayerParams layer1;
  GatLayerParams layer2;
  LinearHead head;
};

struct NamedBlock {
  std::string name;
  std::span<double> values;
};

/// Every trainable parameter block, in a fixed order.
inline std::vector<NamedBlock> parameter_blocks(GnnParams& p) {
  return {{"layer1.W", p.layer1.W.data},   {"layer1.a_src", p.layer1.a_src},
          {"layer1.a_dst", p.layer1.a_dst}, {"layer2.W", p.layer2.W.data},
          {"layer2.a_src", p.layer2.a_src}, {"layer2.a_dst", p.layer2.a_dst},
          {"head.W", p.head.W.data},        {"head.b", p.head.b}};
}

inline bool is_encoder_block(const std::string& name) { return name.rfind("layer", 0) == 0; }

/// Zero-valued parameters of the same shape.
inline GnnParams zeros_like(const GnnParams& p) {
  GnnParams z = p;
  for (auto& b : parameter_blocks(z)) std::fill(b.values.begin(), b.values.end(), 0.0);
  return z;
}

struct GnnModel {
  GnnParams params;
  std::size_t num_node_features = 0;  // raw features before positional columns
  std::size_t spectral_k = 4;
  bool positional = true;
  double decoder_scale = 1.0;
  std::string feature_schema_id = kFeatureSchemaId;
  std::string category;  // empty for a pure encoder
  int ordinal_min = 1;

  std::size_t num_classes() const { return params.head.W.rows; }
  std::size_t input_dim() const { return num_node_features + (positional ? spectral_k : 0); }
};

struct ModelOptions {
  std::size_t num_node_features = 14;
  std::size_t num_classes = 5;
  std::size_t spectral_k = 4;
  bool positional = true;
  double decoder_scale = 1.0;
};

/// Glorot-uniform weights, zero bias, from a seeded engine.
inline GnnModel init_model(const ModelOptions& opt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> v(fan_out * fan_in);
    for (double& x : v) x = u(rng);
    return v;
  };
  GnnModel m;
  m.num_node_features = opt.num_node_features;
  m.spectral_k = opt.spectral_k;
  m.positional = opt.positional;
  m.decoder_scale = opt.decoder_scale;
  const std::size_t in = m.input_dim();
  auto make_layer = [&](std::size_t fan_in, std::size_t fan_out) {
    GatLayerParams l;
    l.W = Matrix(fan_out, fan_in);
    l.W.data = glorot(fan_out, fan_in);
    l.a_src = glorot(fan_out, 1);
    l.a_dst = glorot(fan_out, 1);
    return l;
  };
  m.params.layer1 = make_layer(in, kHiddenDim);
  m.params.layer2 = make_layer(kHiddenDim, kEmbeddingDim);
  m.params.head.W = Matrix(opt.num_classes, kEmbeddingDim);
  m.params.head.W.data = glorot(opt.num_classes, kEmbeddingDim);
  m.params.head.b.assign(opt.num_classes, 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Graph attention layer
// ---------------------------------------------------------------------------

struct GatCache {
  Matrix X;   // layer input
  Matrix P;   // X W^T
  std::vector<double> s, t;
  // Closed neighborhood per node: (j, log w_ij, alpha_ij); self first.
  std::vector<std::vector<std::pair<std::size_t, double>>> nbr;
  std::vector<std::vector<double>> alpha;
  Matrix M;   // pre-activation
  Matrix H;   // ELU(M)
};

namespace detail {

inline double leaky(double u, double slope) { return u > 0.0 ? u : slope * u; }
inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

}  // namespace detail

inline GatCache gat_forward_cached(const Matrix& X, const Matrix& A, const GatLayerParams& p) {
  const std::size_t n = X.rows;
  if (A.rows != n || A.cols != n) throw ValidationError("gat_layer: adjacency does not match node count");
  if (X.cols != p.in_dim() || p.a_src.size() != p.out_dim() || p.a_dst.size() != p.out_dim())
    throw ValidationError("gat_layer: dimension mismatch (input " + std::to_string(X.cols) +
                          ", layer " + std::to_string(p.in_dim()) + ")");
  if (!all_finite(X.data)) throw ValidationError("gat_layer: non-finite input");
  GatCache c;
  c.X = X;
  c.P = matmul(X, p.W.transposed());
  const std::size_t out = p.out_dim();
  c.s.resize(n);
  c.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.s[i] = dot(p.a_src, c.P.row(i));
    c.t[i] = dot(p.a_dst, c.P.row(i));
  }
  c.nbr.resize(n);
  c.alpha.resize(n);
  c.M = Matrix(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    auto& nb = c.nbr[i];
    nb.emplace_back(i, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && A(i, j) > 0.0) nb.emplace_back(j, std::log(A(i, j)));
    std::vector<double> e(nb.size());
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nb.size(); ++k) {
      e[k] = detail::leaky(c.s[i] + c.t[nb[k].first], p.leaky_slope) + nb[k].second;
      emax = std::max(emax, e[k]);
    }
    double z = 0.0;
    for (double& x : e) {
      x = std::exp(x - emax);
      z += x;
    }
    for (double& x : e) x /= z;
    c.alpha[i] = e;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const auto pj = c.P.row(nb[k].first);
      for (std::size_t o = 0; o < out; ++o) c.M(i, o) += e[k] * pj[o];
    }
  }
  c.H = c.M;
  for (double& x : c.H.data) x = detail::elu(x);
  return c;
}

/// h_i = ELU(sum_j alpha_ij W x_j) over the closed neighborhood of i.
inline Matrix gat_layer_forward(const Matrix& X, const Matrix& A, const GatLayerParams& p) {
  return gat_forward_cached(X, A, p).H;
}

/// Attention coefficients as a dense n x n matrix (zero outside each closed neighborhood).
inline Matrix attention_matrix(const Matrix& X, const Matrix& A, const GatLayerParams& p) {
  const auto c = gat_forward_cached(X, A, p);
  Matrix out(X.rows, X.rows);
  for (std::size_t i = 0; i < X.rows; ++i)
    for (std::size_t k = 0; k < c.nbr[i].size(); ++k) out(i, c.nbr[i][k].first) = c.alpha[i][k];
  return out;
}

/// Accumulates parameter gradients into `grad` and returns dLoss/dX.
inline Matrix gat_backward(const GatCache& c, const GatLayerParams& p, const Matrix& dH,
                           GatLayerParams& grad) {
  const std::size_t n = c.X.rows;
  const std::size_t out = p.out_dim();
  Matrix dM(n, out);
  for (std::size_t k = 0; k < dM.data.size(); ++k)
    dM.data[k] = dH.data[k] * (c.M.data[k] > 0.0 ? 1.0 : std::exp(c.M.data[k]));
  Matrix dP(n, out);
  std::vector<double> ds(n, 0.0), dt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = c.nbr[i];
    const auto& al = c.alpha[i];
    std::vector<double> dalpha(nb.size());
    double weighted = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const std::size_t j = nb[k].first;
      dalpha[k] = dot(dM.row(i), c.P.row(j));
      weighted += al[k] * dalpha[k];
      for (std::size_t o = 0; o < out; ++o) dP(j, o) += al[k] * dM(i, o);
    }
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const std::size_t j = nb[k].first;
      const double de = al[k] * (dalpha[k] - weighted);
      const double u = c.s[i] + c.t[j];
      const double du = de * (u > 0.0 ? 1.0 : p.leaky_slope);
      ds[i] += du;
      dt[j] += du;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      dP(i, o) += ds[i] * p.a_src[o] + dt[i] * p.a_dst[o];
      grad.a_src[o] += ds[i] * c.P(i, o);
      grad.a_dst[o] += dt[i] * c.P(i, o);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dP(i, o);
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < c.X.cols; ++k) grad.W(o, k) += g * c.X(i, k);
    }
  return matmul(dP, p.W);
}

// ---------------------------------------------------------------------------
// Pooling, head, decoder, losses
// ---------------------------------------------------------------------------

inline std::vector<double> global_mean_pool(const Matrix& H) {
  if (H.rows == 0) throw ValidationError("global_mean_pool: empty graph");
  std::vector<double> out(H.cols, 0.0);
  for (std::size_t i = 0; i < H.rows; ++i)
    for (std::size_t j = 0; j < H.cols; ++j) out[j] += H(i, j);
  for (double& v : out) v /= static_cast<double>(H.rows);
  return out;
}

inline std::vector<double> classify(std::span<const double> pooled, const LinearHead& head) {
  if (pooled.size() != head.W.cols) throw ValidationError("classify: pooled width mismatch");
  std::vector<double> logits(head.W.rows);
  for (std::size_t k = 0; k < head.W.rows; ++k) logits[k] = dot(head.W.row(k), pooled) + head.b[k];
  return logits;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += (p[k] = std::exp(logits[k] - m));
  for (double& v : p) v /= z;
  return p;
}

inline double cross_entropy_loss(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size())
    throw ValidationError("cross_entropy_loss: label " + std::to_string(label) + " out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return -(logits[label] - m - std::log(z));
}

/// Edge probabilities logistic(scale * z_i . z_j) off the diagonal, zero on it.
inline Matrix decode_adjacency(const Matrix& Z, double decoder_scale) {
  if (!all_finite(Z.data)) throw ValidationError("decode_laplacian: non-finite embeddings");
  const std::size_t n = Z.rows;
  Matrix A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      A(i, j) = A(j, i) = logistic(decoder_scale * dot(Z.row(i), Z.row(j)));
  return A;
}

inline Matrix decode_laplacian(const Matrix& Z, double decoder_scale) {
  if (Z.rows == 0) throw ValidationError("decode_laplacian: empty embeddings");
  return normalized_laplacian(decode_adjacency(Z, decoder_scale));
}

/// ||L_original - L_reconstructed||_F^2 / n.
inline double spectral_loss(const Matrix& L_original, const Matrix& L_reconstructed) {
  if (!L_original.same_shape(L_reconstructed) || L_original.rows != L_original.cols)
    throw ValidationError("spectral_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < L_original.data.size(); ++k) {
    const double d = L_original.data[k] - L_reconstructed.data[k];
    s += d * d;
  }
  return s / static_cast<double>(L_original.rows);
}

/// Gradient of the spectral loss with respect to Z through the decoder.
inline Matrix decoder_backward(const Matrix& Z, double decoder_scale, const Matrix& L_original,
                               const Matrix& L_reconstructed) {
  const std::size_t n = Z.rows;
  Matrix dZ(n, Z.cols);
  if (n < 2) return dZ;
  Matrix G(n, n);
  for (std::size_t k = 0; k < G.data.size(); ++k)
    G.data[k] = -2.0 * (L_original.data[k] - L_reconstructed.data[k]) / static_cast<double>(n);
  const Matrix Ahat = decode_adjacency(Z, decoder_scale);
  const auto d = degrees(Ahat);
  std::vector<double> r(n), dd(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) r[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dr = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dr -= (G(i, j) + G(j, i)) * Ahat(i, j) * r[j];
    dd[i] = dr * -0.5 * r[i] * r[i] * r[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = -(G(i, j) + G(j, i)) * r[i] * r[j] + dd[i] + dd[j];
      const double a = Ahat(i, j);
      const double dS = da * decoder_scale * a * (1.0 - a);
      for (std::size_t k = 0; k < Z.cols; ++k) {
        dZ(i, k) += dS * Z(j, k);
        dZ(j, k) += dS * Z(i, k);
      }
    }
  return dZ;
}

// ---------------------------------------------------------------------------
// Whole model
// ---------------------------------------------------------------------------

/// Node features plus spectral positional columns, as consumed by layer 1.
inline Matrix model_input(const GnnModel& m, const Matrix& X, const Matrix& A) {
  if (X.cols != m.num_node_features)
    throw ValidationError("model expects " + std::to_string(m.num_node_features) +
                          " node features, graph has " + std::to_string(X.cols));
  if (!m.positional) return X;
  const Matrix pos = positional_features(A, m.spectral_k);
  Matrix out(X.rows, m.input_dim());
  for (std::size_t i = 0; i < X.rows; ++i) {
    std::copy(X.row(i).begin(), X.row(i).end(), out.row(i).begin());
    std::copy(pos.row(i).begin(), pos.row(i).end(), out.row(i).begin() + static_cast<long>(X.cols));
  }
  return out;
}

/// Post-layer-2 node embeddings (n x 32).
inline Matrix encode(const GnnModel& m, const Matrix& input, const Matrix& A) {
  return gat_layer_forward(gat_layer_forward(input, A, m.params.layer1), A, m.params.layer2);
}

/// What forward_backward is asked to fit. A label selects cross-entropy; L_original selects the
/// spectral loss; both together give the joint loss CE + spectral_weight * spectral.
struct LossTarget {
  std::optional<std::size_t> label;
  std::optional<Matrix> L_original;
  double spectral_weight = 1.0;
};

struct ForwardResult {
  double loss = 0.0;
  GnnParams grads;
  Matrix Z;
  std::vector<double> pooled;
  std::vector<double> logits;
};

/// Loss and exact gradients for one graph. `input` already carries positional columns.
inline ForwardResult forward_backward(const GnnModel& m, const Matrix& input, const Matrix& A,
                                      const LossTarget& target) {
  if (!target.label && !target.L_original) throw Error("forward_backward: empty target");
  const auto c1 = gat_forward_cached(input, A, m.params.layer1);
  const auto c2 = gat_forward_cached(c1.H, A, m.params.layer2);
  ForwardResult r;
  r.grads = zeros_like(m.params);
  r.Z = c2.H;
  r.pooled = global_mean_pool(r.Z);
  const std::size_t n = r.Z.rows;
  Matrix dZ(n, r.Z.cols);

  if (target.label) {
    r.logits = classify(r.pooled, m.params.head);
    r.loss += cross_entropy_loss(r.logits, *target.label);
    auto delta = softmax(r.logits);
    delta[*target.label] -= 1.0;
    auto& gh = r.grads.head;
    for (std::size_t k = 0; k < delta.size(); ++k) {
      gh.b[k] += delta[k];
      for (std::size_t j = 0; j < r.pooled.size(); ++j) gh.W(k, j) += delta[k] * r.pooled[j];
    }
    for (std::size_t j = 0; j < r.Z.cols; ++j) {
      double g = 0.0;
      for (std::size_t k = 0; k < delta.size(); ++k) g += m.params.head.W(k, j) * delta[k];
      g /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) dZ(i, j) += g;
    }
  }
  if (target.L_original) {
    const double w = target.label ? target.spectral_weight : 1.0;
    const Matrix Lrec = decode_laplacian(r.Z, m.decoder_scale);
    r.loss += w * spectral_loss(*target.L_original, Lrec);
    const Matrix g = decoder_backward(r.Z, m.decoder_scale, *target.L_original, Lrec);
    for (std::size_t k = 0; k < dZ.data.size(); ++k) dZ.data[k] += w * g.data[k];
  }
  if (!std::isfinite(r.loss)) throw Error("forward_backward: non-finite loss");
  const Matrix dH1 = gat_backward(c2, m.params.layer2, dZ, r.grads.layer2);
  gat_backward(c1, m.params.layer1, dH1, r.grads.layer1);
  return r;
}

/// Class index with the largest logit (lowest index on ties).
inline std::size_t predict_class(const GnnModel& m, const SurgicalGraph& g) {
  const Matrix Z = encode(m, model_input(m, g.X, g.A), g.A);
  const auto logits = classify(global_mean_pool(Z), m.params.head);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

// ---------------------------------------------------------------------------
// Checkpoint JSON
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw ValidationError("checkpoint: matrix size mismatch");
  return m;
}

inline nlohmann::json layer_json(const GatLayerParams& l) {
  return {{"W", matrix_json(l.W)}, {"a_src", l.a_src}, {"a_dst", l.a_dst}, {"leaky_slope", l.leaky_slope}};
}

inline GatLayerParams layer_from(const nlohmann::json& j) {
  GatLayerParams l;
  l.W = matrix_from(j.at("W"));
  l.a_src = j.at("a_src").get<std::vector<double>>();
  l.a_dst = j.at("a_dst").get<std::vector<double>>();
  l.leaky_slope = j.at("leaky_slope").get<double>();
  if (l.a_src.size() != l.W.rows || l.a_dst.size() != l.W.rows)
    throw ValidationError("checkpoint: attention vector size mismatch");
  return l;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const GnnModel& m) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["feature_schema_id"] = m.feature_schema_id;
  j["num_node_features"] = m.num_node_features;
  j["spectral_k"] = m.spectral_k;
  j["positional"] = m.positional;
  j["decoder_scale"] = m.decoder_scale;
  j["category"] = m.category;
  j["ordinal_min"] = m.ordinal_min;
  j["num_classes"] = m.num_classes();
  j["layer_shapes"] = {{m.params.layer1.W.rows, m.params.layer1.W.cols},
                       {m.params.layer2.W.rows, m.params.layer2.W.cols},
                       {m.params.head.W.rows, m.params.head.W.cols}};
  j["layer1"] = detail::layer_json(m.params.layer1);
  j["layer2"] = detail::layer_json(m.params.layer2);
  j["head"] = {{"W", detail::matrix_json(m.params.head.W)}, {"b", m.params.head.b}};
  return j;
}

inline GnnModel checkpoint_from_json(const nlohmann::json& j) {
  GnnModel m;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw ValidationError("checkpoint schema_version " + std::to_string(version) + " unsupported");
    m.feature_schema_id = j.at("feature_schema_id").get<std::string>();
    m.num_node_features = j.at("num_node_features").get<std::size_t>();
    m.spectral_k = j.at("spectral_k").get<std::size_t>();
    m.positional = j.at("positional").get<bool>();
    m.decoder_scale = j.at("decoder_scale").get<double>();
    m.category = j.at("category").get<std::string>();
    m.ordinal_min = j.at("ordinal_min").get<int>();
    m.params.layer1 = detail::layer_from(j.at("layer1"));
    m.params.layer2 = detail::layer_from(j.at("layer2"));
    m.params.head.W = detail::matrix_from(j.at("head").at("W"));
    m.params.head.b = j.at("head").at("b").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  if (m.params.layer1.in_dim() != m.input_dim() || m.params.layer2.in_dim() != m.params.layer1.out_dim() ||
      m.params.layer2.out_dim() != kEmbeddingDim || m.params.head.W.cols != kEmbeddingDim ||
      m.params.head.b.size() != m.params.head.W.rows)
    throw ValidationError("checkpoint: inconsistent layer shapes");
  return m;
}

inline void save_checkpoint(const GnnModel& m, const std::string& path) {
  write_text_file(path, checkpoint_to_json(m).dump(2) + "\n");
}

inline GnnModel load_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

}  // namespace surgnn
