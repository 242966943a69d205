#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"
#include "surgnn/gnn.hpp"
#include "surgnn/graph.hpp"
#include "surgnn/graphset.hpp"

namespace surgnn {

struct TrainConfig {
  double lr0 = 0.0025;
  std::vector<int> decay_epochs = {200, 400};
  double decay_factor = 0.1;
  std::size_t batch_size = 32;
  int epochs = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double mask_fraction = 0.15;
  double edge_mask_fraction = 0.0;  // SSL edge masking, off by default
  std::uint64_t seed = 0;
  std::size_t spectral_k = 4;
  double joint_spectral_weight = 0.0;  // supervised + spectral joint loss, off by default
  bool freeze_encoder = false;

  void validate() const {
    if (!(lr0 > 0.0)) throw ValidationError("config: lr0 must be > 0");
    if (!(mask_fraction >= 0.0 && mask_fraction < 1.0))
      throw ValidationError("config: mask_fraction must be in [0, 1)");
    if (!(edge_mask_fraction >= 0.0 && edge_mask_fraction < 1.0))
      throw ValidationError("config: edge_mask_fraction must be in [0, 1)");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (epochs < 0) throw ValidationError("config: epochs must be >= 0");
  }
};

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"decay_epochs", c.decay_epochs},
          {"decay_factor", c.decay_factor},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"mask_fraction", c.mask_fraction},
          {"edge_mask_fraction", c.edge_mask_fraction},
          {"seed", c.seed},
          {"spectral_k", c.spectral_k},
          {"joint_spectral_weight", c.joint_spectral_weight},
          {"freeze_encoder", c.freeze_encoder}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  const nlohmann::json defaults = config_to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key())) throw ValidationError("config: unknown key '" + it.key() + "'");
  try {
    c.lr0 = j.value("lr0", c.lr0);
    c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
    c.edge_mask_fraction = j.value("edge_mask_fraction", c.edge_mask_fraction);
    c.seed = j.value("seed", c.seed);
    c.spectral_k = j.value("spectral_k", c.spectral_k);
    c.joint_spectral_weight = j.value("joint_spectral_weight", c.joint_spectral_weight);
    c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

/// lr0 * decay_factor^(number of decay epochs <= epoch).
inline double lr_schedule(int epoch, const TrainConfig& c) {
  int decays = 0;
  for (int e : c.decay_epochs) decays += e <= epoch ? 1 : 0;
  return c.lr0 * std::pow(c.decay_factor, decays);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  long step = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over the given blocks (matched by position and name).
inline void adam_step(const std::vector<NamedBlock>& params, const std::vector<NamedBlock>& grads,
                      AdamState& state, double lr, const AdamHyper& h = {}) {
  if (params.size() != grads.size()) throw Error("adam_step: block count mismatch");
  for (std::size_t b = 0; b < grads.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size())
      throw Error("adam_step: shape mismatch in block " + params[b].name);
    if (!all_finite(grads[b].values))
      throw Error("adam_step: non-finite gradient in block " + grads[b].name);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[params[b].name];
    auto& v = state.v[params[b].name];
    const std::size_t sz = params[b].values.size();
    if (m.size() != sz) {
      m.assign(sz, 0.0);
      v.assign(sz, 0.0);
    }
    for (std::size_t i = 0; i < sz; ++i) {
      const double g = grads[b].values[i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      params[b].values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

struct MaskSpec {
  std::vector<std::size_t> masked_node_indices;                   // ascending
  std::vector<std::pair<std::size_t, std::size_t>> masked_edge_pairs;  // i < j, ascending
};

/// Zeroes ceil(mask_fraction * n) feature rows chosen without replacement (at most n - 1). With
/// edge_fraction > 0, that share of edges is also removed from the returned graph's adjacency.
inline std::pair<SurgicalGraph, MaskSpec> mask_graph(const SurgicalGraph& g, double mask_fraction,
                                                     std::mt19937_64& rng, double edge_fraction = 0.0) {
  const std::size_t n = g.size();
  if (n < 2) throw ValidationError("mask_graph: need at least 2 nodes");
  if (!(mask_fraction >= 0.0 && mask_fraction < 1.0))
    throw ValidationError("mask_graph: mask_fraction must be in [0, 1)");
  MaskSpec spec;
  SurgicalGraph out = g;
  std::size_t count = static_cast<std::size_t>(std::ceil(mask_fraction * static_cast<double>(n) - 1e-9));
  count = std::min(count, n - 1);
  if (count > 0) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    spec.masked_node_indices.assign(idx.begin(), idx.begin() + static_cast<long>(count));
    std::sort(spec.masked_node_indices.begin(), spec.masked_node_indices.end());
    for (auto i : spec.masked_node_indices)
      for (auto& x : out.X.row(i)) x = 0.0;
  }
  if (edge_fraction > 0.0) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (g.A(i, j) > 0.0) edges.emplace_back(i, j);
    const auto ecount = static_cast<std::size_t>(
        std::ceil(edge_fraction * static_cast<double>(edges.size()) - 1e-9));
    std::shuffle(edges.begin(), edges.end(), rng);
    spec.masked_edge_pairs.assign(edges.begin(), edges.begin() + static_cast<long>(std::min(ecount, edges.size())));
    std::sort(spec.masked_edge_pairs.begin(), spec.masked_edge_pairs.end());
    for (auto [i, j] : spec.masked_edge_pairs) out.A(i, j) = out.A(j, i) = 0.0;
  }
  return {std::move(out), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = std::nan("");
};

using TrainHistory = std::vector<EpochRecord>;

inline std::string format_history(const TrainHistory& h) {
  std::string out = "epoch,lr,loss,accuracy\n";
  for (const auto& r : h)
    out += std::to_string(r.epoch) + "," + detail::fmt_double(r.lr) + "," + detail::fmt_double(r.loss) +
           "," + detail::fmt_double(r.accuracy) + "\n";
  return out;
}

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id)};
  return std::mt19937_64(seq);
}

inline void add_into(GnnParams& acc, GnnParams& g) {
  auto a = parameter_blocks(acc);
  auto b = parameter_blocks(g);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].values.size(); ++i) a[k].values[i] += b[k].values[i];
}

inline void scale(GnnParams& p, double s) {
  for (auto& b : parameter_blocks(p))
    for (double& x : b.values) x *= s;
}

/// Per-graph quantities that do not change during training.
struct PreparedGraph {
  const SurgicalGraph* graph = nullptr;
  Matrix input;       // node features + positional columns
  Matrix L_original;  // normalized Laplacian of the unmasked graph
};

inline std::vector<PreparedGraph> prepare(const GnnModel& m, const std::vector<const SurgicalGraph*>& graphs) {
  std::vector<PreparedGraph> out;
  for (const auto* g : graphs) {
    check_graph(*g);
    out.push_back({g, model_input(m, g->X, g->A), normalized_laplacian(g->A)});
  }
  return out;
}

inline std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace detail

/// Self-supervised spectral pretraining of the encoder. Every graph in `graphs` is used.
inline std::pair<GnnModel, TrainHistory> train_ssl(const std::vector<const SurgicalGraph*>& graphs,
                                                   const TrainConfig& config,
                                                   const std::string& schema_id = kFeatureSchemaId) {
  config.validate();
  if (graphs.empty()) throw ValidationError("train_ssl: no training graphs");
  ModelOptions mo;
  mo.num_node_features = graphs.front()->X.cols;
  mo.spectral_k = config.spectral_k;
  mo.num_classes = 1;
  GnnModel model = init_model(mo, config.seed);
  model.feature_schema_id = schema_id;
  auto prepared = detail::prepare(model, graphs);
  auto shuffle_rng = detail::stream(config.seed, 1);
  auto mask_rng = detail::stream(config.seed, 2);
  AdamState adam;
  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_eps};
  TrainHistory history;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    const auto order = detail::shuffled(prepared.size(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      GnnParams acc = zeros_like(model.params);
      for (std::size_t b = start; b < end; ++b) {
        const auto& pg = prepared[order[b]];
        Matrix input = pg.input;
        Matrix A = pg.graph->A;
        if (pg.graph->size() >= 2 && (config.mask_fraction > 0.0 || config.edge_mask_fraction > 0.0)) {
          auto [masked, spec] = mask_graph(*pg.graph, config.mask_fraction, mask_rng, config.edge_mask_fraction);
          if (spec.masked_edge_pairs.empty()) {
            for (auto i : spec.masked_node_indices)
              for (std::size_t c = 0; c < masked.X.cols; ++c) input(i, c) = 0.0;
          } else {
            input = model_input(model, masked.X, masked.A);
            A = masked.A;
          }
        }
        LossTarget target;
        target.L_original = pg.L_original;
        auto r = forward_backward(model, input, A, target);
        if (!std::isfinite(r.loss))
          throw Error("train_ssl: non-finite loss at epoch " + std::to_string(epoch) + ", graph '" +
                      pg.graph->clip_id + "'");
        loss_sum += r.loss;
        detail::add_into(acc, r.grads);
      }
      detail::scale(acc, 1.0 / static_cast<double>(end - start));
      adam_step(parameter_blocks(model.params), parameter_blocks(acc), adam, lr, hyper);
    }
    history.push_back({epoch, lr, loss_sum / static_cast<double>(prepared.size()), std::nan("")});
  }
  return {std::move(model), std::move(history)};
}

/// Class index of a graph's label for `category` (score - ordinal_scale.min).
inline std::size_t label_class(const SurgicalGraph& g, const std::string& category, const OrdinalScale& scale) {
  auto it = g.labels.find(category);
  if (it == g.labels.end())
    throw ValidationError("graph '" + g.clip_id + "' has no label for category '" + category + "'");
  if (!scale.contains(it->second))
    throw ValidationError("graph '" + g.clip_id + "': label out of scale");
  return static_cast<std::size_t>(it->second - scale.min);
}

/// Supervised training of one model for one scoring category. With `init`, encoder layers are
/// copied from that checkpoint; with config.freeze_encoder only the head is updated.
inline std::pair<GnnModel, TrainHistory> train_supervised(const std::vector<const SurgicalGraph*>& graphs,
                                                          const TrainConfig& config,
                                                          const std::string& category,
                                                          const std::vector<std::string>& categories,
                                                          const OrdinalScale& scale,
                                                          const std::optional<GnnModel>& init = std::nullopt,
                                                          const std::string& schema_id = kFeatureSchemaId) {
  config.validate();
  if (std::find(categories.begin(), categories.end(), category) == categories.end())
    throw ValidationError("unknown category '" + category + "'");
  if (graphs.empty()) throw ValidationError("train_supervised: no training graphs");
  std::vector<std::size_t> labels;
  for (const auto* g : graphs) labels.push_back(label_class(*g, category, scale));

  ModelOptions mo;
  mo.num_node_features = graphs.front()->X.cols;
  mo.spectral_k = config.spectral_k;
  mo.num_classes = static_cast<std::size_t>(scale.num_classes());
  GnnModel model = init_model(mo, config.seed);
  model.feature_schema_id = schema_id;
  model.category = category;
  model.ordinal_min = scale.min;
  if (init) {
    if (init->num_node_features != model.num_node_features || init->spectral_k != model.spectral_k ||
        init->positional != model.positional)
      throw ValidationError("init checkpoint does not match the graph feature schema");
    if (init->feature_schema_id != schema_id)
      throw ValidationError("init checkpoint feature schema '" + init->feature_schema_id +
                            "' differs from dataset schema '" + schema_id + "'");
    model.params.layer1 = init->params.layer1;
    model.params.layer2 = init->params.layer2;
    model.decoder_scale = init->decoder_scale;
  }
  if (config.freeze_encoder && config.joint_spectral_weight > 0.0)
    throw ValidationError("joint spectral loss needs a trainable encoder");

  auto prepared = detail::prepare(model, graphs);
  auto shuffle_rng = detail::stream(config.seed, 1);
  AdamState adam;
  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_eps};
  TrainHistory history;

  // A frozen encoder gives fixed pooled embeddings; only the head runs per step.
  std::vector<std::vector<double>> pooled;
  if (config.freeze_encoder)
    for (const auto& pg : prepared) pooled.push_back(global_mean_pool(encode(model, pg.input, pg.graph->A)));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    const auto order = detail::shuffled(prepared.size(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      GnnParams acc = zeros_like(model.params);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t gi = order[b];
        const auto& pg = prepared[gi];
        const std::size_t label = labels[gi];
        std::vector<double> logits;
        if (config.freeze_encoder) {
          logits = classify(pooled[gi], model.params.head);
          loss_sum += cross_entropy_loss(logits, label);
          auto delta = softmax(logits);
          delta[label] -= 1.0;
          for (std::size_t k = 0; k < delta.size(); ++k) {
            acc.head.b[k] += delta[k];
            for (std::size_t j = 0; j < kEmbeddingDim; ++j) acc.head.W(k, j) += delta[k] * pooled[gi][j];
          }
        } else {
          LossTarget target;
          target.label = label;
          if (config.joint_spectral_weight > 0.0) {
            target.L_original = pg.L_original;
            target.spectral_weight = config.joint_spectral_weight;
          }
          auto r = forward_backward(model, pg.input, pg.graph->A, target);
          loss_sum += r.loss;
          logits = std::move(r.logits);
          detail::add_into(acc, r.grads);
        }
        if (!std::isfinite(loss_sum))
          throw Error("train_supervised: non-finite loss at epoch " + std::to_string(epoch) + ", graph '" +
                      pg.graph->clip_id + "'");
        const auto pred = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        correct += pred == label ? 1 : 0;
      }
      detail::scale(acc, 1.0 / static_cast<double>(end - start));
      auto pb = parameter_blocks(model.params);
      auto gb = parameter_blocks(acc);
      if (config.freeze_encoder) {
        std::erase_if(pb, [](const NamedBlock& b) { return is_encoder_block(b.name); });
        std::erase_if(gb, [](const NamedBlock& b) { return is_encoder_block(b.name); });
      }
      adam_step(pb, gb, adam, lr, hyper);
    }
    const double n = static_cast<double>(prepared.size());
    history.push_back({epoch, lr, loss_sum / n, static_cast<double>(correct) / n});
  }
  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// ADASYN
// ---------------------------------------------------------------------------

struct SyntheticSample {
  std::size_t source = 0;   // index of x_i in the input
  std::size_t partner = 0;  // index of x_z in the input
  double lambda = 0.0;
  int label = 0;
};

struct AdasynResult {
  std::vector<std::vector<double>> vectors;  // originals first, then synthetics
  std::vector<int> labels;
  std::vector<SyntheticSample> synthetic;    // parallel to the appended tail
  std::map<int, std::size_t> k_used;         // per oversampled class
  std::vector<std::string> warnings;
};

/// Adaptive synthetic oversampling up to the majority class count. Neighbor searches use
/// Euclidean distance on z-scored copies of the vectors; synthetics interpolate the raw vectors.
inline AdasynResult adasyn_balance(const std::vector<std::vector<double>>& vectors, const std::vector<int>& labels,
                                   std::size_t k, std::mt19937_64& rng) {
  if (vectors.size() != labels.size()) throw ValidationError("adasyn: vectors/labels length mismatch");
  AdasynResult out;
  out.vectors = vectors;
  out.labels = labels;
  if (vectors.empty()) return out;
  const std::size_t n = vectors.size();
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim || !all_finite(v)) throw ValidationError("adasyn: vectors must be finite and equal length");

  const auto scaler = fit_scaler(vectors);
  std::vector<std::vector<double>> z;
  for (const auto& v : vectors) z.push_back(scaler.apply(v));
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (z[a][d] - z[b][d]) * (z[a][d] - z[b][d]);
    return s;
  };
  // k nearest among `pool`, excluding `self`; ties by index.
  auto nearest = [&](std::size_t self, const std::vector<std::size_t>& pool, std::size_t kk) {
    std::vector<std::pair<double, std::size_t>> d;
    for (auto j : pool)
      if (j != self) d.emplace_back(dist2(self, j), j);
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < std::min(kk, d.size()); ++t) idx.push_back(d[t].second);
    return idx;
  };

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  std::size_t majority = 0;
  int majority_label = 0;
  for (const auto& [c, m] : members)
    if (m.size() > majority) {
      majority = m.size();
      majority_label = c;
    }
  std::vector<std::pair<std::size_t, int>> minority;
  for (const auto& [c, m] : members)
    if (c != majority_label && m.size() < majority) minority.emplace_back(m.size(), c);
  std::sort(minority.begin(), minority.end());

  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (const auto& [size, c] : minority) {
    const auto& cls = members[c];
    std::size_t kk = k;
    if (size < k + 1) {
      kk = size - 1;
      out.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(size) +
                             " samples; using k = " + std::to_string(kk));
      log_warn("adasyn: " + out.warnings.back());
    }
    if (kk < 1) {
      out.warnings.push_back("class " + std::to_string(c) + " skipped: too few samples");
      log_warn("adasyn: " + out.warnings.back());
      continue;
    }
    out.k_used[c] = kk;
    const std::size_t G = majority - size;

    std::vector<double> r(size);
    for (std::size_t t = 0; t < size; ++t) {
      const auto nb = nearest(cls[t], everyone, kk);
      std::size_t other = 0;
      for (auto j : nb) other += labels[j] != c ? 1 : 0;
      r[t] = static_cast<double>(other) / static_cast<double>(kk);
    }
    const double rsum = std::accumulate(r.begin(), r.end(), 0.0);
    for (double& x : r) x = rsum > 0.0 ? x / rsum : 1.0 / static_cast<double>(size);

    std::vector<std::size_t> g(size);
    std::size_t total = 0;
    for (std::size_t t = 0; t < size; ++t) {
      g[t] = static_cast<std::size_t>(std::llround(r[t] * static_cast<double>(G)));
      total += g[t];
    }
    // Re-top-up to exactly G: add in descending r, remove in ascending r (index breaks ties).
    std::vector<std::size_t> by_r(size);
    std::iota(by_r.begin(), by_r.end(), 0);
    std::stable_sort(by_r.begin(), by_r.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
    for (std::size_t p = 0; total < G; p = (p + 1) % size, ++total) ++g[by_r[p]];
    std::vector<std::size_t> by_r_asc(size);
    std::iota(by_r_asc.begin(), by_r_asc.end(), 0);
    std::stable_sort(by_r_asc.begin(), by_r_asc.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
    for (std::size_t p = 0; total > G; p = (p + 1) % size)
      if (g[by_r_asc[p]] > 0) {
        --g[by_r_asc[p]];
        --total;
      }

    for (std::size_t t = 0; t < size; ++t) {
      if (g[t] == 0) continue;
      const std::size_t i = cls[t];
      const auto same = nearest(i, cls, kk);
      for (std::size_t s = 0; s < g[t]; ++s) {
        std::uniform_int_distribution<std::size_t> pick(0, same.size() - 1);
        const std::size_t zi = same[pick(rng)];
        const double lambda = unit(rng);
        std::vector<double> v(dim);
        for (std::size_t d = 0; d < dim; ++d) v[d] = vectors[i][d] + lambda * (vectors[zi][d] - vectors[i][d]);
        out.vectors.push_back(std::move(v));
        out.labels.push_back(c);
        out.synthetic.push_back({i, zi, lambda, c});
      }
    }
  }
  return out;
}

/// Balances the training graphs of `gs` for one category. Each synthetic graph copies the
/// source graph's topology and interpolates node features with the partner graph, matching nodes
/// by node id; unmatched nodes keep the source features.
inline GraphSet balance_graphs(const GraphSet& gs, const std::string& category, std::size_t k,
                               std::uint64_t seed, AdasynResult* report = nullptr) {
  std::vector<const SurgicalGraph*> train;
  std::vector<std::vector<double>> pooled;
  std::vector<int> labels;
  for (const auto& e : gs.entries) {
    if (e.split != Split::kTrain) continue;
    train.push_back(&e.graph);
    pooled.push_back(global_mean_pool(e.graph.X));
    labels.push_back(static_cast<int>(label_class(e.graph, category, gs.ordinal_scale)) + gs.ordinal_scale.min);
  }
  auto rng = detail::stream(seed, 3);
  auto res = adasyn_balance(pooled, labels, k, rng);
  GraphSet out = gs;
  for (std::size_t s = 0; s < res.synthetic.size(); ++s) {
    const auto& syn = res.synthetic[s];
    const SurgicalGraph& src = *train[syn.source];
    const SurgicalGraph& partner = *train[syn.partner];
    GraphSet::Entry e;
    e.graph = src;
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "~syn%05zu", s);
    e.graph.clip_id = src.clip_id + suffix;
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto it = std::find(partner.node_ids.begin(), partner.node_ids.end(), src.node_ids[i]);
      if (it == partner.node_ids.end()) continue;
      const auto pj = static_cast<std::size_t>(it - partner.node_ids.begin());
      for (std::size_t c = 0; c < src.X.cols; ++c)
        e.graph.X(i, c) = src.X(i, c) + syn.lambda * (partner.X(pj, c) - src.X(i, c));
    }
    e.graph.labels[category] = syn.label;
    e.split = Split::kTrain;
    e.synthetic = true;
    out.entries.push_back(std::move(e));
  }
  if (report) *report = std::move(res);
  return out;
}

}  // namespace surgnn
