#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"
#include "surgnn/gnn.hpp"
#include "surgnn/graphset.hpp"
#include "surgnn/train.hpp"

namespace surgnn {

/// Raised when a correlation is undefined because an input has zero variance.
class DegenerateInput : public Error {
 public:
  DegenerateInput() : Error("undefined: zero variance") {}
};

inline void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  if (x.size() < 2) throw ValidationError("correlation needs at least 2 samples");
}

/// Sample Pearson correlation coefficient.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks with ties sharing the average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

/// Kendall tau-b by counting all pairs.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++tied_x;
      } else if (dy == 0.0) {
        ++tied_y;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  const double n1 = static_cast<double>(concordant + discordant + tied_y);  // pairs not tied in x
  const double n2 = static_cast<double>(concordant + discordant + tied_x);  // pairs not tied in y
  if (n1 == 0.0 || n2 == 0.0) throw DegenerateInput();
  return std::clamp(static_cast<double>(concordant - discordant) / std::sqrt(n1 * n2), -1.0, 1.0);
}

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Macro-averaged precision, recall and F1 over the classes present in truth or predictions.
/// Empty denominators count as 0.
inline PrecisionRecallF1 prf1(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ValidationError("prf1: predictions and truth must be non-empty and equal length");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  PrecisionRecallF1 out;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      if (pred[i] == c && truth[i] != c) ++fp;
      if (pred[i] != c && truth[i] == c) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.precision += p;
    out.recall += r;
    out.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  const double k = static_cast<double>(classes.size());
  out.precision /= k;
  out.recall /= k;
  out.f1 /= k;
  return out;
}

struct MetricsReport {
  std::string method;
  std::string category;
  Mode mode = Mode::k2D;
  std::size_t n = 0;
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // a correlation was undefined and reported as 0
  int runs = 1;
};

/// Correlations between predicted and true ordinal values plus classification metrics on the same
/// pairs. Undefined correlations become 0 with the degenerate flag set.
inline MetricsReport score_predictions(std::span<const double> pred_values, std::span<const int> pred_classes,
                                       std::span<const int> truth) {
  MetricsReport r;
  r.n = truth.size();
  std::vector<double> t(truth.begin(), truth.end());
  auto guarded = [&](auto fn) {
    try {
      return fn(pred_values, std::span<const double>(t));
    } catch (const DegenerateInput&) {
      r.degenerate = true;
      return 0.0;
    }
  };
  r.pearson = guarded([](auto a, auto b) { return pearson(a, b); });
  r.spearman = guarded([](auto a, auto b) { return spearman(a, b); });
  r.kendall = guarded([](auto a, auto b) { return kendall_tau(a, b); });
  const auto c = prf1(pred_classes, truth);
  r.precision = c.precision;
  r.recall = c.recall;
  r.f1 = c.f1;
  return r;
}

/// Random baseline: per run, predictions are drawn from a normal distribution moment-matched to
/// the truth (population std); raw draws feed the correlations, rounded and clamped draws feed
/// the classification metrics. Run r uses seed + r.
inline MetricsReport gaussian_baseline(std::span<const int> truth, int runs, std::uint64_t seed,
                                       const OrdinalScale& scale) {
  if (truth.size() < 2) throw ValidationError("gaussian_baseline: need at least 2 samples");
  if (runs < 1) throw ValidationError("gaussian_baseline: runs must be >= 1");
  const double n = static_cast<double>(truth.size());
  double mean = 0.0;
  for (int v : truth) mean += v;
  mean /= n;
  double var = 0.0;
  for (int v : truth) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) throw ValidationError("gaussian_baseline: constant truth");

  MetricsReport avg;
  avg.method = "Baseline";
  avg.n = truth.size();
  avg.runs = runs;
  for (int run = 0; run < runs; ++run) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(run));
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> draws(truth.size());
    std::vector<int> classes(truth.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
      draws[i] = dist(rng);
      classes[i] = std::clamp(static_cast<int>(std::lround(draws[i])), scale.min, scale.max);
    }
    const auto r = score_predictions(draws, classes, truth);
    avg.pearson += r.pearson;
    avg.spearman += r.spearman;
    avg.kendall += r.kendall;
    avg.precision += r.precision;
    avg.recall += r.recall;
    avg.f1 += r.f1;
    avg.degenerate = avg.degenerate || r.degenerate;
  }
  for (double* v : {&avg.pearson, &avg.spearman, &avg.kendall, &avg.precision, &avg.recall, &avg.f1})
    *v /= static_cast<double>(runs);
  return avg;
}

inline std::vector<int> truth_scores(const std::vector<const SurgicalGraph*>& graphs, const std::string& category) {
  std::vector<int> out;
  for (const auto* g : graphs) {
    auto it = g->labels.find(category);
    if (it == g->labels.end())
      throw ValidationError("graph '" + g->clip_id + "' has no label for category '" + category + "'");
    out.push_back(it->second);
  }
  return out;
}

/// Scores a trained classifier on a set of graphs.
inline MetricsReport evaluate_model(const GnnModel& model, const GraphSet& gs, Split split) {
  if (model.feature_schema_id != gs.schema_id || model.num_node_features != gs.feature_names.size())
    throw ValidationError("checkpoint feature schema '" + model.feature_schema_id + "' (" +
                          std::to_string(model.num_node_features) + " features) does not match dataset schema '" +
                          gs.schema_id + "' (" + std::to_string(gs.feature_names.size()) + " features)");
  if (model.category.empty()) throw ValidationError("checkpoint has no classification category");
  if (std::find(gs.categories.begin(), gs.categories.end(), model.category) == gs.categories.end())
    throw ValidationError("checkpoint category '" + model.category + "' not in dataset");
  const auto graphs = gs.graphs(split);
  if (graphs.empty()) throw ValidationError("split '" + to_string(split) + "' is empty");
  const auto truth = truth_scores(graphs, model.category);
  std::vector<int> pred;
  std::vector<double> pred_values;
  for (const auto* g : graphs) {
    const int v = static_cast<int>(predict_class(model, *g)) + model.ordinal_min;
    pred.push_back(v);
    pred_values.push_back(v);
  }
  auto r = score_predictions(pred_values, pred, truth);
  r.method = "SurGNN";
  r.category = model.category;
  r.mode = gs.mode;
  return r;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  return {{"method", r.method},       {"category", r.category}, {"mode", to_string(r.mode)},
          {"n", r.n},                 {"pearson", r.pearson},   {"spearman", r.spearman},
          {"kendall", r.kendall},     {"precision", r.precision}, {"recall", r.recall},
          {"f1", r.f1},               {"degenerate", r.degenerate}, {"runs", r.runs}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.method = j.at("method").get<std::string>();
  r.category = j.at("category").get<std::string>();
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.n = j.at("n").get<std::size_t>();
  r.pearson = j.at("pearson").get<double>();
  r.spearman = j.at("spearman").get<double>();
  r.kendall = j.at("kendall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.degenerate = j.value("degenerate", false);
  r.runs = j.value("runs", 1);
  return r;
}

/// Aligned text table: Method, Category, Mode, N, then the six metrics to three decimals.
inline std::string format_table(const std::vector<MetricsReport>& reports) {
  std::size_t wm = 6, wc = 8;
  for (const auto& r : reports) {
    wm = std::max(wm, r.method.size());
    wc = std::max(wc, r.category.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  std::string out = pad("Method", wm) + "  " + pad("Category", wc) +
                    "  Mode     N  Pearson  Spearman  Kendall  Precision  Recall     F1\n";
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "  %-4s %5zu  %7.3f  %8.3f  %7.3f  %9.3f  %6.3f  %5.3f%s\n",
                  to_string(r.mode).c_str(), r.n, r.pearson, r.spearman, r.kendall, r.precision, r.recall,
                  r.f1, r.degenerate ? "  (degenerate)" : "");
    out += pad(r.method, wm) + "  " + pad(r.category, wc) + buf;
  }
  return out;
}

}  // namespace surgnn
