#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "surgnn/eval.hpp"

using namespace surgnn;

namespace {

using V = std::vector<double>;
using I = std::vector<int>;

// Graphs whose node features are the one-hot label; a model that copies them through both
// layers and reads the class back out.
GraphSet one_hot_set(const I& scores) {
  GraphSet gs;
  gs.schema_id = "onehot-v1";
  gs.feature_names = {"s1", "s2", "s3", "s4", "s5"};
  gs.categories = {"Overall"};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    SurgicalGraph g;
    g.clip_id = "c" + std::to_string(i);
    g.node_ids = {{"a", "p1"}, {"a", "p2"}};
    g.X = Matrix(2, 5);
    g.X(0, scores[i] - 1) = g.X(1, scores[i] - 1) = 1.0;
    g.A = Matrix::from_rows({{0, 1}, {1, 0}});
    g.labels["Overall"] = scores[i];
    gs.entries.push_back({g, Split::kTest, false});
  }
  return gs;
}

GnnModel copy_model() {
  GnnModel m;
  m.num_node_features = 5;
  m.positional = false;
  m.feature_schema_id = "onehot-v1";
  m.category = "Overall";
  auto layer = [](std::size_t out, std::size_t in) {
    GatLayerParams l;
    l.W = Matrix(out, in);
    for (std::size_t k = 0; k < 5; ++k) l.W(k, k) = 1.0;
    l.a_src.assign(out, 0.0);
    l.a_dst.assign(out, 0.0);
    return l;
  };
  m.params.layer1 = layer(kHiddenDim, 5);
  m.params.layer2 = layer(kEmbeddingDim, kHiddenDim);
  m.params.head.W = Matrix(5, kEmbeddingDim);
  for (std::size_t k = 0; k < 5; ++k) m.params.head.W(k, k) = 10.0;
  m.params.head.b.assign(5, 0.0);
  return m;
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson(V{1, 2, 3}, V{1, 2, 3}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(V{1, 2, 3}, V{-1, -2, -3}), -1.0, 1e-15);
  EXPECT_NEAR(pearson(V{1, 2, 3}, V{1, 2, 4}), 3.0 / std::sqrt(2.0 * 14.0 / 3.0), 1e-12);
  EXPECT_NEAR(pearson(V{1, 2, 3}, V{1, 2, 4}), 0.98198, 1e-5);
  EXPECT_THROW(pearson(V{1, 1, 1}, V{1, 2, 3}), DegenerateInput);
  EXPECT_THROW(pearson(V{1}, V{1}), Error);
  EXPECT_THROW(pearson(V{1, 2}, V{1, 2, 3}), Error);
}

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman(V{1, 2, 3, 4, 5}, V{2, 4, 6, 8, 10}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(V{1, 2, 3, 4, 5}, V{1, 2, 3, 5, 4}), 0.9, 1e-12);
  try {
    spearman(V{1, 2, 3}, V{4, 4, 4});
    FAIL();
  } catch (const DegenerateInput& e) {
    EXPECT_NE(std::string(e.what()).find("undefined: zero variance"), std::string::npos);
  }
  EXPECT_EQ(average_ranks(V{10, 20, 20, 5}), (V{2, 3.5, 3.5, 1}));
}

TEST(Kendall, Examples) {
  EXPECT_NEAR(kendall_tau(V{1, 2, 3, 4}, V{1, 2, 3, 4}), 1.0, 1e-15);
  EXPECT_NEAR(kendall_tau(V{1, 2, 3, 4}, V{1, 3, 2, 4}), 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(kendall_tau(V{1, 2, 3, 4}, V{4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_THROW(kendall_tau(V{1, 1}, V{1, 2}), DegenerateInput);
}

TEST(Correlations, MatchBruteForceOnRandomIntegerLists) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    V x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 6);
      y[i] = static_cast<double>(rng() % 6);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
      continue;
    EXPECT_NEAR(kendall_tau(x, y), oracle::brute_kendall(x, y), 1e-12);
    EXPECT_NEAR(spearman(x, y), oracle::brute_spearman(x, y), 1e-12);
    EXPECT_NEAR(pearson(x, y), oracle::brute_pearson(x, y), 1e-12);
    EXPECT_NEAR(kendall_tau(x, y), kendall_tau(y, x), 1e-15);
  }
}

TEST(Correlations, MonotoneAndAffineInvariance) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    V x = oracle::random_matrix(1, 30, rng).data, y = oracle::random_matrix(1, 30, rng).data;
    V fx(x.size()), ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      fx[i] = std::exp(x[i]) + x[i] * x[i] * x[i];
      ax[i] = 2.5 * x[i] - 7.0;
    }
    EXPECT_NEAR(spearman(fx, y), spearman(x, y), 1e-12);
    EXPECT_NEAR(kendall_tau(fx, y), kendall_tau(x, y), 1e-12);
    EXPECT_NEAR(pearson(ax, y), pearson(x, y), 1e-12);
  }
}

TEST(Prf1, Examples) {
  auto perfect = prf1(I{0, 1, 2, 1}, I{0, 1, 2, 1});
  EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
  EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);

  auto constant = prf1(I{0, 0, 0, 0, 0, 0}, I{0, 0, 1, 1, 2, 2});
  EXPECT_NEAR(constant.precision, 1.0 / 9.0, 1e-15);
  EXPECT_NEAR(constant.recall, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(constant.f1, (2.0 * (1.0 / 3.0) * 1.0 / (1.0 / 3.0 + 1.0)) / 3.0, 1e-15);

  auto single = prf1(I{4}, I{4});
  EXPECT_DOUBLE_EQ(single.f1, 1.0);
  EXPECT_THROW(prf1(I{}, I{}), Error);
  EXPECT_THROW(prf1(I{1}, I{1, 2}), Error);
}

TEST(Baseline, SpearmanNearZeroAndDeterministic) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {69u, 309u}) {
    I truth(n);
    for (auto& t : truth) t = 1 + static_cast<int>(rng() % 5);
    const auto a = gaussian_baseline(truth, 10, 42, {1, 5});
    const auto b = gaussian_baseline(truth, 10, 42, {1, 5});
    EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
    EXPECT_LE(std::abs(a.spearman), n == 69 ? 0.25 : 0.15);
    EXPECT_EQ(a.runs, 10);
    EXPECT_EQ(a.method, "Baseline");
    for (double v : {a.precision, a.recall, a.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(gaussian_baseline(I{3, 3, 3}, 10, 1, {1, 5}), ValidationError);
}

TEST(Evaluate, OracleModelScoresOne) {
  const auto gs = one_hot_set({1, 2, 3, 4, 5, 2, 3});
  const auto r = evaluate_model(copy_model(), gs, Split::kTest);
  EXPECT_EQ(r.n, 7u);
  for (double v : {r.pearson, r.spearman, r.kendall, r.precision, r.recall, r.f1}) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_FALSE(r.degenerate);
}

TEST(Evaluate, ConstantModelIsFlaggedDegenerate) {
  auto m = copy_model();
  std::fill(m.params.head.W.data.begin(), m.params.head.W.data.end(), 0.0);
  m.params.head.b = {0, 0, 5, 0, 0};
  const auto r = evaluate_model(m, one_hot_set({1, 2, 3, 4, 5}), Split::kTest);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.spearman, 0.0);
  EXPECT_EQ(r.pearson, 0.0);
  EXPECT_NEAR(r.recall, 1.0 / 5.0, 1e-15);
}

TEST(Evaluate, SchemaMismatchNamesBothIds) {
  auto m = copy_model();
  m.feature_schema_id = "kinematic-v0";
  try {
    evaluate_model(m, one_hot_set({1, 2}), Split::kTest);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("kinematic-v0"), std::string::npos);
    EXPECT_NE(msg.find("onehot-v1"), std::string::npos);
  }
  EXPECT_THROW(evaluate_model(copy_model(), one_hot_set({1, 2}), Split::kTrain), ValidationError);
}

TEST(Report, JsonRoundTripAndTable) {
  MetricsReport r;
  r.method = "SurGNN";
  r.category = "Overall";
  r.mode = Mode::k3D;
  r.n = 45;
  r.pearson = 0.5;
  r.spearman = 1.0 / 3.0;
  r.f1 = 0.25;
  r.degenerate = true;
  const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  EXPECT_EQ(report_to_json(back), report_to_json(r));
  const auto table = format_table({r});
  EXPECT_NE(table.find("Pearson"), std::string::npos);
  EXPECT_NE(table.find("0.333"), std::string::npos);
  EXPECT_NE(table.find("3D"), std::string::npos);
}
