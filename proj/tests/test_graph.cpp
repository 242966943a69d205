#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "surgnn/graph.hpp"

using namespace surgnn;

namespace {

NodeFeatureVector node(const std::string& instrument, const std::string& phase, double v = 0.0) {
  return {"clip", instrument, phase, std::vector<double>(14, v), default_feature_names()};
}

void expect_matrix_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], tol) << "entry " << i;
}

}  // namespace

TEST(BuildGraph, OneInstrumentTwoPhases) {
  auto g = build_graph({node("hook", "dissection"), node("hook", "calot")}, {}, {"calot", "dissection"});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.node_ids[0].phase_name, "calot");
  EXPECT_EQ(g.A, Matrix::from_rows({{0, 1}, {1, 0}}));
}

TEST(BuildGraph, TwoInstrumentsOnePhase) {
  auto g = build_graph({node("hook", "calot"), node("grasper", "calot")}, {1.0, 0.5});
  EXPECT_EQ(g.node_ids[0].instrument_id, "grasper");
  EXPECT_EQ(g.A, Matrix::from_rows({{0, 0.5}, {0.5, 0}}));
}

TEST(BuildGraph, TwoByTwoEveryNodeHasDegreeTwo) {
  auto g = build_graph({node("a", "p1"), node("b", "p1"), node("a", "p2"), node("b", "p2")}, {});
  for (double d : degrees(g.A)) EXPECT_DOUBLE_EQ(d, 2.0);
  EXPECT_EQ(g.A(0, 3), 0.0);  // (a,p1) and (b,p2) share neither phase nor instrument
  EXPECT_NO_THROW(check_graph(g));
}

TEST(BuildGraph, NonConsecutivePhasesAreNotLinked) {
  auto g = build_graph({node("a", "p1"), node("a", "p3")}, {}, {"p1", "p2", "p3"});
  EXPECT_EQ(g.A(0, 1), 0.0);
  EXPECT_EQ(connected_components(g.A), 2u);
}

TEST(BuildGraph, Errors) {
  EXPECT_THROW(build_graph({}, {}), ValidationError);
  EXPECT_THROW(build_graph({node("a", "p"), node("a", "p")}, {}), ValidationError);
  EXPECT_THROW(build_graph({node("a", "p")}, {0.0, 0.0}), ValidationError);
}

TEST(Laplacian, SingleEdge) {
  auto L = normalized_laplacian(Matrix::from_rows({{0, 1}, {1, 0}}));
  EXPECT_EQ(L, Matrix::from_rows({{1, -1}, {-1, 1}}));
  auto e = symmetric_eigendecomposition(L);
  EXPECT_NEAR(e.values[0], 0.0, 1e-12);
  EXPECT_NEAR(e.values[1], 2.0, 1e-12);
}

TEST(Laplacian, ThreeNodePath) {
  auto L = normalized_laplacian(Matrix::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  const double r = 1.0 / std::sqrt(2.0);
  expect_matrix_near(L, Matrix::from_rows({{1, -r, 0}, {-r, 1, -r}, {0, -r, 1}}), 1e-15);
  auto e = symmetric_eigendecomposition(L);
  EXPECT_NEAR(e.values[0], 0.0, 1e-12);
  EXPECT_NEAR(e.values[1], 1.0, 1e-12);
  EXPECT_NEAR(e.values[2], 2.0, 1e-12);
}

TEST(Laplacian, IsolatedNodeGetsZeroRow) {
  auto L = normalized_laplacian(Matrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(L(2, j), 0.0);
    EXPECT_EQ(L(j, 2), 0.0);
  }
  EXPECT_EQ(L(0, 0), 1.0);
  auto e = symmetric_eigendecomposition(L);
  EXPECT_NEAR(e.values[0], 0.0, 1e-12);
  EXPECT_NEAR(e.values[1], 0.0, 1e-12);
  EXPECT_NEAR(e.values[2], 2.0, 1e-12);
}

TEST(Laplacian, CombinatorialVariant) {
  auto L = laplacian(Matrix::from_rows({{0, 2}, {2, 0}}), LaplacianKind::kCombinatorial);
  EXPECT_EQ(L, Matrix::from_rows({{2, -2}, {-2, 2}}));
}

TEST(Laplacian, RejectsInvalidAdjacency) {
  EXPECT_THROW(normalized_laplacian(Matrix::from_rows({{0, 1}, {2, 0}})), ValidationError);
  EXPECT_THROW(normalized_laplacian(Matrix::from_rows({{0, -1}, {-1, 0}})), ValidationError);
  EXPECT_THROW(normalized_laplacian(Matrix::from_rows({{1, 0}, {0, 0}})), ValidationError);
  EXPECT_THROW(normalized_laplacian(Matrix(2, 3)), ValidationError);
}

TEST(Eigen, IdentityAndDiagonal) {
  auto e = symmetric_eigendecomposition(Matrix::identity(3));
  EXPECT_EQ(e.values, (std::vector<double>{1, 1, 1}));
  // Equal eigenvalues: columns in ascending lexicographic order.
  expect_matrix_near(e.vectors, Matrix::from_rows({{0, 0, 1}, {0, 1, 0}, {1, 0, 0}}), 0.0);

  auto d = symmetric_eigendecomposition(Matrix::from_rows({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
  EXPECT_EQ(d.values, (std::vector<double>{1, 2, 3}));
  expect_matrix_near(d.vectors, Matrix::from_rows({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}), 0.0);
}

TEST(Eigen, SingleEdgeVectorsAreSignFixed) {
  auto e = symmetric_eigendecomposition(Matrix::from_rows({{1, -1}, {-1, 1}}));
  const double r = 1.0 / std::sqrt(2.0);
  expect_matrix_near(e.vectors, Matrix::from_rows({{r, r}, {r, -r}}), 1e-12);
}

TEST(Eigen, Errors) {
  EXPECT_THROW(symmetric_eigendecomposition(Matrix(2, 3)), Error);
  EXPECT_THROW(symmetric_eigendecomposition(Matrix::from_rows({{0, 1}, {0, 0}})), Error);
  EXPECT_THROW(symmetric_eigendecomposition(Matrix::identity(513)), Error);
  EigenOptions stingy;
  stingy.max_sweeps = 0;
  EXPECT_THROW(symmetric_eigendecomposition(Matrix::from_rows({{1, 0.5}, {0.5, 1}}), stingy), Error);
}

TEST(Eigen, FixSignTieGoesToLowestIndex) {
  std::vector<double> v{-0.5, 0.5, 0.1};
  fix_sign(v);
  EXPECT_EQ(v, (std::vector<double>{0.5, -0.5, -0.1}));
  std::vector<double> w{0.1, -0.9};
  fix_sign(w);
  EXPECT_EQ(w, (std::vector<double>{-0.1, 0.9}));
}

TEST(Eigen, RandomGraphsMatchReference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 24;
    const auto A = oracle::random_adjacency(n, 0.3, rng);
    const auto d = decompose_laplacian(A);
    const auto ref = oracle::reference_eigenvalues(d.L);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(d.eigenvalues[k], ref[k], 1e-8);
      EXPECT_GE(d.eigenvalues[k], -1e-9);
      EXPECT_LE(d.eigenvalues[k], 2.0 + 1e-9);
    }
    std::size_t zeros = 0;
    for (double v : d.eigenvalues) zeros += std::abs(v) <= 1e-8 ? 1 : 0;
    EXPECT_EQ(zeros, oracle::union_find_components(A));
    EXPECT_EQ(connected_components(A), oracle::union_find_components(A));
    // orthonormal eigenvectors
    const auto VtV = matmul(d.eigenvectors.transposed(), d.eigenvectors);
    expect_matrix_near(VtV, Matrix::identity(n), 1e-10);
  }
}

TEST(SpectralEmbedding, ShapesAndClamp) {
  const auto d = decompose_laplacian(Matrix::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  EXPECT_EQ(spectral_embedding(d, 2).cols, 2u);
  EXPECT_EQ(spectral_embedding(d, 8).cols, 3u);
  EXPECT_THROW(spectral_embedding(d, 8, false), ValidationError);
  EXPECT_THROW(spectral_embedding(d, 0), ValidationError);
  // the first column spans the D^1/2 1 direction on a connected graph
  const auto H = spectral_embedding(d, 1);
  EXPECT_NEAR(H(1, 0) / H(0, 0), std::sqrt(2.0), 1e-12);

  const auto P = positional_features(Matrix::from_rows({{0, 1}, {1, 0}}), 4);
  EXPECT_EQ(P.cols, 4u);
  EXPECT_EQ(P(0, 2), 0.0);
  EXPECT_EQ(P(1, 3), 0.0);
}

TEST(GraphJson, RoundTrip) {
  auto g = build_graph({node("a", "p1", 0.25), node("b", "p1", -1.5), node("a", "p2", 3.0)}, {1.0, 0.5});
  g.labels["Overall"] = 4;
  const auto back = graph_from_json(nlohmann::json::parse(graph_to_json(g).dump()));
  EXPECT_EQ(back.clip_id, g.clip_id);
  EXPECT_EQ(back.node_ids, g.node_ids);
  EXPECT_EQ(back.X, g.X);
  EXPECT_EQ(back.A, g.A);
  EXPECT_EQ(back.labels, g.labels);

  auto j = graph_to_json(g);
  j["A"].push_back({0, 9, 1.0});
  EXPECT_THROW(graph_from_json(j), ValidationError);
  j = graph_to_json(g);
  j["A"].push_back({0, 1, -1.0});
  EXPECT_THROW(graph_from_json(j), ValidationError);
}
