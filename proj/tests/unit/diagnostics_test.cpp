#include "hypstruct/diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>

#include "hypstruct/error.hpp"
#include "hypstruct/spectral.hpp"
#include "test_support.hpp"

using namespace hypstruct;
using namespace hypstruct::diagnostics;
using hierarchy::kNoVertex;
using hierarchy::NodeSpec;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Io;
}

Matrix unit_square() { return Matrix{{0, 0}, {1, 0}, {0, 1}, {1, 1}}; }

Matrix random_points(testing_support::Gen& g, std::size_t n, std::size_t d, double lo, double hi) {
  Matrix m(n, d);
  for (auto& x : m.data()) x = g.uniform(lo, hi);
  return m;
}

// Literal four-point condition over ordered quadruples:
// (x,z)_w >= min((x,y)_w, (y,z)_w) - delta.
double brute_delta(const DistanceMatrix& dm) {
  const std::size_t n = dm.size();
  double delta = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z)
        for (std::size_t w = 0; w < n; ++w) {
          const double need = std::min(gromov_product(dm, w, x, y), gromov_product(dm, w, y, z)) -
                              gromov_product(dm, w, x, z);
          delta = std::max(delta, need);
        }
  return delta;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) { setenv("HYPSTRUCT_THREADS", value, 1); }
  ~ThreadsEnv() { unsetenv("HYPSTRUCT_THREADS"); }
};

// root -> {g0, g1}; g0 -> {a, b, c}, g1 -> {d, e}.
hierarchy::LabelTree small_tree() {
  return hierarchy::LabelTree::from_nodes({{"root", kNoVertex},
                                           {"g0", 0},
                                           {"g1", 0},
                                           {"a", 1},
                                           {"b", 1},
                                           {"c", 1},
                                           {"d", 2},
                                           {"e", 2}});
}

}  // namespace

TEST(Gromov, Examples) {
  auto dm = DistanceMatrix::euclidean(unit_square());
  EXPECT_NEAR(gromov_product(dm, 0, 1, 2), 0.292893, 1e-6);
  EXPECT_DOUBLE_EQ(gromov_product(dm, 0, 3, 3), dm(0, 3));
  EXPECT_DOUBLE_EQ(gromov_product(dm, 1, 1, 2), 0.0);
  EXPECT_EQ(code_of([&] { gromov_product(dm, 0, 1, 4); }), ErrorCode::IndexOutOfRange);
}

TEST(DistanceMatrix, Validation) {
  EXPECT_EQ(code_of([] { DistanceMatrix(Matrix{{0, 1}, {2, 0}}); }), ErrorCode::NotSymmetric);
  EXPECT_EQ(code_of([] { DistanceMatrix(Matrix{{0, -1}, {-1, 0}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { DistanceMatrix(Matrix{{1, 1}, {1, 0}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { DistanceMatrix::poincare(Matrix{{1.0, 0.0}}, geometry::Curvature{}); }),
            ErrorCode::OutsideBall);
}

TEST(Delta, UnitSquare) {
  auto r = delta_hyperbolicity(DistanceMatrix::euclidean(unit_square()));
  EXPECT_NEAR(r.delta, 0.414214, 1e-6);
  ASSERT_TRUE(r.delta_rel);
  EXPECT_NEAR(*r.delta_rel, 0.585786, 1e-6);
}

TEST(Delta, TreeMetricIsZero) {
  testing_support::Gen g(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = g.integer(4, 25);
    std::vector<NodeSpec> nodes{{"v0", kNoVertex, 0.0}};
    for (int i = 1; i < n; ++i) nodes.push_back({"v" + std::to_string(i), g.integer(0, i - 1), g.uniform(0.1, 3.0)});
    auto tree = hierarchy::LabelTree::from_nodes(std::move(nodes));
    auto r = delta_hyperbolicity(DistanceMatrix(hierarchy::tree_metric(tree).dist));
    EXPECT_NEAR(r.delta, 0.0, 1e-9);
    EXPECT_NEAR(*r.delta_rel, 0.0, 1e-9);
  }
}

TEST(Delta, MatchesOrderedQuadrupleOracle) {
  testing_support::Gen g(32);
  for (int trial = 0; trial < 40; ++trial) {
    auto pts = random_points(g, g.integer(4, 9), g.integer(1, 4), -2.0, 2.0);
    auto dm = DistanceMatrix::euclidean(pts);
    EXPECT_NEAR(delta_hyperbolicity(dm).delta, brute_delta(dm), 1e-12);
  }
}

TEST(Delta, SmallAndDegenerateInputs) {
  auto three = DistanceMatrix::euclidean(Matrix{{0, 0}, {1, 0}, {5, 5}});
  EXPECT_EQ(delta_hyperbolicity(three).delta, 0.0);
  auto same = DistanceMatrix::euclidean(Matrix(5, 2, 1.0));
  EXPECT_FALSE(delta_hyperbolicity(same).delta_rel);
  EXPECT_EQ(code_of([&] { relative_delta(same); }), ErrorCode::ZeroDiameter);
  auto big = DistanceMatrix(Matrix(kExactDeltaLimit + 1, kExactDeltaLimit + 1, 0.0));
  EXPECT_EQ(code_of([&] { delta_hyperbolicity(big); }), ErrorCode::PreconditionViolated);
  DeltaOptions sampled{DeltaOptions::Mode::sampled, 100, 1};
  EXPECT_NO_THROW(delta_hyperbolicity(big, sampled));
}

TEST(Delta, RelativeRangeScaleInvarianceAndSampling) {
  testing_support::Gen g(33);
  for (int trial = 0; trial < 25; ++trial) {
    auto pts = random_points(g, g.integer(4, 30), g.integer(1, 6), -1.0, 1.0);
    auto dm = DistanceMatrix::euclidean(pts);
    Matrix scaled_pts = pts;
    for (auto& x : scaled_pts.data()) x *= 10.0;
    const auto exact = delta_hyperbolicity(dm);
    ASSERT_TRUE(exact.delta_rel);
    EXPECT_GE(*exact.delta_rel, 0.0);
    EXPECT_LE(*exact.delta_rel, 1.0);
    EXPECT_NEAR(relative_delta(DistanceMatrix::euclidean(scaled_pts)), *exact.delta_rel, 1e-12);

    const std::uint64_t seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
    double previous = 0.0;
    for (std::size_t k : {10u, 100u, 1000u, 10000u}) {
      const double s = delta_hyperbolicity(dm, {DeltaOptions::Mode::sampled, k, seed}).delta;
      EXPECT_LE(s, exact.delta + 1e-15);
      EXPECT_GE(s, previous);
      previous = s;
    }
  }
}

TEST(Delta, IndependentOfWorkerCount) {
  testing_support::Gen g(34);
  auto dm = DistanceMatrix::euclidean(random_points(g, 60, 5, -1.0, 1.0));
  double one, many;
  {
    ThreadsEnv env("1");
    one = delta_hyperbolicity(dm).delta;
  }
  {
    ThreadsEnv env("7");
    many = delta_hyperbolicity(dm).delta;
  }
  EXPECT_EQ(one, many);
}

TEST(TestCpcc, TreeConsistentConfigurationIsOne) {
  auto tree = small_tree();
  // Coarse group g at 10 e_g, fine class i adds e_{2+i}: two distinct
  // centroid distances, ordered like the tree distances.
  const int coarse[] = {0, 0, 0, 1, 1};
  Matrix f(10, 7, 0.0);
  std::vector<int> labels;
  for (int s = 0; s < 10; ++s) {
    const int cls = s % 5;
    labels.push_back(cls);
    f(s, coarse[cls]) = 10.0;
    f(s, 2 + cls) = 1.0;
  }
  EXPECT_NEAR(test_cpcc(f, labels, tree, DistanceMode::l2), 1.0, 1e-12);
  for (auto& x : f.data()) x *= 0.05;
  EXPECT_NEAR(test_cpcc(f, labels, tree, DistanceMode::poincare), 1.0, 1e-12);
}

TEST(TestCpcc, ShuffledLabelsGiveNearZero) {
  const std::size_t counts[] = {1, 4, 16};
  auto tree = hierarchy::balanced_tree(counts);
  testing_support::Gen g(35);
  const std::size_t n = 800, d = 20;
  Matrix f(n, d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 16);
    for (std::size_t j = 0; j < d; ++j) f(i, j) = g.normal();
    f(i, static_cast<std::size_t>(labels[i])) += 3.0;
    f(i, 16 + static_cast<std::size_t>(labels[i] / 4)) += 5.0;
  }
  EXPECT_GT(test_cpcc(f, labels, tree, DistanceMode::l2), 0.3);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(labels[i], labels[static_cast<std::size_t>(g.integer(0, static_cast<int>(i)))]);
  EXPECT_LT(std::abs(test_cpcc(f, labels, tree, DistanceMode::l2)), 0.3);
}

TEST(TestCpcc, PoincareApproachesL2AsCurvatureVanishes) {
  auto tree = hierarchy::builtin_cifar10_tree();
  testing_support::Gen g(36);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix f = random_points(g, 60, 8, -1.0, 1.0);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < 60; ++i) labels[i] = static_cast<int>(i % 10);
    const double l2 = test_cpcc(f, labels, tree, DistanceMode::l2);
    const double hyp = test_cpcc(f, labels, tree, DistanceMode::poincare, geometry::Curvature{1e-8});
    EXPECT_NEAR(hyp, l2, 1e-3);
  }
}

TEST(TestCpcc, DegenerateVariance) {
  auto tree = small_tree();
  Matrix f(5, 2, 0.0);
  std::vector<int> labels{0, 1, 2, 3, 4};
  EXPECT_EQ(code_of([&] { test_cpcc(f, labels, tree, DistanceMode::l2); }), ErrorCode::DegenerateVariance);
}

TEST(Knn, Examples) {
  auto tree = small_tree();
  Matrix train{{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  std::vector<int> tl{0, 1, 3, 4};
  auto r = knn_classify(train, tl, Matrix{{10, 0}}, std::vector<int>{1}, 1, Level::fine, tree);
  EXPECT_EQ(r.predictions, std::vector<int>{1});
  EXPECT_DOUBLE_EQ(*r.accuracy, 1.0);

  // Equidistant neighbours of classes 2, 0 and 1: the smallest class wins.
  Matrix tie{{1, 0}, {-1, 0}, {0, 1}};
  std::vector<int> tie_labels{2, 0, 1};
  EXPECT_EQ(knn_classify(tie, tie_labels, Matrix{{0, 0}}, {}, 3, Level::fine, tree).predictions[0], 0);
  EXPECT_FALSE(knn_classify(tie, tie_labels, Matrix{{0, 0}}, {}, 3, Level::fine, tree).accuracy);
  // At the coarse level all three share g0 (vertex 1).
  EXPECT_EQ(knn_classify(tie, tie_labels, Matrix{{0, 0}}, {}, 3, Level::coarse, tree).predictions[0], 1);

  EXPECT_EQ(code_of([&] { knn_classify(tie, tie_labels, Matrix{{0, 0}}, {}, 4, Level::fine, tree); }),
            ErrorCode::InvalidArgument);
}

TEST(Knn, SeparatedClustersAreClassifiedPerfectly) {
  auto tree = small_tree();
  testing_support::Gen g(37);
  Matrix train(100, 2), query(50, 2);
  std::vector<int> tl(100), ql(50);
  auto fill = [&](Matrix& m, std::vector<int>& l) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      l[i] = static_cast<int>(i % 5);
      m(i, 0) = 20.0 * l[i] + g.uniform(-1, 1);
      m(i, 1) = g.uniform(-1, 1);
    }
  };
  fill(train, tl);
  fill(query, ql);
  EXPECT_DOUBLE_EQ(*knn_classify(train, tl, query, ql, 3, Level::fine, tree).accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*knn_classify(train, tl, query, ql, 3, Level::coarse, tree).accuracy, 1.0);
}

TEST(Knn, MatchesExhaustiveOracleOnTiedGrids) {
  auto tree = small_tree();
  testing_support::Gen g(38);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(g.integer(1, 12));
    Matrix train(n, 2), query(4, 2);
    std::vector<int> tl(n);
    for (std::size_t i = 0; i < n; ++i) {
      train(i, 0) = g.integer(-2, 2);
      train(i, 1) = g.integer(-2, 2);
      tl[i] = g.integer(0, 4);
    }
    for (auto& x : query.data()) x = g.integer(-2, 2);
    const std::size_t k = static_cast<std::size_t>(g.integer(1, static_cast<int>(n)));
    for (Level level : {Level::fine, Level::coarse}) {
      auto got = knn_classify(train, tl, query, {}, k, level, tree).predictions;
      for (std::size_t q = 0; q < 4; ++q) {
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t i = 0; i < n; ++i) {
          const double dx = train(i, 0) - query(q, 0), dy = train(i, 1) - query(q, 1);
          order.push_back({dx * dx + dy * dy, i});
        }
        std::sort(order.begin(), order.end());
        std::map<int, int> votes;
        for (std::size_t m = 0; m < k; ++m) {
          const int fine = tl[order[m].second];
          ++votes[level == Level::fine ? fine : tree.coarse_of(fine)];
        }
        int best = -1, best_count = -1;
        for (auto [label, count] : votes) {
          if (count > best_count) best = label, best_count = count;
        }
        EXPECT_EQ(got[q], best);
      }
    }
  }
}

// With plain majority voting a fine-tie winner can lose at the coarse level,
// so the implication is checked where the fine vote is unambiguous.
TEST(Knn, CorrectFineImpliesCorrectCoarse) {
  auto tree = small_tree();
  testing_support::Gen g(39);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix train = random_points(g, 80, 3, -1, 1), query = random_points(g, 40, 3, -1, 1);
    std::vector<int> tl(80), ql(40);
    for (auto& l : tl) l = g.integer(0, 4);
    for (auto& l : ql) l = g.integer(0, 4);
    for (std::size_t k : {1u, 5u}) {
      auto fine = knn_classify(train, tl, query, ql, k, Level::fine, tree);
      auto coarse = knn_classify(train, tl, query, ql, k, Level::coarse, tree);
      for (std::size_t q = 0; q < 40; ++q) {
        if (fine.predictions[q] != ql[q]) continue;
        // Count the winning class's votes to see whether it holds a strict majority.
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t i = 0; i < 80; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < 3; ++j) s += (train(i, j) - query(q, j)) * (train(i, j) - query(q, j));
          order.push_back({s, i});
        }
        std::sort(order.begin(), order.end());
        std::size_t wins = 0;
        for (std::size_t m = 0; m < k; ++m) wins += tl[order[m].second] == ql[q];
        if (2 * wins <= k) continue;
        EXPECT_EQ(coarse.predictions[q], tree.coarse_of(ql[q]));
      }
      if (k == 1) EXPECT_GE(*coarse.accuracy, *fine.accuracy);
    }
  }
}

TEST(Knn, IndependentOfWorkerCount) {
  auto tree = small_tree();
  testing_support::Gen g(40);
  Matrix train = random_points(g, 200, 4, -1, 1), query = random_points(g, 150, 4, -1, 1);
  std::vector<int> tl(200);
  for (auto& l : tl) l = g.integer(0, 4);
  std::vector<int> one, many;
  {
    ThreadsEnv env("1");
    one = knn_classify(train, tl, query, {}, 7, Level::fine, tree).predictions;
  }
  {
    ThreadsEnv env("5");
    many = knn_classify(train, tl, query, {}, 7, Level::fine, tree).predictions;
  }
  EXPECT_EQ(one, many);
}

TEST(Gaussian, TwoPoints) {
  auto fit = fit_gaussian(Matrix{{0, 0}, {2, 0}});
  EXPECT_EQ(fit.mu, (std::vector<double>{1, 0}));
  EXPECT_DOUBLE_EQ(fit.sigma(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(fit.sigma(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(fit.sigma(1, 1), 0.0);
  // lambda = 1e-6 * 2 / 2; inverse of diag(2 + lambda, lambda).
  EXPECT_DOUBLE_EQ(fit.ridge, 1e-6);
  EXPECT_NEAR(fit.sigma_inv(0, 0), 1.0 / (2.0 + 1e-6), 1e-15);
  EXPECT_NEAR(fit.sigma_inv(1, 1), 1e6, 1e-6);
  EXPECT_NEAR(fit.sigma_inv(0, 1), 0.0, 1e-12);
}

TEST(Gaussian, IdenticalPointsUseBareRidge) {
  auto fit = fit_gaussian(Matrix(4, 3, 2.5));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(fit.sigma_inv(a, b), a == b ? 1e6 : 0.0, 1e-6);
  EXPECT_EQ(code_of([] { fit_gaussian(Matrix(1, 2, 0.0)); }), ErrorCode::InvalidArgument);
}

TEST(Gaussian, StandardNormalSample) {
  testing_support::Gen g(41);
  Matrix x(10000, 3);
  for (auto& v : x.data()) v = g.normal();
  auto fit = fit_gaussian(x);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(fit.sigma(a, b), a == b ? 1.0 : 0.0, 0.1);
}

TEST(Mahalanobis, Examples) {
  GaussianFit fit;
  fit.mu = {0, 0};
  fit.sigma = Matrix{{1, 0}, {0, 1}};
  fit.sigma_inv = fit.sigma;
  EXPECT_DOUBLE_EQ(mahalanobis_score(std::vector<double>{3, 4}, fit), 25.0);
  EXPECT_DOUBLE_EQ(mahalanobis_score(std::vector<double>{0, 0}, fit), 0.0);
  EXPECT_EQ(code_of([&] { mahalanobis_score(std::vector<double>{1, 2, 3}, fit); }), ErrorCode::DimensionMismatch);
}

TEST(Mahalanobis, AffineInvariance) {
  testing_support::Gen g(42);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = static_cast<std::size_t>(g.integer(1, 5));
    const std::size_t n = 50 + 10 * d;
    Matrix data(n, d);
    for (auto& v : data.data()) v = g.normal();
    // A = I + small perturbation keeps it invertible and well conditioned.
    Matrix A(d, d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) A(a, b) = (a == b ? g.uniform(0.5, 2.0) : 0.0) + g.uniform(-0.3, 0.3);
    const auto shift = g.vec(d, -5, 5);
    auto transform = [&](std::span<const double> x) {
      std::vector<double> y(d);
      for (std::size_t a = 0; a < d; ++a) {
        y[a] = shift[a];
        for (std::size_t b = 0; b < d; ++b) y[a] += A(a, b) * x[b];
      }
      return y;
    };
    Matrix mapped(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto y = transform(data.row(i));
      std::copy(y.begin(), y.end(), mapped.row(i).begin());
    }
    // The quadratic form itself is invariant; the ridge moves each score by
    // at most score * ridge / sigma_min.
    const auto exact = fit_gaussian(data, 0.0), exact_mapped = fit_gaussian(mapped, 0.0);
    const auto fit = fit_gaussian(data), fit_mapped = fit_gaussian(mapped);
    const double rel = fit.ridge / spectral::numerical_eigenvalues(fit.sigma).values.back();
    const double rel_mapped = fit_mapped.ridge / spectral::numerical_eigenvalues(fit_mapped.sigma).values.back();
    for (int q = 0; q < 5; ++q) {
      const auto x = g.vec(d, -3, 3);
      const double plain = mahalanobis_score(x, exact);
      EXPECT_NEAR(mahalanobis_score(transform(x), exact_mapped), plain, 1e-6);
      EXPECT_LE(plain - mahalanobis_score(x, fit), plain * rel + 1e-9);
      EXPECT_LE(plain - mahalanobis_score(transform(x), fit_mapped), plain * rel_mapped + 1e-9);
      EXPECT_GE(plain - mahalanobis_score(x, fit), -1e-9);
    }
  }
}

TEST(Standardizer, CentersAndNormalizes) {
  Matrix ref{{1, 1}, {3, 1}};
  auto s = FeatureStandardizer::fit(ref);
  EXPECT_EQ(s.mean, (std::vector<double>{2, 1}));
  auto out = s.apply(Matrix{{5, 5}, {2, 1}});
  EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.8, 1e-15);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(code_of([&] { s.apply(Matrix(1, 3, 0.0)); }), ErrorCode::DimensionMismatch);
}

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{1, 3}, std::vector<double>{2, 4}), 0.75);
  EXPECT_EQ(code_of([] { auroc(std::vector<double>{}, std::vector<double>{1}); }), ErrorCode::EmptyInput);
}

TEST(Auroc, PairCountOracleAndComplement) {
  testing_support::Gen g(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(g.integer(1, 20))), b(static_cast<std::size_t>(g.integer(1, 20)));
    for (auto& x : a) x = g.integer(0, 6);
    for (auto& x : b) x = g.integer(0, 6);
    double wins = 0.0;
    for (double x : a)
      for (double y : b) wins += y > x ? 1.0 : (y == x ? 0.5 : 0.0);
    const double expected = wins / static_cast<double>(a.size() * b.size());
    EXPECT_NEAR(auroc(a, b), expected, 1e-12);
    EXPECT_NEAR(auroc(a, b) + auroc(b, a), 1.0, 1e-12);
  }
}

TEST(Borda, Examples) {
  using Table = std::vector<std::vector<std::optional<double>>>;
  Table best{{0.9, 0.9, 0.9}, {0.5, 0.6, 0.7}, {0.4, 0.3, 0.2}};
  EXPECT_EQ(borda_count(best)[0], 2.0 * 3);
  Table equal{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  EXPECT_EQ(borda_count(equal), (std::vector<double>{2.0, 2.0, 2.0}));
  Table split{{0.9, 0.1}, {0.1, 0.9}};
  auto s = borda_count(split);
  EXPECT_EQ(s[0], s[1]);
  EXPECT_EQ(code_of([] { borda_count(Table{{0.5, std::nullopt}, {0.4, 0.3}}); }), ErrorCode::MissingEntry);
}

TEST(Borda, TotalPointsAreConserved) {
  testing_support::Gen g(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t M = static_cast<std::size_t>(g.integer(1, 6)), D = static_cast<std::size_t>(g.integer(1, 5));
    std::vector<std::vector<std::optional<double>>> t(M, std::vector<std::optional<double>>(D));
    for (auto& row : t)
      for (auto& v : row) v = g.integer(0, 3) / 4.0;
    const auto s = borda_count(t);
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    EXPECT_NEAR(total, static_cast<double>(M * (M - 1) / 2 * D), 1e-9);
    for (double x : s) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, static_cast<double>((M - 1) * D));
    }
  }
}
