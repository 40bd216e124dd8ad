#include "hypstruct/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hypstruct/error.hpp"
#include "spectral_oracles.hpp"
#include "test_support.hpp"

using namespace hypstruct;
using namespace hypstruct::spectral;
using hierarchy::LabelTree;
using hierarchy::NodeSpec;
using testing_support::Gen;
using testing_support::jacobi_eigenvalues;
using testing_support::leveled_tree;

namespace {

void expect_same_multiset(std::vector<double> a, std::vector<double> b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Io;
}

std::vector<double> descending_r(Gen& g, std::size_t H) {
  std::vector<double> r(H);
  for (auto& x : r) x = g.uniform(0.0, 1.0);
  std::sort(r.begin(), r.end(), std::greater<>());
  return r;
}

}  // namespace

TEST(BlockMatrix, BalancedExample) {
  const std::size_t counts[] = {1, 2, 4};
  auto K = build_block_matrix({hierarchy::balanced_tree(counts), {0.8, 0.2}});
  Matrix expect{{1, .8, .2, .2}, {.8, 1, .2, .2}, {.2, .2, 1, .8}, {.2, .2, .8, 1}};
  EXPECT_EQ(K, expect);
  auto I = build_block_matrix({hierarchy::balanced_tree(counts), {0.0, 0.0}});
  EXPECT_EQ(I, Matrix::identity(4));
  EXPECT_EQ(code_of([&] { build_block_matrix({hierarchy::balanced_tree(counts), {0.5}}); }),
            ErrorCode::InvalidArgument);
  BlockCorrelationSpec bad{hierarchy::balanced_tree(counts), {0.2, 0.8}};
  EXPECT_EQ(bad.warnings().size(), 1u);
}

TEST(BlockMatrix, StarIsLemmaMatrix) {
  const std::size_t counts[] = {1, 5};
  auto K = build_block_matrix({hierarchy::balanced_tree(counts), {0.3}});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(K(i, j), i == j ? 1.0 : 0.3);
}

TEST(ClosedForm, Examples) {
  const std::size_t c[] = {4, 2, 1};
  const double r[] = {0.8, 0.2};
  auto s = balanced_eigenvalues_closed_form(c, r);
  ASSERT_EQ(s.values.size(), 3u);
  EXPECT_NEAR(s.values[0], 2.2, 1e-15);
  EXPECT_NEAR(s.values[1], 1.4, 1e-15);
  EXPECT_NEAR(s.values[2], 0.2, 1e-15);
  EXPECT_EQ(s.multiplicities, (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_NEAR(s.trace(), 4.0, 1e-14);
  expect_same_multiset(jacobi_eigenvalues(Matrix{{1, .8, .2, .2}, {.8, 1, .2, .2}, {.2, .2, 1, .8}, {.2, .2, .8, 1}}),
                       {2.2, 1.4, 0.2, 0.2}, 1e-12);

  const double zero[] = {0.0, 0.0};
  auto id = balanced_eigenvalues_closed_form(c, zero);
  EXPECT_EQ(id.values, std::vector<double>{1.0});
  EXPECT_EQ(id.multiplicities, std::vector<std::size_t>{4});

  const std::size_t star[] = {3, 1};
  const double half[] = {0.5};
  auto st = balanced_eigenvalues_closed_form(star, half);
  EXPECT_NEAR(st.values[0], 2.0, 1e-15);
  EXPECT_NEAR(st.values[1], 0.5, 1e-15);
  EXPECT_EQ(st.multiplicities, (std::vector<std::size_t>{1, 2}));

  const double neg[] = {0.8, -0.1};
  EXPECT_EQ(code_of([&] { balanced_eigenvalues_closed_form(c, neg); }), ErrorCode::PreconditionViolated);
}

TEST(ClosedForm, MatchesNumericalOnRandomBalancedTrees) {
  Gen g(41);
  for (int trial = 0; trial < 150; ++trial) {
    const int H = g.integer(1, 4);
    std::vector<std::size_t> root_first{1};
    while (true) {
      root_first.resize(1);
      for (int h = 0; h < H; ++h) root_first.push_back(root_first.back() * g.integer(1, 4));
      if (root_first.back() >= 2 && root_first.back() <= 64) break;
    }
    const auto r = descending_r(g, static_cast<std::size_t>(H));
    auto K = build_block_matrix({hierarchy::balanced_tree(root_first), r});
    std::vector<std::size_t> leaf_first(root_first.rbegin(), root_first.rend());
    auto closed = balanced_eigenvalues_closed_form(leaf_first, r);
    EXPECT_EQ(closed.order(), leaf_first[0]);
    EXPECT_NEAR(closed.trace(), static_cast<double>(leaf_first[0]), 1e-12);
    auto numeric = numerical_eigenvalues(K);
    EXPECT_NEAR(numeric.trace(), static_cast<double>(leaf_first[0]), 1e-9);
    expect_same_multiset(closed.expanded(), numeric.expanded(), 1e-8);
    expect_same_multiset(jacobi_eigenvalues(K), numeric.expanded(), 1e-8);
  }
}

TEST(Star, Examples) {
  auto a = star_matrix_eigenvalues(2, 0.0);
  EXPECT_EQ(a.values, std::vector<double>{1.0});
  EXPECT_EQ(a.multiplicities, std::vector<std::size_t>{2});
  auto b = star_matrix_eigenvalues(3, 0.5);
  EXPECT_NEAR(b.values[0], 2.0, 1e-15);
  EXPECT_NEAR(b.values[1], 0.5, 1e-15);
  expect_same_multiset(jacobi_eigenvalues(Matrix{{1, .5, .5}, {.5, 1, .5}, {.5, .5, 1}}), b.expanded(), 1e-12);
  auto c = star_matrix_eigenvalues(5, 1.0);
  EXPECT_NEAR(c.values[0], 5.0, 1e-15);
  EXPECT_EQ(c.values[1], 0.0);
  EXPECT_EQ(c.multiplicities[1], 4u);
  EXPECT_EQ(code_of([] { star_matrix_eigenvalues(1, 0.5); }), ErrorCode::InvalidArgument);
}

TEST(TwoLevelReduction, Example) {
  Matrix K{{1, .8, .2, .2}, {.8, 1, .2, .2}, {.2, .2, 1, .8}, {.2, .2, .8, 1}};
  const std::size_t sizes[] = {2, 2};
  const double within[] = {0.8, 0.8};
  Matrix across{{0, .2}, {.2, 0}};
  auto red = two_level_block_reduction(K, sizes, within, across);
  EXPECT_NEAR(red.within.values[0], 0.2, 1e-15);
  EXPECT_EQ(red.within.multiplicities[0], 2u);
  EXPECT_NEAR(red.reduced(0, 0), 1.8, 1e-15);
  EXPECT_NEAR(red.reduced(0, 1), 0.4, 1e-15);
  expect_same_multiset(numerical_eigenvalues(red.reduced).expanded(), {2.2, 1.4}, 1e-12);

  Matrix off = K;
  off(0, 3) = off(3, 0) = 0.25;
  EXPECT_EQ(code_of([&] { two_level_block_reduction(off, sizes, within, across); }),
            ErrorCode::TemplateMismatch);
}

TEST(TwoLevelReduction, SingleGroupIsStar) {
  Matrix K{{1, .3, .3}, {.3, 1, .3}, {.3, .3, 1}};
  const std::size_t sizes[] = {3};
  const double within[] = {0.3};
  auto red = two_level_block_reduction(K, sizes, within, Matrix(1, 1, 0.0));
  auto star = star_matrix_eigenvalues(3, 0.3);
  std::vector<double> all = red.within.expanded();
  all.push_back(red.reduced(0, 0));
  expect_same_multiset(all, star.expanded(), 1e-15);
}

TEST(TwoLevelReduction, UnionMatchesSpectrumOnRandomTemplates) {
  Gen g(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = static_cast<std::size_t>(g.integer(1, 6));
    std::vector<std::size_t> sizes(k);
    std::vector<double> within(k);
    Matrix across(k, k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      sizes[i] = static_cast<std::size_t>(g.integer(1, 7));
      within[i] = g.uniform(-0.2, 1.0);
      for (std::size_t j = i + 1; j < k; ++j) across(i, j) = across(j, i) = g.uniform(-0.3, 0.5);
    }
    std::size_t n = 0;
    std::vector<std::size_t> group_of;
    for (std::size_t i = 0; i < k; ++i) {
      n += sizes[i];
      group_of.insert(group_of.end(), sizes[i], i);
    }
    Matrix K(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        K(i, j) = i == j ? 1.0 : group_of[i] == group_of[j] ? within[group_of[i]] : across(group_of[i], group_of[j]);
    auto red = two_level_block_reduction(K, sizes, within, across);
    auto all = red.within.expanded();
    auto a = numerical_eigenvalues(red.reduced).expanded();
    all.insert(all.end(), a.begin(), a.end());
    expect_same_multiset(all, jacobi_eigenvalues(K), 1e-8);
  }
}

TEST(LevelReduction, ReproducesSpectrumOnEquitableLevels) {
  Gen g(43);
  for (int trial = 0; trial < 60; ++trial) {
    const int H = g.integer(2, 3);
    auto tree = leveled_tree(g, H, 3, /*uniform_below_top=*/true);
    if (tree.leaf_count() > 60) continue;
    const auto r = descending_r(g, static_cast<std::size_t>(H));
    auto K = build_block_matrix({tree, r});
    for (int h = 1; h < H; ++h) {
      auto red = level_reduction(K, tree, h);
      auto all = red.within.expanded();
      auto a = numerical_eigenvalues(red.reduced).expanded();
      all.insert(all.end(), a.begin(), a.end());
      expect_same_multiset(all, jacobi_eigenvalues(K), 1e-8);
    }
  }
}

TEST(LevelReduction, HeightOneOnIrregularTrees) {
  Gen g(44);
  for (int trial = 0; trial < 60; ++trial) {
    auto tree = leveled_tree(g, g.integer(2, 4), 3);
    if (tree.leaf_count() > 60) continue;
    auto K = build_block_matrix({tree, descending_r(g, static_cast<std::size_t>(tree.height(tree.root())))});
    auto red = level_reduction(K, tree, 1);
    auto all = red.within.expanded();
    auto a = numerical_eigenvalues(red.reduced).expanded();
    all.insert(all.end(), a.begin(), a.end());
    expect_same_multiset(all, numerical_eigenvalues(K).expanded(), 1e-8);
  }
}

TEST(GapCondition, Examples) {
  EXPECT_TRUE(generic_gap_condition(0.8, 0.2, 0.0, 2, 2));
  EXPECT_TRUE(generic_gap_condition(0.8, 0.4, 0.0, 2, 2));
  EXPECT_FALSE(generic_gap_condition(0.8, 0.41, 0.0, 2, 2));
  EXPECT_FALSE(generic_gap_condition(0.5, 0.6, 0.1, 1, 3));
  // Delta = 0 reduces to m <= M / (p_max (C_1 - 1)).
  EXPECT_TRUE(generic_gap_condition(0.9, 0.9 / (3.0 * 4.0), 0.0, 3, 5));
  EXPECT_FALSE(generic_gap_condition(0.9, 0.9 / (3.0 * 4.0) + 1e-12, 0.0, 3, 5));
  EXPECT_EQ(code_of([] { generic_gap_condition(1, 0, 0, 0, 2); }), ErrorCode::PreconditionViolated);
  EXPECT_EQ(code_of([] { generic_gap_condition(1, 0, 0, 2, 1); }), ErrorCode::PreconditionViolated);

  // Constructed instance: balanced (1,2,4) with r = (0.8, 0.2) has its gap
  // after the top two eigenvalues.
  auto s = numerical_eigenvalues(Matrix{{1, .8, .2, .2}, {.8, 1, .2, .2}, {.2, .2, 1, .8}, {.2, .2, .8, 1}});
  auto v = s.expanded();
  EXPECT_GT(v[1], v[2]);
}

TEST(GapCondition, SoundOnRandomTrees) {
  Gen g(45);
  int satisfied = 0;
  for (int trial = 0; satisfied < 200 && trial < 20000; ++trial) {
    const int H = g.integer(2, 4);
    auto tree = leveled_tree(g, H, 4);
    if (tree.leaf_count() > 80) continue;
    const int h = g.integer(1, H - 1);
    std::vector<std::size_t> sizes;
    for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
      if (tree.depth(static_cast<int>(v)) == H - h) sizes.push_back(tree.classes_under(static_cast<int>(v)).size());
    }
    const std::size_t C_h = sizes.size();
    if (C_h < 2) continue;
    const std::size_t p_max = *std::max_element(sizes.begin(), sizes.end());

    std::vector<double> r(static_cast<std::size_t>(H));
    for (int k = 0; k < h; ++k) r[static_cast<std::size_t>(k)] = g.uniform(0.0, 1.0);
    std::sort(r.begin(), r.begin() + h, std::greater<>());
    const double M = r[static_cast<std::size_t>(h - 1)];
    const double delta = r[0] - M;
    const double threshold =
        (M - 2.0 * delta * (static_cast<double>(p_max) - 1.0)) / (static_cast<double>(p_max) * (C_h - 1.0));
    if (threshold <= 0.0) continue;
    double m = g.uniform(0.0, threshold);
    for (int k = h; k < H; ++k) {
      r[static_cast<std::size_t>(k)] = m;
      m = g.uniform(0.0, m);
    }
    const double m_bound = r[static_cast<std::size_t>(h)];
    if (!generic_gap_condition(M, m_bound, delta, p_max, C_h)) continue;
    ++satisfied;
    auto values = numerical_eigenvalues(build_block_matrix({tree, r})).expanded();
    ASSERT_EQ(values.size(), tree.leaf_count());
    EXPECT_GT(values[C_h - 1], values[C_h]) << "trial " << trial;
  }
  EXPECT_EQ(satisfied, 200);
}

TEST(Numerical, Examples) {
  auto id = numerical_eigenvalues(Matrix::identity(5));
  EXPECT_EQ(id.values.size(), 1u);
  EXPECT_NEAR(id.values[0], 1.0, 1e-15);
  EXPECT_EQ(id.multiplicities[0], 5u);
  auto diag = numerical_eigenvalues(Matrix{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}});
  EXPECT_NEAR(diag.values[0], 3.0, 1e-15);
  EXPECT_NEAR(diag.values[1], 2.0, 1e-15);
  EXPECT_NEAR(diag.values[2], 1.0, 1e-15);
  EXPECT_EQ(code_of([] { numerical_eigenvalues(Matrix{{1, 0.5}, {0.4, 1}}); }), ErrorCode::NotSymmetric);

  Matrix K{{1, .8, .2, .2}, {.8, 1, .2, .2}, {.2, .2, 1, .8}, {.2, .2, .8, 1}};
  auto e = symmetric_eigen(K);
  EXPECT_NEAR(e.values[0], 2.2, 1e-10);
  // Rayleigh quotient of (1,1,1,1)/2.
  double rq = 0;
  for (double x : K.data()) rq += x / 4.0;
  EXPECT_NEAR(rq, 2.2, 1e-14);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(e.vectors(i, 0)), 0.5, 1e-10);
}

TEST(Numerical, CharacteristicPolynomialRootsSmall) {
  Gen g(46);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = g.uniform(-2, 2), b = g.uniform(-2, 2), c = g.uniform(-2, 2);
    // 2x2: roots of l^2 - (a + c) l + (ac - b^2).
    const double tr = a + c, det = a * c - b * b;
    const double disc = std::sqrt(tr * tr - 4 * det);
    auto v = numerical_eigenvalues(Matrix{{a, b}, {b, c}}).expanded();
    EXPECT_NEAR(v.front(), (tr + disc) / 2, 1e-12);
    EXPECT_NEAR(v.back(), (tr - disc) / 2, 1e-12);
    // 3x3: each eigenvalue is a root of det(K - l I).
    Matrix K3{{a, b, 0.3}, {b, c, -0.7}, {0.3, -0.7, a * c}};
    for (double l : numerical_eigenvalues(K3).expanded()) {
      const double p = (K3(0, 0) - l) * ((K3(1, 1) - l) * (K3(2, 2) - l) - K3(1, 2) * K3(2, 1)) -
                       K3(0, 1) * (K3(1, 0) * (K3(2, 2) - l) - K3(1, 2) * K3(2, 0)) +
                       K3(0, 2) * (K3(1, 0) * K3(2, 1) - (K3(1, 1) - l) * K3(2, 0));
      EXPECT_NEAR(p, 0.0, 1e-10);
    }
  }
}

TEST(GramMatrix, Examples) {
  auto tree = hierarchy::builtin_cifar10_tree();
  std::vector<int> labels{0, 0};
  Matrix Z{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  std::vector<int> y3{0, 0, 5};
  auto g = gram_matrix(Z, y3, tree);
  EXPECT_NEAR(g.K(0, 1), 1.0, 1e-15);
  EXPECT_EQ(code_of([&] { gram_matrix(Matrix{{1.0, 2.0}, {1.0, 2.0}}, labels, tree); }),
            ErrorCode::DegenerateRow);

  // Zero-mean rows, so centering leaves them orthogonal or antipodal.
  Matrix Q{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::vector<int> y4{0, 1, 5, 6};
  auto q = gram_matrix(Q, y4, tree);
  EXPECT_NEAR(q.K(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(q.K(0, 2), -1.0, 1e-15);
}

TEST(GramMatrix, OrdersByCoarseThenFine) {
  auto tree = hierarchy::builtin_cifar10_tree();
  Gen g(47);
  Matrix Z(12, 3);
  for (auto& x : Z.data()) x = g.normal();
  std::vector<int> y{9, 0, 5, 3, 0, 7, 2, 9, 1, 4, 6, 8};
  auto gm = gram_matrix(Z, y, tree);
  for (std::size_t i = 0; i + 1 < gm.order.size(); ++i) {
    const int a = y[gm.order[i]], b = y[gm.order[i + 1]];
    EXPECT_LE(std::tuple(tree.coarse_of(a), a, gm.order[i]), std::tuple(tree.coarse_of(b), b, gm.order[i + 1]));
  }
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(gm.K(i, i), 1.0, 1e-15);
  EXPECT_EQ(max_abs_asymmetry(gm.K), 0.0);
}

TEST(PhaseTransition, Examples) {
  auto s = merge_spectrum({2.2, 1.4, 0.2, 0.2});
  auto gaps = phase_transition_detect(s, 4);
  ASSERT_FALSE(gaps.empty());
  EXPECT_EQ(gaps[0].position, 2u);
  EXPECT_NEAR(gaps[0].relative_drop, 1.2 / 1.4, 1e-15);
  EXPECT_TRUE(phase_transition_detect(merge_spectrum({1, 1, 1, 1}), 4).empty());
}

TEST(PhaseTransition, CoarseCountGap) {
  const std::size_t c[] = {100, 20, 1};
  const double r[] = {0.9, 0.05};
  auto closed = balanced_eigenvalues_closed_form(c, r);
  auto gaps = phase_transition_detect(closed, 100);
  ASSERT_FALSE(gaps.empty());
  EXPECT_EQ(gaps[0].position, 20u);
  const std::size_t root_first[] = {1, 20, 100};
  auto numeric = numerical_eigenvalues(build_block_matrix({hierarchy::balanced_tree(root_first), {0.9, 0.05}}));
  EXPECT_EQ(phase_transition_detect(numeric, 100)[0].position, 20u);
}

TEST(SpectrumCsv, Format) {
  std::ostringstream out;
  write_spectrum_csv(out, merge_spectrum({2.2, 0.2, 1.4, 0.2}));
  EXPECT_EQ(out.str(), "rank,eigenvalue,multiplicity_group\n1,2.2000000000000002,0\n2,1.3999999999999999,1\n3,0.20000000000000001,2\n4,0.20000000000000001,2\n");
}
