#include "hypstruct/hierarchy.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "hypstruct/error.hpp"
#include "test_support.hpp"

using namespace hypstruct;
using namespace hypstruct::hierarchy;

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

// Random tree built by attaching each new vertex to an earlier one.
LabelTree random_tree(testing_support::Gen& g, int n) {
  std::vector<NodeSpec> nodes{{"v0", kNoVertex, 0.0}};
  for (int i = 1; i < n; ++i) {
    nodes.push_back({"v" + std::to_string(i), g.integer(0, i - 1), g.uniform(0.1, 3.0)});
  }
  return LabelTree::from_nodes(std::move(nodes));
}

}  // namespace

TEST(LabelTree, Cifar10Structure) {
  auto t = builtin_cifar10_tree();
  EXPECT_EQ(t.vertex_count(), 13u);
  EXPECT_EQ(t.leaf_count(), 10u);
  EXPECT_EQ(t.name(t.leaf_vertex(0)), "airplane");
  EXPECT_EQ(t.name(t.coarse_of(5)), "animal");
  auto cat = *t.find("cat");
  auto dog = *t.find("dog");
  auto ship = *t.find("ship");
  EXPECT_DOUBLE_EQ(t.distance(cat, dog), 2.0);
  EXPECT_DOUBLE_EQ(t.distance(cat, ship), 4.0);
  EXPECT_EQ(lca_height(t, cat, dog), 1);
  EXPECT_EQ(lca_height(t, cat, ship), 2);
  EXPECT_EQ(code_of([&] { lca_height(t, t.root(), cat); }), ErrorCode::NotALeaf);
}

TEST(LabelTree, ValidationFailures) {
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", kNoVertex}, {"b", kNoVertex}}); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", 1}, {"b", 0}}); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", kNoVertex}, {"b", 7}}); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", kNoVertex}, {"a", 0}}); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", kNoVertex}, {"b", 0, 0.0}}); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { LabelTree::from_nodes({{"a", kNoVertex}, {"b", 2}, {"c", 1}}); }),
            ErrorCode::ValidationError);
}

TEST(LabelTree, TreeMetricMatchesLcaDistanceOnRandomTrees) {
  testing_support::Gen g(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto t = random_tree(g, g.integer(2, 40));
    auto m = tree_metric(t);
    for (std::size_t a = 0; a < t.vertex_count(); ++a) {
      EXPECT_EQ(m.dist(a, a), 0.0);
      for (std::size_t b = 0; b < t.vertex_count(); ++b) {
        const double d = t.distance(static_cast<VertexId>(a), static_cast<VertexId>(b));
        EXPECT_NEAR(m.dist(a, b), d, 1e-12);
        EXPECT_EQ(m.dist(a, b), m.dist(b, a));
      }
    }
  }
}

TEST(LabelTree, TreeMetricIsFourPointUltrametricForLeafPairs) {
  testing_support::Gen g(22);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = random_tree(g, g.integer(4, 30));
    auto m = tree_metric(t);
    const std::size_t n = t.vertex_count();
    for (int q = 0; q < 200; ++q) {
      std::size_t x = g.integer(0, n - 1), y = g.integer(0, n - 1), z = g.integer(0, n - 1),
                  w = g.integer(0, n - 1);
      double s[3] = {m.dist(x, y) + m.dist(z, w), m.dist(x, z) + m.dist(y, w),
                     m.dist(x, w) + m.dist(y, z)};
      std::sort(s, s + 3);
      EXPECT_NEAR(s[2], s[1], 1e-9);
    }
  }
}

TEST(BalancedTree, LevelCountsAndHeights) {
  const std::size_t counts[] = {1, 2, 4};
  auto t = balanced_tree(counts);
  EXPECT_EQ(t.vertex_count(), 7u);
  EXPECT_EQ(t.leaf_count(), 4u);
  EXPECT_EQ(t.height(t.root()), 2);
  EXPECT_EQ(lca_height(t, t.leaf_vertex(0), t.leaf_vertex(1)), 1);
  EXPECT_EQ(lca_height(t, t.leaf_vertex(0), t.leaf_vertex(2)), 2);
  EXPECT_EQ(t.classes_under(t.coarse_of(3)), (std::vector<int>{2, 3}));

  const std::size_t bad1[] = {2, 4};
  const std::size_t bad2[] = {1, 3, 4};
  EXPECT_EQ(code_of([&] { balanced_tree(bad1); }), ErrorCode::InvalidLevelCounts);
  EXPECT_EQ(code_of([&] { balanced_tree(bad2); }), ErrorCode::InvalidLevelCounts);
}

TEST(TreeJson, RoundTrip) {
  const char* text = R"({"name": "r", "children": [
    {"name": "a", "weight": 2.5, "children": [{"name": "x"}, {"name": "y", "weight": 0.5}]},
    {"name": "b"}]})";
  auto t = parse_tree(text);
  EXPECT_EQ(t.vertex_count(), 5u);
  EXPECT_DOUBLE_EQ(t.distance(*t.find("y"), *t.find("b")), 4.0);
  auto again = parse_tree(serialize_tree(t));
  ASSERT_EQ(again.vertex_count(), t.vertex_count());
  for (VertexId v = 0; v < 5; ++v) {
    EXPECT_EQ(again.name(v), t.name(v));
    EXPECT_EQ(again.parent(v), t.parent(v));
    EXPECT_EQ(again.edge_weight(v), t.edge_weight(v));
  }
}

TEST(TreeJson, ParseErrorsCarryPosition) {
  try {
    parse_tree("{\"name\": \"r\",\n  \"children\": [}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 1u);
  }
  EXPECT_EQ(code_of([] { parse_tree(R"({"name": "r", "weight": 1})"); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { parse_tree(R"({"name": "r", "children": [{"name": "a", "weight": -1}]})"); }),
            ErrorCode::ValidationError);
}

TEST(NormalizeDepths, PadsShallowLeaves) {
  auto t = parse_tree(R"({"name": "r", "children": [
    {"name": "a", "children": [{"name": "x"}, {"name": "y"}]}, {"name": "b", "weight": 3}]})");
  auto n = normalize_depths(t);
  EXPECT_EQ(n.leaf_count(), 3u);
  for (VertexId leaf : n.leaves()) EXPECT_EQ(n.depth(leaf), 2);
  EXPECT_EQ(n.name(n.leaf_vertex(2)), "b");
  EXPECT_EQ(n.name(n.coarse_of(2)), "b~dummy1");
  EXPECT_DOUBLE_EQ(n.distance(n.leaf_vertex(2), n.root()), 4.0);
}

TEST(DatasetCsv, RoundTripAndErrors) {
  auto t = builtin_cifar10_tree();
  LabeledDataset d;
  d.features = Matrix{{0.1, -2.0}, {1.0 / 3.0, 4e-300}};
  d.labels = {3, 7};
  std::stringstream ss;
  write_dataset_csv(ss, d, t);
  auto back = read_dataset_csv(ss, t);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.features, d.features);

  std::stringstream bad("label,f0\ncat,abc\n");
  try {
    read_dataset_csv(bad, t);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::stringstream internal("label,f0\nanimal,1\n");
  EXPECT_EQ(code_of([&] { read_dataset_csv(internal, t); }), ErrorCode::ValidationError);
}
