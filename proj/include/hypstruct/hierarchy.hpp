#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypstruct/matrix.hpp"

namespace hypstruct::hierarchy {

using VertexId = int;
inline constexpr VertexId kNoVertex = -1;

/// Description of one vertex used to assemble a LabelTree. `weight` is the
/// length of the edge to the parent and is ignored for the root.
struct NodeSpec {
  std::string name;
  VertexId parent = kNoVertex;
  double weight = 1.0;
};

/// Weighted rooted label tree. Immutable once built.
///
/// Vertex ids are positions in the construction order. Leaves, in increasing
/// vertex-id order, define the fine-class indices used everywhere
/// downstream (block matrices, CPCC pair enumeration, dataset labels).
class LabelTree {
 public:
  /// Validates and builds. Throws ValidationError on a missing or repeated
  /// root, an out-of-range or cyclic parent chain, a non-positive weight or a
  /// duplicate name.
  static LabelTree from_nodes(std::vector<NodeSpec> nodes);

  std::size_t vertex_count() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  VertexId root() const noexcept { return root_; }

  const std::string& name(VertexId v) const { return nodes_.at(idx(v)).name; }
  VertexId parent(VertexId v) const { return nodes_.at(idx(v)).parent; }
  /// Weight of the edge from v to its parent (0 for the root).
  double edge_weight(VertexId v) const { return nodes_.at(idx(v)).weight; }
  std::span<const VertexId> children(VertexId v) const { return children_.at(idx(v)); }
  bool is_leaf(VertexId v) const { return children_.at(idx(v)).empty(); }

  /// Edge count from the root.
  int depth(VertexId v) const { return depth_.at(idx(v)); }
  /// Longest downward edge count to a leaf; leaves have height 0.
  int height(VertexId v) const { return height_.at(idx(v)); }
  /// Sum of edge weights from the root.
  double weighted_depth(VertexId v) const { return wdepth_.at(idx(v)); }

  /// Leaf vertex of each fine class, indexed by class.
  std::span<const VertexId> leaves() const noexcept { return leaves_; }
  VertexId leaf_vertex(int fine_class) const { return leaves_.at(static_cast<std::size_t>(fine_class)); }
  /// Fine class of a leaf vertex, or -1 for internal vertices.
  int class_of(VertexId v) const { return class_of_.at(idx(v)); }
  /// Parent vertex of the class's leaf (its coarse label).
  VertexId coarse_of(int fine_class) const { return parent(leaf_vertex(fine_class)); }

  std::optional<VertexId> find(std::string_view name) const;
  VertexId lca(VertexId a, VertexId b) const;
  /// Weighted path length between two vertices.
  double distance(VertexId a, VertexId b) const;
  /// Fine classes whose leaves lie in the subtree of v, ascending.
  std::vector<int> classes_under(VertexId v) const;

  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }

 private:
  static std::size_t idx(VertexId v) { return static_cast<std::size_t>(v); }

  std::vector<NodeSpec> nodes_;
  std::vector<std::vector<VertexId>> children_;
  std::vector<int> depth_;
  std::vector<int> height_;
  std::vector<double> wdepth_;
  std::vector<VertexId> leaves_;
  std::vector<int> class_of_;
  VertexId root_ = kNoVertex;
};

/// All-pairs tree distances over the vertices (vertex-id order).
struct TreeMetric {
  Matrix dist;
};

TreeMetric tree_metric(const LabelTree& tree);

/// Height of the lowest common ancestor of two leaves. Throws NotALeaf.
int lca_height(const LabelTree& tree, VertexId leaf_a, VertexId leaf_b);

/// Balanced unit-weight tree from per-level counts listed root first
/// (C_H = 1, ..., C_0). Each count must divide the next.
LabelTree balanced_tree(std::span<const std::size_t> level_counts);

/// Parses the nested JSON hierarchy format
/// `{"name": ..., "weight": ..., "children": [...]}`.
LabelTree parse_tree(std::string_view text);
std::string serialize_tree(const LabelTree& tree);

/// Copy of `tree` where shallow leaves receive unit-weight dummy parents so
/// every leaf sits at the same depth. Leaf order is preserved.
LabelTree normalize_depths(const LabelTree& tree);

/// root -> {transportation, animal} over the ten CIFAR10 classes.
LabelTree builtin_cifar10_tree();

/// Feature rows with fine-class labels referring to tree leaves.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

/// CSV with header `label,f0,...,f{d-1}`; labels are leaf names.
LabeledDataset read_dataset_csv(std::istream& in, const LabelTree& tree);
LabeledDataset read_dataset_csv_file(const std::string& path, const LabelTree& tree);
void write_dataset_csv(std::ostream& out, const LabeledDataset& data, const LabelTree& tree);

}  // namespace hypstruct::hierarchy
