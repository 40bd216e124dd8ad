#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hypstruct/autodiff.hpp"
#include "hypstruct/geometry.hpp"
#include "hypstruct/hierarchy.hpp"
#include "hypstruct/matrix.hpp"

namespace hypstruct::objective {

using hierarchy::LabelTree;
using hierarchy::VertexId;

/// Which tree vertices take part in the CPCC pairs.
enum class TreeScope { leaf_only, full_tree };
/// How a vertex prototype is formed from its samples.
enum class CentroidMode { klein_average, euclidean_then_map };
/// Map applied to a Euclidean centroid in euclidean_then_map mode.
enum class MapMode { exp_map, clip };
enum class FlatLoss { cross_entropy, supcon };
/// Poincare distances between ball prototypes, or l2 distances between
/// Euclidean centroids.
enum class CpccGeometry { hyperbolic, euclidean };

struct ObjectiveConfig {
  double alpha = 1.0;
  double beta = 0.01;
  geometry::Curvature c{};
  double tau = 0.1;
  TreeScope tree_scope = TreeScope::full_tree;
  CentroidMode centroid_mode = CentroidMode::klein_average;
  MapMode map_mode = MapMode::exp_map;
  FlatLoss flat_loss = FlatLoss::cross_entropy;
  CpccGeometry cpcc_geometry = CpccGeometry::hyperbolic;
  double clip_epsilon = geometry::kDefaultClipEpsilon;

  /// Throws InvalidArgument when alpha/beta < 0 or tau <= 0.
  void validate() const;
};

/// Encoder outputs with their fine-class labels.
struct Batch {
  Matrix features;
  std::vector<int> labels;
};

/// Ball prototypes of the vertices that have at least one sample in scope.
struct Prototypes {
  std::vector<VertexId> vertices;  // ascending
  std::vector<geometry::PoincarePoint> points;

  bool present(VertexId v) const;
  const geometry::PoincarePoint& at(VertexId v) const;
};

/// Pearson correlation between paired distance collections.
double cpcc(std::span<const double> tree_dists, std::span<const double> feat_dists);

/// |mean(a) - mean(b)|.
double l2_dataset_distance(const Matrix& group_a, const Matrix& group_b);

Prototypes hyp_prototypes(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg);

/// Euclidean centroids of present in-scope vertices, same vertex order as
/// hyp_prototypes.
std::pair<std::vector<VertexId>, Matrix> euclidean_prototypes(const Batch& batch,
                                                               const LabelTree& tree,
                                                               TreeScope scope);

/// CPCC between tree distances and Poincare prototype distances. Throws
/// InsufficientVertices with fewer than three present vertices (fewer than
/// three pairs) and DegenerateVariance when either side is constant.
double hypcpcc_loss(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg);
double l2_cpcc_loss(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg);

double centering_loss(const Batch& batch, const ObjectiveConfig& cfg);

double cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Supervised contrastive loss over unit-norm rows. Anchors without a
/// same-class partner are left out of the mean.
double supcon_loss(const Matrix& embeddings, std::span<const int> labels, double tau);

/// Breakdown of the composite objective. `cpcc` is empty when the term was
/// not evaluated (alpha == 0) or skipped for a degenerate batch.
struct ObjectiveValue {
  double total = 0.0;
  double flat = 0.0;
  std::optional<double> cpcc;
  double center = 0.0;
  bool cpcc_skipped = false;
};

/// flat - alpha * CPCC + beta * center. `flat_inputs` holds logits for
/// cross entropy or unit-norm embeddings for SupCon, one row per batch row.
ObjectiveValue composite_objective(const Batch& batch, const LabelTree& tree,
                                   const ObjectiveConfig& cfg, const Matrix& flat_inputs);

struct GradientResult {
  double value = 0.0;
  std::vector<double> grad;
  /// A boundary clamp or clip branch was active while evaluating; the
  /// gradient treats those pieces as constant.
  bool non_differentiable = false;
};

using Closure = std::function<ad::Var(std::span<const ad::Var>)>;

/// Reverse-mode gradient of a scalar closure at `params`.
GradientResult gradient(const Closure& f, std::span<const double> params);

/// Same, but throws NonDifferentiablePoint instead of flagging.
GradientResult smooth_gradient(const Closure& f, std::span<const double> params);

}  // namespace hypstruct::objective
