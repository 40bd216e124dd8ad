#include "hypstruct/objective.hpp"

#include <algorithm>
#include <cmath>

#include "hypstruct/detail/objective_kernels.hpp"
#include "hypstruct/error.hpp"

namespace hypstruct::objective {

namespace detail {

VertexGroups group_rows(std::span<const int> labels, const LabelTree& tree, TreeScope scope) {
  std::vector<std::vector<std::size_t>> by_vertex(tree.vertex_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= tree.leaf_count()) {
      throw Error(ErrorCode::IndexOutOfRange, "label " + std::to_string(y) + " is not a leaf class");
    }
    VertexId v = tree.leaf_vertex(y);
    if (scope == TreeScope::leaf_only) {
      by_vertex[static_cast<std::size_t>(v)].push_back(i);
      continue;
    }
    for (; v != hierarchy::kNoVertex; v = tree.parent(v)) {
      by_vertex[static_cast<std::size_t>(v)].push_back(i);
    }
  }
  VertexGroups g;
  for (std::size_t v = 0; v < by_vertex.size(); ++v) {
    if (by_vertex[v].empty()) continue;
    g.vertices.push_back(static_cast<VertexId>(v));
    g.rows.push_back(std::move(by_vertex[v]));
  }
  return g;
}

}  // namespace detail

namespace {

void require_batch(const Batch& batch) {
  if (batch.features.rows() == 0) throw Error(ErrorCode::EmptyBatch, "batch has no samples");
  if (batch.labels.size() != batch.features.rows()) {
    throw Error(ErrorCode::LengthMismatch, "batch has " + std::to_string(batch.features.rows()) +
                                               " rows but " + std::to_string(batch.labels.size()) +
                                               " labels");
  }
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "beta must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "tau must be > 0");
  if (!(clip_epsilon > 0.0) || !(clip_epsilon < c.radius())) {
    throw Error(ErrorCode::InvalidArgument, "clip epsilon must lie in (0, 1/sqrt(c))");
  }
}

bool Prototypes::present(VertexId v) const {
  return std::binary_search(vertices.begin(), vertices.end(), v);
}

const geometry::PoincarePoint& Prototypes::at(VertexId v) const {
  const auto it = std::lower_bound(vertices.begin(), vertices.end(), v);
  if (it == vertices.end() || *it != v) {
    throw Error(ErrorCode::MissingEntry, "vertex " + std::to_string(v) + " has no prototype");
  }
  return points[static_cast<std::size_t>(it - vertices.begin())];
}

double cpcc(std::span<const double> tree_dists, std::span<const double> feat_dists) {
  return detail::pearson(tree_dists, feat_dists);
}

double l2_dataset_distance(const Matrix& group_a, const Matrix& group_b) {
  if (group_a.rows() == 0 || group_b.rows() == 0) {
    throw Error(ErrorCode::EmptyGroup, "dataset distance needs two nonempty groups");
  }
  if (group_a.cols() != group_b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "groups have different feature dimensions");
  }
  std::vector<std::size_t> ra(group_a.rows()), rb(group_b.rows());
  for (std::size_t i = 0; i < ra.size(); ++i) ra[i] = i;
  for (std::size_t i = 0; i < rb.size(); ++i) rb[i] = i;
  const auto ma = detail::mean_of_rows(group_a, ra);
  const auto mb = detail::mean_of_rows(group_b, rb);
  return detail::euclidean_distance(std::span<const double>(ma), std::span<const double>(mb));
}

Prototypes hyp_prototypes(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg) {
  require_batch(batch);
  const auto g = detail::group_rows(batch.labels, tree, cfg.tree_scope);
  auto coords = detail::ball_prototypes(batch.features, g, cfg);
  Prototypes p;
  p.vertices = g.vertices;
  for (auto& c : coords) p.points.emplace_back(std::move(c), cfg.c);
  return p;
}

std::pair<std::vector<VertexId>, Matrix> euclidean_prototypes(const Batch& batch,
                                                               const LabelTree& tree,
                                                               TreeScope scope) {
  require_batch(batch);
  const auto g = detail::group_rows(batch.labels, tree, scope);
  const auto coords = detail::euclidean_centroids(batch.features, g);
  Matrix m(coords.size(), batch.features.cols());
  for (std::size_t i = 0; i < coords.size(); ++i) std::copy(coords[i].begin(), coords[i].end(), m.row(i).begin());
  return {g.vertices, std::move(m)};
}

double hypcpcc_loss(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg) {
  require_batch(batch);
  ObjectiveConfig hyp = cfg;
  hyp.cpcc_geometry = CpccGeometry::hyperbolic;
  return detail::cpcc_term(batch.features, batch.labels, tree, hyp);
}

double l2_cpcc_loss(const Batch& batch, const LabelTree& tree, const ObjectiveConfig& cfg) {
  require_batch(batch);
  ObjectiveConfig l2 = cfg;
  l2.cpcc_geometry = CpccGeometry::euclidean;
  return detail::cpcc_term(batch.features, batch.labels, tree, l2);
}

double centering_loss(const Batch& batch, const ObjectiveConfig& cfg) {
  return detail::centering(batch.features, cfg);
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  return detail::cross_entropy(logits, labels);
}

double supcon_loss(const Matrix& embeddings, std::span<const int> labels, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be > 0");
  return detail::supcon(embeddings, labels, tau);
}

ObjectiveValue composite_objective(const Batch& batch, const LabelTree& tree,
                                   const ObjectiveConfig& cfg, const Matrix& flat_inputs) {
  cfg.validate();
  require_batch(batch);
  if (flat_inputs.rows() != batch.features.rows()) {
    throw Error(ErrorCode::LengthMismatch, "flat inputs need one row per batch row");
  }
  const auto b = detail::composite(batch.features, batch.labels, tree, cfg, flat_inputs);
  return {b.total, b.flat, b.cpcc, b.center, b.cpcc_skipped};
}

GradientResult gradient(const Closure& f, std::span<const double> params) {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<ad::Var> x;
  x.reserve(params.size());
  for (double p : params) x.push_back(ad::Var::independent(p));
  const auto before = geometry::clamp_stats();
  const ad::Var y = f(x);
  const auto after = geometry::clamp_stats();
  GradientResult r;
  r.value = y.value();
  r.grad = ad::gradient(y, x);
  r.non_differentiable = after.boundary_clamps != before.boundary_clamps ||
                         after.clip_active != before.clip_active;
  return r;
}

GradientResult smooth_gradient(const Closure& f, std::span<const double> params) {
  auto r = gradient(f, params);
  if (r.non_differentiable) {
    throw Error(ErrorCode::NonDifferentiablePoint,
                "a boundary clamp or clip branch was active during evaluation");
  }
  return r;
}

}  // namespace hypstruct::objective
