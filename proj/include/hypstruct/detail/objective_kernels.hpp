#pragma once

// Scalar-generic loss kernels shared by the double-valued public API and the
// taped training loop.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypstruct/detail/geometry_kernels.hpp"
#include "hypstruct/error.hpp"
#include "hypstruct/matrix.hpp"
#include "hypstruct/objective.hpp"

namespace hypstruct::objective::detail {

using ad::value;

/// Present in-scope vertices (ascending) and the batch rows under each.
struct VertexGroups {
  std::vector<VertexId> vertices;
  std::vector<std::vector<std::size_t>> rows;
};

VertexGroups group_rows(std::span<const int> labels, const LabelTree& tree, TreeScope scope);

template <class T>
std::vector<std::vector<T>> map_rows(const BasicMatrix<T>& z, double c) {
  std::vector<std::vector<T>> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) out[i] = geometry::detail::exp_map_origin(z.row(i), c);
  return out;
}

template <class T>
std::vector<T> mean_of_rows(const BasicMatrix<T>& z, std::span<const std::size_t> rows) {
  std::vector<T> m(z.cols(), T(0.0));
  for (std::size_t r : rows) {
    auto src = z.row(r);
    for (std::size_t j = 0; j < z.cols(); ++j) m[j] += src[j];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& x : m) x = x * inv;
  return m;
}

template <class T>
std::vector<T> midpoint_of(const std::vector<std::vector<T>>& mapped,
                           std::span<const std::size_t> rows, double c) {
  std::vector<std::span<const T>> views;
  views.reserve(rows.size());
  for (std::size_t r : rows) views.emplace_back(mapped[r]);
  return geometry::detail::poincare_midpoint<T>(views, c);
}

/// Ball prototypes, one per group.
template <class T>
std::vector<std::vector<T>> ball_prototypes(const BasicMatrix<T>& z, const VertexGroups& g,
                                            const ObjectiveConfig& cfg) {
  const double c = cfg.c.value();
  std::vector<std::vector<T>> out;
  out.reserve(g.vertices.size());
  if (cfg.centroid_mode == CentroidMode::klein_average) {
    const auto mapped = map_rows(z, c);
    for (const auto& rows : g.rows) out.push_back(midpoint_of(mapped, rows, c));
    return out;
  }
  for (const auto& rows : g.rows) {
    const auto m = mean_of_rows(z, rows);
    out.push_back(cfg.map_mode == MapMode::exp_map
                      ? geometry::detail::exp_map_origin(std::span<const T>(m), c)
                      : geometry::detail::clip_to_ball(std::span<const T>(m), c, cfg.clip_epsilon));
  }
  return out;
}

template <class T>
std::vector<std::vector<T>> euclidean_centroids(const BasicMatrix<T>& z, const VertexGroups& g) {
  std::vector<std::vector<T>> out;
  out.reserve(g.vertices.size());
  for (const auto& rows : g.rows) out.push_back(mean_of_rows(z, rows));
  return out;
}

template <class T>
T euclidean_distance(std::span<const T> a, std::span<const T> b) {
  using std::sqrt;
  T s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    s += d * d;
  }
  if (value(s) == 0.0) return T(0.0);
  return sqrt(s);
}

/// Pearson correlation; x is constant data, y may be taped.
template <class T>
T pearson(std::span<const double> x, std::span<const T> y) {
  using std::sqrt;
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "distance vectors have lengths " +
                                               std::to_string(x.size()) + " and " +
                                               std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorCode::DegenerateVariance, "fewer than two pairs");
  const double n = static_cast<double>(x.size());
  double xbar = 0.0;
  for (double v : x) xbar += v;
  xbar /= n;
  T ybar(0.0);
  for (const T& v : y) ybar += v;
  ybar = ybar / n;
  double sxx = 0.0;
  T sxy(0.0);
  T syy(0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - xbar;
    const T dy = y[k] - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(value(syy) > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "a distance vector is constant");
  }
  return sxy / (std::sqrt(sxx) * sqrt(syy));
}

/// Tree and feature distances over unordered pairs of present vertices, in
/// (i < j) order.
template <class T>
T cpcc_term(const BasicMatrix<T>& z, std::span<const int> labels, const LabelTree& tree,
            const ObjectiveConfig& cfg) {
  const VertexGroups g = group_rows(labels, tree, cfg.tree_scope);
  if (g.vertices.size() < 3) {
    throw Error(ErrorCode::InsufficientVertices,
                std::to_string(g.vertices.size()) + " present vertices give fewer than three pairs");
  }
  const bool hyperbolic = cfg.cpcc_geometry == CpccGeometry::hyperbolic;
  const auto protos = hyperbolic ? ball_prototypes(z, g, cfg) : euclidean_centroids(z, g);
  const std::size_t m = g.vertices.size();
  std::vector<double> tree_d;
  std::vector<T> feat_d;
  tree_d.reserve(m * (m - 1) / 2);
  feat_d.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      tree_d.push_back(tree.distance(g.vertices[i], g.vertices[j]));
      const std::span<const T> a(protos[i]);
      const std::span<const T> b(protos[j]);
      feat_d.push_back(hyperbolic ? geometry::detail::poincare_distance(a, b, cfg.c.value())
                                  : euclidean_distance(a, b));
    }
  }
  return pearson(std::span<const double>(tree_d), std::span<const T>(feat_d));
}

template <class T>
T vector_norm(std::span<const T> v) {
  using std::sqrt;
  const T n2 = geometry::detail::squared_norm(v);
  if (value(n2) == 0.0) return T(0.0);
  return sqrt(n2);
}

template <class T>
T centering(const BasicMatrix<T>& z, const ObjectiveConfig& cfg) {
  if (z.rows() == 0) throw Error(ErrorCode::EmptyBatch, "centering loss of an empty batch");
  std::vector<std::size_t> all(z.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (cfg.centroid_mode == CentroidMode::klein_average &&
      cfg.cpcc_geometry == CpccGeometry::hyperbolic) {
    const auto mid = midpoint_of(map_rows(z, cfg.c.value()), all, cfg.c.value());
    return vector_norm(std::span<const T>(mid));
  }
  const auto m = mean_of_rows(z, all);
  return vector_norm(std::span<const T>(m));
}

template <class T>
T cross_entropy(const BasicMatrix<T>& logits, std::span<const int> labels) {
  using std::exp;
  using std::log;
  if (logits.rows() == 0) throw Error(ErrorCode::EmptyBatch, "cross entropy of an empty batch");
  if (labels.size() != logits.rows()) {
    throw Error(ErrorCode::LengthMismatch, "one label per logit row is required");
  }
  T total(0.0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= row.size()) {
      throw Error(ErrorCode::IndexOutOfRange, "label " + std::to_string(y) + " outside logits");
    }
    double mx = value(row[0]);
    for (const T& v : row) mx = std::max(mx, value(v));
    T s(0.0);
    for (const T& v : row) s += exp(v - mx);
    total += (mx + log(s)) - row[static_cast<std::size_t>(y)];
  }
  return total / static_cast<double>(logits.rows());
}

inline constexpr double kUnitNormTolerance = 1e-6;

template <class T>
T supcon(const BasicMatrix<T>& u, std::span<const int> labels, double tau) {
  using std::exp;
  using std::log;
  const std::size_t n = u.rows();
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "SupCon loss of an empty batch");
  if (labels.size() != n) throw Error(ErrorCode::LengthMismatch, "one label per embedding row");
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = std::sqrt(value(geometry::detail::squared_norm(u.row(i))));
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw Error(ErrorCode::UnnormalizedInput, "row " + std::to_string(i) + " has norm " +
                                                    std::to_string(norm));
    }
  }
  T total(0.0);
  std::size_t anchors = 0;
  std::vector<T> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t k = 0; k < n; ++k) positives += (k != i && labels[k] == labels[i]);
    if (positives == 0) continue;
    double mx = -1e300;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      s[k] = geometry::detail::dot(u.row(i), u.row(k)) / tau;
      mx = std::max(mx, value(s[k]));
    }
    T pos(0.0);
    T all(0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const T e = exp(s[k] - mx);
      all += e;
      if (labels[k] == labels[i]) pos += e;
    }
    total += log(all) - log(pos) + std::log(static_cast<double>(positives));
    ++anchors;
  }
  if (anchors == 0) {
    throw Error(ErrorCode::ClassWithoutPositive, "no anchor has a same-class partner");
  }
  return total / static_cast<double>(anchors);
}

template <class T>
struct Breakdown {
  T total{0.0};
  T flat{0.0};
  std::optional<T> cpcc;
  T center{0.0};
  bool cpcc_skipped = false;
};

/// flat - alpha * CPCC + beta * center. A batch whose CPCC is undefined
/// (too few present vertices, constant distances) drops the term.
template <class T>
Breakdown<T> composite(const BasicMatrix<T>& z, std::span<const int> labels, const LabelTree& tree,
                       const ObjectiveConfig& cfg, const BasicMatrix<T>& flat_inputs) {
  Breakdown<T> out;
  out.flat = cfg.flat_loss == FlatLoss::cross_entropy ? cross_entropy(flat_inputs, labels)
                                                      : supcon(flat_inputs, labels, cfg.tau);
  out.total = out.flat;
  if (cfg.alpha > 0.0) {
    try {
      out.cpcc = cpcc_term(z, labels, tree, cfg);
      out.total = out.total - cfg.alpha * *out.cpcc;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientVertices && e.code() != ErrorCode::DegenerateVariance) {
        throw;
      }
      out.cpcc_skipped = true;
    }
  }
  if (cfg.beta > 0.0) {
    out.center = centering(z, cfg);
    out.total = out.total + cfg.beta * out.center;
  }
  return out;
}

}  // namespace hypstruct::objective::detail
