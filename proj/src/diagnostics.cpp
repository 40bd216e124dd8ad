#include "hypstruct/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hypstruct/detail/geometry_kernels.hpp"
#include "hypstruct/error.hpp"
#include "hypstruct/objective.hpp"
#include "hypstruct/parallel.hpp"

namespace hypstruct::diagnostics {

DistanceMatrix::DistanceMatrix(Matrix dist) : dist_(std::move(dist)) {
  if (dist_.rows() != dist_.cols()) throw Error(ErrorCode::NotSymmetric, "distance matrix is not square");
  for (std::size_t i = 0; i < dist_.rows(); ++i) {
    if (dist_(i, i) != 0.0) throw Error(ErrorCode::InvalidArgument, "nonzero diagonal distance");
    for (std::size_t j = 0; j < dist_.cols(); ++j) {
      const double d = dist_(i, j);
      if (!(d >= 0.0) || !std::isfinite(d)) {
        throw Error(ErrorCode::InvalidArgument, "distances must be finite and nonnegative");
      }
      if (std::abs(d - dist_(j, i)) > 1e-12 * std::max(1.0, d)) {
        throw Error(ErrorCode::NotSymmetric, "distance matrix is not symmetric");
      }
    }
  }
}

DistanceMatrix DistanceMatrix::euclidean(const Matrix& points) {
  const std::size_t n = points.rows();
  Matrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double t = points(i, k) - points(j, k);
        s += t * t;
      }
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  }
  return DistanceMatrix(std::move(d));
}

DistanceMatrix DistanceMatrix::poincare(const Matrix& points, geometry::Curvature c) {
  const std::size_t n = points.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(c.value() * geometry::detail::squared_norm(points.row(i)) < 1.0)) {
      throw Error(ErrorCode::OutsideBall, "row " + std::to_string(i) + " is outside the ball");
    }
  }
  Matrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = geometry::detail::poincare_distance(points.row(i), points.row(j), c.value());
  return DistanceMatrix(std::move(d));
}

double DistanceMatrix::diameter() const noexcept {
  double m = 0.0;
  for (double x : dist_.data()) m = std::max(m, x);
  return m;
}

double gromov_product(const DistanceMatrix& dm, std::size_t x, std::size_t y, std::size_t z) {
  const std::size_t n = dm.size();
  if (x >= n || y >= n || z >= n) throw Error(ErrorCode::IndexOutOfRange, "point index out of range");
  return 0.5 * (dm(x, y) + dm(x, z) - dm(y, z));
}

namespace {

double four_point_gap(const DistanceMatrix& dm, std::size_t x, std::size_t y, std::size_t z,
                      std::size_t w) {
  double s[3] = {dm(x, y) + dm(z, w), dm(x, z) + dm(y, w), dm(x, w) + dm(y, z)};
  std::sort(s, s + 3);
  return 0.5 * (s[2] - s[1]);
}

}  // namespace

DeltaResult delta_hyperbolicity(const DistanceMatrix& dm, const DeltaOptions& opts) {
  const std::size_t n = dm.size();
  DeltaResult r;
  r.diameter = dm.diameter();
  if (n >= 4) {
    if (opts.mode == DeltaOptions::Mode::exact) {
      if (n > kExactDeltaLimit) {
        throw Error(ErrorCode::PreconditionViolated, "exact delta is limited to " +
                                                         std::to_string(kExactDeltaLimit) +
                                                         " points; use sampled mode");
      }
      const std::size_t workers = std::min(worker_count(), n);
      std::vector<double> best(workers, 0.0);
      parallel_for(workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t w = begin; w < end; ++w) {
          double local = 0.0;
          for (std::size_t i = w; i < n; i += workers)
            for (std::size_t j = i + 1; j < n; ++j)
              for (std::size_t k = j + 1; k < n; ++k)
                for (std::size_t l = k + 1; l < n; ++l) local = std::max(local, four_point_gap(dm, i, j, k, l));
          best[w] = local;
        }
      });
      r.delta = *std::max_element(best.begin(), best.end());
    } else {
      std::mt19937_64 eng(opts.seed);
      for (std::size_t s = 0; s < opts.samples; ++s) {
        const std::size_t x = eng() % n, y = eng() % n, z = eng() % n, w = eng() % n;
        r.delta = std::max(r.delta, four_point_gap(dm, x, y, z, w));
      }
    }
  }
  if (r.diameter > 0.0) r.delta_rel = 2.0 * r.delta / r.diameter;
  return r;
}

double relative_delta(const DistanceMatrix& dm, const DeltaOptions& opts) {
  const auto r = delta_hyperbolicity(dm, opts);
  if (!r.delta_rel) throw Error(ErrorCode::ZeroDiameter, "all points coincide");
  return *r.delta_rel;
}

double test_cpcc(const Matrix& features, std::span<const int> labels, const LabelTree& tree,
                 DistanceMode mode, geometry::Curvature c) {
  objective::Batch batch{features, std::vector<int>(labels.begin(), labels.end())};
  objective::ObjectiveConfig cfg;
  cfg.c = c;
  cfg.tree_scope = objective::TreeScope::leaf_only;
  cfg.centroid_mode = objective::CentroidMode::klein_average;
  return mode == DistanceMode::l2 ? objective::l2_cpcc_loss(batch, tree, cfg)
                                  : objective::hypcpcc_loss(batch, tree, cfg);
}

KnnResult knn_classify(const Matrix& train, std::span<const int> train_labels, const Matrix& queries,
                       std::span<const int> query_labels, std::size_t k, Level level,
                       const LabelTree& tree) {
  const std::size_t n = train.rows();
  if (train_labels.size() != n) throw Error(ErrorCode::LengthMismatch, "one label per training row");
  if (k == 0 || k > n) throw Error(ErrorCode::InvalidArgument, "k must lie in [1, n_train]");
  if (queries.cols() != train.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "query and training dimensions differ");
  }
  if (!query_labels.empty() && query_labels.size() != queries.rows()) {
    throw Error(ErrorCode::LengthMismatch, "one label per query row");
  }
  auto to_level = [&](int fine) { return level == Level::fine ? fine : tree.coarse_of(fine); };
  std::vector<int> train_level(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    train_level[i] = to_level(train_labels[i]);
    max_label = std::max(max_label, train_level[i]);
  }

  KnnResult out;
  out.predictions.resize(queries.rows());
  parallel_for(queries.rows(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> dist(n);
    std::vector<std::size_t> votes(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t q = begin; q < end; ++q) {
      const auto x = queries.row(q);
      for (std::size_t i = 0; i < n; ++i) {
        const auto t = train.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double diff = x[j] - t[j];
          s += diff * diff;
        }
        dist[i] = {s, i};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t m = 0; m < k; ++m) ++votes[static_cast<std::size_t>(train_level[dist[m].second])];
      out.predictions[q] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  });
  if (!query_labels.empty()) {
    std::size_t correct = 0;
    for (std::size_t q = 0; q < queries.rows(); ++q) correct += out.predictions[q] == to_level(query_labels[q]);
    out.accuracy = queries.rows() ? static_cast<double>(correct) / static_cast<double>(queries.rows()) : 0.0;
  }
  return out;
}

FeatureStandardizer FeatureStandardizer::fit(const Matrix& reference) {
  if (reference.rows() == 0) throw Error(ErrorCode::EmptyInput, "no reference rows");
  FeatureStandardizer s;
  s.mean.assign(reference.cols(), 0.0);
  for (std::size_t i = 0; i < reference.rows(); ++i)
    for (std::size_t j = 0; j < reference.cols(); ++j) s.mean[j] += reference(i, j);
  for (auto& m : s.mean) m /= static_cast<double>(reference.rows());
  return s;
}

Matrix FeatureStandardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "feature dimension differs");
  Matrix out(features.rows(), features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < features.cols(); ++j) {
      out(i, j) = features(i, j) - mean[j];
      n2 += out(i, j) * out(i, j);
    }
    if (n2 > 0.0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t j = 0; j < features.cols(); ++j) out(i, j) *= inv;
    }
  }
  return out;
}

GaussianFit fit_gaussian(const Matrix& features, double ridge_scale) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two rows to fit a Gaussian");
  GaussianFit fit;
  fit.mu.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) fit.mu[j] += features(i, j);
  for (auto& m : fit.mu) m /= static_cast<double>(n);

  fit.sigma = Matrix(d, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = features(i, a) - fit.mu[a];
      for (std::size_t b = a; b < d; ++b) fit.sigma(a, b) += da * (features(i, b) - fit.mu[b]);
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      fit.sigma(a, b) /= static_cast<double>(n - 1);
      fit.sigma(b, a) = fit.sigma(a, b);
    }
    trace += fit.sigma(a, a);
  }
  fit.ridge = trace > 0.0 ? ridge_scale * trace / static_cast<double>(d) : ridge_scale;

  Eigen::MatrixXd reg(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) reg(a, b) = fit.sigma(a, b) + (a == b ? fit.ridge : 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularAfterRegularization, "regularized covariance is not positive definite");
  }
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  fit.sigma_inv = Matrix(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      const double v = 0.5 * (inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +
                               inv(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)));
      if (!std::isfinite(v)) throw Error(ErrorCode::SingularAfterRegularization, "non-finite inverse");
      fit.sigma_inv(a, b) = v;
    }
  }
  return fit;
}

double mahalanobis_score(std::span<const double> x, const GaussianFit& fit) {
  const std::size_t d = fit.mu.size();
  if (x.size() != d) throw Error(ErrorCode::DimensionMismatch, "score input dimension differs from the fit");
  std::vector<double> diff(d);
  for (std::size_t j = 0; j < d; ++j) diff[j] = x[j] - fit.mu[j];
  double s = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < d; ++b) row += fit.sigma_inv(a, b) * diff[b];
    s += diff[a] * row;
  }
  return std::max(0.0, s);
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw Error(ErrorCode::EmptyInput, "AUROC needs both score sets");
  std::vector<std::pair<double, bool>> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Sum of mid-ranks of the OOD scores.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank_sum += all[k].second ? mid : 0.0;
    i = j;
  }
  const double m = static_cast<double>(ood_scores.size());
  const double n = static_cast<double>(id_scores.size());
  return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

OodReport mahalanobis_ood(const Matrix& id_train, const Matrix& id_eval, const Matrix& ood, bool standardize) {
  if (ood.rows() == 0 || id_eval.rows() == 0) throw Error(ErrorCode::EmptyInput, "empty evaluation set");
  Matrix train = id_train, eval = id_eval, out = ood;
  if (standardize) {
    const auto s = FeatureStandardizer::fit(id_train);
    train = s.apply(train);
    eval = s.apply(eval);
    out = s.apply(out);
  }
  const auto fit = fit_gaussian(train);
  OodReport r;
  for (std::size_t i = 0; i < eval.rows(); ++i) r.id_scores.push_back(mahalanobis_score(eval.row(i), fit));
  for (std::size_t i = 0; i < out.rows(); ++i) r.ood_scores.push_back(mahalanobis_score(out.row(i), fit));
  r.auroc = auroc(r.id_scores, r.ood_scores);
  return r;
}

std::vector<double> borda_count(const std::vector<std::vector<std::optional<double>>>& table) {
  const std::size_t methods = table.size();
  if (methods == 0) throw Error(ErrorCode::EmptyInput, "no methods");
  const std::size_t datasets = table.front().size();
  for (const auto& row : table) {
    if (row.size() != datasets) throw Error(ErrorCode::MissingEntry, "ragged AUROC table");
    for (const auto& v : row) {
      if (!v) throw Error(ErrorCode::MissingEntry, "missing AUROC entry");
    }
  }
  std::vector<double> points(methods, 0.0);
  const double M = static_cast<double>(methods);
  for (std::size_t d = 0; d < datasets; ++d) {
    std::vector<std::size_t> order(methods);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *table[a][d] > *table[b][d]; });
    std::size_t i = 0;
    while (i < methods) {
      std::size_t j = i;
      while (j < methods && *table[order[j]][d] == *table[order[i]][d]) ++j;
      // Ranks i+1..j share the mean of their points M - r.
      double share = 0.0;
      for (std::size_t r = i + 1; r <= j; ++r) share += M - static_cast<double>(r);
      share /= static_cast<double>(j - i);
      for (std::size_t k = i; k < j; ++k) points[order[k]] += share;
      i = j;
    }
  }
  return points;
}

}  // namespace hypstruct::diagnostics
