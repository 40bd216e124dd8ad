#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hypstruct/geometry.hpp"
#include "hypstruct/hierarchy.hpp"
#include "hypstruct/matrix.hpp"

namespace hypstruct::diagnostics {

using hierarchy::LabelTree;

/// Symmetric, nonnegative distances with a zero diagonal.
class DistanceMatrix {
 public:
  /// Validates; throws NotSymmetric or InvalidArgument.
  explicit DistanceMatrix(Matrix dist);

  static DistanceMatrix euclidean(const Matrix& points);
  /// Rows are Poincare ball coordinates for curvature c.
  static DistanceMatrix poincare(const Matrix& points, geometry::Curvature c);

  std::size_t size() const noexcept { return dist_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return dist_(i, j); }
  const Matrix& matrix() const noexcept { return dist_; }
  double diameter() const noexcept;

 private:
  Matrix dist_;
};

/// (d(x,y) + d(x,z) - d(y,z)) / 2, the product of y and z seen from x.
double gromov_product(const DistanceMatrix& dm, std::size_t x, std::size_t y, std::size_t z);

inline constexpr std::size_t kExactDeltaLimit = 400;

struct DeltaOptions {
  enum class Mode { exact, sampled } mode = Mode::exact;
  std::size_t samples = 2'000'000;
  std::uint64_t seed = 0;
};

struct DeltaResult {
  double delta = 0.0;
  /// 2 delta / diam; empty when the diameter is zero.
  std::optional<double> delta_rel;
  double diameter = 0.0;
};

/// Gromov delta via the four-point condition: for every quadruple the gap
/// between the largest and second-largest of the three pair sums, halved.
/// Exact mode scans all quadruples (n <= kExactDeltaLimit, otherwise
/// PreconditionViolated); sampled mode draws `samples` seeded quadruples, so
/// a larger budget with the same seed never lowers the estimate.
DeltaResult delta_hyperbolicity(const DistanceMatrix& dm, const DeltaOptions& opts = {});

/// delta_rel, throwing ZeroDiameter when all points coincide.
double relative_delta(const DistanceMatrix& dm, const DeltaOptions& opts = {});

enum class DistanceMode { l2, poincare };

/// CPCC between leaf-pair tree distances and class-prototype distances:
/// Euclidean centroids for l2, exp-mapped Einstein averages for poincare.
double test_cpcc(const Matrix& features, std::span<const int> labels, const LabelTree& tree,
                 DistanceMode mode, geometry::Curvature c = geometry::Curvature{});

enum class Level { fine, coarse };

struct KnnResult {
  /// Fine class indices, or coarse (parent) vertex ids at the coarse level.
  std::vector<int> predictions;
  /// Fraction correct; empty when no query labels were given.
  std::optional<double> accuracy;
};

/// l2 k-nearest-neighbour majority vote. Neighbours are ordered by distance
/// then training index; vote ties go to the smallest label.
KnnResult knn_classify(const Matrix& train, std::span<const int> train_labels, const Matrix& queries,
                       std::span<const int> query_labels, std::size_t k, Level level,
                       const LabelTree& tree);

/// Centers rows by a reference mean and scales each row to unit length.
struct FeatureStandardizer {
  std::vector<double> mean;

  static FeatureStandardizer fit(const Matrix& reference);
  Matrix apply(const Matrix& features) const;
};

struct GaussianFit {
  std::vector<double> mu;
  Matrix sigma;
  Matrix sigma_inv;
  double ridge = 0.0;
};

/// Sample mean, unbiased covariance and the inverse of sigma + ridge * I,
/// ridge = ridge_scale * trace(sigma) / d (ridge_scale itself when the trace
/// is zero).
GaussianFit fit_gaussian(const Matrix& features, double ridge_scale = 1e-6);

double mahalanobis_score(std::span<const double> x, const GaussianFit& fit);

/// P(ood > id) + P(tie) / 2; OOD is the positive class.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct OodReport {
  double auroc = 0.0;
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

/// Fits the single Gaussian on the in-distribution training features and
/// scores the evaluation and OOD sets. With `standardize`, every set is first
/// passed through a FeatureStandardizer fitted on the training features.
OodReport mahalanobis_ood(const Matrix& id_train, const Matrix& id_eval, const Matrix& ood, bool standardize = true);

/// Rows are methods, columns datasets. Per dataset the method ranked r (1 =
/// highest AUROC) among M earns M - r points; tied methods share the mean.
std::vector<double> borda_count(const std::vector<std::vector<std::optional<double>>>& table);

}  // namespace hypstruct::diagnostics
