#include "hypstruct/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>

#include "hypstruct/detail/spectral_kernels.hpp"
#include "hypstruct/error.hpp"

namespace hypstruct::spectral {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

void require_symmetric(const Matrix& K) {
  if (K.rows() != K.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  double scale = 1.0;
  for (double x : K.data()) scale = std::max(scale, std::abs(x));
  const double asym = max_abs_asymmetry(K);
  if (asym > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "max |K - K^T| = " + std::to_string(asym));
  }
}

std::vector<double> eigenvalues_of(const Matrix& K) {
  if (K.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(K), Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

/// Orthonormal basis of the complement of the all-ones vector in R^p.
Matrix helmert_basis(std::size_t p) {
  Matrix Q(p, p - 1, 0.0);
  for (std::size_t k = 1; k < p; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (std::size_t i = 0; i < k; ++i) Q(i, k - 1) = s;
    Q(k, k - 1) = -static_cast<double>(k) * s;
  }
  return Q;
}

}  // namespace

std::size_t EigenSpectrum::order() const noexcept {
  return std::accumulate(multiplicities.begin(), multiplicities.end(), std::size_t{0});
}

double EigenSpectrum::trace() const noexcept {
  long double t = 0.0L;
  for (std::size_t i = 0; i < values.size(); ++i) {
    t += static_cast<long double>(values[i]) * static_cast<long double>(multiplicities[i]);
  }
  return static_cast<double>(t);
}

std::vector<double> EigenSpectrum::expanded() const {
  std::vector<double> out;
  out.reserve(order());
  for (std::size_t i = 0; i < values.size(); ++i) out.insert(out.end(), multiplicities[i], values[i]);
  return out;
}

EigenSpectrum merge_spectrum(std::vector<double> values, double rel_tol) {
  std::sort(values.begin(), values.end(), std::greater<>());
  EigenSpectrum s;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    double sum = values[i];
    while (j < values.size() &&
           std::abs(values[j - 1] - values[j]) <= rel_tol * std::max(1.0, std::abs(values[j - 1]))) {
      sum += values[j];
      ++j;
    }
    s.values.push_back(sum / static_cast<double>(j - i));
    s.multiplicities.push_back(j - i);
    i = j;
  }
  return s;
}

std::vector<std::string> BlockCorrelationSpec::warnings() const {
  std::vector<std::string> out;
  for (std::size_t h = 0; h < r.size(); ++h) {
    if (r[h] < 0.0) out.push_back("r^" + std::to_string(h + 1) + " is negative");
    if (h > 0 && r[h] > r[h - 1]) {
      out.push_back("r^" + std::to_string(h + 1) + " exceeds r^" + std::to_string(h));
    }
  }
  return out;
}

Matrix build_block_matrix(const BlockCorrelationSpec& spec) {
  const auto& tree = spec.tree;
  const auto H = static_cast<std::size_t>(tree.height(tree.root()));
  if (spec.r.size() != H) {
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(H) +
                                                " correlation levels, got " +
                                                std::to_string(spec.r.size()));
  }
  const std::size_t n = tree.leaf_count();
  Matrix K = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int h = hierarchy::lca_height(tree, tree.leaf_vertex(static_cast<int>(i)),
                                          tree.leaf_vertex(static_cast<int>(j)));
      K(i, j) = K(j, i) = spec.r[static_cast<std::size_t>(h - 1)];
    }
  }
  return K;
}

EigenSpectrum balanced_eigenvalues_closed_form(std::span<const std::size_t> level_counts,
                                               std::span<const double> r) {
  if (level_counts.size() < 2 || level_counts.back() != 1) {
    throw Error(ErrorCode::InvalidLevelCounts, "level counts must run from the leaves up to one root");
  }
  const std::size_t H = level_counts.size() - 1;
  for (std::size_t h = 0; h < H; ++h) {
    if (level_counts[h + 1] == 0 || level_counts[h] % level_counts[h + 1] != 0) {
      throw Error(ErrorCode::InvalidLevelCounts, "each level count must divide the one below");
    }
  }
  if (r.size() != H) {
    throw Error(ErrorCode::InvalidArgument, "expected one correlation per height");
  }
  for (double x : r) {
    if (x < 0.0) throw Error(ErrorCode::PreconditionViolated, "correlations must be nonnegative");
  }
  // Extended precision so each eigenvalue is rounded once.
  std::vector<long double> rl(r.begin(), r.end());
  std::vector<double> values;
  for (const auto& [lambda, mult] : detail::balanced_levels<long double>(level_counts, rl)) {
    values.insert(values.end(), mult, static_cast<double>(lambda));
  }
  return merge_spectrum(std::move(values));
}

EigenSpectrum star_matrix_eigenvalues(std::size_t d, double p) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "star matrix needs d >= 2");
  std::vector<double> values(d - 1, 1.0 - p);
  values.push_back(1.0 + p * static_cast<double>(d - 1));
  return merge_spectrum(std::move(values));
}

BlockReduction two_level_block_reduction(const Matrix& K, std::span<const std::size_t> group_sizes,
                                         std::span<const double> within, const Matrix& across) {
  const std::size_t k = group_sizes.size();
  const std::size_t n = std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  if (K.rows() != n || K.cols() != n || within.size() != k || across.rows() != k ||
      across.cols() != k) {
    throw Error(ErrorCode::TemplateMismatch, "matrix and block template sizes disagree");
  }
  std::vector<std::size_t> group_of;
  for (std::size_t g = 0; g < k; ++g) {
    if (group_sizes[g] == 0) throw Error(ErrorCode::TemplateMismatch, "empty group");
    group_of.insert(group_of.end(), group_sizes[g], g);
  }
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t gi = group_of[i], gj = group_of[j];
      const double expect = i == j ? 1.0 : gi == gj ? within[gi] : across(gi, gj);
      if (std::abs(K(i, j) - expect) > tol) {
        throw Error(ErrorCode::TemplateMismatch, "entry (" + std::to_string(i) + ", " +
                                                     std::to_string(j) + ") deviates from the template");
      }
    }
  }
  BlockReduction out;
  std::vector<double> w;
  out.reduced = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const double pi = static_cast<double>(group_sizes[i]);
    w.insert(w.end(), group_sizes[i] - 1, 1.0 - within[i]);
    for (std::size_t j = 0; j < k; ++j) {
      const double pj = static_cast<double>(group_sizes[j]);
      out.reduced(i, j) = i == j ? 1.0 + (pi - 1.0) * within[i] : std::sqrt(pi * pj) * across(i, j);
    }
  }
  out.within = merge_spectrum(std::move(w));
  return out;
}

LevelReduction level_reduction(const Matrix& K, const LabelTree& tree, int h) {
  const std::size_t n = tree.leaf_count();
  if (K.rows() != n || K.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "matrix order differs from the leaf count");
  }
  const int H = tree.depth(tree.leaf_vertex(0));
  for (auto leaf : tree.leaves()) {
    if (tree.depth(leaf) != H) {
      throw Error(ErrorCode::PreconditionViolated, "leaves must share one depth (see normalize_depths)");
    }
  }
  if (h < 1 || h > H) throw Error(ErrorCode::InvalidArgument, "height outside [1, H]");

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
    const auto vid = static_cast<hierarchy::VertexId>(v);
    if (tree.depth(vid) != H - h) continue;
    std::vector<std::size_t> members;
    for (int c : tree.classes_under(vid)) members.push_back(static_cast<std::size_t>(c));
    groups.push_back(std::move(members));
  }

  LevelReduction out;
  std::vector<double> within;
  for (const auto& g : groups) {
    out.group_sizes.push_back(g.size());
    if (g.size() < 2) continue;
    const std::size_t p = g.size();
    const Matrix block = select_rows(transpose(select_rows(K, g)), g);
    const Matrix Q = helmert_basis(p);
    const Matrix compressed = multiply(transpose(Q), multiply(block, Q));
    const auto ev = eigenvalues_of(compressed);
    within.insert(within.end(), ev.begin(), ev.end());
  }
  out.within = merge_spectrum(std::move(within));

  const std::size_t k = groups.size();
  out.reduced = Matrix(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      double s = 0.0;
      for (std::size_t i : groups[a])
        for (std::size_t j : groups[b]) s += K(i, j);
      out.reduced(a, b) =
          s / std::sqrt(static_cast<double>(groups[a].size()) * static_cast<double>(groups[b].size()));
    }
  }
  return out;
}

bool generic_gap_condition(double M, double m, double delta, std::size_t p_max, std::size_t C_h) {
  if (p_max < 1 || C_h < 2) {
    throw Error(ErrorCode::PreconditionViolated, "need p_max >= 1 and C_h >= 2");
  }
  const double pm = static_cast<double>(p_max);
  return m <= (M - 2.0 * delta * (pm - 1.0)) / (pm * static_cast<double>(C_h - 1));
}

EigenSpectrum numerical_eigenvalues(const Matrix& K) {
  require_symmetric(K);
  return merge_spectrum(eigenvalues_of(K));
}

SymmetricEigen symmetric_eigen(const Matrix& K) {
  require_symmetric(K);
  const std::size_t n = K.rows();
  SymmetricEigen out;
  out.vectors = Matrix(n, n);
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(K));
  // Eigen returns ascending order.
  for (std::size_t j = 0; j < n; ++j) {
    const auto src = static_cast<Eigen::Index>(n - 1 - j);
    out.values.push_back(solver.eigenvalues()(src));
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = solver.eigenvectors()(static_cast<Eigen::Index>(i), src);
  }
  return out;
}

GramMatrix gram_matrix(const Matrix& Z, std::span<const int> labels, const LabelTree& tree) {
  const std::size_t n = Z.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "gram matrix needs at least two rows");
  if (labels.size() != n) throw Error(ErrorCode::LengthMismatch, "one label per row is required");
  const std::size_t d = Z.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += Z(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);

  Matrix U(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      U(i, j) = Z(i, j) - mean[j];
      norm2 += U(i, j) * U(i, j);
    }
    if (!(norm2 > 0.0)) {
      throw Error(ErrorCode::DegenerateRow, "row " + std::to_string(i) + " vanishes after centering");
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < d; ++j) U(i, j) *= inv;
  }

  GramMatrix g;
  g.order.resize(n);
  std::iota(g.order.begin(), g.order.end(), std::size_t{0});
  std::stable_sort(g.order.begin(), g.order.end(), [&](std::size_t a, std::size_t b) {
    return std::tuple(tree.coarse_of(labels[a]), labels[a], a) <
           std::tuple(tree.coarse_of(labels[b]), labels[b], b);
  });
  const Matrix S = select_rows(U, g.order);
  g.K = multiply(S, transpose(S));
  for (std::size_t i = 0; i < n; ++i) {
    g.K(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) g.K(j, i) = g.K(i, j);
  }
  return g;
}

std::vector<SpectralGap> phase_transition_detect(const EigenSpectrum& spectrum, std::size_t top_k) {
  const auto values = spectrum.expanded();
  if (values.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two eigenvalues");
  const std::size_t limit = std::min(top_k, values.size());
  std::vector<SpectralGap> gaps;
  for (std::size_t i = 0; i + 1 < limit; ++i) {
    if (!(values[i] > 0.0)) continue;
    const double drop = (values[i] - values[i + 1]) / values[i];
    if (drop > 1e-9) gaps.push_back({i + 1, drop});
  }
  std::stable_sort(gaps.begin(), gaps.end(),
                   [](const SpectralGap& a, const SpectralGap& b) { return a.relative_drop > b.relative_drop; });
  return gaps;
}

void write_spectrum_csv(std::ostream& out, const EigenSpectrum& spectrum) {
  out << "rank,eigenvalue,multiplicity_group\n";
  char buf[32];
  std::size_t rank = 1;
  for (std::size_t g = 0; g < spectrum.values.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%.17g", spectrum.values[g]);
    for (std::size_t k = 0; k < spectrum.multiplicities[g]; ++k) out << rank++ << ',' << buf << ',' << g << '\n';
  }
}

}  // namespace hypstruct::spectral
