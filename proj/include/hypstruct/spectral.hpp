#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hypstruct/hierarchy.hpp"
#include "hypstruct/matrix.hpp"

namespace hypstruct::spectral {

using hierarchy::LabelTree;

/// Eigenvalues sorted descending with merged multiplicities.
struct EigenSpectrum {
  std::vector<double> values;
  std::vector<std::size_t> multiplicities;

  std::size_t order() const noexcept;
  double trace() const noexcept;
  /// One entry per eigenvalue, descending.
  std::vector<double> expanded() const;
};

/// Sorts descending and merges neighbours closer than rel_tol * max(1, |x|).
EigenSpectrum merge_spectrum(std::vector<double> values, double rel_tol = 1e-9);

/// Correlation template over the leaves of `tree`: off-diagonal entries are
/// r[h - 1] where h is the height of the leaves' lowest common ancestor.
struct BlockCorrelationSpec {
  LabelTree tree;
  std::vector<double> r;

  /// Human-readable notes on violated theorem preconditions (non-monotone or
  /// negative r). Empty when the spec satisfies them.
  std::vector<std::string> warnings() const;
};

/// Throws InvalidArgument when r does not hold one value per height.
Matrix build_block_matrix(const BlockCorrelationSpec& spec);

/// Closed-form spectrum of the block matrix of a balanced tree.
/// `level_counts` lists C_0 (leaves) up to C_H = 1; r[h - 1] is r^h.
EigenSpectrum balanced_eigenvalues_closed_form(std::span<const std::size_t> level_counts,
                                               std::span<const double> r);

/// Spectrum of the d x d matrix with unit diagonal and constant p elsewhere.
EigenSpectrum star_matrix_eigenvalues(std::size_t d, double p);

struct BlockReduction {
  /// 1 - r_ii with multiplicity p_i - 1 (groups of size one contribute none).
  EigenSpectrum within;
  /// a_ii = 1 + (p_i - 1) r_ii, a_ij = sqrt(p_i p_j) r_ij.
  Matrix reduced;
};

/// Two-level block reduction. `K` must consist of contiguous groups of the
/// given sizes with constant within-group (`within[i]`) and across-group
/// (`across(i, j)`) off-diagonal entries; throws TemplateMismatch otherwise.
BlockReduction two_level_block_reduction(const Matrix& K, std::span<const std::size_t> group_sizes,
                                         std::span<const double> within, const Matrix& across);

/// Level reduction of a block matrix over the leaves of a tree whose leaves
/// all sit at the same depth. Groups are the leaf sets of the vertices at
/// height h. `within` holds the spectra of the group blocks compressed onto
/// the complement of the all-ones vector; `reduced` is the group-mean matrix
/// (G^T G)^{-1/2} G^T K G (G^T G)^{-1/2}. Together they reproduce the
/// spectrum of K exactly when every group block has constant row sums (for
/// instance h = 1, or subtrees below height h that are balanced).
struct LevelReduction {
  std::vector<std::size_t> group_sizes;
  EigenSpectrum within;
  Matrix reduced;
};
LevelReduction level_reduction(const Matrix& K, const LabelTree& tree, int h);

/// m <= (M - 2 delta (p_max - 1)) / (p_max (C_h - 1)).
bool generic_gap_condition(double M, double m, double delta, std::size_t p_max, std::size_t C_h);

/// Throws NotSymmetric when asymmetry exceeds 1e-12 * max(1, max|K|).
EigenSpectrum numerical_eigenvalues(const Matrix& K);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j belongs to values[j]
};
SymmetricEigen symmetric_eigen(const Matrix& K);

struct GramMatrix {
  Matrix K;
  /// Sample index of each row of K.
  std::vector<std::size_t> order;
};

/// Mean-centers the rows, normalizes them to unit length and returns
/// Z Z^T ordered by (coarse vertex, fine class, sample index).
/// Throws DegenerateRow for a row that vanishes after centering.
GramMatrix gram_matrix(const Matrix& Z, std::span<const int> labels, const LabelTree& tree);

struct SpectralGap {
  std::size_t position;  // 1-based: the drop from lambda_position to the next
  double relative_drop;
};

/// Relative drops (l_i - l_{i+1}) / l_i among the top_k eigenvalues, largest
/// first. Drops at or below 1e-9 and non-positive l_i are ignored.
std::vector<SpectralGap> phase_transition_detect(const EigenSpectrum& spectrum, std::size_t top_k);

/// CSV `rank,eigenvalue,multiplicity_group`.
void write_spectrum_csv(std::ostream& out, const EigenSpectrum& spectrum);

}  // namespace hypstruct::spectral
