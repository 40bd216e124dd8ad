#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hypstruct::spectral::detail {

/// Distinct closed-form eigenvalues of a balanced block matrix with their
/// multiplicities, leaves first. Inputs are assumed validated. T needs
/// construction from int, + and -, and multiplication by std::size_t.
template <class T>
std::vector<std::pair<T, std::size_t>> balanced_levels(std::span<const std::size_t> counts, std::span<const T> r) {
  const std::size_t H = counts.size() - 1;
  const auto rh = [&](std::size_t h) { return h >= 1 && h <= H ? r[h - 1] : T(0); };
  std::vector<std::pair<T, std::size_t>> out;
  T lambda = T(1) - rh(1);
  out.emplace_back(lambda, counts[0] - counts[1]);
  for (std::size_t h = 1; h < H; ++h) {
    lambda = lambda + (rh(h) - rh(h + 1)) * (counts[0] / counts[h]);
    out.emplace_back(lambda, counts[h] - counts[h + 1]);
  }
  lambda = lambda + rh(H) * counts[0];
  out.emplace_back(lambda, std::size_t{1});
  return out;
}

}  // namespace hypstruct::spectral::detail
