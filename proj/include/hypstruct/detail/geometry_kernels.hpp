#pragma once

// Scalar-generic Poincare/Klein kernels. Instantiated with double for the
// public geometry API and with ad::Var inside the differentiable objectives.
// No validation happens here; callers own the preconditions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "hypstruct/autodiff.hpp"

namespace hypstruct::geometry::detail {

/// Arguments of atanh (and tanh outputs) are kept at or below this value so
/// every result stays finite and strictly inside the ball.
inline constexpr double kBoundaryLimit = 1.0 - 1e-15;

struct Counters {
  std::uint64_t boundary_clamps = 0;
  std::uint64_t clip_active = 0;
};

/// Per-thread diagnostic counters; never shared between threads.
Counters& counters() noexcept;

using ad::value;

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
T squared_norm(std::span<const T> a) {
  return dot(a, a);
}

template <class T>
T clamped_atanh(const T& x) {
  using std::atanh;
  if (value(x) > kBoundaryLimit) {
    ++counters().boundary_clamps;
    return T(std::atanh(kBoundaryLimit));
  }
  return atanh(x);
}

template <class T>
std::vector<T> scaled(std::span<const T> v, const T& s) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * s;
  return out;
}

/// tanh(sqrt(c)|v|) v / (sqrt(c)|v|); zero maps to zero.
template <class T>
std::vector<T> exp_map_origin(std::span<const T> v, double c) {
  using std::sqrt;
  using std::tanh;
  const T n2 = squared_norm(v);
  // Jacobian at the origin is the identity.
  if (value(n2) == 0.0) return std::vector<T>(v.begin(), v.end());
  const T scaled_norm = std::sqrt(c) * sqrt(n2);
  T t = tanh(scaled_norm);
  if (value(t) > kBoundaryLimit) {
    ++counters().boundary_clamps;
    t = T(kBoundaryLimit);
  }
  return scaled(v, t / scaled_norm);
}

/// atanh(sqrt(c)|u|) u / (sqrt(c)|u|); origin maps to zero.
template <class T>
std::vector<T> log_map_origin(std::span<const T> u, double c) {
  using std::sqrt;
  const T n2 = squared_norm(u);
  if (value(n2) == 0.0) return std::vector<T>(u.begin(), u.end());
  const T scaled_norm = std::sqrt(c) * sqrt(n2);
  return scaled(u, clamped_atanh(scaled_norm) / scaled_norm);
}

/// Identity inside the ball, otherwise rescale onto radius 1/sqrt(c) - eps.
template <class T>
std::vector<T> clip_to_ball(std::span<const T> v, double c, double eps) {
  using std::sqrt;
  const T n2 = squared_norm(v);
  if (c * value(n2) < 1.0) return std::vector<T>(v.begin(), v.end());
  ++counters().clip_active;
  const T radius(1.0 / std::sqrt(c) - eps);
  return scaled(v, radius / sqrt(n2));
}

/// Distance on the curvature-c Poincare ball, evaluated through the Mobius
/// difference (-a) (+) b.
template <class T>
T poincare_distance(std::span<const T> a, std::span<const T> b, double c) {
  using std::sqrt;
  bool same = true;
  for (std::size_t i = 0; i < a.size() && same; ++i) same = value(a[i]) == value(b[i]);
  if (same) return T(0.0);
  // Fixed argument order makes d(a, b) and d(b, a) bit-identical.
  if (std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end(),
                                   [](const T& x, const T& y) { return value(x) < value(y); })) {
    std::swap(a, b);
  }
  const T ab = dot(a, b);
  const T aa = squared_norm(a);
  const T bb = squared_norm(b);
  const T coef_a = -(1.0 - 2.0 * c * ab + c * bb);
  const T coef_b = 1.0 - c * aa;
  const T denom = 1.0 - 2.0 * c * ab + c * c * aa * bb;
  T num2(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T term = coef_a * a[i] + coef_b * b[i];
    num2 += term * term;
  }
  if (value(num2) == 0.0) return T(0.0);
  const T mobius_norm = sqrt(num2) / denom;
  return (2.0 / std::sqrt(c)) * clamped_atanh(std::sqrt(c) * mobius_norm);
}

template <class T>
std::vector<T> poincare_to_klein(std::span<const T> z, double c) {
  return scaled(z, T(2.0) / (1.0 + c * squared_norm(z)));
}

template <class T>
std::vector<T> klein_to_poincare(std::span<const T> z, double c) {
  using std::sqrt;
  T slack = 1.0 - c * squared_norm(z);
  if (value(slack) < 0.0) {
    ++counters().boundary_clamps;
    slack = T(0.0);
  }
  std::vector<T> out = scaled(z, T(1.0) / (1.0 + sqrt(slack)));
  // Rounding can still leave the image on the boundary; pull it inside.
  const T n2 = squared_norm(std::span<const T>(out));
  if (c * value(n2) >= kBoundaryLimit * kBoundaryLimit) {
    ++counters().boundary_clamps;
    const double target = kBoundaryLimit / std::sqrt(c);
    const double shrink = target / std::sqrt(value(n2));
    for (auto& x : out) x = x * shrink;
  }
  return out;
}

/// Kahan-compensated accumulator for doubles; summation follows insertion
/// order. Taped scalars use a plain sum (compensation has zero derivative).
template <class T>
struct CompensatedSum {
  T sum{0.0};
  T carry{0.0};
  void add(const T& x) {
    if constexpr (!std::is_same_v<T, double>) {
      sum += x;
      return;
    }
    const T y = x - carry;
    const T t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

/// Lorentz-weighted mean of Poincare points, computed in the Klein model and
/// mapped back. The Lorentz factor of the Klein image of p is
/// (1 + c|p|^2) / (1 - c|p|^2), which stays finite where the Klein norm would
/// round to the boundary.
template <class T>
std::vector<T> poincare_midpoint(std::span<const std::span<const T>> points, double c) {
  const std::size_t dim = points.front().size();
  std::vector<CompensatedSum<T>> num(dim);
  CompensatedSum<T> den;
  for (const auto& p : points) {
    const T r2 = c * squared_norm(p);
    const T gamma = (1.0 + r2) / (1.0 - r2);
    const T to_klein = 2.0 / (1.0 + r2);
    const T w = gamma * to_klein;
    for (std::size_t i = 0; i < dim; ++i) num[i].add(w * p[i]);
    den.add(gamma);
  }
  std::vector<T> mid(dim);
  for (std::size_t i = 0; i < dim; ++i) mid[i] = num[i].sum / den.sum;
  return klein_to_poincare(std::span<const T>(mid), c);
}

}  // namespace hypstruct::geometry::detail
