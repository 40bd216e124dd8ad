#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hypstruct::geometry {

inline constexpr double kDefaultCurvature = 1.0;
inline constexpr double kDefaultClipEpsilon = 1e-5;

/// Positive ball curvature constant c. The ball has radius 1/sqrt(c).
class Curvature {
 public:
  Curvature() = default;
  explicit Curvature(double c);

  double value() const noexcept { return c_; }
  double radius() const noexcept;

  bool operator==(const Curvature&) const = default;

 private:
  double c_ = kDefaultCurvature;
};

using EuclideanVector = std::vector<double>;

/// Point strictly inside the curvature-c Poincare ball: c|z|^2 < 1.
class PoincarePoint {
 public:
  PoincarePoint(std::vector<double> coords, Curvature c);
  static PoincarePoint origin(std::size_t dim, Curvature c = Curvature{});

  std::span<const double> coords() const noexcept { return coords_; }
  Curvature curvature() const noexcept { return c_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double norm() const noexcept;

 private:
  std::vector<double> coords_;
  Curvature c_;
};

/// Point strictly inside the curvature-c Klein ball (same support as the
/// Poincare ball, straight-line geodesics).
class KleinPoint {
 public:
  KleinPoint(std::vector<double> coords, Curvature c);

  std::span<const double> coords() const noexcept { return coords_; }
  Curvature curvature() const noexcept { return c_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double norm() const noexcept;
  /// 1 / sqrt(1 - c|z|^2).
  double lorentz_factor() const noexcept;

 private:
  std::vector<double> coords_;
  Curvature c_;
};

double poincare_distance(const PoincarePoint& a, const PoincarePoint& b);

PoincarePoint exp_map_origin(std::span<const double> v, Curvature c = Curvature{});
EuclideanVector log_map_origin(const PoincarePoint& u);

PoincarePoint clip_to_ball(std::span<const double> v, Curvature c = Curvature{},
                           double epsilon = kDefaultClipEpsilon);

KleinPoint poincare_to_klein(const PoincarePoint& z);
PoincarePoint klein_to_poincare(const KleinPoint& z);

/// Einstein midpoint: sum(gamma_i z_i) / sum(gamma_i), accumulated in input
/// order with compensated summation.
KleinPoint einstein_midpoint(std::span<const KleinPoint> points);

/// Hyperbolic average of Poincare points through the Klein model.
PoincarePoint hyp_ave_poincare(std::span<const PoincarePoint> points);

/// Clamps applied near the ball boundary and clip branches taken on the
/// calling thread since the last reset.
struct ClampStats {
  std::uint64_t boundary_clamps = 0;
  std::uint64_t clip_active = 0;
};
ClampStats clamp_stats() noexcept;
void reset_clamp_stats() noexcept;

}  // namespace hypstruct::geometry
