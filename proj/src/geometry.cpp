#include "hypstruct/geometry.hpp"

#include <cmath>
#include <string>

#include "hypstruct/detail/geometry_kernels.hpp"
#include "hypstruct/error.hpp"

namespace hypstruct::geometry {

namespace detail {
Counters& counters() noexcept {
  thread_local Counters c;
  return c;
}
}  // namespace detail

namespace {

double squared_norm(std::span<const double> v) { return detail::squared_norm(v); }

void require_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite coordinate");
  }
}

void require_inside(std::span<const double> v, Curvature c, const char* model) {
  const double r2 = c.value() * squared_norm(v);
  if (!(r2 < 1.0)) {
    throw Error(ErrorCode::OutsideBall, std::string(model) + " point with c|z|^2 = " +
                                            std::to_string(r2) + " is not inside the ball");
  }
}

template <class P>
void require_compatible(const P& a, const P& b) {
  if (!(a.curvature() == b.curvature())) {
    throw Error(ErrorCode::MixedCurvature, "operands have different curvature");
  }
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "operand dimensions " + std::to_string(a.dim()) +
                                                  " and " + std::to_string(b.dim()));
  }
}

}  // namespace

Curvature::Curvature(double c) : c_(c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::InvalidArgument, "curvature must be a positive finite number");
  }
}

double Curvature::radius() const noexcept { return 1.0 / std::sqrt(c_); }

PoincarePoint::PoincarePoint(std::vector<double> coords, Curvature c)
    : coords_(std::move(coords)), c_(c) {
  if (coords_.empty()) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  require_finite(coords_);
  require_inside(coords_, c_, "Poincare");
}

PoincarePoint PoincarePoint::origin(std::size_t dim, Curvature c) {
  return PoincarePoint(std::vector<double>(dim, 0.0), c);
}

double PoincarePoint::norm() const noexcept { return std::sqrt(squared_norm(coords_)); }

KleinPoint::KleinPoint(std::vector<double> coords, Curvature c)
    : coords_(std::move(coords)), c_(c) {
  if (coords_.empty()) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  require_finite(coords_);
  require_inside(coords_, c_, "Klein");
}

double KleinPoint::norm() const noexcept { return std::sqrt(squared_norm(coords_)); }

double KleinPoint::lorentz_factor() const noexcept {
  return 1.0 / std::sqrt(1.0 - c_.value() * squared_norm(coords_));
}

double poincare_distance(const PoincarePoint& a, const PoincarePoint& b) {
  require_compatible(a, b);
  return detail::poincare_distance(a.coords(), b.coords(), a.curvature().value());
}

PoincarePoint exp_map_origin(std::span<const double> v, Curvature c) {
  require_finite(v);
  return PoincarePoint(detail::exp_map_origin(v, c.value()), c);
}

EuclideanVector log_map_origin(const PoincarePoint& u) {
  return detail::log_map_origin(u.coords(), u.curvature().value());
}

PoincarePoint clip_to_ball(std::span<const double> v, Curvature c, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < c.radius())) {
    throw Error(ErrorCode::InvalidArgument, "clip epsilon must lie in (0, 1/sqrt(c))");
  }
  require_finite(v);
  return PoincarePoint(detail::clip_to_ball(v, c.value(), epsilon), c);
}

KleinPoint poincare_to_klein(const PoincarePoint& z) {
  return KleinPoint(detail::poincare_to_klein(z.coords(), z.curvature().value()),
                    z.curvature());
}

PoincarePoint klein_to_poincare(const KleinPoint& z) {
  return PoincarePoint(detail::klein_to_poincare(z.coords(), z.curvature().value()),
                       z.curvature());
}

KleinPoint einstein_midpoint(std::span<const KleinPoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "einstein_midpoint of no points");
  const KleinPoint& first = points.front();
  const std::size_t dim = first.dim();
  std::vector<detail::CompensatedSum<double>> num(dim);
  detail::CompensatedSum<double> den;
  for (const auto& p : points) {
    require_compatible(first, p);
    const double gamma = p.lorentz_factor();
    for (std::size_t i = 0; i < dim; ++i) num[i].add(gamma * p.coords()[i]);
    den.add(gamma);
  }
  std::vector<double> mid(dim);
  for (std::size_t i = 0; i < dim; ++i) mid[i] = num[i].sum / den.sum;
  return KleinPoint(std::move(mid), first.curvature());
}

PoincarePoint hyp_ave_poincare(std::span<const PoincarePoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "hyp_ave_poincare of no points");
  std::vector<std::span<const double>> views;
  views.reserve(points.size());
  for (const auto& p : points) {
    require_compatible(points.front(), p);
    views.push_back(p.coords());
  }
  const double c = points.front().curvature().value();
  return PoincarePoint(detail::poincare_midpoint<double>(views, c), points.front().curvature());
}

ClampStats clamp_stats() noexcept {
  const auto& c = detail::counters();
  return {c.boundary_clamps, c.clip_active};
}

void reset_clamp_stats() noexcept { detail::counters() = {}; }

}  // namespace hypstruct::geometry
