#pragma once

// Minimal scalar reverse-mode automatic differentiation.
//
// A Tape records every elementary operation between Vars as a node with at
// most two parents and the local partial derivatives. Vars created while a
// TapeScope is active are recorded on that tape; gradients are obtained by a
// single reverse sweep. Constants (plain doubles promoted to Var) are never
// recorded.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace hypstruct::ad {

class Tape {
 public:
  struct Node {
    std::int32_t a;
    std::int32_t b;
    double da;
    double db;
  };

  std::int32_t push(std::int32_t a, double da, std::int32_t b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Adjoints of every recorded node with respect to node `output`.
  std::vector<double> adjoints(std::int32_t output) const;

 private:
  std::vector<Node> nodes_;
};

/// Tape that receives operations on the current thread; null when no scope
/// is active.
Tape* active_tape() noexcept;

class TapeScope {
 public:
  explicit TapeScope(Tape& tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() noexcept = default;
  Var(double value) noexcept : value_(value) {}  // NOLINT: implicit constant promotion

  /// New independent variable on the active tape.
  static Var independent(double value) {
    Var v(value);
    if (Tape* t = active_tape()) v.index_ = t->push(-1, 0.0, -1, 0.0);
    return v;
  }

  double value() const noexcept { return value_; }
  std::int32_t index() const noexcept { return index_; }
  bool is_constant() const noexcept { return index_ < 0; }

  static Var unary(const Var& x, double value, double dx) {
    Var r(value);
    if (!x.is_constant()) r.index_ = active_tape()->push(x.index_, dx, -1, 0.0);
    return r;
  }
  static Var binary(const Var& x, double dx, const Var& y, double dy, double value) {
    Var r(value);
    if (x.is_constant() && y.is_constant()) return r;
    r.index_ = active_tape()->push(x.index_, dx, y.index_, dy);
    return r;
  }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator+(const Var& x, const Var& y) {
    return binary(x, 1.0, y, 1.0, x.value_ + y.value_);
  }
  friend Var operator-(const Var& x, const Var& y) {
    return binary(x, 1.0, y, -1.0, x.value_ - y.value_);
  }
  friend Var operator*(const Var& x, const Var& y) {
    return binary(x, y.value_, y, x.value_, x.value_ * y.value_);
  }
  friend Var operator/(const Var& x, const Var& y) {
    const double inv = 1.0 / y.value_;
    return binary(x, inv, y, -x.value_ * inv * inv, x.value_ * inv);
  }
  friend Var operator-(const Var& x) { return unary(x, -x.value_, -1.0); }

  friend bool operator<(const Var& x, const Var& y) { return x.value_ < y.value_; }
  friend bool operator>(const Var& x, const Var& y) { return x.value_ > y.value_; }
  friend bool operator<=(const Var& x, const Var& y) { return x.value_ <= y.value_; }
  friend bool operator>=(const Var& x, const Var& y) { return x.value_ >= y.value_; }

 private:
  double value_ = 0.0;
  std::int32_t index_ = -1;
};

inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return Var::unary(x, s, 0.5 / s);
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return Var::unary(x, e, e);
}
inline Var log(const Var& x) { return Var::unary(x, std::log(x.value()), 1.0 / x.value()); }
inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return Var::unary(x, t, 1.0 - t * t);
}
inline Var atanh(const Var& x) {
  return Var::unary(x, std::atanh(x.value()), 1.0 / (1.0 - x.value() * x.value()));
}
inline Var abs(const Var& x) {
  return Var::unary(x, std::abs(x.value()), x.value() < 0.0 ? -1.0 : 1.0);
}
inline Var relu(const Var& x) {
  return x.value() > 0.0 ? x : Var(0.0);
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double value(double x) noexcept { return x; }
inline double value(const Var& x) noexcept { return x.value(); }

/// Gradient of a taped scalar with respect to the given independent Vars.
std::vector<double> gradient(const Var& output, std::span<const Var> inputs);

}  // namespace hypstruct::ad
