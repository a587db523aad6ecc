#pragma once

// Reverse-mode automatic differentiation over scalars.
//
// A Tape records every operation on non-constant Vars as a node holding the
// partial derivatives with respect to its parents. Vars that were never
// registered on a tape (including implicit conversions from double) are
// constants and generate no edges, so templated numeric code runs unchanged
// for double and Var.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

namespace dwpkit::ad {

class Tape;

namespace detail {
inline thread_local Tape* active_tape = nullptr;
}

class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: implicit constant

  double value() const { return value_; }
  std::int32_t id() const { return id_; }
  bool is_constant() const { return id_ < 0; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator-(const Var& a);

  friend bool operator<(const Var& a, const Var& b) { return a.value_ < b.value_; }
  friend bool operator>(const Var& a, const Var& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Var& a, const Var& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Var& a, const Var& b) { return a.value_ >= b.value_; }
  friend bool operator==(const Var& a, const Var& b) { return a.value_ == b.value_; }
  friend bool operator!=(const Var& a, const Var& b) { return a.value_ != b.value_; }

 private:
  friend class Tape;
  Var(double v, std::int32_t id) : value_(v), id_(id) {}

  double value_ = 0.0;
  std::int32_t id_ = -1;
};

// Owns the recorded graph. Constructing a Tape makes it the active tape of
// the calling thread until it is destroyed.
class Tape {
 public:
  Tape() : previous_(detail::active_tape) {
    offsets_.push_back(0);
    detail::active_tape = this;
  }
  ~Tape() { detail::active_tape = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape& active() {
    if (detail::active_tape == nullptr) {
      throw std::logic_error("ad::Var operation with no active tape");
    }
    return *detail::active_tape;
  }

  Var variable(double v) {
    offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return Var(v, static_cast<std::int32_t>(offsets_.size() - 2));
  }

  std::size_t node_count() const { return offsets_.size() - 1; }

  // Adjoints of every node with respect to `output`.
  std::vector<double> gradient(const Var& output) const {
    std::vector<double> adj(node_count(), 0.0);
    if (output.is_constant()) return adj;
    adj[static_cast<std::size_t>(output.id())] = 1.0;
    for (std::size_t n = static_cast<std::size_t>(output.id()) + 1; n-- > 0;) {
      const double a = adj[n];
      if (a == 0.0) continue;
      for (std::uint32_t e = offsets_[n]; e < offsets_[n + 1]; ++e) {
        adj[static_cast<std::size_t>(parents_[e])] += a * partials_[e];
      }
    }
    return adj;
  }

  // Incremental construction of one node with an arbitrary number of parents.
  class NodeBuilder {
   public:
    explicit NodeBuilder(Tape& tape) : tape_(tape), start_(tape.parents_.size()) {}
    void add(const Var& parent, double partial) {
      if (parent.id_ < 0) return;
      tape_.parents_.push_back(parent.id_);
      tape_.partials_.push_back(partial);
    }
    Var finish(double v) {
      if (tape_.parents_.size() == start_) return Var(v);
      tape_.offsets_.push_back(static_cast<std::uint32_t>(tape_.parents_.size()));
      return Var(v, static_cast<std::int32_t>(tape_.offsets_.size() - 2));
    }

   private:
    Tape& tape_;
    std::size_t start_;
  };

  Var unary(double v, const Var& a, double da) {
    if (a.id_ < 0) return Var(v);
    parents_.push_back(a.id_);
    partials_.push_back(da);
    offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return Var(v, static_cast<std::int32_t>(offsets_.size() - 2));
  }

  Var binary(double v, const Var& a, double da, const Var& b, double db) {
    if (a.id_ < 0 && b.id_ < 0) return Var(v);
    NodeBuilder node(*this);
    node.add(a, da);
    node.add(b, db);
    return node.finish(v);
  }

 private:
  Tape* previous_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
};

namespace detail {
inline Var unary(double v, const Var& a, double da) {
  if (a.is_constant()) return Var(v);
  return Tape::active().unary(v, a, da);
}
inline Var binary(double v, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(v);
  return Tape::active().binary(v, a, da, b, db);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a.value_ + b.value_, a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a.value_ - b.value_, a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a.value_ * b.value_, a, b.value_, b, a.value_);
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.value_ / b.value_;
  return detail::binary(q, a, 1.0 / b.value_, b, -q / b.value_);
}
inline Var operator-(const Var& a) { return detail::unary(-a.value_, a, -1.0); }

inline double value(const Var& x) { return x.value(); }

inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return detail::unary(s, x, 0.5 / s);
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::unary(e, x, e);
}
inline Var log(const Var& x) { return detail::unary(std::log(x.value()), x, 1.0 / x.value()); }
inline Var log1p(const Var& x) {
  return detail::unary(std::log1p(x.value()), x, 1.0 / (1.0 + x.value()));
}
inline Var lgamma(const Var& x) {
  return detail::unary(std::lgamma(x.value()), x, boost::math::digamma(x.value()));
}
inline Var pow(const Var& x, double p) {
  const double v = std::pow(x.value(), p);
  return detail::unary(v, x, p * std::pow(x.value(), p - 1.0));
}
inline Var abs(const Var& x) { return x.value() < 0.0 ? -x : x; }
inline bool isfinite(const Var& x) { return std::isfinite(x.value()); }

// init + sign * sum_k a[k*sa] * b[k*sb], recorded as a single node.
inline Var dot_accumulate(const Var& init, const Var* a, std::size_t sa, const Var* b,
                          std::size_t sb, std::size_t n, double sign) {
  double v = init.value();
  for (std::size_t k = 0; k < n; ++k) v += sign * a[k * sa].value() * b[k * sb].value();
  if (detail::active_tape == nullptr) return Var(v);
  Tape::NodeBuilder node(Tape::active());
  node.add(init, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    node.add(a[k * sa], sign * b[k * sb].value());
    node.add(b[k * sb], sign * a[k * sa].value());
  }
  return node.finish(v);
}

// Sum of a weighted list of Vars recorded as one node.
inline Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  double v = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) v += weights[k] * xs[k].value();
  if (detail::active_tape == nullptr) return Var(v);
  Tape::NodeBuilder node(Tape::active());
  for (std::size_t k = 0; k < xs.size(); ++k) node.add(xs[k], weights[k]);
  return node.finish(v);
}

// Registers a function value together with externally computed partials.
inline Var custom(double v, std::span<const Var> inputs, std::span<const double> partials) {
  if (detail::active_tape == nullptr) return Var(v);
  Tape::NodeBuilder node(Tape::active());
  for (std::size_t k = 0; k < inputs.size(); ++k) node.add(inputs[k], partials[k]);
  return node.finish(v);
}

}  // namespace dwpkit::ad
