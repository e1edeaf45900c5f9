#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hiercast {

struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reverse-mode tape. Every operation appends one record holding up to two
// parent indices and the local partial derivatives with respect to them; the
// backward sweep walks the records once in reverse. The tape owns all values,
// so Var handles stay valid until clear().
class Tape {
 public:
  void clear() {
    records_.clear();
    values_.clear();
    adjoints_.clear();
  }

  void reserve(std::size_t n) {
    records_.reserve(n);
    values_.reserve(n);
  }

  std::size_t size() const { return records_.size(); }

  int push_leaf(double value) { return push(value, -1, 0.0, -1, 0.0); }

  int push_unary(double value, int parent, double weight) {
    return push(value, parent, weight, -1, 0.0);
  }

  int push_binary(double value, int p1, double w1, int p2, double w2) {
    return push(value, p1, w1, p2, w2);
  }

  // Seeds d(root)/d(root) = 1 and accumulates adjoints for every record.
  void backward(int root);

  double value(int index) const { return values_[static_cast<std::size_t>(index)]; }
  double adjoint(int index) const {
    return adjoints_[static_cast<std::size_t>(index)];
  }

 private:
  struct Record {
    double w1, w2;
    int p1, p2;
  };

  int push(double value, int p1, double w1, int p2, double w2) {
    records_.push_back({w1, w2, p1, p2});
    values_.push_back(value);
    return static_cast<int>(records_.size()) - 1;
  }

  std::vector<Record> records_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

// Handle to one tape entry. Copies are cheap; the numeric value is cached in
// the handle so reads never touch the tape.
class Var {
 public:
  Var() = default;
  Var(Tape& tape, double value)
      : tape_(&tape), index_(tape.push_leaf(value)), value_(value) {}

  double value() const { return value_; }

  // Gradient of the last backward() root with respect to this variable.
  double adjoint() const { return tape_->adjoint(index_); }

  Tape* tape() const { return tape_; }
  int index() const { return index_; }

  static Var from_entry(Tape& tape, int index, double value) {
    Var v;
    v.tape_ = &tape;
    v.index_ = index;
    v.value_ = value;
    return v;
  }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

inline void backward(const Var& root) { root.tape()->backward(root.index()); }

namespace detail {
inline Var unary(const Var& x, double value, double weight) {
  return Var::from_entry(*x.tape(),
                         x.tape()->push_unary(value, x.index(), weight), value);
}
inline Var binary(const Var& a, const Var& b, double value, double wa,
                  double wb) {
  return Var::from_entry(
      *a.tape(), a.tape()->push_binary(value, a.index(), wa, b.index(), wb),
      value);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator+(const Var& a, double c) {
  return detail::unary(a, a.value() + c, 1.0);
}
inline Var operator+(double c, const Var& a) { return a + c; }

inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator-(const Var& a, double c) {
  return detail::unary(a, a.value() - c, 1.0);
}
inline Var operator-(double c, const Var& a) {
  return detail::unary(a, c - a.value(), -1.0);
}
inline Var operator-(const Var& a) {
  return detail::unary(a, -a.value(), -1.0);
}

inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator*(const Var& a, double c) {
  return detail::unary(a, a.value() * c, c);
}
inline Var operator*(double c, const Var& a) { return a * c; }

inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return detail::binary(a, b, a.value() * inv, inv,
                        -a.value() * inv * inv);
}
inline Var operator/(const Var& a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, const Var& a) {
  const double inv = 1.0 / a.value();
  return detail::unary(a, c * inv, -c * inv * inv);
}

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::unary(x, e, e);
}
inline Var log(const Var& x) {
  return detail::unary(x, std::log(x.value()), 1.0 / x.value());
}
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.value());
  return detail::unary(x, r, 0.5 / r);
}
inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return detail::unary(x, t, 1.0 - t * t);
}

// Double overloads of the tape math, so code templated over the scalar type
// resolves the same unqualified names on the plain-double path.
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double tanh(double x) { return std::tanh(x); }

// Numerically stable logistic and softplus, shared with the double path so
// both scalar types branch identically.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
inline double square(double x) { return x * x; }
inline double value_of(double x) { return x; }

inline Var sigmoid(const Var& x) {
  const double s = sigmoid(x.value());
  return detail::unary(x, s, s * (1.0 - s));
}
inline Var softplus(const Var& x) {
  return detail::unary(x, softplus(x.value()), sigmoid(x.value()));
}
inline Var square(const Var& x) {
  return detail::unary(x, x.value() * x.value(), 2.0 * x.value());
}
inline double value_of(const Var& v) { return v.value(); }

}  // namespace hiercast
