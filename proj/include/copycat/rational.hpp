#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "copycat/common.hpp"

namespace copycat {

// Exact rational arithmetic for money. Query prices divide by 1000 per batch,
// so floating point would drift; every monetary value in the oracle and
// economics modules is a Rational.
class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(int64_t value) : num_(value), den_(1) {}  // NOLINT: implicit by design
  Rational(int64_t num, int64_t den) : num_(num), den_(den) { normalize(); }

  // Parses "90.15", "-3", "$1.00", "1,900" (separators and a leading currency
  // symbol are ignored).
  static Rational parse(const std::string& text);

  int64_t numerator() const { return num_; }
  int64_t denominator() const { return den_; }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational operator-() const { return Rational(-num_, den_); }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const;
  bool operator<=(const Rational& o) const { return *this < o || *this == o; }
  bool operator>(const Rational& o) const { return o < *this; }
  bool operator>=(const Rational& o) const { return o <= *this; }

  double to_double() const { return double(num_) / double(den_); }

  // Exact decimal rendering with the minimum number of places needed
  // (at least min_places). Throws ValidationError if the value has no
  // finite decimal expansion.
  std::string to_decimal_string(int min_places = 2) const;

  bool is_integer() const { return den_ == 1; }

 private:
  void normalize();
  static int64_t checked(__int128 v);

  int64_t num_;
  int64_t den_;  // > 0 after normalize
};

}  // namespace copycat
