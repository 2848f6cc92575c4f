#include "copycat/rational.hpp"

#include <cctype>
#include <cstdlib>
#include <limits>

namespace copycat {

int64_t Rational::checked(__int128 v) {
  if (v > std::numeric_limits<int64_t>::max() || v < std::numeric_limits<int64_t>::min()) {
    throw std::overflow_error("Rational: 64-bit overflow");
  }
  return int64_t(v);
}

void Rational::normalize() {
  if (den_ == 0) throw ValidationError("Rational: zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  const int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

Rational Rational::operator+(const Rational& o) const {
  const __int128 n = __int128(num_) * o.den_ + __int128(o.num_) * den_;
  const __int128 d = __int128(den_) * o.den_;
  return Rational(checked(n), checked(d));
}

Rational Rational::operator-(const Rational& o) const { return *this + (-o); }

Rational Rational::operator*(const Rational& o) const {
  // Cross-reduce before multiplying to keep intermediates small.
  const int64_t g1 = std::gcd(num_ < 0 ? -num_ : num_, o.den_);
  const int64_t g2 = std::gcd(o.num_ < 0 ? -o.num_ : o.num_, den_);
  const __int128 n = __int128(num_ / g1) * (o.num_ / g2);
  const __int128 d = __int128(den_ / g2) * (o.den_ / g1);
  return Rational(checked(n), checked(d));
}

Rational Rational::operator/(const Rational& o) const {
  if (o.num_ == 0) throw ValidationError("Rational: division by zero");
  return *this * Rational(o.den_, o.num_);
}

bool Rational::operator<(const Rational& o) const {
  return __int128(num_) * o.den_ < __int128(o.num_) * den_;
}

Rational Rational::parse(const std::string& text) {
  std::string digits;
  digits.reserve(text.size());
  bool seen_dot = false;
  int places = 0;
  bool negative = false;
  for (const char c : text) {
    if (c == '$' || c == ',' || c == ' ' || c == '\'') continue;
    if (c == '-' && digits.empty() && !seen_dot) {
      negative = true;
      continue;
    }
    if (c == '.') {
      if (seen_dot) throw ValidationError("Rational::parse: two decimal points in '" + text + "'");
      seen_dot = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ValidationError("Rational::parse: bad character in '" + text + "'");
    }
    digits.push_back(c);
    if (seen_dot) ++places;
  }
  if (digits.empty()) throw ValidationError("Rational::parse: no digits in '" + text + "'");
  __int128 num = 0;
  for (const char c : digits) {
    num = num * 10 + (c - '0');
    if (num > std::numeric_limits<int64_t>::max()) {
      throw std::overflow_error("Rational::parse: value too large");
    }
  }
  __int128 den = 1;
  for (int i = 0; i < places; ++i) den *= 10;
  return Rational(negative ? -checked(num) : checked(num), checked(den));
}

std::string Rational::to_decimal_string(int min_places) const {
  // A rational has a finite decimal expansion iff den = 2^a * 5^b.
  int64_t d = den_;
  int places = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++places;
  }
  int fives = 0;
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) throw ValidationError("Rational::to_decimal_string: no finite decimal expansion");
  places = places > fives ? places : fives;
  if (places < min_places) places = min_places;

  __int128 scaled = num_;
  for (int i = 0; i < places; ++i) scaled *= 10;
  scaled /= den_;  // exact by construction

  const bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string body;
  do {
    body.insert(body.begin(), char('0' + int(scaled % 10)));
    scaled /= 10;
  } while (scaled > 0);
  while (int(body.size()) <= places) body.insert(body.begin(), '0');
  if (places > 0) body.insert(body.size() - places, ".");
  return negative ? "-" + body : body;
}

}  // namespace copycat
