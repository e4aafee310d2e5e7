#pragma once

#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace mflow {

/// Arbitrary-precision rational used for every scheme coefficient.
using Rational = boost::multiprecision::cpp_rational;

/// Parses "num/den", "num", or a finite decimal such as "-1.6" or "0.25"
/// into an exact rational. Throws std::invalid_argument on malformed text.
Rational parse_rational(std::string_view text);

/// Canonical "num/den" text (denominator omitted when it is one).
std::string to_string(const Rational& r);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace mflow
