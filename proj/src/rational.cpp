#include "mflow/rational.hpp"

#include <cctype>
#include <stdexcept>

namespace mflow {

namespace {

using boost::multiprecision::cpp_int;

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

cpp_int parse_integer(std::string_view s, std::string_view whole) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s))
    throw std::invalid_argument("malformed rational '" + std::string(whole) + "'");
  cpp_int v{std::string(s)};
  return negative ? cpp_int(-v) : v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view s = trim(text);
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    cpp_int num = parse_integer(trim(s.substr(0, slash)), text);
    cpp_int den = parse_integer(trim(s.substr(slash + 1)), text);
    if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    return Rational(num, den);
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    std::string_view ip = s.substr(0, dot);
    std::string_view fp = s.substr(dot + 1);
    bool negative = !ip.empty() && ip.front() == '-';
    if (!ip.empty() && (ip.front() == '-' || ip.front() == '+')) ip.remove_prefix(1);
    if ((ip.empty() && fp.empty()) || (!ip.empty() && !all_digits(ip)) ||
        (!fp.empty() && !all_digits(fp)))
      throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    cpp_int scale = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) scale *= 10;
    cpp_int num = (ip.empty() ? cpp_int(0) : cpp_int(std::string(ip))) * scale +
                  (fp.empty() ? cpp_int(0) : cpp_int(std::string(fp)));
    if (negative) num = -num;
    return Rational(num, scale);
  }
  return Rational(parse_integer(s, text));
}

std::string to_string(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

}  // namespace mflow
