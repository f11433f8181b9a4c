#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace bellfam {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt factorial(int n) {
    if (n < 0) throw std::invalid_argument("factorial: negative argument");
    BigInt f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

namespace detail {

inline BigInt parse_integer(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("empty integer literal");
    std::size_t start = (text[0] == '-' || text[0] == '+') ? 1 : 0;
    if (start == text.size()) throw std::invalid_argument("sign without digits");
    for (std::size_t i = start; i < text.size(); ++i)
        if (text[i] < '0' || text[i] > '9')
            throw std::invalid_argument("invalid integer literal: " + std::string(text));
    return BigInt(std::string(text));
}

} // namespace detail

/// Parses "p" or "p/q" with optional sign; q must be nonzero.
inline Rational parse_rational(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return Rational(detail::parse_integer(text));
    BigInt num = detail::parse_integer(text.substr(0, slash));
    BigInt den = detail::parse_integer(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator: " + std::string(text));
    return Rational(num, den);
}

/// "p" when the denominator is 1, otherwise "p/q".
inline std::string rational_to_string(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

} // namespace bellfam
