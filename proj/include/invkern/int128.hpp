#pragma once

#include <cstdint>
#include <string>

#include "invkern/errors.hpp"

namespace invkern {

using int128 = __int128;

inline int128 checked_add(int128 a, int128 b) {
    int128 r;
    if (__builtin_add_overflow(a, b, &r))
        throw numeric_error("128-bit integer overflow in addition; escalate to arbitrary precision");
    return r;
}

inline int128 checked_mul(int128 a, int128 b) {
    int128 r;
    if (__builtin_mul_overflow(a, b, &r))
        throw numeric_error("128-bit integer overflow in multiplication; escalate to arbitrary precision");
    return r;
}

inline int128 gcd128(int128 a, int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

inline std::string to_string(int128 v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    // Negate digit-by-digit to avoid overflow on the minimum value.
    std::string s;
    while (v != 0) {
        int d = static_cast<int>(v % 10);
        if (d < 0) d = -d;
        s.push_back(static_cast<char>('0' + d));
        v /= 10;
    }
    if (neg) s.push_back('-');
    return {s.rbegin(), s.rend()};
}

// Exact rational on 128-bit integers, always kept normalized with den > 0.
struct Rational {
    int128 num = 0;
    int128 den = 1;

    Rational() = default;
    Rational(int128 n, int128 d = 1) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw numeric_error("rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        int128 g = gcd128(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    Rational operator+(const Rational& o) const {
        int128 g = gcd128(den, o.den);
        int128 dl = den / g;
        int128 n = checked_add(checked_mul(num, o.den / g), checked_mul(o.num, dl));
        return {n, checked_mul(dl, o.den)};
    }
    Rational operator-(const Rational& o) const { return *this + Rational(-o.num, o.den); }
    Rational operator*(const Rational& o) const {
        int128 g1 = gcd128(num, o.den), g2 = gcd128(o.num, den);
        return {checked_mul(num / g1, o.num / g2), checked_mul(den / g2, o.den / g1)};
    }
    Rational operator/(const Rational& o) const {
        if (o.num == 0) throw numeric_error("rational division by zero");
        return *this * Rational(o.den, o.num);
    }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }

    bool is_integer() const { return den == 1; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const {
        return den == 1 ? to_string(num) : to_string(num) + "/" + to_string(den);
    }
};

}  // namespace invkern
