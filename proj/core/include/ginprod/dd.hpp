#pragma once

// Compensated double-double arithmetic (Dekker/Knuth two-sum, FMA two-prod).
// Used to sum alternating hypergeometric-type series whose largest term
// exceeds the result by up to ~1e14: a dd accumulator keeps ~31 significant
// digits, which is enough for 1e-9 relative targets at desk scale.  This is
// fixed-precision compensated arithmetic, not arbitrary precision.

#include <cmath>
#include <complex>

namespace ginprod {

struct dd {
    double hi = 0.0;
    double lo = 0.0;

    dd() = default;
    dd(double h) : hi(h), lo(0.0) {}
    dd(double h, double l) : hi(h), lo(l) {}

    explicit operator double() const { return hi + lo; }
    double to_double() const { return hi + lo; }
};

namespace detail {

// |a| >= |b| not required.
inline dd two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

// Requires |a| >= |b| or a == 0.
inline dd quick_two_sum(double a, double b) {
    double s = a + b;
    return {s, b - (s - a)};
}

inline dd two_prod(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}

}  // namespace detail

inline dd operator+(dd a, dd b) {
    dd s = detail::two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    return detail::quick_two_sum(s.hi, s.lo);
}

inline dd operator+(dd a, double b) { return a + dd(b); }
inline dd operator-(dd a) { return {-a.hi, -a.lo}; }
inline dd operator-(dd a, dd b) { return a + (-b); }

inline dd operator*(dd a, dd b) {
    dd p = detail::two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline dd operator*(dd a, double b) {
    dd p = detail::two_prod(a.hi, b);
    p.lo += a.lo * b;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline dd operator/(dd a, dd b) {
    double q1 = a.hi / b.hi;
    dd r = a - b * q1;
    double q2 = r.hi / b.hi;
    r = r - b * q2;
    double q3 = r.hi / b.hi;
    dd q = detail::quick_two_sum(q1, q2);
    return q + q3;
}

inline dd operator/(dd a, double b) { return a / dd(b); }

// Complex value with dd real and imaginary parts.
struct cdd {
    dd re, im;

    cdd() = default;
    cdd(dd r, dd i) : re(r), im(i) {}
    cdd(std::complex<double> z) : re(z.real()), im(z.imag()) {}
    cdd(double r) : re(r), im(0.0) {}

    std::complex<double> to_complex() const {
        return {re.to_double(), im.to_double()};
    }
};

inline cdd operator+(cdd a, cdd b) { return {a.re + b.re, a.im + b.im}; }
inline cdd operator*(cdd a, cdd b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline cdd operator*(cdd a, double b) { return {a.re * b, a.im * b}; }
inline cdd operator/(cdd a, double b) { return {a.re / b, a.im / b}; }

inline double abs_estimate(cdd a) {
    return std::hypot(a.re.hi, a.im.hi);
}

}  // namespace ginprod
