#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace ginprod {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid arguments, malformed specs, out-of-domain requests.  The CLI maps
// these to exit code 2.
struct domain_error : error {
    explicit domain_error(const std::string& msg) : error(msg) {}
};

// Numerical failures at runtime (budget exhausted, NaN in an integrand,
// unreachable tolerance).  The CLI maps these to exit code 3.
struct numeric_error : error {
    explicit numeric_error(const std::string& msg) : error(msg) {}
};

// Evaluation at (or too near) a pole of the gamma function.
struct pole_error : domain_error {
    explicit pole_error(const std::string& msg) : domain_error(msg) {}
};

// Node budget exhausted before the tolerance was met.  Carries the best
// value computed so far together with its error estimate.
struct budget_error : numeric_error {
    budget_error(const std::string& msg, std::complex<double> best_value,
                 double best_err)
        : numeric_error(msg), value(best_value), err_estimate(best_err) {}
    std::complex<double> value;
    double err_estimate;
};

// Integrand returned NaN/Inf.  Carries the offending node.
struct nan_error : numeric_error {
    nan_error(const std::string& msg, std::complex<double> where)
        : numeric_error(msg), node(where) {}
    std::complex<double> node;
};

// A contour would touch or cross a pole / another contour.
struct contour_error : domain_error {
    explicit contour_error(const std::string& msg) : domain_error(msg) {}
};

}  // namespace ginprod
