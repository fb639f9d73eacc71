#pragma once

// Deterministic adaptive contour quadrature.
//
// All complex contours carry the complex-inversion prefactor 1/(2*pi*i);
// real-interval integration carries no prefactor.  Evaluation is single
// threaded and the refinement policy is a pure function of the inputs, so
// identical calls produce bit-identical results.

#include <complex>
#include <functional>
#include <vector>

#include "ginprod/errors.hpp"

namespace ginprod::quad {

using cplx = std::complex<double>;
using Integrand = std::function<cplx(cplx)>;
using RealIntegrand = std::function<double(double)>;

enum class ContourKind {
    vertical_line,        // anchor + i*R, upward, symmetric adaptive truncation
    closed_integer_loop,  // rectangle around the integers {0..enclosed_max},
                          // left edge at anchor+margin, right at enclosed_max+1/2
    hankel_right_loop,    // in from +inf above the axis, around anchor+margin,
                          // back out below; encircles {0,1,2,...}
    neg_axis_loop,        // circle of radius |anchor| about 0 (integer powers
                          // make the negative-axis rays cancel exactly)
    real_interval,        // (0, anchor==0 ? upper : ...) handled by real_integral
};

struct ContourSpec {
    ContourKind kind = ContourKind::vertical_line;
    double anchor = 0.0;     // line abscissa; left pole bound for loops; circle radius
    int enclosed_max = 0;    // rightmost enclosed integer for closed_integer_loop
    double margin = 0.25;    // pole clearance for loops
    double truncation = 0.0; // 0 = adaptive; else half-height / arm-length cap
    double scale = 1.0;      // initial panel extent along unbounded directions
};

struct QuadResult {
    cplx value{0.0, 0.0};
    double err_estimate = 0.0;
    long evaluations = 0;
};

struct RealQuadResult {
    double value = 0.0;
    double err_estimate = 0.0;
    long evaluations = 0;
};

inline constexpr long kDefaultBudget = 4'000'000;

// Path pieces for contours assembled by hand (kernel double integrals bend
// their u-line arms off the vertical to gain absolute convergence).
struct Chord {
    cplx a, b;
};
struct Arc {
    cplx center;
    double radius, th0, th1;  // z = center + radius * exp(i*theta)
};
struct Ray {
    cplx start, dir;       // dir is a unit direction
    double scale = 1.0;    // first panel length
    double max_len = 0.0;  // 0 = adaptive until the tail is negligible
    double sign = 1.0;     // orientation factor
};

struct Path {
    std::vector<Chord> chords;
    std::vector<Arc> arcs;
    std::vector<Ray> rays;
    bool closed_prefactor = true;  // divide by 2*pi*i
};

// Integrate f over an assembled path.  tol is a relative target on the
// final value; err_estimate is the nested-rule (G7/K15) difference summed
// over panels plus a geometric tail bound for adaptive rays.
QuadResult integrate_path(const Integrand& f, const Path& path, double tol,
                          long budget = kDefaultBudget);

// Integrate f over the contour described by spec (not valid for
// real_interval; use real_integral).
QuadResult integrate(const Integrand& f, const ContourSpec& spec, double tol,
                     long budget = kDefaultBudget);

// Integral of f over (0, upper), upper possibly +infinity.  Endpoint
// singularities t^{alpha-1} (alpha > 0) at 0 and exponentially decaying
// tails are handled by exponential substitution at both ends.
RealQuadResult real_integral(const RealIntegrand& f, double upper, double tol,
                             long budget = kDefaultBudget);

// Same, for complex-valued integrands on (0, upper).
QuadResult real_integral_c(const Integrand& f, double upper, double tol,
                           long budget = kDefaultBudget);

// log of the integral over (0, upper) of a nonnegative integrand given by
// its natural log: value = log int exp(log_f(t)) dt, with log_f returning
// -inf where the integrand vanishes.  The exponent is shifted automatically
// (rerunning against the observed peak when needed), so both the integrand
// and the integral may exceed the double range.  err_estimate is the
// absolute error of the returned log, i.e. the relative error of the
// integral.
RealQuadResult real_integral_log(const RealIntegrand& log_f, double upper,
                                 double tol, long budget = kDefaultBudget);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace ginprod::quad
