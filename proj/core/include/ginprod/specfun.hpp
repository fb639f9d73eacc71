#pragma once

#include <complex>
#include <vector>

#include "ginprod/errors.hpp"
#include "ginprod/quad.hpp"

namespace ginprod::specfun {

using cplx = std::complex<double>;

// Principal-branch log-gamma; exp(log_gamma(z)) reproduces Gamma(z) to
// ~1e-13 relative for |z| <= 200.  Throws pole_error at nonpositive integers.
cplx log_gamma(cplx z);

// Fast real path, x > 0.
double log_gamma_real(double x);

// Rising factorial (a)_l = a (a+1) ... (a+l-1); (a)_0 = 1.
double pochhammer(double a, int l);

// 0F1(; b; z) = sum_k z^k / ((b)_k k!):  series for z >= -400 (compensated
// accumulation for negative z), Bessel-J asymptotics beyond.  Absolute error
// <= ~1e-12 for |z| <= 1e4.
double hyp0f1(double b, double z);

// Complex-argument 0F1 by compensated series; |z| <= 600.
cplx hyp0f1_c(double b, cplx z);

// log 0F1(; b; z) for z >= 0, where the function is positive.  Exact series
// log for moderate z; I-Bessel asymptotics (relative error ~1e-10 at the
// switch, improving with z) once the function would overflow a double.
double log_hyp0f1(double b, double z);

// Kummer 1F1(a; b; x) with complex a, real b > 0, real x.
cplx hyp1f1(cplx a, double b, double x);

// Same, for complex argument x (Kummer transformation applied when
// Re x < 0 so the series terms never alternate at scale e^{|x|}).
cplx hyp1f1_c(cplx a, double b, cplx x);

// Modified Bessel K_order(x), x > 0, via the cosh integral representation.
double bessel_k(double order, double x);

// Mellin-Barnes G-function data.  Convention:
//   G^{m,n}_{p,q}(a; b | z) = (1/2pi i) Int_L
//     [prod_{j<=m} Gamma(b_j - s) prod_{j<=n} Gamma(1 - a_j + s)] /
//     [prod_{j>m} Gamma(1 - b_j + s) prod_{j>n} Gamma(a_j - s)] z^s ds
// with L separating the b-pole ladders (ascending, right of L) from the
// a-ladders.  Only n_order = 0 classes are accepted: (m,0;0,q) with
// m <= q, and (s,0;1,s).
struct MeijerGSpec {
    int m_order = 0;
    int n_order = 0;
    int p_order = 0;
    int q_order = 0;
    std::vector<double> a_params;
    std::vector<double> b_params;
};

// Throws domain_error unless the spec is one of the accepted classes with
// consistent parameter counts.
void validate(const MeijerGSpec& spec);

// Contour evaluation (vertical line at a magnitude-minimizing abscissa left
// of every numerator pole ladder).  The (1,0;0,q) subclass, which has no
// absolutely convergent line, is summed as a hyper-Bessel series instead.
// (s,0;1,s) instances vanish identically for z >= 1.
double meijer_g(const MeijerGSpec& spec, double z, double tol = 1e-11,
                long budget = quad::kDefaultBudget);

// Independent residue-series evaluation for the (m,0;0,m) class with
// pairwise non-congruent b-parameters (throws domain_error on double poles).
double meijer_g_series(const MeijerGSpec& spec, double z);

}  // namespace ginprod::specfun
