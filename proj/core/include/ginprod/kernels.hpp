#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "ginprod/errors.hpp"
#include "ginprod/process.hpp"

// Closed-form multi-time correlation kernels for the three initial families,
// each in two independent representations (finite biorthogonal sums and
// contour integrals), together with the explicit Gram matrices, their
// closed-form inverses, and the hard-edge scaling limits.
//
// Gauge: every kernel here is reported in the same normalization as
// em::Oracle::kernel_reference_gauge.  Correlation determinants are gauge
// invariant; pointwise off-diagonal (r != s) values differ between
// normalizations by the factor gauge_g(spec, r, x) / gauge_g(spec, s, y),
// so raw values are comparable only within one gauge.
//
// All evaluators are pure; the only shared state is an internal memo of
// Gram inverses keyed by spec hash, guarded by a mutex, so concurrent
// evaluation is safe.
namespace ginprod::kernels {

using cplx = std::complex<double>;

// Selector for the dual representations: `series` is the finite closed-form
// sum, `contour` the integral it was derived from.  The two must agree to
// quadrature accuracy; tests exercise both.
enum class Method { series, contour };

// Hard-edge representation: `contour` is the double contour integral;
// `g_product` the rank-one-integral form (a product of two Meijer G
// functions integrated over (0,1)).
enum class HardEdgeForm { contour, g_product };

// ---------------------------------------------------------------------
// Generic assembly (any polynomial ensemble)
// ---------------------------------------------------------------------

// log f_i(x) of a custom initial family (i in 1..n); -inf marks f_i = 0.
// The f_i must be nonnegative.  An empty function selects the family
// recorded in the spec (initial_log_f).
using LogFamily = std::function<double(int, double)>;

// Pure transition term of the kernel's first part: 0 when s <= r, else
// (1/x) G^{s-r,0}_{0,s-r}(-; nu_{r+1},...,nu_s | y/x).  The kernel's minus
// sign is applied by the callers.
double phi_rs_term(const ProcessSpec& spec, int r, int s, double x, double y);

// Same, parametrized directly by the offsets nu_0..nu_m (nu[0] == 0).
double phi_rs_term(const std::vector<int>& nu, int r, int s, double x,
                   double y);

// Kernel assembled from the definition: monomial-times-Gamma final
// functions, Gram matrix by quadrature against the initial family, initial
// transitions by quadrature.  Fully general and the slowest path; the
// closed forms below are validated against it.  The Gram inverse is
// memoized per spec when log_f is empty.
double general_kernel(const ProcessSpec& spec, int r, double x, int s,
                      double y, const LogFamily& log_f = {},
                      double tol = 1e-9);

// Condition number of the numeric Gram matrix general_kernel uses; large
// values (>~1e12) warn that its output digits are degraded.
double general_gram_condition(const ProcessSpec& spec,
                              const LogFamily& log_f = {});

// ---------------------------------------------------------------------
// Ginibre initial factor
// ---------------------------------------------------------------------

// Gram matrix in closed form (Gamma products) and its closed-form inverse
// via the explicit Hankel-moment inversion (n <= 12; conditioning makes
// larger n meaningless in doubles).
Eigen::MatrixXd ginibre_A(const ProcessSpec& spec);
Eigen::MatrixXd ginibre_A_inverse(const ProcessSpec& spec);

// Biorthogonal pair: P is a degree-p polynomial (series) or a residue loop
// around {0..p} (contour); Q is a finite Meijer-G sum (series) or a
// vertical-line Mellin integral (contour).  Normalized so that
// int_0^inf P_{s,p}(t) Q_{s,p'}(t) dt = delta_{pp'} and the kernel sum
// needs no extra weight.
double ginibre_P(const ProcessSpec& spec, int r, int p, double x,
                 Method method = Method::series);
double ginibre_Q(const ProcessSpec& spec, int s, int p, double y,
                 Method method = Method::series);

// K(r,x;s,y) = -phi_rs_term + sum_{p<n} P_{r,p}(x) Q_{s,p}(y).
double ginibre_kernel_sum(const ProcessSpec& spec, int r, double x, int s,
                          double y);

// Same kernel as one double contour integral (vertical u-line at Re = -1/2
// against a residue loop in t around {0..n-1}).
double ginibre_kernel_double(const ProcessSpec& spec, int r, double x, int s,
                             double y);

// Hard-edge scaling limit lim (1/n) K(r, x/n; s, y/n): Meijer term plus a
// double contour integral with a sin-ratio integrand (t on a right loop
// around {0,1,2,...}).  nu lists the fixed offsets nu_0..  (nu[0] == 0,
// size > max(r,s)).
double hard_edge_kernel(const std::vector<int>& nu, int r, int s, double x,
                        double y);

// ---------------------------------------------------------------------
// Truncated-unitary initial factor
// ---------------------------------------------------------------------

// Gram matrix (Beta integrals in closed form) and its closed-form inverse
// via the explicit Jacobi/Hilbert-type inversion (n <= 10).
Eigen::MatrixXd truncated_A(const ProcessSpec& spec);
Eigen::MatrixXd truncated_A_inverse(const ProcessSpec& spec);

// Biorthogonal pair with the extra Gamma(t + l - 2n + 1 + p) /
// Gamma(u - 2n + l + 1 + p) structure.  Q vanishes identically for
// s == 1, y >= 1 (the first time slice lives on (0,1)).
//
// The Q series alternates with terms up to ~e^{3.3 n} times the result at
// p near n-1 (the extra Gamma factor), so even the compensated accumulator
// runs out of digits near n ~ 20: beyond n ~ 12 prefer Method::contour,
// whose integrand never exceeds the result scale.
double truncated_P(const ProcessSpec& spec, int r, int p, double x,
                   Method method = Method::series);
double truncated_Q(const ProcessSpec& spec, int s, int p, double y,
                   Method method = Method::series);

// K = -phi_rs_term + sum_{p<n} (2p + l - 2n + 1) P_{r,p}(x) Q_{s,p}(y).
// Series-based: subject to the same n ~ 12 ceiling as truncated_Q; the
// double-contour form below stays accurate at large n (hard-edge sweeps).
double truncated_kernel_sum(const ProcessSpec& spec, int r, double x, int s,
                            double y);

// Same kernel as one double contour integral.
double truncated_kernel_double(const ProcessSpec& spec, int r, double x,
                               int s, double y);

// Hard-edge limit under l growing proportionally with n (ratio
// l_over_n >= 2): the limit kernel coincides with the Ginibre hard edge;
// l_over_n only fixes the (l-n)n rescaling convention used when finite-n
// kernels are compared against the limit, not the value.
double truncated_hard_edge(const std::vector<int>& nu, double l_over_n,
                           int r, int s, double x, double y);

// ---------------------------------------------------------------------
// Ginibre-with-source initial factor
// ---------------------------------------------------------------------

// vartheta(q; z) = (1/Gamma(nu1+1)) int_0^inf t^{nu1+z-1} e^{-t}
// 0F1(nu1+1; -q t) dt, by direct real-axis quadrature (Re z > -nu1).
cplx source_vartheta(const ProcessSpec& spec, double q, cplx z);

// Psi_r(u; x): series sums the Laguerre expansion (any r); contour runs the
// r-fold loop integral around the origin and is practical for r <= 2 (cost
// is quadrature^r; r >= 3 exhausts the budget).
double source_Psi(const ProcessSpec& spec, int r, double u, double x,
                  Method method = Method::series);

// Phi_s(q; y): vertical-line Mellin integral of y^{-z} vartheta(q; z)
// Gamma(nu_2+z)...Gamma(nu_s+z).  q may be negative (the initial
// transitions are phi_{0,s}(j, y) = Phi_s(-q_j; y)).
double source_Phi(const ProcessSpec& spec, int s, double q_arg, double y);

// Gram matrix in Laguerre closed form: a_{ij} = Gamma(j) prod_{k>=2}
// Gamma(nu_k+j) e^{q_i} L_{j-1}^{nu1}(-q_i).  Requires pairwise distinct q.
Eigen::MatrixXd source_A_laguerre(const ProcessSpec& spec);

// Inverse of the Laguerre-form Gram matrix, validated against the
// characterization identity sum_j c_j L_{j-1}^{nu1}(u) (A^{-1})_{jk} =
// e^{-q_k} prod_{l != k} (-u - q_l)/(q_k - q_l) at five u values
// (numeric_error if the residual exceeds 1e-8).
Eigen::MatrixXd source_A_inverse(const ProcessSpec& spec);

// Max-abs residual of that characterization identity at a given u, for a
// candidate inverse gamma.
double source_characterization_residual(const ProcessSpec& spec,
                                        const Eigen::MatrixXd& gamma,
                                        double u);

// K(r,x;s,y) = -phi_rs_term + int_0^inf du (1/2 pi i) oint_C dv
//   u^{nu1} e^{-u+v} Psi_r(u;x) Phi_s(v;y) / (u-v) *
//   prod_l (u+q_l)/(v+q_l),
// with C a circle enclosing every -q_l and excluding u >= 0.  The circle
// tolerates repeated q; x is limited to <= 500 (the e^{2 sqrt(xu) - u}
// envelope overflows linear-space evaluation beyond that).
double source_kernel(const ProcessSpec& spec, int r, double x, int s,
                     double y);

// Subcritical source hard edge: `contour` is identical to
// hard_edge_kernel; `g_product` evaluates the rank-one-integral form
//   -phi_rs_term + int_0^1 G^{1,0}_{0,r+1}(-; 0,-nu_1,..,-nu_r | ux)
//                          G^{s,0}_{0,s+1}(-; nu_1,..,nu_s,0 | uy) du.
double subcritical_hard_edge(const std::vector<int>& nu, int r, int s,
                             double x, double y,
                             HardEdgeForm form = HardEdgeForm::g_product);

}  // namespace ginprod::kernels
