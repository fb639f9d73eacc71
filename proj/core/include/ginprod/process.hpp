#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ginprod {

// Initial-matrix family of the product chain.  Transitions are always
// square-to-growing complex Ginibre factors; the family selects the law of
// the first factor and with it the biorthogonal structure of the process.
enum class Family {
    ginibre,            // G_1 itself complex Ginibre
    truncated_unitary,  // G_1 = upper-left block of an l x l Haar unitary
    ginibre_source,     // G_1 = G + Q, Q deterministic with sv^2 = q
};

// Full specification of a product process: n singular values tracked over m
// time slices, dimension offsets nu_0..nu_m (nu_0 == 0), and per-family
// parameters.  N_k = n + nu_k is the tall dimension of the k-th partial
// product.
struct ProcessSpec {
    int n = 1;
    int m = 1;
    std::vector<int> nu = {0, 0};
    Family family = Family::ginibre;
    int l = 0;                // truncated_unitary: ambient unitary dimension
    std::vector<double> q;    // ginibre_source: n positive source parameters
};

// One evaluation point of the space-time point process: time slice r in
// 1..m and a positive squared-singular-value coordinate.
struct KernelPoint {
    int r = 1;
    double x = 1.0;
};

// Throws domain_error when the invariants fail: n,m >= 1; nu has m+1 entries
// with nu[0] == 0 and nu[j] >= 0; truncated_unitary requires l >= 2n + nu1;
// ginibre_source requires exactly n strictly positive q entries.
void validate(const ProcessSpec& spec);

// Matrix heights N_k = n + nu_k for k = 0..m.
std::vector<int> matrix_dims(const ProcessSpec& spec);

// i-th initial ensemble function f_i (i in 1..n) of the density
// const * Delta(x) det[f_i(x_j)] prod x_j^{nu_1} e^{-x_j}:
//   ginibre           f_i(x) = x^{i-1}
//   truncated_unitary f_i(x) = e^x x^{i-1} (1-x)^{l-2n-nu_1} on (0,1), else 0
//   ginibre_source    f_i(x) = 0F1(nu_1+1; q_i x) / Gamma(nu_1+1)
std::function<double(double)> initial_f(const ProcessSpec& spec, int i);

// log f_i(x), with -inf where f_i vanishes.  The functions are nonnegative
// on (0, inf); the log form stays finite (no overflow) at arguments far
// outside the bulk, where quadrature tails still sample them.
std::function<double(double)> initial_log_f(const ProcessSpec& spec, int i);

// Gauge factor g_r(x) relating the two equivalent kernel normalizations
// (K_em = g_r(x)/g_s(y) * K): g_1 = e^{-x} x^{nu_1}, g_r = x^{nu_r} for
// 1 < r < m, g_m = 1.  For m == 1 the weight lives in phi_{0,1}, so g == 1.
double gauge_g(const ProcessSpec& spec, int r, double x);

// Human-readable family tag used in serialization and config files.
std::string family_name(Family family);

// FNV-1a hash of a canonical text encoding; stable across platforms and
// runs, used to stamp output files and trajectory batches.
std::uint64_t spec_hash(const ProcessSpec& spec);

}  // namespace ginprod
