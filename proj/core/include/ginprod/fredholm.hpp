#pragma once

#include <limits>
#include <vector>

#include "ginprod/ensembles.hpp"
#include "ginprod/process.hpp"

// Multi-time gap probabilities: the chance that no singular value visits
// window Omega_i at time l_i, computed as a Fredholm determinant
// det(I - K) of the correlation kernel restricted to the chosen windows
// and discretized with a block Nystrom rule.

namespace ginprod::fredholm {

// One forbidden window: the open interval (lo, hi) at the given time
// slice.  hi may be +infinity; such windows are truncated internally at a
// point beyond which the omitted one-point mass is below 1e-8.
struct Window {
    int time = 1;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
};

// A gap query: windows (disjoint within each time slice) plus the
// Gauss-Legendre order used per window.  The determinant is evaluated at
// this order and at 3/2 the order; the difference is the error estimate.
struct GapQuery {
    std::vector<Window> windows;
    int quadrature_order = 40;
};

struct GapResult {
    double value = 1.0;         // det(I - K) at the finer order
    double err_estimate = 0.0;  // |finer - coarser|
    int order_lo = 0;
    int order_hi = 0;
    std::vector<Window> windows;  // as evaluated (tails resolved)
};

// Gap probability for the spec's process.  Kernel entries use the family's
// validated evaluator in a single consistent gauge (block consistency is
// what makes the determinant gauge-invariant).  Throws domain_error on
// malformed queries and numeric_error when the two quadrature orders
// disagree by more than tol.  Empty windows give exactly 1.
GapResult fredholm_det(const ProcessSpec& spec, const GapQuery& query,
                       double tol = 1e-6, int threads = 1);

// Fraction of trajectories with no point in any window, with its binomial
// standard error: the Monte Carlo cross-check of fredholm_det.
struct GapFrequency {
    double frequency = 0.0;
    double std_err = 0.0;
    std::int64_t hits = 0;  // trajectories avoiding every window
};
GapFrequency empirical_gap(const ensembles::TrajectoryBatch& batch,
                           const std::vector<Window>& windows);

}  // namespace ginprod::fredholm
