#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "ginprod/process.hpp"

// Slow, independent reference implementation of the determinantal kernel:
// the generic two-sided chain assembly (kernel = -chain term + final * A^{-1}
// * initial) with every transition chain evaluated by nested quadrature, plus
// a direct joint-density integrator for tiny instances.  Exists to be
// correct, not fast; closed-form kernels are validated against it.
namespace ginprod::em {

using Transition = std::function<double(double, double)>;

// The raw chain pieces, in log space (-inf marks a zero): log_phi01 is the
// initial family {1..n} x (0,inf) -> R, log_phi_mid[r-1] the continuous
// transition from slice r to r+1, log_phi_final the monomial end cap
// x^{i-1}.  For m == 1 the nu_1-weight x^{nu_1} e^{-x} is folded into
// log_phi01 (there is no continuous transition to carry it).  Logs, because
// quadrature tails sample arguments hundreds of e-folds outside the bulk,
// where individual factors overflow a double even though every integrand
// that matters is representable once the pieces are combined.
struct TransitionSystem {
    ProcessSpec spec;
    std::function<double(int, double)> log_phi01;
    std::vector<Transition> log_phi_mid;
    std::function<double(double, int)> log_phi_final;

    double phi01(int i, double x) const { return std::exp(log_phi01(i, x)); }
    double phi_mid(int r, double x, double y) const {  // r in 1..m-1
        return std::exp(log_phi_mid[r - 1](x, y));
    }
    double phi_final(double x, int i) const {
        return std::exp(log_phi_final(x, i));
    }
};

TransitionSystem make_system(const ProcessSpec& spec);

class Oracle {
  public:
    explicit Oracle(const ProcessSpec& spec, double tol = 1e-9);

    const Eigen::MatrixXd& A() const { return a_; }
    const Eigen::MatrixXd& A_inverse() const { return a_inv_; }
    double condition() const { return cond_; }
    bool ill_conditioned() const { return cond_ > 1e12; }

    // Chain of continuous transitions from slice r to slice s (1 <= r < s <= m).
    double phi_rs(int r, int s, double x, double y) const;
    // Initial chain: slice 0 item j into slice s.
    double phi_0s(int j, int s, double y) const;
    // Chain from slice r into the monomial end cap index i.
    double phi_r_final(int r, double x, int i) const;

    // Assembled kernel in the chain gauge (the one the transition functions
    // produce directly): K_em(r,x;s,y) = g_r(x)/g_s(y) * K(r,x;s,y).
    double kernel(int r, double x, int s, double y) const;
    // Same value mapped to the reference gauge of the closed forms.
    double kernel_reference_gauge(int r, double x, int s, double y) const;

    // det[kernel(points_i, points_j)] — gauge invariant.
    double correlation_det(const std::vector<KernelPoint>& points) const;

    // A entry by nested adaptive quadrature (cost grows exponentially with
    // m; use only for m <= 3).  The constructor switches to an iterated
    // fixed-grid fold for m >= 3, and tests compare the two at m <= 3.
    double a_entry_nested(int i, int j) const { return phi_0s_final(i, j); }

  private:
    double memoized(int tag, int a, int b, double x, double y,
                    const std::function<double()>& eval) const;
    double log_phi_rs(int r, int s, double x, double y) const;
    double log_phi_0s(int j, int s, double y) const;
    double log_phi_r_final(int r, double x, int i) const;
    double phi_0s_final(int i, int j) const;

    TransitionSystem sys_;
    double tol_;
    Eigen::MatrixXd a_, a_inv_;
    double cond_ = 0.0;
    mutable std::map<std::tuple<int, int, int, double, double>, double> memo_;
    mutable std::mutex memo_mutex_;
};

// Correlation function by direct integration of the normalized joint density
// over all non-fixed coordinates (with the per-slice ordered-selection
// factors).  Requires n*m <= 4.
double brute_force_rho(const ProcessSpec& spec,
                       const std::vector<KernelPoint>& points, double tol);

}  // namespace ginprod::em
