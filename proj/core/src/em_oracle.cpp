#include "ginprod/em_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ginprod/errors.hpp"
#include "ginprod/quad.hpp"

namespace ginprod::em {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Middle transition (log) of the chain, slice r -> r+1 (1 <= r <= m-1).  The
// initial weight e^{-x} rides on r = 1 and the closing monomial weight
// y^{nu_m} on r = m-1; both apply at once when m == 2.
Transition make_log_phi_mid(const ProcessSpec& spec, int r) {
    double a = spec.nu[r] - spec.nu[r + 1] - 1.0;
    bool first = (r == 1);
    double numax = spec.nu[spec.m];
    bool last = (r == spec.m - 1);
    return [a, first, last, numax](double x, double y) -> double {
        if (x <= 0.0 || y <= 0.0) return kNegInf;
        double logv = a * std::log(x) - y / x;
        if (first) logv -= x;
        if (last) logv += numax * std::log(y);
        return logv;
    };
}

// Fixed Gauss-Legendre grid over v = ln t, with log weights that absorb the
// dt = e^v dv Jacobian.  The chain integrands are smooth on the v scale
// (power laws turn linear, exponential cutoffs turn into double-exponential
// walls), so moderate panels resolve them to near machine precision.
struct LogGrid {
    std::vector<double> v, t, lw;
};

LogGrid make_log_grid(double lo, double hi, double panel_w) {
    constexpr int kNodes = 15;
    // Golub-Welsch: nodes/weights from the Jacobi matrix of the Legendre
    // recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(kNodes, kNodes);
    for (int k = 1; k < kNodes; ++k)
        J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Eigen::VectorXd xk = es.eigenvalues();
    Eigen::VectorXd wk = 2.0 * es.eigenvectors().row(0).array().square();

    LogGrid g;
    int panels = static_cast<int>(std::ceil((hi - lo) / panel_w));
    for (int p = 0; p < panels; ++p) {
        double a = lo + (hi - lo) * p / panels;
        double b = lo + (hi - lo) * (p + 1) / panels;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int k = 0; k < kNodes; ++k) {
            double v = mid + half * xk(k);
            g.v.push_back(v);
            g.t.push_back(std::exp(v));
            g.lw.push_back(std::log(wk(k) * half) + v);
        }
    }
    return g;
}

double log_sum_exp(const std::vector<double>& e) {
    double mx = kNegInf;
    for (double x : e)
        if (x > mx) mx = x;
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : e) {
        double d = x - mx;
        if (d > -746.0) s += std::exp(d);
    }
    return mx + std::log(s);
}

// A entries by an iterated grid fold: tabulate the left marginal
// h_k(t) = int phi_{0,1}(i,.) phi_{1,2} ... phi_{k,k+1}(., t) on the grid,
// advance one transition per level in O(G^2), close with the monomial cap.
// Cost is linear in m where nested adaptive quadrature is exponential.
Eigen::MatrixXd a_by_grid_fold(const TransitionSystem& sys) {
    const LogGrid g = make_log_grid(-690.0, 300.0, 2.5);
    const size_t G = g.v.size();
    int n = sys.spec.n, m = sys.spec.m;
    Eigen::MatrixXd a(n, n);
    std::vector<double> cur(G), nxt(G), term(G);
    for (int i = 1; i <= n; ++i) {
        for (size_t q = 0; q < G; ++q) cur[q] = sys.log_phi01(i, g.t[q]);
        for (int lvl = 1; lvl <= m - 1; ++lvl) {
            const Transition& tr = sys.log_phi_mid[lvl - 1];
            for (size_t h = 0; h < G; ++h) {
                for (size_t q = 0; q < G; ++q)
                    term[q] = cur[q] + g.lw[q] + tr(g.t[q], g.t[h]);
                nxt[h] = log_sum_exp(term);
            }
            std::swap(cur, nxt);
        }
        for (int j = 1; j <= n; ++j) {
            for (size_t q = 0; q < G; ++q)
                term[q] = cur[q] + g.lw[q] + sys.log_phi_final(g.t[q], j);
            a(i - 1, j - 1) = std::exp(log_sum_exp(term));
        }
    }
    return a;
}

}  // namespace

TransitionSystem make_system(const ProcessSpec& spec) {
    validate(spec);
    TransitionSystem sys;
    sys.spec = spec;
    std::vector<std::function<double(double)>> lf;
    for (int i = 1; i <= spec.n; ++i) lf.push_back(initial_log_f(spec, i));
    if (spec.m == 1) {
        // No continuous transition exists to carry the x^{nu_1} e^{-x}
        // ensemble weight; fold it into the initial functions.
        double nu1 = spec.nu[1];
        sys.log_phi01 = [lf, nu1](int i, double x) {
            if (x <= 0.0) return kNegInf;
            return lf[i - 1](x) + nu1 * std::log(x) - x;
        };
    } else {
        sys.log_phi01 = [lf](int i, double x) { return lf[i - 1](x); };
        for (int r = 1; r <= spec.m - 1; ++r)
            sys.log_phi_mid.push_back(make_log_phi_mid(spec, r));
    }
    sys.log_phi_final = [](double x, int i) {
        if (x <= 0.0) return i == 1 ? 0.0 : kNegInf;
        return (i - 1) * std::log(x);
    };
    return sys;
}

Oracle::Oracle(const ProcessSpec& spec, double tol)
    : sys_(make_system(spec)), tol_(tol) {
    int n = spec.n;
    if (spec.m >= 3) {
        a_ = a_by_grid_fold(sys_);
    } else {
        a_.resize(n, n);
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j) a_(i - 1, j - 1) = phi_0s_final(i, j);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a_);
    if (!lu.isInvertible()) throw numeric_error("chain matrix A is singular");
    a_inv_ = lu.inverse();
    // One step of iterative refinement: A is Hankel-like and loses digits
    // quickly with n.
    a_inv_ += a_inv_ * (Eigen::MatrixXd::Identity(n, n) - a_ * a_inv_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_);
    cond_ = svd.singularValues()(0) / svd.singularValues()(n - 1);
}

double Oracle::memoized(int tag, int a, int b, double x, double y,
                        const std::function<double()>& eval) const {
    auto key = std::make_tuple(tag, a, b, x, y);
    {
        std::lock_guard<std::mutex> lock(memo_mutex_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
    }
    double v = eval();
    std::lock_guard<std::mutex> lock(memo_mutex_);
    memo_.emplace(key, v);
    return v;
}

double Oracle::log_phi_rs(int r, int s, double x, double y) const {
    if (!(1 <= r && r < s && s <= sys_.spec.m))
        throw domain_error("phi_rs requires 1 <= r < s <= m");
    if (s == r + 1) return sys_.log_phi_mid[r - 1](x, y);
    return memoized(0, r, s, x, y, [&] {
        auto res = quad::real_integral_log(
            [&](double t) {
                return log_phi_rs(r, s - 1, x, t) +
                       sys_.log_phi_mid[s - 2](t, y);
            },
            std::numeric_limits<double>::infinity(), tol_);
        return res.value;
    });
}

double Oracle::log_phi_0s(int j, int s, double y) const {
    if (!(1 <= j && j <= sys_.spec.n && 1 <= s && s <= sys_.spec.m))
        throw domain_error("phi_0s indices out of range");
    if (s == 1) return sys_.log_phi01(j, y);
    return memoized(1, j, s, y, 0.0, [&] {
        auto res = quad::real_integral_log(
            [&](double t) {
                return log_phi_0s(j, s - 1, t) + sys_.log_phi_mid[s - 2](t, y);
            },
            std::numeric_limits<double>::infinity(), tol_);
        return res.value;
    });
}

double Oracle::log_phi_r_final(int r, double x, int i) const {
    if (!(1 <= r && r <= sys_.spec.m && 1 <= i && i <= sys_.spec.n))
        throw domain_error("phi_r_final indices out of range");
    if (r == sys_.spec.m) return sys_.log_phi_final(x, i);
    return memoized(2, r, i, x, 0.0, [&] {
        auto res = quad::real_integral_log(
            [&](double t) {
                return log_phi_rs(r, sys_.spec.m, x, t) +
                       sys_.log_phi_final(t, i);
            },
            std::numeric_limits<double>::infinity(), tol_);
        return res.value;
    });
}

double Oracle::phi_rs(int r, int s, double x, double y) const {
    return std::exp(log_phi_rs(r, s, x, y));
}

double Oracle::phi_0s(int j, int s, double y) const {
    return std::exp(log_phi_0s(j, s, y));
}

double Oracle::phi_r_final(int r, double x, int i) const {
    return std::exp(log_phi_r_final(r, x, i));
}

double Oracle::phi_0s_final(int i, int j) const {
    // Full chain (0, i) -> end cap j: entry a_{ij}.
    if (sys_.spec.m == 1) {
        auto res = quad::real_integral_log(
            [&](double t) {
                return sys_.log_phi01(i, t) + sys_.log_phi_final(t, j);
            },
            std::numeric_limits<double>::infinity(), tol_);
        return std::exp(res.value);
    }
    auto res = quad::real_integral_log(
        [&](double t) {
            return sys_.log_phi01(i, t) + log_phi_r_final(1, t, j);
        },
        std::numeric_limits<double>::infinity(), tol_);
    return std::exp(res.value);
}

double Oracle::kernel(int r, double x, int s, double y) const {
    int n = sys_.spec.n;
    double second = 0.0;
    for (int i = 1; i <= n; ++i) {
        double left = phi_r_final(r, x, i);
        for (int j = 1; j <= n; ++j)
            second += left * a_inv_(i - 1, j - 1) * phi_0s(j, s, y);
    }
    double first = (r < s) ? phi_rs(r, s, x, y) : 0.0;
    return -first + second;
}

double Oracle::kernel_reference_gauge(int r, double x, int s, double y) const {
    return kernel(r, x, s, y) * gauge_g(sys_.spec, s, y) / gauge_g(sys_.spec, r, x);
}

double Oracle::correlation_det(const std::vector<KernelPoint>& points) const {
    int k = static_cast<int>(points.size());
    Eigen::MatrixXd mat(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            mat(i, j) = kernel(points[i].r, points[i].x, points[j].r, points[j].x);
    return mat.determinant();
}

namespace {

// log of the unnormalized joint density for n == 1, where every det is a
// single entry and the density is a pure product — composed in log space so
// deep chains survive the extreme abscissae of the outer quadratures.
double log_density_chain(const TransitionSystem& sys,
                         const std::vector<std::vector<double>>& slices) {
    int m = sys.spec.m;
    double lv = sys.log_phi01(1, slices[0][0]);
    for (int r = 1; r <= m - 1; ++r)
        lv += sys.log_phi_mid[r - 1](slices[r - 1][0], slices[r][0]);
    return lv + sys.log_phi_final(slices[m - 1][0], 1);
}

// Joint density of the full configuration, unnormalized:
// det[phi01(i, x^1_j)] * prod_r det[phi_mid(x^r_i, x^{r+1}_j)] *
// det[phi_final(x^m_i, j)].  Used for n >= 2, where n*m <= 4 forces m <= 2
// and a single continuous transition keeps every entry representable.
double unnormalized_density(const TransitionSystem& sys,
                            const std::vector<std::vector<double>>& slices) {
    int n = sys.spec.n;
    int m = sys.spec.m;
    Eigen::MatrixXd mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mat(i, j) = sys.phi01(i + 1, slices[0][j]);
    double dens = mat.determinant();
    for (int r = 1; r <= m - 1; ++r) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                mat(i, j) = sys.phi_mid(r, slices[r - 1][i], slices[r][j]);
        dens *= mat.determinant();
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            mat(i, j) = sys.phi_final(slices[m - 1][i], j + 1);
    return dens * mat.determinant();
}

struct FreeCoord {
    int slice;  // 0-based
    int index;  // 0-based within slice
};

// n == 1: log of the partial integral with coords below `level` fixed.
double integrate_free_log(const TransitionSystem& sys,
                          std::vector<std::vector<double>>& slices,
                          const std::vector<FreeCoord>& free_coords,
                          size_t level, double tol) {
    if (level == free_coords.size()) return log_density_chain(sys, slices);
    auto [slice, index] = free_coords[level];
    auto res = quad::real_integral_log(
        [&](double t) {
            slices[slice][index] = t;
            return integrate_free_log(sys, slices, free_coords, level + 1,
                                      tol);
        },
        std::numeric_limits<double>::infinity(), tol);
    return res.value;
}

double integrate_free(const TransitionSystem& sys,
                      std::vector<std::vector<double>>& slices,
                      const std::vector<FreeCoord>& free_coords, size_t level,
                      double tol) {
    if (level == free_coords.size())
        return unnormalized_density(sys, slices);
    auto [slice, index] = free_coords[level];
    auto res = quad::real_integral(
        [&](double t) {
            slices[slice][index] = t;
            return integrate_free(sys, slices, free_coords, level + 1, tol);
        },
        std::numeric_limits<double>::infinity(), tol);
    return res.value;
}

}  // namespace

double brute_force_rho(const ProcessSpec& spec,
                       const std::vector<KernelPoint>& points, double tol) {
    validate(spec);
    if (spec.n * spec.m > 4)
        throw domain_error("brute_force_rho limited to n*m <= 4");
    auto sys = make_system(spec);

    // Pin the first k_r coordinates of each slice to the query points.
    std::vector<std::vector<double>> slices(spec.m,
                                            std::vector<double>(spec.n, 1.0));
    std::vector<int> pinned(spec.m, 0);
    for (const auto& pt : points) {
        if (pt.r < 1 || pt.r > spec.m)
            throw domain_error("correlation point time out of range");
        int r = pt.r - 1;
        if (pinned[r] >= spec.n) return 0.0;  // more points than particles
        slices[r][pinned[r]++] = pt.x;
    }
    std::vector<FreeCoord> free_coords;
    for (int r = 0; r < spec.m; ++r)
        for (int i = pinned[r]; i < spec.n; ++i) free_coords.push_back({r, i});

    Oracle oracle(spec, tol);
    double z = std::pow(std::tgamma(spec.n + 1.0), spec.m) *
               oracle.A().determinant();

    double integral =
        spec.n == 1
            ? std::exp(integrate_free_log(sys, slices, free_coords, 0, tol))
            : integrate_free(sys, slices, free_coords, 0, tol);
    integral /= z;
    // Ordered selections of which particles sit at the pinned positions.
    for (int r = 0; r < spec.m; ++r)
        for (int k = 0; k < pinned[r]; ++k) integral *= spec.n - k;
    return integral;
}

}  // namespace ginprod::em
