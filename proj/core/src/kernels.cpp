#include "ginprod/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "ginprod/dd.hpp"
#include "ginprod/errors.hpp"
#include "ginprod/quad.hpp"
#include "ginprod/specfun.hpp"

namespace ginprod::kernels {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Contour placements.  Residue loops sit just left of the enclosed
// integers; the kernel-double loops stop at -0.4 so they never touch the
// u-line at Re u = -1/2.
constexpr double kPLoopAnchor = -0.75;       // left edge -0.5 (Re t > -1)
constexpr double kKernelLoopAnchor = -0.65;  // left edge -0.4 (Re t > -1/2)
constexpr double kLoopMargin = 0.25;
constexpr double kULineRe = -0.5;
constexpr double kMellinRe = 0.5;
constexpr double kBentHalf = 1.25;  // chord half-height of bent u-lines

double lg(double x) { return specfun::log_gamma_real(x); }
cplx clg(cplx z) { return specfun::log_gamma(z); }

// log sin(pi z), valid away from the real integers; the asymptotic branch
// avoids overflow of sinh at large |Im z| (only exp() of combined exponents
// is ever taken, so the 2 pi i branch jumps are harmless).
cplx log_sin_pi(cplx z) {
    if (std::abs(z.imag()) <= 20.0) return std::log(std::sin(kPi * z));
    cplx ipz = cplx(0.0, kPi) * z;
    if (z.imag() > 0.0) return -ipz - std::log(cplx(0.0, 2.0));
    return ipz - std::log(cplx(0.0, -2.0));
}

std::pair<std::uint64_t, std::uint64_t> bit_key(cplx z) {
    return {std::bit_cast<std::uint64_t>(z.real()),
            std::bit_cast<std::uint64_t>(z.imag())};
}

void check_x(double x, const char* who) {
    if (!(x > 1e-8 && x < 1e8))
        throw domain_error(std::string(who) +
                           ": coordinate outside (1e-8, 1e8)");
}

void check_rs(const ProcessSpec& spec, int r, int s) {
    if (r < 1 || r > spec.m || s < 1 || s > spec.m)
        throw domain_error("time index outside 1..m");
}

void require_family(const ProcessSpec& spec, Family f, const char* who) {
    validate(spec);
    if (spec.family != f)
        throw domain_error(std::string(who) +
                           ": spec carries a different initial family");
}

void check_nu_list(const std::vector<int>& nu, int r, int s) {
    if (r < 1 || s < 1) throw domain_error("time indices are 1-based");
    if (nu.empty() || nu[0] != 0)
        throw domain_error("offset list must start with nu_0 = 0");
    if (static_cast<int>(nu.size()) <= std::max(r, s))
        throw domain_error("offset list too short for the requested times");
    for (int v : nu)
        if (v < 0) throw domain_error("offsets must be nonnegative");
}

// G^{m,0}_{0,m} decays like exp(-m z^{1/m}); skip evaluation once that is
// an exact double-precision zero (quadrature tails push z to ~1e16 here).
double meijer_or_zero(const specfun::MeijerGSpec& g, double z, double tol) {
    if (g.m_order * std::pow(z, 1.0 / g.m_order) > 900.0) return 0.0;
    return specfun::meijer_g(g, z, tol);
}

quad::Path vertical(double re0) {
    quad::Path p;
    cplx a(re0, 0.0);
    p.rays.push_back({a, cplx(0.0, 1.0), 1.0, 0.0, 1.0});
    p.rays.push_back({a, cplx(0.0, -1.0), 1.0, 0.0, -1.0});
    return p;
}

// Upward line through re0 whose arms bend to 135 degrees at |Im| =
// half_h: Gamma-product integrands whose vertical decay is only polynomial
// gain super-exponential decay along these directions.
quad::Path bent_left_line(double re0, double half_h) {
    quad::Path p;
    cplx top(re0, half_h), bot(re0, -half_h);
    p.chords.push_back({bot, top});
    p.rays.push_back({top, std::polar(1.0, 3.0 * kPi / 4.0), 1.0, 0.0, 1.0});
    p.rays.push_back(
        {bot, std::polar(1.0, -3.0 * kPi / 4.0), 1.0, 0.0, -1.0});
    return p;
}

// (1/2pi i)^2 Int_u du Oint_t dt U(u) T(t) / (u - t), with T memoized
// across the whole outer refinement (it does not depend on u).
cplx double_contour(const quad::Integrand& U, const quad::Integrand& T,
                    const quad::Path& u_path, const quad::ContourSpec& t_spec,
                    double tol) {
    std::map<std::pair<std::uint64_t, std::uint64_t>, cplx> cache;
    auto t_cached = [&](cplx t) {
        auto key = bit_key(t);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        cplx v = T(t);
        cache.emplace(key, v);
        return v;
    };
    quad::Integrand outer = [&](cplx u) -> cplx {
        quad::Integrand inner = [&](cplx t) { return t_cached(t) / (u - t); };
        cplx uval = U(u);
        if (uval == cplx(0.0, 0.0)) return uval;
        return uval * quad::integrate(inner, t_spec, 0.1 * tol, 500'000).value;
    };
    return quad::integrate_path(outer, u_path, tol).value;
}

// ---------------------------------------------------------------------
// Numeric Gram data for general_kernel
// ---------------------------------------------------------------------

struct Gram {
    Eigen::MatrixXd inv;
    double cond = 0.0;
};

std::shared_ptr<const Gram> make_gram(const ProcessSpec& spec,
                                      const LogFamily& log_f, double tol) {
    int n = spec.n;
    double nu1 = spec.nu[1];
    std::vector<std::function<double(double)>> fs;
    for (int i = 1; i <= n; ++i) {
        if (log_f) {
            fs.push_back([log_f, i](double t) { return log_f(i, t); });
        } else {
            fs.push_back(initial_log_f(spec, i));
        }
    }
    Eigen::MatrixXd A(n, n);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            double pre = 0.0;
            for (int k = 2; k <= spec.m; ++k)
                pre += lg(double(spec.nu[k]) + j);
            auto f = fs[size_t(i - 1)];
            auto integ = [f, nu1, j](double t) {
                double lf = f(t);
                if (lf == kNegInf) return kNegInf;
                return lf - t + (nu1 + j - 1.0) * std::log(t);
            };
            A(i - 1, j - 1) =
                std::exp(pre + quad::real_integral_log(integ, kInf, tol).value);
        }
    }
    auto g = std::make_shared<Gram>();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw numeric_error("numeric Gram matrix is singular");
    g->inv = lu.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    g->cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    return g;
}

std::shared_ptr<const Gram> gram_for(const ProcessSpec& spec,
                                     const LogFamily& log_f, double tol) {
    if (log_f) return make_gram(spec, log_f, tol);
    static std::mutex mu;
    static std::map<std::uint64_t, std::shared_ptr<const Gram>> cache;
    std::uint64_t key = spec_hash(spec);
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto g = make_gram(spec, log_f, tol);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, g);
    return g;
}

// Initial transition phi_{0,s}(j, y) by quadrature against the family.
double phi_0s_numeric(const ProcessSpec& spec,
                      const std::function<double(double)>& log_fj, int s,
                      double y, double tol) {
    double nu1 = spec.nu[1];
    if (s == 1) {
        double lf = log_fj(y);
        return lf == kNegInf ? 0.0 : std::exp(lf + nu1 * std::log(y) - y);
    }
    specfun::MeijerGSpec g;
    g.m_order = g.q_order = s - 1;
    for (int k = 2; k <= s; ++k) g.b_params.push_back(double(spec.nu[k]));
    auto f = [&](double t) {
        double lf = log_fj(t);
        if (lf == kNegInf) return 0.0;
        double gg = meijer_or_zero(g, y / t, 1e-11);
        if (gg == 0.0) return 0.0;
        return gg * std::exp(lf + (nu1 - 1.0) * std::log(t) - t);
    };
    return quad::real_integral(f, std::numeric_limits<double>::infinity(),
                               tol)
        .value;
}

// ---------------------------------------------------------------------
// Laguerre helpers (source family)
// ---------------------------------------------------------------------

// L_k^{nu}(u) by the three-term recurrence (moderate k and u only).
double laguerre(int k, double nu, double u) {
    double lm = 0.0, l = 1.0;
    for (int i = 0; i < k; ++i) {
        double ln = ((2.0 * i + nu + 1.0 - u) * l - (i + nu) * lm) / (i + 1.0);
        lm = l;
        l = ln;
    }
    return l;
}

// e^{-u} Psi_r(u; x) through the ratio-normalized recurrence
// M_k = L_k^{nu1}(u) k! Gamma(nu1+1)/Gamma(k+nu1+1), |M_k| <= e^{u/2}:
// summing M_k exp(k ln x - ln k! - ...) keeps every intermediate within
// double range for u <= ~800, x <= ~500.
double psi_damped(const std::vector<int>& nu, int r, double u, double x) {
    double nu1 = nu[1];
    double mkm = 0.0, mk = 1.0;
    double le = -u - lg(nu1 + 1.0);
    for (int l = 1; l <= r; ++l) le -= lg(double(nu[l]) + 1.0);
    double lx = std::log(x);
    double sum = 0.0, peak = 0.0;
    int quiet = 0;
    for (int k = 0; k < 4000; ++k) {
        double term = mk * std::exp(le);
        sum += term;
        peak = std::max(peak, std::abs(term));
        if (std::abs(term) < 1e-18 * std::max(peak, std::abs(sum)) + 1e-320) {
            if (++quiet >= 4 && k >= 8) return sum;
        } else {
            quiet = 0;
        }
        double mkp =
            ((2.0 * k + nu1 + 1.0 - u) * mk - double(k) * mkm) / (k + nu1 + 1.0);
        mkm = mk;
        mk = mkp;
        le += lx - std::log(k + 1.0);
        for (int l = 1; l <= r; ++l) le -= std::log(double(nu[l]) + k + 1.0);
    }
    throw numeric_error("Laguerre series for Psi did not converge");
}

// vartheta(q; z) in closed Kummer form (exact resummation of the defining
// integral): Gamma(nu1+z) 1F1(nu1+z; nu1+1; -q) / Gamma(nu1+1).
cplx vartheta_closed(double nu1, cplx q, cplx z) {
    return std::exp(clg(nu1 + z) - lg(nu1 + 1.0)) *
           specfun::hyp1f1_c(nu1 + z, nu1 + 1.0, -q);
}

// Phi_s(q; y) for complex q (circle nodes of the source kernel).
cplx phi_s_complex(const ProcessSpec& spec, int s, cplx qa, double y,
                   double tol) {
    double nu1 = spec.nu[1];
    double ly = std::log(y);
    quad::Integrand f = [&](cplx z) -> cplx {
        cplx e = -z * ly;
        for (int j = 2; j <= s; ++j) e += clg(double(spec.nu[j]) + z);
        return std::exp(e) * vartheta_closed(nu1, qa, z);
    };
    quad::ContourSpec line{quad::ContourKind::vertical_line, kMellinRe};
    return quad::integrate(f, line, tol).value;
}

}  // namespace

// ---------------------------------------------------------------------
// Transition term
// ---------------------------------------------------------------------

double phi_rs_term(const std::vector<int>& nu, int r, int s, double x,
                   double y) {
    check_nu_list(nu, r, s);
    check_x(x, "phi_rs_term");
    check_x(y, "phi_rs_term");
    if (s <= r) return 0.0;
    specfun::MeijerGSpec g;
    g.m_order = g.q_order = s - r;
    for (int k = r + 1; k <= s; ++k) g.b_params.push_back(double(nu[k]));
    return meijer_or_zero(g, y / x, 1e-11) / x;
}

double phi_rs_term(const ProcessSpec& spec, int r, int s, double x,
                   double y) {
    validate(spec);
    check_rs(spec, r, s);
    return phi_rs_term(spec.nu, r, s, x, y);
}

// ---------------------------------------------------------------------
// Generic assembly
// ---------------------------------------------------------------------

double general_gram_condition(const ProcessSpec& spec,
                              const LogFamily& log_f) {
    validate(spec);
    return gram_for(spec, log_f, 1e-9)->cond;
}

double general_kernel(const ProcessSpec& spec, int r, double x, int s,
                      double y, const LogFamily& log_f, double tol) {
    validate(spec);
    check_rs(spec, r, s);
    check_x(x, "general_kernel");
    check_x(y, "general_kernel");
    auto gram = gram_for(spec, log_f, tol);
    int n = spec.n;
    Eigen::VectorXd fin(n), init(n);
    for (int i = 1; i <= n; ++i) {
        double e = (i - 1.0) * std::log(x);
        for (int j = r + 1; j <= spec.m; ++j)
            e += lg(double(spec.nu[j]) + i);
        fin(i - 1) = std::exp(e);
    }
    for (int j = 1; j <= n; ++j) {
        std::function<double(double)> lfj;
        if (log_f) {
            lfj = [&log_f, j](double t) { return log_f(j, t); };
        } else {
            lfj = initial_log_f(spec, j);
        }
        init(j - 1) = phi_0s_numeric(spec, lfj, s, y, tol);
    }
    double second = fin.dot(gram->inv * init);
    return -phi_rs_term(spec, r, s, x, y) + second;
}

// ---------------------------------------------------------------------
// Ginibre family
// ---------------------------------------------------------------------

Eigen::MatrixXd ginibre_A(const ProcessSpec& spec) {
    require_family(spec, Family::ginibre, "ginibre_A");
    int n = spec.n;
    double nu1 = spec.nu[1];
    Eigen::MatrixXd a(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            double e = lg(nu1 + i + j - 1.0);
            for (int k = 2; k <= spec.m; ++k)
                e += lg(double(spec.nu[k]) + j);
            a(i - 1, j - 1) = std::exp(e);
        }
    return a;
}

Eigen::MatrixXd ginibre_A_inverse(const ProcessSpec& spec) {
    require_family(spec, Family::ginibre, "ginibre_A_inverse");
    int n = spec.n;
    if (n > 12)
        throw domain_error(
            "ginibre_A_inverse: n > 12 is numerically meaningless in doubles");
    double nu = spec.nu[1];
    // Explicit inverse of the shifted-moment Hankel block (Gamma(nu+i+j-1)):
    // alpha_{k,l} = sum_p Gamma(nu+p+1)/Gamma(nu+1)^2 *
    //              (-p)_k (-p)_l / (p! (nu+1)_k (nu+1)_l k! l!)
    Eigen::MatrixXd alpha(n, n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            dd acc(0.0);
            for (int p = std::max(k, l); p < n; ++p) {
                double t = std::exp(lg(nu + p + 1.0) - 2.0 * lg(nu + 1.0) -
                                    lg(p + 1.0));
                t *= specfun::pochhammer(-double(p), k) *
                     specfun::pochhammer(-double(p), l);
                t /= specfun::pochhammer(nu + 1.0, k) *
                     specfun::pochhammer(nu + 1.0, l);
                t /= std::exp(lg(k + 1.0) + lg(l + 1.0));
                acc = acc + dd(t);
            }
            alpha(k, l) = acc.to_double();
        }
    Eigen::MatrixXd inv(n, n);
    for (int i = 1; i <= n; ++i) {
        double d = 0.0;
        for (int k = 2; k <= spec.m; ++k) d += lg(double(spec.nu[k]) + i);
        for (int j = 1; j <= n; ++j)
            inv(i - 1, j - 1) = alpha(i - 1, j - 1) * std::exp(-d);
    }
    return inv;
}

double ginibre_P(const ProcessSpec& spec, int r, int p, double x,
                 Method method) {
    require_family(spec, Family::ginibre, "ginibre_P");
    check_rs(spec, r, r);
    if (p < 0 || p >= spec.n) throw domain_error("ginibre_P: p outside 0..n-1");
    check_x(x, "ginibre_P");
    const auto& nu = spec.nu;
    if (method == Method::series) {
        // sum_{i<=p} (-1)^{p-i} x^i / ((p-i)! i! prod_{j=1}^r Gamma(nu_j+i+1))
        dd acc(0.0);
        for (int i = 0; i <= p; ++i) {
            double e = i * std::log(x) - lg(p - i + 1.0) - lg(i + 1.0);
            for (int j = 1; j <= r; ++j) e -= lg(double(nu[j]) + i + 1.0);
            acc = acc + dd(((p - i) % 2 == 0 ? 1.0 : -1.0) * std::exp(e));
        }
        return acc.to_double();
    }
    double lx = std::log(x);
    quad::Integrand f = [&](cplx t) -> cplx {
        cplx e = clg(t - double(p)) + t * lx;
        for (int j = 0; j <= r; ++j) e -= clg(t + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::ContourSpec loop{quad::ContourKind::closed_integer_loop,
                           kPLoopAnchor, p, kLoopMargin};
    return quad::integrate(f, loop, 1e-11).value.real();
}

double ginibre_Q(const ProcessSpec& spec, int s, int p, double y,
                 Method method) {
    require_family(spec, Family::ginibre, "ginibre_Q");
    check_rs(spec, s, s);
    if (p < 0 || p >= spec.n) throw domain_error("ginibre_Q: p outside 0..n-1");
    check_x(y, "ginibre_Q");
    const auto& nu = spec.nu;
    double nu1 = nu[1];
    if (method == Method::series) {
        // Gamma(1+nu1+p) p! sum_j (-1)^{p-j}
        //   G^{s,0}_{0,s}(-; nu1+j, nu_2..nu_s | y) / ((p-j)! j! Gamma(nu1+1+j))
        dd acc(0.0);
        for (int j = 0; j <= p; ++j) {
            specfun::MeijerGSpec g;
            g.m_order = g.q_order = s;
            g.b_params.push_back(nu1 + j);
            for (int k = 2; k <= s; ++k) g.b_params.push_back(double(nu[k]));
            double gv = meijer_or_zero(g, y, 1e-12);
            double e = lg(1.0 + nu1 + p) + lg(p + 1.0) - lg(p - j + 1.0) -
                       lg(j + 1.0) - lg(nu1 + 1.0 + j);
            acc = acc + dd(((p - j) % 2 == 0 ? 1.0 : -1.0) * gv * std::exp(e));
        }
        return acc.to_double();
    }
    double ly = std::log(y);
    quad::Integrand f = [&](cplx u) -> cplx {
        cplx e = -clg(u - double(p)) - u * ly;
        for (int j = 0; j <= s; ++j) e += clg(u + double(nu[j]));
        return std::exp(e);
    };
    quad::ContourSpec line{quad::ContourKind::vertical_line, kMellinRe};
    return quad::integrate(f, line, 1e-11).value.real();
}

double ginibre_kernel_sum(const ProcessSpec& spec, int r, double x, int s,
                          double y) {
    require_family(spec, Family::ginibre, "ginibre_kernel_sum");
    check_rs(spec, r, s);
    check_x(x, "ginibre_kernel_sum");
    check_x(y, "ginibre_kernel_sum");
    double acc = 0.0;
    for (int p = 0; p < spec.n; ++p)
        acc += ginibre_P(spec, r, p, x) * ginibre_Q(spec, s, p, y);
    return -phi_rs_term(spec, r, s, x, y) + acc;
}

double ginibre_kernel_double(const ProcessSpec& spec, int r, double x, int s,
                             double y) {
    require_family(spec, Family::ginibre, "ginibre_kernel_double");
    check_rs(spec, r, s);
    check_x(x, "ginibre_kernel_double");
    check_x(y, "ginibre_kernel_double");
    const auto& nu = spec.nu;
    int n = spec.n;
    double lx = std::log(x), ly = std::log(y);
    quad::Integrand T = [&](cplx t) -> cplx {
        cplx e = clg(t - double(n) + 1.0) + t * lx;
        for (int j = 0; j <= r; ++j) e -= clg(t + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::Integrand U = [&](cplx u) -> cplx {
        cplx e = -clg(u - double(n) + 1.0) - (u + 1.0) * ly;
        for (int j = 0; j <= s; ++j) e += clg(u + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::ContourSpec loop{quad::ContourKind::closed_integer_loop,
                           kKernelLoopAnchor, n - 1, kLoopMargin};
    cplx k2 = double_contour(U, T, vertical(kULineRe), loop, 1e-9);
    return -phi_rs_term(spec, r, s, x, y) + k2.real();
}

double hard_edge_kernel(const std::vector<int>& nu, int r, int s, double x,
                        double y) {
    check_nu_list(nu, r, s);
    check_x(x, "hard_edge_kernel");
    check_x(y, "hard_edge_kernel");
    double lx = std::log(x), ly = std::log(y);
    quad::Integrand T = [&](cplx t) -> cplx {
        cplx e = t * lx - log_sin_pi(t);
        for (int j = 0; j <= r; ++j) e -= clg(t + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::Integrand U = [&](cplx u) -> cplx {
        cplx e = -(u + 1.0) * ly + log_sin_pi(u);
        for (int j = 0; j <= s; ++j) e += clg(u + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::ContourSpec hankel{quad::ContourKind::hankel_right_loop,
                             kKernelLoopAnchor, 0, kLoopMargin};
    // One net Gamma decay factor is eaten by sin(pi u); on the line that
    // leaves nothing at s = 1, so the arms bend into Gamma-decaying
    // directions there.
    quad::Path upath = (s == 1) ? bent_left_line(kULineRe, kBentHalf)
                                : vertical(kULineRe);
    cplx k2 = double_contour(U, T, upath, hankel, 1e-9);
    return -phi_rs_term(nu, r, s, x, y) + k2.real();
}

// ---------------------------------------------------------------------
// Truncated-unitary family
// ---------------------------------------------------------------------

Eigen::MatrixXd truncated_A(const ProcessSpec& spec) {
    require_family(spec, Family::truncated_unitary, "truncated_A");
    int n = spec.n, l = spec.l;
    double nu1 = spec.nu[1];
    Eigen::MatrixXd a(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            // Beta(nu1+i+j-1, l-2n-nu1+1) times the Gamma-product column
            double e = lg(nu1 + i + j - 1.0) + lg(l - 2.0 * n - nu1 + 1.0) -
                       lg(double(i + j + l) - 2.0 * n);
            for (int k = 2; k <= spec.m; ++k)
                e += lg(double(spec.nu[k]) + j);
            a(i - 1, j - 1) = std::exp(e);
        }
    return a;
}

Eigen::MatrixXd truncated_A_inverse(const ProcessSpec& spec) {
    require_family(spec, Family::truncated_unitary, "truncated_A_inverse");
    int n = spec.n, l = spec.l;
    if (n > 10)
        throw domain_error(
            "truncated_A_inverse: n > 10 is numerically meaningless in "
            "doubles");
    double al = spec.nu[1];
    double be = double(l) - 2.0 * n - al;
    double ab1 = al + be + 1.0;  // = l - 2n + 1
    // Explicit inverse of the Jacobi moment block
    // ((al+1)_{k+h} / (al+be+2)_{k+h})_{k,h=0}^{n-1}.
    Eigen::MatrixXd gzc(n, n);
    for (int k = 0; k < n; ++k)
        for (int h = 0; h < n; ++h) {
            double sgn = ((k + h) % 2 == 0) ? 1.0 : -1.0;
            double pref = sgn * specfun::pochhammer(ab1, k) *
                          specfun::pochhammer(ab1, h) /
                          (specfun::pochhammer(al + 1.0, k) *
                           specfun::pochhammer(al + 1.0, h) * ab1);
            dd acc(0.0);
            for (int p = std::max(k, h); p < n; ++p) {
                double t = (2.0 * p + ab1) *
                           specfun::pochhammer(al + 1.0, p) /
                           (specfun::pochhammer(ab1, p) *
                            specfun::pochhammer(be + 1.0, p));
                t *= std::exp(lg(p + 1.0) - lg(p - k + 1.0) - lg(p - h + 1.0) -
                              lg(k + 1.0) - lg(h + 1.0));
                t *= specfun::pochhammer(ab1 + k, p) *
                     specfun::pochhammer(ab1 + h, p);
                acc = acc + dd(t);
            }
            gzc(k, h) = pref * acc.to_double();
        }
    double lc = lg(be + 1.0) + lg(al + 1.0) - lg(al + be + 2.0);
    Eigen::MatrixXd inv(n, n);
    for (int i = 1; i <= n; ++i) {
        double d = lc;
        for (int k = 2; k <= spec.m; ++k) d += lg(double(spec.nu[k]) + i);
        for (int j = 1; j <= n; ++j)
            inv(i - 1, j - 1) = gzc(i - 1, j - 1) * std::exp(-d);
    }
    return inv;
}

double truncated_P(const ProcessSpec& spec, int r, int p, double x,
                   Method method) {
    require_family(spec, Family::truncated_unitary, "truncated_P");
    check_rs(spec, r, r);
    if (p < 0 || p >= spec.n)
        throw domain_error("truncated_P: p outside 0..n-1");
    check_x(x, "truncated_P");
    const auto& nu = spec.nu;
    int n = spec.n, l = spec.l;
    double l2n = double(l) - 2.0 * n;
    if (method == Method::series) {
        dd acc(0.0);
        for (int i = 0; i <= p; ++i) {
            double e = lg(l2n + i + 1.0 + p) + i * std::log(x) -
                       lg(p - i + 1.0) - lg(i + 1.0);
            for (int j = 1; j <= r; ++j) e -= lg(double(nu[j]) + i + 1.0);
            acc = acc + dd(((p - i) % 2 == 0 ? 1.0 : -1.0) * std::exp(e));
        }
        return acc.to_double();
    }
    double lx = std::log(x);
    quad::Integrand f = [&](cplx t) -> cplx {
        cplx e = clg(t - double(p)) + clg(t + l2n + 1.0 + double(p)) + t * lx;
        for (int j = 0; j <= r; ++j) e -= clg(t + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::ContourSpec loop{quad::ContourKind::closed_integer_loop,
                           kPLoopAnchor, p, kLoopMargin};
    return quad::integrate(f, loop, 1e-11).value.real();
}

double truncated_Q(const ProcessSpec& spec, int s, int p, double y,
                   Method method) {
    require_family(spec, Family::truncated_unitary, "truncated_Q");
    check_rs(spec, s, s);
    if (p < 0 || p >= spec.n)
        throw domain_error("truncated_Q: p outside 0..n-1");
    check_x(y, "truncated_Q");
    const auto& nu = spec.nu;
    int n = spec.n, l = spec.l;
    double nu1 = nu[1];
    double l2n = double(l) - 2.0 * n;
    if (s == 1 && y >= 1.0) return 0.0;  // first slice lives on (0,1)
    if (method == Method::series) {
        // (-1)^p / C_p times the Meijer-G sum, with
        // C_p = Gamma(be+1)/Gamma(ab1) * Gamma(ab1+p) (nu1-l+2n-p)_p /
        //       (p! (1+nu1)_p)
        double cp = std::exp(lg(l2n - nu1 + 1.0) - lg(l2n + 1.0) +
                             lg(l2n + 1.0 + p) - lg(p + 1.0)) *
                    specfun::pochhammer(nu1 - l2n - p, p) /
                    specfun::pochhammer(1.0 + nu1, p);
        dd acc(0.0);
        for (int j = 0; j <= p; ++j) {
            specfun::MeijerGSpec g;
            g.m_order = g.q_order = s;
            g.p_order = 1;
            g.a_params.push_back(l2n + j + 1.0);
            g.b_params.push_back(nu1 + j);
            for (int k = 2; k <= s; ++k) g.b_params.push_back(double(nu[k]));
            double gv = specfun::meijer_g(g, y, 1e-12);
            double e = lg(l2n - nu1 + 1.0) + lg(nu1 + 1.0) - lg(l2n + 1.0) +
                       lg(l2n + j + 1.0 + p) - lg(p - j + 1.0) - lg(j + 1.0) -
                       lg(nu1 + 1.0 + j);
            acc = acc + dd(((p - j) % 2 == 0 ? 1.0 : -1.0) * gv * std::exp(e));
        }
        double sign = (p % 2 == 0) ? 1.0 : -1.0;
        return sign * acc.to_double() / cp;
    }
    double ly = std::log(y);
    quad::Integrand f = [&](cplx u) -> cplx {
        cplx e = -clg(u - double(p)) - clg(u - 2.0 * n + double(l) + 1.0 + double(p)) - u * ly;
        for (int j = 0; j <= s; ++j) e += clg(u + double(nu[j]));
        return std::exp(e);
    };
    if (s == 1) {
        // Net Gamma decay vanishes; bend the arms (converges for y < 1).
        auto r = quad::integrate_path(f, bent_left_line(kMellinRe, kBentHalf),
                                      1e-11);
        return r.value.real();
    }
    quad::ContourSpec line{quad::ContourKind::vertical_line, kMellinRe};
    return quad::integrate(f, line, 1e-11).value.real();
}

double truncated_kernel_sum(const ProcessSpec& spec, int r, double x, int s,
                            double y) {
    require_family(spec, Family::truncated_unitary, "truncated_kernel_sum");
    check_rs(spec, r, s);
    check_x(x, "truncated_kernel_sum");
    check_x(y, "truncated_kernel_sum");
    double w0 = double(spec.l) - 2.0 * spec.n + 1.0;
    double acc = 0.0;
    for (int p = 0; p < spec.n; ++p)
        acc += (2.0 * p + w0) * truncated_P(spec, r, p, x) *
               truncated_Q(spec, s, p, y);
    return -phi_rs_term(spec, r, s, x, y) + acc;
}

double truncated_kernel_double(const ProcessSpec& spec, int r, double x,
                               int s, double y) {
    require_family(spec, Family::truncated_unitary,
                   "truncated_kernel_double");
    check_rs(spec, r, s);
    check_x(x, "truncated_kernel_double");
    check_x(y, "truncated_kernel_double");
    const auto& nu = spec.nu;
    int n = spec.n, l = spec.l;
    if (s == 1 && y >= 1.0) return 0.0;
    double lx = std::log(x), ly = std::log(y);
    quad::Integrand T = [&](cplx t) -> cplx {
        cplx e = clg(t + 1.0 - double(n)) + clg(t + double(l - n) + 1.0) + t * lx;
        for (int j = 0; j <= r; ++j) e -= clg(t + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::Integrand U = [&](cplx u) -> cplx {
        cplx e = -clg(u + 1.0 - double(n)) - clg(u + double(l - n) + 1.0) -
                 (u + 1.0) * ly;
        for (int j = 0; j <= s; ++j) e += clg(u + double(nu[j]) + 1.0);
        return std::exp(e);
    };
    quad::ContourSpec loop{quad::ContourKind::closed_integer_loop,
                           kKernelLoopAnchor, n - 1, kLoopMargin};
    quad::Path upath = (s == 1) ? bent_left_line(kULineRe, kBentHalf)
                                : vertical(kULineRe);
    cplx k2 = double_contour(U, T, upath, loop, 1e-9);
    return -phi_rs_term(spec, r, s, x, y) + k2.real();
}

double truncated_hard_edge(const std::vector<int>& nu, double l_over_n,
                           int r, int s, double x, double y) {
    if (!(l_over_n >= 2.0))
        throw domain_error(
            "truncated_hard_edge: the truncation must grow at least as 2n");
    return hard_edge_kernel(nu, r, s, x, y);
}

// ---------------------------------------------------------------------
// Source family
// ---------------------------------------------------------------------

cplx source_vartheta(const ProcessSpec& spec, double q, cplx z) {
    validate(spec);
    double nu1 = spec.nu[1];
    if (!(z.real() > -nu1))
        throw domain_error("source_vartheta: need Re z > -nu_1");
    if (q < 0.0 || q > 300.0)
        throw domain_error("source_vartheta: q outside [0, 300]");
    double lgn = lg(nu1 + 1.0);
    quad::Integrand f = [&](cplx t) -> cplx {
        double tr = t.real();
        return std::exp((nu1 + z - 1.0) * std::log(tr) - tr - lgn) *
               specfun::hyp0f1(nu1 + 1.0, -q * tr);
    };
    return quad::real_integral_c(f, std::numeric_limits<double>::infinity(),
                                 1e-10)
        .value;
}

double source_Psi(const ProcessSpec& spec, int r, double u, double x,
                  Method method) {
    validate(spec);
    check_rs(spec, r, r);
    if (u < 0.0 || u > 800.0)
        throw domain_error("source_Psi: u outside [0, 800]");
    if (!(x > 1e-8 && x <= 500.0))
        throw domain_error("source_Psi: x outside (1e-8, 500]");
    double nu1 = spec.nu[1];
    if (method == Method::series) {
        if (u + 2.0 * std::sqrt(x * std::max(u, 1.0)) > 690.0)
            throw numeric_error("source_Psi overflows a double");
        return psi_damped(spec.nu, r, u, x) * std::exp(u);
    }
    // r-fold loop around the origin; one shared evaluation budget so deep
    // nests fail fast instead of running for hours.
    double radius = std::max(1.0, std::pow(x * (1.0 + u), 1.0 / (2.0 * r)));
    long used = 0;
    const long budget = quad::kDefaultBudget;
    std::function<cplx(int, cplx)> level = [&](int depth,
                                               cplx wprod) -> cplx {
        quad::Integrand f = [&](cplx w) -> cplx {
            cplx wp(1.0, 0.0);  // w^{nu_depth + 1}, integer power: single
            for (int k = 0; k <= spec.nu[depth]; ++k) wp *= w;
            cplx base = std::exp(w) / wp;
            cplx prod = wprod * w;
            if (depth == r) {
                if (++used > budget)
                    throw budget_error("source_Psi contour budget exhausted",
                                       cplx(0.0, 0.0), 1.0);
                cplx zi = x / prod;
                return base * std::exp(zi) *
                       specfun::hyp0f1_c(nu1 + 1.0, -zi * u);
            }
            return base * level(depth + 1, prod);
        };
        quad::ContourSpec circ{quad::ContourKind::neg_axis_loop, radius};
        return quad::integrate(f, circ, depth == 1 ? 1e-10 : 1e-11).value;
    };
    cplx v = level(1, cplx(1.0, 0.0));
    return v.real() / std::exp(lg(nu1 + 1.0));
}

double source_Phi(const ProcessSpec& spec, int s, double q_arg, double y) {
    validate(spec);
    check_rs(spec, s, s);
    check_x(y, "source_Phi");
    if (std::abs(q_arg) > 300.0)
        throw domain_error("source_Phi: |q| outside [0, 300]");
    return phi_s_complex(spec, s, cplx(q_arg, 0.0), y, 1e-10).real();
}

Eigen::MatrixXd source_A_laguerre(const ProcessSpec& spec) {
    require_family(spec, Family::ginibre_source, "source_A_laguerre");
    int n = spec.n;
    double nu1 = spec.nu[1];
    for (int i = 0; i < n; ++i) {
        if (spec.q[size_t(i)] > 200.0)
            throw domain_error("source_A_laguerre: q entries must be <= 200");
        for (int j = i + 1; j < n; ++j)
            if (std::abs(spec.q[size_t(i)] - spec.q[size_t(j)]) < 1e-12)
                throw domain_error(
                    "source_A_laguerre: repeated source parameters (use the "
                    "contour kernel, which tolerates multiplicity)");
    }
    Eigen::MatrixXd a(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            double e = lg(double(j)) + spec.q[size_t(i - 1)];
            for (int k = 2; k <= spec.m; ++k)
                e += lg(double(spec.nu[k]) + j);
            a(i - 1, j - 1) =
                std::exp(e) * laguerre(j - 1, nu1, -spec.q[size_t(i - 1)]);
        }
    return a;
}

double source_characterization_residual(const ProcessSpec& spec,
                                        const Eigen::MatrixXd& gamma,
                                        double u) {
    require_family(spec, Family::ginibre_source,
                   "source_characterization_residual");
    int n = spec.n;
    double nu1 = spec.nu[1];
    double res = 0.0;
    for (int k = 1; k <= n; ++k) {
        double lhs = 0.0;
        for (int j = 1; j <= n; ++j) {
            double c = lg(double(j));
            for (int kk = 2; kk <= spec.m; ++kk)
                c += lg(double(spec.nu[kk]) + j);
            lhs += std::exp(c) * laguerre(j - 1, nu1, u) * gamma(j - 1, k - 1);
        }
        double rhs = std::exp(-spec.q[size_t(k - 1)]);
        for (int l = 1; l <= n; ++l) {
            if (l == k) continue;
            rhs *= (-u - spec.q[size_t(l - 1)]) /
                   (spec.q[size_t(k - 1)] - spec.q[size_t(l - 1)]);
        }
        res = std::max(res, std::abs(lhs - rhs));
    }
    return res;
}

Eigen::MatrixXd source_A_inverse(const ProcessSpec& spec) {
    Eigen::MatrixXd a = source_A_laguerre(spec);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw numeric_error("source Gram matrix is singular");
    Eigen::MatrixXd inv = lu.inverse();
    // one Newton polish, then the characterization identity as a gate
    inv = inv * (2.0 * Eigen::MatrixXd::Identity(spec.n, spec.n) - a * inv);
    for (double u : {0.37, 1.12, 2.89, 4.51, 7.23}) {
        if (source_characterization_residual(spec, inv, u) > 1e-8)
            throw numeric_error(
                "source Gram inverse fails its characterization identity");
    }
    return inv;
}

double source_kernel(const ProcessSpec& spec, int r, double x, int s,
                     double y) {
    require_family(spec, Family::ginibre_source, "source_kernel");
    check_rs(spec, r, s);
    if (!(x > 1e-8 && x <= 500.0))
        throw domain_error("source_kernel: x outside (1e-8, 500]");
    check_x(y, "source_kernel");
    double nu1 = spec.nu[1];
    double qmin = *std::min_element(spec.q.begin(), spec.q.end());
    double qmax = *std::max_element(spec.q.begin(), spec.q.end());
    if (qmin <= 0.0)
        throw contour_error("source_kernel: source parameters must be > 0");
    if (qmax > 300.0)
        throw domain_error("source_kernel: q entries must be <= 300");
    const double c0 = -0.5 * (qmin + qmax);
    const double rad = 0.5 * qmax;

    std::map<std::pair<std::uint64_t, std::uint64_t>, cplx> phi_cache;
    auto phi_at = [&](cplx v) {
        auto key = bit_key(v);
        auto it = phi_cache.find(key);
        if (it != phi_cache.end()) return it->second;
        cplx val = phi_s_complex(spec, s, v, y, 1e-10);
        phi_cache.emplace(key, val);
        return val;
    };

    // (1/2pi i) oint over the circle |v - c0| = rad by trapezoid doubling
    // (nodes nest, so the Phi cache is shared across refinements and u's).
    auto inner = [&](double u) -> cplx {
        cplx prev(0.0, 0.0);
        for (int N = 32; N <= (1 << 13); N *= 2) {
            cplx sum(0.0, 0.0);
            for (int k = 0; k < N; ++k) {
                double th = (2.0 * kPi) * (double(k) / double(N));
                cplx v = c0 + std::polar(rad, th);
                cplx f = std::exp(v) * phi_at(v) / (u - v);
                for (double ql : spec.q) f *= (u + ql) / (v + ql);
                sum += f * (v - c0);
            }
            cplx I = sum / double(N);
            if (N > 32 &&
                std::abs(I - prev) <= 1e-12 + 1e-10 * std::abs(I))
                return I;
            prev = I;
        }
        throw numeric_error("source kernel circle did not converge");
    };

    quad::RealIntegrand outer = [&](double u) -> double {
        if (u > 800.0) return 0.0;
        double damped = psi_damped(spec.nu, r, u, x);
        if (damped == 0.0) return 0.0;
        double w = std::exp(nu1 * std::log(u));
        return w * damped * inner(u).real();
    };
    double I = quad::real_integral(
                   outer, std::numeric_limits<double>::infinity(), 1e-8)
                   .value;
    return -phi_rs_term(spec, r, s, x, y) + I;
}

// ---------------------------------------------------------------------
// Subcritical source hard edge
// ---------------------------------------------------------------------

double subcritical_hard_edge(const std::vector<int>& nu, int r, int s,
                             double x, double y, HardEdgeForm form) {
    if (form == HardEdgeForm::contour) return hard_edge_kernel(nu, r, s, x, y);
    check_nu_list(nu, r, s);
    check_x(x, "subcritical_hard_edge");
    check_x(y, "subcritical_hard_edge");
    specfun::MeijerGSpec gp;
    gp.m_order = 1;
    gp.q_order = r + 1;
    gp.b_params.push_back(0.0);
    for (int j = 1; j <= r; ++j) gp.b_params.push_back(-double(nu[j]));
    specfun::MeijerGSpec gq;
    gq.m_order = s;
    gq.q_order = s + 1;
    for (int j = 1; j <= s; ++j) gq.b_params.push_back(double(nu[j]));
    gq.b_params.push_back(0.0);
    auto f = [&](double u) {
        return specfun::meijer_g(gp, u * x, 1e-11) *
               specfun::meijer_g(gq, u * y, 1e-11);
    };
    double I = quad::real_integral(f, 1.0, 1e-9).value;
    return -phi_rs_term(nu, r, s, x, y) + I;
}

}  // namespace ginprod::kernels
