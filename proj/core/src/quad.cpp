#include "ginprod/quad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ginprod::quad {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kPi = 3.14159265358979323846;

// QUADPACK 7-15 Gauss-Kronrod pair on [-1,1].  Kronrod abscissae (positive
// half), Kronrod weights, and the embedded 7-point Gauss weights.
constexpr double xgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
constexpr double wgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
constexpr double wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct Panel {
    int piece;
    double a, b;
    cplx val;
    double err;
};

// Shared adaptive engine over real-parameter pieces g_i : [a,b] -> C.
struct Engine {
    std::vector<std::function<cplx(double)>> pieces;
    std::vector<Panel> panels;  // kept sorted by (piece, a)
    double tail_est = 0.0;
    long budget;
    long evals = 0;

    explicit Engine(long b) : budget(b) {}

    cplx eval(int piece, double x) {
        ++evals;
        cplx v = pieces[static_cast<size_t>(piece)](x);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw nan_error("integrand returned a non-finite value",
                            cplx(x, static_cast<double>(piece)));
        return v;
    }

    Panel gk15(int piece, double a, double b) {
        double c = 0.5 * (a + b), h = 0.5 * (b - a);
        cplx fc = eval(piece, c);
        cplx K = wgk[7] * fc;
        cplx G = wg[3] * fc;
        for (int j = 0; j < 7; ++j) {
            double dx = h * xgk[j];
            cplx f1 = eval(piece, c - dx);
            cplx f2 = eval(piece, c + dx);
            K += wgk[j] * (f1 + f2);
            if (j == 1) G += wg[0] * (f1 + f2);
            if (j == 3) G += wg[1] * (f1 + f2);
            if (j == 5) G += wg[2] * (f1 + f2);
        }
        K *= h;
        G *= h;
        return {piece, a, b, K, std::abs(K - G)};
    }

    void add_panel(const Panel& p) {
        auto it = std::lower_bound(
            panels.begin(), panels.end(), p, [](const Panel& x, const Panel& y) {
                return x.piece != y.piece ? x.piece < y.piece : x.a < y.a;
            });
        panels.insert(it, p);
    }

    cplx total() const {
        cplx s{0.0, 0.0};
        for (const auto& p : panels) s += p.val;
        return s;
    }

    double total_err() const {
        double e = tail_est;
        for (const auto& p : panels) e += p.err;
        return e;
    }

    double peak_abs() const {
        double m = 0.0;
        for (const auto& p : panels) m = std::max(m, std::abs(p.val));
        return m;
    }

    void check_budget(long next) {
        if (evals + next > budget)
            throw budget_error("quadrature node budget exhausted", total(),
                               total_err());
    }

    // Refine the worst panel until the summed error meets tol relative to
    // the current value, or nothing improvable remains.
    void refine(double tol) {
        const size_t max_panels = 40000;
        size_t since_check = 0;
        double e_check = std::numeric_limits<double>::infinity();
        for (;;) {
            cplx I = total();
            double E = total_err();
            double target = tol * std::max(std::abs(I), kTiny);
            if (E <= target) return;
            // Stall detection: when the integrand carries noise (e.g. it is
            // itself computed by an inner quadrature), the summed error
            // plateaus and no amount of splitting helps.  Accept the
            // current estimate instead of churning to the panel limit.
            if (++since_check >= 64) {
                if (E > 0.7 * e_check) return;
                e_check = E;
                since_check = 0;
            }
            size_t worst = panels.size();
            double we = 0.0;
            for (size_t i = 0; i < panels.size(); ++i)
                if (panels[i].err > we) {
                    we = panels[i].err;
                    worst = i;
                }
            // Roundoff floor: splitting cannot help below ~eps of the scale.
            double floor_err =
                8e-17 * std::max(peak_abs(), std::abs(I)) *
                std::max<double>(1.0, static_cast<double>(panels.size()));
            if (worst == panels.size() || we <= floor_err) return;
            if (panels.size() >= max_panels)
                throw budget_error("quadrature panel limit exhausted", I, E);
            check_budget(30);
            Panel p = panels[worst];
            panels.erase(panels.begin() + static_cast<long>(worst));
            double mid = 0.5 * (p.a + p.b);
            add_panel(gk15(p.piece, p.a, mid));
            add_panel(gk15(p.piece, mid, p.b));
        }
    }
};

// Extend a ray piece panel by panel (geometrically growing) until two
// consecutive panels are negligible, the cap is hit, or the budget dies.
// Returns a geometric tail estimate.
double extend_ray(Engine& eng, int piece, double scale, double max_len,
                  double stop_abs) {
    double l = 0.0, step = scale;
    double prev_mag = std::numeric_limits<double>::infinity();
    double peak = 0.0;
    int consecutive_small = 0;
    const double hard_cap = max_len > 0 ? max_len : 2e4 * scale;
    double last_mag = 0.0;
    while (l < hard_cap) {
        eng.check_budget(15);
        double hi = std::min(l + step, hard_cap);
        Panel p = eng.gk15(piece, l, hi);
        eng.add_panel(p);
        last_mag = std::abs(p.val) + p.err;
        peak = std::max(peak, last_mag);
        double floor = std::max(stop_abs, 1e-17 * peak);
        // A leading dead zone (mass far from the ray origin, with the
        // integrand underflowing to exact zero near it) must not trip the
        // tail stop before any mass has been seen.
        if (peak > 0.0 && last_mag <= floor)
            ++consecutive_small;
        else
            consecutive_small = 0;
        // Early stop once the integrand is dead; for capped rays the skipped
        // remainder is certified at the floor level.
        if (consecutive_small >= 2) return 0.5 * last_mag;
        l = hi;
        step *= 2.0;
        if (max_len > 0 && l >= max_len) break;
        prev_mag = last_mag;
    }
    if (max_len > 0) {
        // Truncated by request: certify the tail from the observed decay.
        if (std::isfinite(prev_mag) && last_mag < 0.9 * prev_mag &&
            prev_mag > 0) {
            double rho = last_mag / prev_mag;
            return last_mag * rho / (1.0 - rho);
        }
        return last_mag;
    }
    if (peak == 0.0) return 0.0;  // identically zero out to the horizon
    throw budget_error("ray extension did not converge", eng.total(),
                       eng.total_err() + last_mag);
}

QuadResult finish(Engine& eng, const Path& path, double tol) {
    eng.refine(tol);
    cplx I = eng.total();
    double E = eng.total_err();
    if (path.closed_prefactor) {
        I /= cplx(0.0, 2.0 * kPi);
        E /= 2.0 * kPi;
    }
    return {I, E, eng.evals};
}

}  // namespace

QuadResult integrate_path(const Integrand& f, const Path& path, double tol,
                          long budget) {
    Engine eng(budget);
    for (const auto& ch : path.chords) {
        cplx a = ch.a, d = ch.b - ch.a;
        eng.pieces.emplace_back(
            [f, a, d](double t) { return f(a + t * d) * d; });
    }
    for (const auto& arc : path.arcs) {
        cplx c = arc.center;
        double r = arc.radius;
        eng.pieces.emplace_back([f, c, r](double th) {
            cplx e = std::polar(r, th);
            return f(c + e) * cplx(0.0, 1.0) * e;
        });
    }
    std::vector<int> ray_piece;
    for (const auto& ray : path.rays) {
        cplx s = ray.start, d = ray.dir;
        double sg = ray.sign;
        ray_piece.push_back(static_cast<int>(eng.pieces.size()));
        eng.pieces.emplace_back(
            [f, s, d, sg](double t) { return f(s + t * d) * d * sg; });
    }

    int pc = 0;
    for (size_t i = 0; i < path.chords.size(); ++i, ++pc)
        eng.add_panel(eng.gk15(pc, 0.0, 1.0));
    for (const auto& arc : path.arcs) {
        eng.add_panel(eng.gk15(pc, arc.th0, arc.th1));
        ++pc;
    }

    // Alternate ray extension and refinement so the tail threshold tracks
    // the converging value.
    double stop_abs = 0.0;
    for (int round = 0; round < 6; ++round) {
        eng.tail_est = 0.0;
        for (size_t r = 0; r < path.rays.size(); ++r) {
            // Drop panels of this ray and re-extend on later rounds.
            if (round > 0) {
                int rp = ray_piece[r];
                std::erase_if(eng.panels,
                              [rp](const Panel& p) { return p.piece == rp; });
            }
            eng.tail_est += extend_ray(eng, ray_piece[r], path.rays[r].scale,
                                       path.rays[r].max_len, stop_abs);
        }
        eng.refine(tol);
        cplx I = eng.total();
        double target = tol * std::max(std::abs(I), kTiny);
        if (eng.tail_est <= 0.5 * target || path.rays.empty())
            return finish(eng, path, tol);
        stop_abs = 0.05 * target;
    }
    return finish(eng, path, tol);  // best effort; tail already in estimate
}

namespace {

QuadResult integrate_circle(const Integrand& f, double radius, double tol,
                            long budget) {
    long evals = 0;
    cplx prev{0.0, 0.0};
    double err = std::numeric_limits<double>::infinity();
    for (int N = 16; N <= (1 << 15); N *= 2) {
        if (evals + N > budget)
            throw budget_error("circle quadrature budget exhausted", prev, err);
        cplx s{0.0, 0.0};
        for (int k = 0; k < N; ++k) {
            double th = 2.0 * kPi * k / N;
            cplx e = std::polar(radius, th);
            cplx v = f(e);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw nan_error("integrand returned a non-finite value", e);
            s += v * e;
        }
        evals += N;
        // (1/2pi i) * sum f(z) i r e^{i th} * (2 pi / N) = (r/N) sum f(z) e^{i th}
        cplx I = s / static_cast<double>(N);
        if (N > 16) {
            err = std::abs(I - prev);
            if (err <= tol * std::max(std::abs(I), kTiny))
                return {I, err, evals};
        }
        prev = I;
    }
    throw budget_error("circle quadrature did not converge", prev, err);
}

}  // namespace

QuadResult integrate(const Integrand& f, const ContourSpec& spec, double tol,
                     long budget) {
    Path path;
    switch (spec.kind) {
        case ContourKind::vertical_line: {
            cplx c(spec.anchor, 0.0);
            path.rays.push_back(
                {c, cplx(0.0, 1.0), spec.scale, spec.truncation, 1.0});
            path.rays.push_back(
                {c, cplx(0.0, -1.0), spec.scale, spec.truncation, -1.0});
            break;
        }
        case ContourKind::closed_integer_loop: {
            double xl = spec.anchor + spec.margin;
            double xr = spec.enclosed_max + 0.5;
            double h = 2.0 * spec.margin;
            if (xl >= xr)
                throw contour_error("closed loop is empty: left edge >= right edge");
            cplx bl(xl, -h), br(xr, -h), tr(xr, h), tl(xl, h);
            path.chords.push_back({bl, br});
            path.chords.push_back({br, tr});
            path.chords.push_back({tr, tl});
            path.chords.push_back({tl, bl});
            break;
        }
        case ContourKind::hankel_right_loop: {
            double h = 2.0 * spec.margin;
            double xc = spec.anchor + spec.margin + h;
            path.arcs.push_back({cplx(xc, 0.0), h, 0.5 * kPi, 1.5 * kPi});
            path.rays.push_back(
                {cplx(xc, h), cplx(1.0, 0.0), spec.scale, spec.truncation, -1.0});
            path.rays.push_back(
                {cplx(xc, -h), cplx(1.0, 0.0), spec.scale, spec.truncation, 1.0});
            break;
        }
        case ContourKind::neg_axis_loop: {
            double r = spec.anchor > 0 ? spec.anchor : 1.0;
            return integrate_circle(f, r, tol, budget);
        }
        case ContourKind::real_interval:
            throw domain_error("use real_integral for real_interval contours");
    }
    return integrate_path(f, path, tol, budget);
}

QuadResult real_integral_c(const Integrand& f, double upper, double tol,
                           long budget) {
    // Substitute t = e^u.  The left tail handles t^{alpha-1} endpoint
    // behaviour (geometric decay in u); the right tail requires the
    // integrand to decay at least exponentially in t.
    auto g = [f](cplx u) -> cplx {
        double t = std::exp(u.real());
        // Endpoint limits of an integrable parametrization: the Jacobian
        // factor t kills any admissible t^{alpha-1} blow-up, so underflowed
        // or overflowed abscissae contribute zero rather than 0*inf.
        if (t == 0.0 || !std::isfinite(t)) return cplx(0.0, 0.0);
        return f(cplx(t, 0.0)) * t;
    };
    bool infinite = !std::isfinite(upper);
    double u0 = infinite ? 0.0 : std::log(upper);
    Path p;
    p.closed_prefactor = false;
    p.rays.push_back({cplx(u0, 0.0), cplx(-1.0, 0.0), 1.0, 690.0, -1.0});
    if (infinite)
        p.rays.push_back({cplx(0.0, 0.0), cplx(1.0, 0.0), 1.0, 300.0, 1.0});
    return integrate_path(g, p, tol, budget);
}

RealQuadResult real_integral(const RealIntegrand& f, double upper, double tol,
                             long budget) {
    auto fc = [&f](cplx t) { return cplx(f(t.real()), 0.0); };
    QuadResult r = real_integral_c(fc, upper, tol, budget);
    return {r.value.real(), r.err_estimate, r.evaluations};
}

RealQuadResult real_integral_log(const RealIntegrand& log_f, double upper,
                                 double tol, long budget) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    bool infinite = !std::isfinite(upper);
    double u0 = infinite ? 0.0 : std::log(upper);
    double right_end = infinite ? 300.0 : u0;  // keep exp(v) finite

    double anchor = u0;
    double shift = 0.0;
    double sup_e = kNegInf;  // largest exponent seen across all passes
    double v_sup = u0;       // where it was seen
    bool anchored = false;   // rays already recentred on v_sup
    long total_evals = 0;
    for (int pass = 0; pass < 12; ++pass) {
        Path p;
        p.closed_prefactor = false;
        p.rays.push_back(
            {cplx(anchor, 0.0), cplx(-1.0, 0.0), 1.0, anchor + 690.0, -1.0});
        if (right_end - anchor > 1e-12)
            p.rays.push_back({cplx(anchor, 0.0), cplx(1.0, 0.0), 1.0,
                              right_end - anchor, 1.0});
        double max_e = kNegInf;
        double v_max = anchor;
        bool clipped = false;
        auto g = [&](cplx u) -> cplx {
            double t = std::exp(u.real());
            if (t == 0.0 || !std::isfinite(t)) return cplx(0.0, 0.0);
            // Exponent of the substituted integrand: caller's log plus the
            // Jacobian log.  Huge magnitudes cancel here, not in a product.
            double e = log_f(t) + u.real();
            if (e > max_e) {
                max_e = e;
                v_max = u.real();
            }
            double s = e - shift;
            if (s > 700.0) {  // keep the engine finite; a rerun fixes it
                clipped = true;
                s = 700.0;
            }
            return cplx(s == kNegInf ? 0.0 : std::exp(s), 0.0);
        };
        // s = e - shift is a difference of doubles of magnitude ~|shift|,
        // so the integrand carries irreducible relative jitter of about
        // |shift| * eps; demanding more than that stalls refinement.
        double eff_tol = std::max(tol, std::abs(shift) * 1e-12);
        QuadResult r = integrate_path(g, p, eff_tol, budget);
        total_evals += r.evaluations;
        if (max_e > sup_e) {
            sup_e = max_e;
            v_sup = v_max;
        }
        double v = r.value.real();
        bool missed = clipped || (v == 0.0 && std::isfinite(max_e) &&
                                  max_e - shift < -700.0);
        if (!missed) {
            double lv = v > 0.0 ? std::log(v) + shift : kNegInf;
            double rel = v > 0.0 ? r.err_estimate / v : r.err_estimate;
            return {lv, rel, total_evals};
        }
        // Exponent range missed.  Recenter the shift on the largest
        // exponent seen and anchor the rays there, so the next pass
        // opens with panels fine enough to resolve a narrow peak.
        //
        // If a pass anchored at the best-known point still underflows
        // everywhere, the mass sits in a spike narrower than any grid
        // resolves.  Those spikes come from doubly-exponential walls and
        // their tops are astronomically negative (a peak above -1e7 has
        // width > 1e-2 in log space and is caught by the anchored pass),
        // so the integral is zero beyond any representable precision;
        // report the observed sup as an upper bound for the log.
        if (anchored && !clipped) {
            if (sup_e < -1.0e7) return {sup_e, 700.0, total_evals};
            throw numeric_error(
                "log-integral exponent shift did not stabilize");
        }
        shift = sup_e;
        anchor = std::min(v_sup, right_end);
        anchored = true;
    }
    if (sup_e < -1.0e7) return {sup_e, 700.0, total_evals};
    throw numeric_error("log-integral exponent shift did not stabilize");
}

void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights) {
    if (order < 1) throw domain_error("gauss_legendre: order must be >= 1");
    int n = order;
    nodes.assign(static_cast<size_t>(n), 0.0);
    weights.assign(static_cast<size_t>(n), 0.0);
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<size_t>(i)] = -x;
        nodes[static_cast<size_t>(n - 1 - i)] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[static_cast<size_t>(i)] = w;
        weights[static_cast<size_t>(n - 1 - i)] = w;
    }
}

}  // namespace ginprod::quad
