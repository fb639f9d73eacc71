#include "ginprod/fredholm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "ginprod/errors.hpp"
#include "ginprod/kernels.hpp"
#include "ginprod/quad.hpp"

namespace ginprod::fredholm {

namespace {

// Family dispatch onto the validated evaluators, all in one gauge.  The
// truncated series representation loses ~1.4 digits per unit of n to
// cancellation, so past its comfort zone the contour form is used.
double eval_kernel(const ProcessSpec& spec, int r, double x, int s,
                   double y) {
    switch (spec.family) {
        case Family::ginibre:
            return kernels::ginibre_kernel_sum(spec, r, x, s, y);
        case Family::truncated_unitary:
            return spec.n <= 12
                       ? kernels::truncated_kernel_sum(spec, r, x, s, y)
                       : kernels::truncated_kernel_double(spec, r, x, s, y);
        case Family::ginibre_source:
            return kernels::source_kernel(spec, r, x, s, y);
    }
    throw domain_error("fredholm_det: unknown family");
}

// Smallest truncation point S >= lo with one-point tail mass
// int_S^inf K(r,t,t) dt below 1e-8, located by geometric growth; the
// tail is summed over doubling segments until they stop mattering.
double resolve_tail(const ProcessSpec& spec, int r, double lo) {
    std::vector<double> gn, gw;
    quad::gauss_legendre(16, gn, gw);
    auto segment = [&](double a, double b) {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double sum = 0;
        for (size_t i = 0; i < gn.size(); ++i) {
            const double t = mid + half * gn[i];
            sum += gw[i] * eval_kernel(spec, r, t, r, t);
        }
        return half * sum;
    };
    double s = std::max(lo, 1.0);
    for (int grow = 0; grow < 80; ++grow) {
        double tail = 0, a = s;
        for (int k = 0; k < 60; ++k) {
            const double piece = segment(a, 2 * a);
            tail += piece;
            a *= 2;
            if (piece < 1e-13) break;
        }
        if (tail < 1e-8) return s;
        s *= 1.5;
    }
    throw numeric_error("fredholm_det: could not bound the density tail");
}

struct Mesh {
    std::vector<int> time;       // per node
    std::vector<double> node;    // abscissa
    std::vector<double> weight;  // GL weight scaled to the window
};

Mesh build_mesh(const std::vector<Window>& windows, int order) {
    std::vector<double> gn, gw;
    quad::gauss_legendre(order, gn, gw);
    Mesh mesh;
    mesh.time.reserve(windows.size() * size_t(order));
    for (const Window& w : windows) {
        const double mid = 0.5 * (w.lo + w.hi), half = 0.5 * (w.hi - w.lo);
        for (int a = 0; a < order; ++a) {
            mesh.time.push_back(w.time);
            mesh.node.push_back(mid + half * gn[size_t(a)]);
            mesh.weight.push_back(half * gw[size_t(a)]);
        }
    }
    return mesh;
}

double nystrom_det(const ProcessSpec& spec, const Mesh& mesh, int threads) {
    const int n = int(mesh.node.size());
    Eigen::MatrixXd m(n, n);
    auto fill_rows = [&](int lo, int hi) {
        for (int a = lo; a < hi; ++a)
            for (int b = 0; b < n; ++b) {
                const double k = eval_kernel(spec, mesh.time[size_t(a)],
                                             mesh.node[size_t(a)],
                                             mesh.time[size_t(b)],
                                             mesh.node[size_t(b)]);
                m(a, b) = -std::sqrt(mesh.weight[size_t(a)] *
                                     mesh.weight[size_t(b)]) *
                          k;
            }
    };
    const int nt = std::clamp(threads, 1, n);
    if (nt <= 1) {
        fill_rows(0, n);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mu;
        for (int w = 0; w < nt; ++w)
            pool.emplace_back([&, w] {
                try {
                    fill_rows(n * w / nt, n * (w + 1) / nt);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }
    m.diagonal().array() += 1.0;  // I - K-hat
    return Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant();
}

}  // namespace

GapResult fredholm_det(const ProcessSpec& spec, const GapQuery& query,
                       double tol, int threads) {
    validate(spec);
    if (query.windows.empty()) return {};
    if (query.quadrature_order < 2 || query.quadrature_order > 256)
        throw domain_error("fredholm_det: quadrature order out of range");
    if (!(tol > 0)) throw domain_error("fredholm_det: tol must be positive");

    std::vector<Window> windows = query.windows;
    std::map<int, std::vector<std::pair<double, double>>> per_time;
    for (Window& w : windows) {
        if (w.time < 1 || w.time > spec.m)
            throw domain_error("fredholm_det: window time out of range");
        if (!(w.lo >= 0) || !(w.hi > w.lo))
            throw domain_error("fredholm_det: window must have positive "
                               "length in (0, inf)");
        if (std::isinf(w.hi))
            w.hi = 2.0 * resolve_tail(spec, w.time, std::max(w.lo, 1.0));
        per_time[w.time].emplace_back(w.lo, w.hi);
    }
    for (auto& [t, iv] : per_time) {
        std::sort(iv.begin(), iv.end());
        for (size_t i = 1; i < iv.size(); ++i)
            if (iv[i].first < iv[i - 1].second)
                throw domain_error(
                    "fredholm_det: same-time windows must be disjoint");
    }

    const int o1 = query.quadrature_order;
    const int o2 = (3 * o1) / 2;
    const double d1 = nystrom_det(spec, build_mesh(windows, o1), threads);
    const double d2 = nystrom_det(spec, build_mesh(windows, o2), threads);
    GapResult res;
    res.value = d2;
    res.err_estimate = std::abs(d2 - d1);
    res.order_lo = o1;
    res.order_hi = o2;
    res.windows = windows;
    if (!(res.err_estimate <= tol))
        throw numeric_error(
            "fredholm_det: quadrature orders disagree beyond tolerance");
    return res;
}

GapFrequency empirical_gap(const ensembles::TrajectoryBatch& batch,
                           const std::vector<Window>& windows) {
    if (batch.count() < 1) throw domain_error("empirical_gap: empty batch");
    for (const Window& w : windows)
        if (w.time < 1 || w.time > batch.spec.m)
            throw domain_error("empirical_gap: window time out of range");
    GapFrequency gf;
    for (std::int64_t t = 0; t < batch.count(); ++t) {
        bool clear = true;
        for (const Window& w : windows) {
            for (int j = 0; j < batch.spec.n && clear; ++j) {
                const double x = batch.at(t, w.time, j);
                clear = !(x > w.lo && x < w.hi);
            }
            if (!clear) break;
        }
        gf.hits += clear;
    }
    const double T = double(batch.count());
    gf.frequency = double(gf.hits) / T;
    gf.std_err =
        std::sqrt(std::max(gf.frequency * (1.0 - gf.frequency), 1.0 / T) / T);
    return gf;
}

}  // namespace ginprod::fredholm
