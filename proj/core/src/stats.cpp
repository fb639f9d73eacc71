#include "ginprod/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "ginprod/errors.hpp"
#include "ginprod/quad.hpp"

namespace ginprod::stats {

namespace {

void check_edges(const std::vector<double>& edges, const char* who) {
    if (edges.size() < 2)
        throw domain_error(std::string(who) + ": need at least two edges");
    if (!(edges.front() >= 0.0))
        throw domain_error(std::string(who) + ": edges must be >= 0");
    for (size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i] < edges[i + 1]) || !std::isfinite(edges[i + 1]))
            throw domain_error(std::string(who) +
                               ": edges must be finite and increasing");
}

// Bin of x under the [e_i, e_{i+1}) convention with a closed last bin;
// -1 when x falls outside the mesh.
int bin_index(const std::vector<double>& edges, double x) {
    if (x < edges.front() || x > edges.back()) return -1;
    if (x == edges.back()) return int(edges.size()) - 2;
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return int(it - edges.begin()) - 1;
}

double bin_measure(const BinnedEstimate& est, size_t flat) {
    if (est.dim() == 1) {
        const auto& e = est.axis_edges[0];
        return e[flat + 1] - e[flat];
    }
    const auto& ex = est.axis_edges[0];
    const auto& ey = est.axis_edges[1];
    const size_t ny = size_t(est.bins(1));
    const size_t ix = flat / ny, iy = flat % ny;
    return (ex[ix + 1] - ex[ix]) * (ey[iy + 1] - ey[iy]);
}

// density and std_err from counts; empty bins get a one-count error bar so
// that z-scores against a nonzero prediction stay finite and damning.
void finalize(BinnedEstimate& est) {
    est.density.resize(est.counts.size());
    est.std_err.resize(est.counts.size());
    for (size_t i = 0; i < est.counts.size(); ++i) {
        const double w = bin_measure(est, i) * double(est.samples);
        const double c = double(est.counts[i]);
        est.density[i] = c / w;
        est.std_err[i] = std::sqrt(std::max(c, 1.0)) / w;
    }
}

void check_batch_time(const ensembles::TrajectoryBatch& batch, int r,
                      const char* who) {
    if (batch.count() < 1)
        throw domain_error(std::string(who) + ": empty batch");
    if (r < 1 || r > batch.spec.m)
        throw domain_error(std::string(who) + ": time index out of range");
}

}  // namespace

std::int64_t BinnedEstimate::total_count() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t(0));
}

std::vector<double> default_edges(const ensembles::TrajectoryBatch& batch,
                                  int r, int bins, double central) {
    check_batch_time(batch, r, "default_edges");
    if (bins < 1) throw domain_error("default_edges: bins must be >= 1");
    if (!(central > 0.0) || central > 1.0)
        throw domain_error("default_edges: central must be in (0, 1]");
    std::vector<double> v;
    v.reserve(size_t(batch.count()) * batch.spec.n);
    for (std::int64_t t = 0; t < batch.count(); ++t)
        for (int j = 0; j < batch.spec.n; ++j) v.push_back(batch.at(t, r, j));
    std::sort(v.begin(), v.end());

    double lo, hi;
    if (central == 1.0) {
        // tiny inflation keeps min/max strictly inside the mesh, so the
        // counting identities (every sample binned) are exact
        lo = v.front() * (1.0 - 1e-9);
        hi = v.back() * (1.0 + 1e-9);
    } else {
        const double tail = (1.0 - central) / 2.0;
        const double last = double(v.size() - 1);
        lo = v[size_t(std::floor(tail * last))];
        hi = v[size_t(std::ceil((1.0 - tail) * last))];
    }
    if (!(lo > 0.0) || !(hi > lo))
        throw domain_error("default_edges: degenerate sample range");

    std::vector<double> edges(size_t(bins) + 1);
    const double step = std::log(hi / lo) / double(bins);
    for (int i = 1; i < bins; ++i)
        edges[size_t(i)] = lo * std::exp(step * double(i));
    edges.front() = lo;
    edges.back() = hi;
    return edges;
}

BinnedEstimate estimate_rho1(const ensembles::TrajectoryBatch& batch, int r,
                             const std::vector<double>& edges) {
    check_batch_time(batch, r, "estimate_rho1");
    check_edges(edges, "estimate_rho1");
    BinnedEstimate est;
    est.axis_edges = {edges};
    est.samples = batch.count();
    est.counts.assign(edges.size() - 1, 0);
    for (std::int64_t t = 0; t < batch.count(); ++t)
        for (int j = 0; j < batch.spec.n; ++j) {
            const int b = bin_index(edges, batch.at(t, r, j));
            if (b >= 0) ++est.counts[size_t(b)];
        }
    finalize(est);
    return est;
}

BinnedEstimate estimate_rho2(const ensembles::TrajectoryBatch& batch, int r,
                             int s, const std::vector<double>& edges_x,
                             const std::vector<double>& edges_y) {
    check_batch_time(batch, r, "estimate_rho2");
    check_batch_time(batch, s, "estimate_rho2");
    check_edges(edges_x, "estimate_rho2");
    check_edges(edges_y, "estimate_rho2");
    BinnedEstimate est;
    est.axis_edges = {edges_x, edges_y};
    est.samples = batch.count();
    const size_t ny = edges_y.size() - 1;
    est.counts.assign((edges_x.size() - 1) * ny, 0);
    const int n = batch.spec.n;
    for (std::int64_t t = 0; t < batch.count(); ++t)
        for (int i = 0; i < n; ++i) {
            const int bx = bin_index(edges_x, batch.at(t, r, i));
            if (bx < 0) continue;
            for (int j = 0; j < n; ++j) {
                if (r == s && i == j) continue;  // ordered pairs, no diagonal
                const int by = bin_index(edges_y, batch.at(t, s, j));
                if (by >= 0) ++est.counts[size_t(bx) * ny + size_t(by)];
            }
        }
    finalize(est);
    return est;
}

BinnedEstimate merge(const BinnedEstimate& a, const BinnedEstimate& b) {
    if (a.axis_edges != b.axis_edges)
        throw domain_error("merge: estimates use different meshes");
    BinnedEstimate out = a;
    out.samples += b.samples;
    for (size_t i = 0; i < out.counts.size(); ++i)
        out.counts[i] += b.counts[i];
    finalize(out);
    return out;
}

namespace {

struct GlRule {
    std::vector<double> nodes, weights;
    explicit GlRule(int order) { quad::gauss_legendre(order, nodes, weights); }
    // average of f over [lo, hi]
    double avg(double lo, double hi,
               const std::function<double(double)>& f) const {
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double s = 0;
        for (size_t i = 0; i < nodes.size(); ++i)
            s += weights[i] * f(mid + half * nodes[i]);
        return s / 2.0;
    }
};

CompareReport run_compare(
    const BinnedEstimate& est,
    const std::function<double(size_t)>& midpoint_pred,
    const std::function<double(size_t)>& averaged_pred, double z_limit,
    double max_big_frac) {
    if (est.density.size() != est.counts.size() ||
        est.std_err.size() != est.counts.size())
        throw domain_error("compare: estimate is not finalized");
    CompareReport rep;
    rep.dof = int(est.counts.size());
    rep.prediction.resize(est.counts.size());
    rep.z.resize(est.counts.size());
    for (size_t i = 0; i < est.counts.size(); ++i) {
        double pred = midpoint_pred(i);
        double z = (est.density[i] - pred) / est.std_err[i];
        if (std::abs(z) > 3.0) {
            // curvature over a wide log bin can fake a bad z; settle it
            // with the bin-averaged prediction
            pred = averaged_pred(i);
            z = (est.density[i] - pred) / est.std_err[i];
        }
        rep.prediction[i] = pred;
        rep.z[i] = z;
        rep.chi2 += z * z;
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
        if (std::abs(z) > 3.0) ++rep.n_big;
    }
    const auto big_allowed = std::max<std::int64_t>(
        1, std::llround(max_big_frac * double(rep.dof)));
    rep.pass = rep.max_abs_z <= z_limit && rep.n_big <= big_allowed;
    return rep;
}

}  // namespace

CompareReport compare(const BinnedEstimate& est,
                      const std::function<double(double)>& f, double z_limit,
                      double max_big_frac) {
    if (est.dim() != 1)
        throw domain_error("compare: 1-d prediction against 2-d estimate");
    const auto& e = est.axis_edges[0];
    static const GlRule gl(16);
    return run_compare(
        est, [&](size_t i) { return f(0.5 * (e[i] + e[i + 1])); },
        [&](size_t i) { return gl.avg(e[i], e[i + 1], f); }, z_limit,
        max_big_frac);
}

CompareReport compare(const BinnedEstimate& est,
                      const std::function<double(double, double)>& f,
                      double z_limit, double max_big_frac) {
    if (est.dim() != 2)
        throw domain_error("compare: 2-d prediction against 1-d estimate");
    const auto& ex = est.axis_edges[0];
    const auto& ey = est.axis_edges[1];
    const size_t ny = size_t(est.bins(1));
    static const GlRule gl(8);
    auto mid = [&](size_t i) {
        const size_t ix = i / ny, iy = i % ny;
        return f(0.5 * (ex[ix] + ex[ix + 1]), 0.5 * (ey[iy] + ey[iy + 1]));
    };
    auto avg = [&](size_t i) {
        const size_t ix = i / ny, iy = i % ny;
        return gl.avg(ex[ix], ex[ix + 1], [&](double x) {
            return gl.avg(ey[iy], ey[iy + 1],
                          [&](double y) { return f(x, y); });
        });
    };
    return run_compare(est, mid, avg, z_limit, max_big_frac);
}

void write_csv(const BinnedEstimate& est, const CompareReport* report,
               const std::string& path) {
    if (report && report->z.size() != est.counts.size())
        throw domain_error("write_csv: report does not match estimate");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw domain_error("write_csv: cannot open " + path);
    char line[512];
    if (est.dim() == 1)
        out << "x_lo,x_hi,count,density,std_err";
    else
        out << "x_lo,x_hi,y_lo,y_hi,count,density,std_err";
    out << (report ? ",prediction,z\n" : "\n");
    const size_t ny = est.dim() == 2 ? size_t(est.bins(1)) : 1;
    for (size_t i = 0; i < est.counts.size(); ++i) {
        if (est.dim() == 1) {
            const auto& e = est.axis_edges[0];
            std::snprintf(line, sizeof line, "%.17g,%.17g,%lld,%.17g,%.17g",
                          e[i], e[i + 1],
                          static_cast<long long>(est.counts[i]),
                          est.density[i], est.std_err[i]);
        } else {
            const auto& ex = est.axis_edges[0];
            const auto& ey = est.axis_edges[1];
            const size_t ix = i / ny, iy = i % ny;
            std::snprintf(line, sizeof line,
                          "%.17g,%.17g,%.17g,%.17g,%lld,%.17g,%.17g",
                          ex[ix], ex[ix + 1], ey[iy], ey[iy + 1],
                          static_cast<long long>(est.counts[i]),
                          est.density[i], est.std_err[i]);
        }
        out << line;
        if (report) {
            std::snprintf(line, sizeof line, ",%.17g,%.17g",
                          report->prediction[i], report->z[i]);
            out << line;
        }
        out << '\n';
    }
    if (!out) throw domain_error("write_csv: short write to " + path);
}

std::string summary_json(const BinnedEstimate& est,
                         const CompareReport* report) {
    nlohmann::json j;
    j["dim"] = est.dim();
    std::vector<int> bins;
    for (int a = 0; a < est.dim(); ++a) bins.push_back(est.bins(a));
    j["bins"] = bins;
    j["samples"] = est.samples;
    j["total_count"] = est.total_count();
    if (report) {
        j["chi2"] = report->chi2;
        j["dof"] = report->dof;
        j["chi2_per_dof"] = report->chi2 / std::max(report->dof, 1);
        j["n_big"] = report->n_big;
        j["max_abs_z"] = report->max_abs_z;
        j["pass"] = report->pass;
    }
    return j.dump(2);
}

}  // namespace ginprod::stats
