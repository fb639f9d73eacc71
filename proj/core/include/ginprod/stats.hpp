#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ginprod/ensembles.hpp"

// Histogram estimators for the one- and two-point correlation densities of
// sampled trajectories, and a z-score / chi^2 comparison against analytic
// predictions.  Densities are normalized per trajectory, so rho1 integrates
// to n and the binned counting identities hold exactly whenever the edges
// cover every sample.

namespace ginprod::stats {

// Binned density estimate on a 1-d interval mesh or a 2-d product mesh.
// Bins are [e_i, e_{i+1}) with the last bin closed on the right; counts are
// stored row-major over (x bin, y bin) in the 2-d case.
//
//   density = count / (samples * bin measure)
//   std_err = sqrt(count) / (samples * bin measure), floored at one count
//
// so a 1-d estimate targets rho1 (integral n) and a 2-d estimate targets
// the two-point density rho2 over ordered pairs.
struct BinnedEstimate {
    std::vector<std::vector<double>> axis_edges;  // 1 or 2 axes
    std::vector<std::int64_t> counts;
    std::vector<double> density;
    std::vector<double> std_err;
    std::int64_t samples = 0;  // trajectory count behind the estimate

    int dim() const { return int(axis_edges.size()); }
    int bins(int axis) const { return int(axis_edges.at(size_t(axis)).size()) - 1; }
    std::int64_t total_count() const;
};

// Log-spaced edges covering the central `central` mass of the time-r values
// in the batch (quantile to quantile).  central = 1 covers every sample with
// a small relative inflation, which makes the counting identities exact.
std::vector<double> default_edges(const ensembles::TrajectoryBatch& batch,
                                  int r, int bins = 40, double central = 0.99);

// Histogram of all n * count values x_j^(r).  Sum of counts equals
// n * count when the edges cover every sample.
BinnedEstimate estimate_rho1(const ensembles::TrajectoryBatch& batch, int r,
                             const std::vector<double>& edges);

// 2-d histogram of ordered pairs (x_i^(r), x_j^(s)) within one trajectory:
// i != j when r == s, all n^2 pairs when r != s.  Normalized by trajectory
// count and bin area; no symmetry factor.
BinnedEstimate estimate_rho2(const ensembles::TrajectoryBatch& batch, int r,
                             int s, const std::vector<double>& edges_x,
                             const std::vector<double>& edges_y);

// Add two partial histograms over identical meshes (counts and samples add;
// density and std_err are refreshed).  Lets batches be estimated in chunks.
BinnedEstimate merge(const BinnedEstimate& a, const BinnedEstimate& b);

// Result of comparing an estimate with an analytic density.  prediction
// holds the bin-averaged predicted density, z the per-bin normalized
// residuals (density - prediction) / std_err.
struct CompareReport {
    std::vector<double> prediction;
    std::vector<double> z;
    double chi2 = 0.0;
    int dof = 0;
    std::int64_t n_big = 0;  // bins with |z| > 3
    double max_abs_z = 0.0;
    bool pass = false;
};

// Compare against f(x) (1-d) or f(x, y) (2-d).  The prediction is first
// evaluated at bin midpoints; any bin with |z| > 3 is re-evaluated with a
// Gauss-Legendre average over the bin before the final z is recorded, so
// wide log bins are not flagged for curvature alone.  pass requires
// max |z| <= z_limit and at most max(1, max_big_frac * bins) bins with
// |z| > 3.
CompareReport compare(const BinnedEstimate& est,
                      const std::function<double(double)>& f,
                      double z_limit = 4.0, double max_big_frac = 0.01);
CompareReport compare(const BinnedEstimate& est,
                      const std::function<double(double, double)>& f,
                      double z_limit = 4.0, double max_big_frac = 0.01);

// CSV table of the estimate (one row per bin: edges, count, density,
// std_err, and prediction/z when a report is supplied), and a one-object
// JSON summary of the comparison.
void write_csv(const BinnedEstimate& est, const CompareReport* report,
               const std::string& path);
std::string summary_json(const BinnedEstimate& est,
                         const CompareReport* report);

}  // namespace ginprod::stats
