#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ginprod/errors.hpp"
#include "ginprod/process.hpp"

// Monte Carlo sampling of the product chain: the three initial factors,
// the Ginibre transitions, and squared-singular-value trajectories.
//
// Randomness is counter-based: every variate is a pure function of
// (seed, stream_id, counter), so identical (seed, stream_id) reproduce
// identical trajectories bit-for-bit on any platform, and sampling is
// embarrassingly parallel across stream ids with no shared state.

namespace ginprod::ensembles {

using cplx = std::complex<double>;

// Deterministic counter-based generator (SplitMix64 finalizer over a
// per-stream key).  Cheap to construct; copyable; no hidden state beyond
// the counter.
struct RngStream {
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    double next_unit();       // uniform on (0, 1]
    cplx next_gaussian();     // standard complex Gaussian, E|g|^2 = 1

    std::uint64_t key;
    std::uint64_t counter = 0;
};

// rows x cols with i.i.d. standard complex Gaussian entries.
Eigen::MatrixXcd sample_ginibre(int rows, int cols, RngStream& rng);

// Upper-left rows x cols block of an l x l Haar unitary (QR of a Ginibre
// draw with the diagonal phase correction that makes plain QR Haar).
// Requires l >= rows >= cols.  rows == cols == l returns the full unitary.
Eigen::MatrixXcd sample_truncated_unitary(int l, int rows, int cols,
                                          RngStream& rng);

// Ginibre plus the deterministic shift diag(sqrt(q_j)) in the top block:
// the (n + nu_1) x n initial factor of the source family.
Eigen::MatrixXcd sample_source(const ProcessSpec& spec, RngStream& rng);

// Squared singular values of the running product, one descending list of
// n values per time step.
struct Trajectory {
    int n = 0;
    int m = 0;
    std::vector<double> sv_sq;  // row-major (time, index), size m * n

    // k in 1..m, j in 0..n-1 (j = 0 is the largest)
    double at(int k, int j) const { return sv_sq[size_t(k - 1) * n + j]; }
};

// One trajectory: initial factor per spec.family, then m-1 independent
// Ginibre transitions, with an SVD after each multiplication.
Trajectory sample_trajectory(const ProcessSpec& spec, RngStream& rng);

// Flat batch of trajectories for the given spec.  Trajectory t is sampled
// from stream_id = t, so the batch content is independent of threading.
struct TrajectoryBatch {
    ProcessSpec spec;
    std::uint64_t seed = 0;
    std::vector<double> data;  // (trajectory, time, index) row-major

    std::int64_t count() const {
        return spec.m * spec.n == 0
                   ? 0
                   : std::int64_t(data.size()) / (spec.m * spec.n);
    }
    double at(std::int64_t t, int k, int j) const {
        return data[size_t(t) * (size_t(spec.m) * spec.n) +
                    size_t(k - 1) * spec.n + j];
    }
};

TrajectoryBatch sample_batch(const ProcessSpec& spec, std::uint64_t seed,
                             std::int64_t count, int threads = 1);

// Columnar binary round trip: fixed header (magic, version, spec hash,
// seed, count, n, m), then count*m*n little-endian doubles.  read_batch
// revalidates the header against the supplied spec and throws
// domain_error on any mismatch.
void write_batch(const TrajectoryBatch& batch, const std::string& path);
TrajectoryBatch read_batch(const ProcessSpec& spec, const std::string& path);

}  // namespace ginprod::ensembles
