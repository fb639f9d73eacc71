#include "ginprod/ensembles.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

namespace ginprod::ensembles {

namespace {

// SplitMix64 output permutation: the Weyl-increment + finalizer pair passes
// the usual statistical batteries and is a pure function of its argument,
// which is what makes the counter scheme reproducible and parallel-safe.
std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;    // golden-ratio step
constexpr std::uint64_t kStream = 0xD2B74407B1CE6E93ull;  // stream separator

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key(mix(mix(seed) ^ (stream_id * kStream))) {}

std::uint64_t RngStream::next_u64() { return mix(key + (counter++) * kWeyl); }

double RngStream::next_unit() {
    // 53-bit mantissa shifted into (0, 1]: never 0, so logs are safe.
    return double((next_u64() >> 11) + 1) * 0x1p-53;
}

cplx RngStream::next_gaussian() {
    // Complex Box-Muller: radius^2 ~ Exp(1) gives E|g|^2 = 1 with
    // independent N(0, 1/2) real and imaginary parts.
    const double r = std::sqrt(-std::log(next_unit()));
    const double th = 2.0 * std::numbers::pi * next_unit();
    return {r * std::cos(th), r * std::sin(th)};
}

Eigen::MatrixXcd sample_ginibre(int rows, int cols, RngStream& rng) {
    if (rows < 1 || cols < 1)
        throw domain_error("sample_ginibre: dimensions must be positive");
    Eigen::MatrixXcd g(rows, cols);
    for (int r = 0; r < rows; ++r)           // row-major fill order is part
        for (int c = 0; c < cols; ++c)       // of the reproducibility contract
            g(r, c) = rng.next_gaussian();
    return g;
}

Eigen::MatrixXcd sample_truncated_unitary(int l, int rows, int cols,
                                          RngStream& rng) {
    if (cols < 1 || rows < cols || l < rows)
        throw domain_error(
            "sample_truncated_unitary: need l >= rows >= cols >= 1");
    // Thin QR of an l x cols Ginibre draw spans the first cols columns of a
    // Haar unitary once each column is rotated by the phase of the matching
    // R diagonal entry (plain QR alone is not Haar: it biases the R diagonal
    // phases to zero).
    const Eigen::MatrixXcd g = sample_ginibre(l, cols, rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q =
        qr.householderQ() * Eigen::MatrixXcd::Identity(l, cols);
    for (int j = 0; j < cols; ++j) {
        const cplx d = qr.matrixQR()(j, j);
        const double a = std::abs(d);
        if (a > 0.0) q.col(j) *= d / a;
    }
    return q.topRows(rows);
}

Eigen::MatrixXcd sample_source(const ProcessSpec& spec, RngStream& rng) {
    if (spec.family != Family::ginibre_source)
        throw domain_error("sample_source: spec.family is not ginibre_source");
    if (int(spec.q.size()) != spec.n)
        throw domain_error("sample_source: q must have exactly n entries");
    for (double qj : spec.q)
        if (!(qj >= 0.0))
            throw domain_error("sample_source: q entries must be >= 0");
    const int rows = spec.n + spec.nu.at(1);
    Eigen::MatrixXcd g = sample_ginibre(rows, spec.n, rng);
    for (int j = 0; j < spec.n; ++j)  // shift sits in the square top block
        g(j, j) += std::sqrt(spec.q[size_t(j)]);
    return g;
}

namespace {

void append_sv_sq(const Eigen::MatrixXcd& prod, int n,
                  std::vector<double>& out) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(prod);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() != n)
        throw numeric_error("trajectory: unexpected singular value count");
    for (int j = 0; j < n; ++j) {
        const double s = sv[j];
        if (!std::isfinite(s))
            throw numeric_error("trajectory: SVD did not converge");
        out.push_back(s * s);
    }
}

}  // namespace

Trajectory sample_trajectory(const ProcessSpec& spec, RngStream& rng) {
    validate(spec);
    const std::vector<int> dims = matrix_dims(spec);
    Trajectory traj;
    traj.n = spec.n;
    traj.m = spec.m;
    traj.sv_sq.reserve(size_t(spec.m) * spec.n);

    Eigen::MatrixXcd prod;
    switch (spec.family) {
        case Family::ginibre:
            prod = sample_ginibre(dims[1], dims[0], rng);
            break;
        case Family::truncated_unitary:
            prod = sample_truncated_unitary(spec.l, dims[1], dims[0], rng);
            break;
        case Family::ginibre_source:
            prod = sample_source(spec, rng);
            break;
    }
    append_sv_sq(prod, spec.n, traj.sv_sq);
    for (int k = 2; k <= spec.m; ++k) {
        prod = (sample_ginibre(dims[size_t(k)], dims[size_t(k) - 1], rng) *
                prod)
                   .eval();
        append_sv_sq(prod, spec.n, traj.sv_sq);
    }
    return traj;
}

TrajectoryBatch sample_batch(const ProcessSpec& spec, std::uint64_t seed,
                             std::int64_t count, int threads) {
    validate(spec);
    if (count < 1) throw domain_error("sample_batch: count must be >= 1");
    TrajectoryBatch batch;
    batch.spec = spec;
    batch.seed = seed;
    const size_t per = size_t(spec.m) * spec.n;
    batch.data.assign(size_t(count) * per, 0.0);

    // Trajectory t always uses stream_id = t, so the batch is a pure
    // function of (spec, seed, count) no matter how work is partitioned.
    auto run = [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            RngStream rng(seed, std::uint64_t(t));
            const Trajectory traj = sample_trajectory(spec, rng);
            std::copy(traj.sv_sq.begin(), traj.sv_sq.end(),
                      batch.data.begin() + std::int64_t(per) * t);
        }
    };

    const int nt = int(std::min<std::int64_t>(std::max(threads, 1), count));
    if (nt <= 1) {
        run(0, count);
        return batch;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (int w = 0; w < nt; ++w) {
        const std::int64_t lo = count * w / nt;
        const std::int64_t hi = count * (w + 1) / nt;
        pool.emplace_back([&, lo, hi] {
            try {
                run(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return batch;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "batch files are little-endian; this build target is not");

constexpr char kMagic[4] = {'G', 'P', 'T', 'B'};
constexpr std::uint32_t kVersion = 1;

struct BatchHeader {
    char magic[4];
    std::uint32_t version;
    std::uint64_t spec_hash;
    std::uint64_t seed;
    std::uint64_t count;
    std::uint32_t n;
    std::uint32_t m;
};
static_assert(sizeof(BatchHeader) == 40);

}  // namespace

void write_batch(const TrajectoryBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw domain_error("write_batch: cannot open " + path);
    BatchHeader h{};
    std::memcpy(h.magic, kMagic, 4);
    h.version = kVersion;
    h.spec_hash = spec_hash(batch.spec);
    h.seed = batch.seed;
    h.count = std::uint64_t(batch.count());
    h.n = std::uint32_t(batch.spec.n);
    h.m = std::uint32_t(batch.spec.m);
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(reinterpret_cast<const char*>(batch.data.data()),
              std::streamsize(batch.data.size() * sizeof(double)));
    if (!out) throw domain_error("write_batch: short write to " + path);
}

TrajectoryBatch read_batch(const ProcessSpec& spec, const std::string& path) {
    validate(spec);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw domain_error("read_batch: cannot open " + path);
    BatchHeader h{};
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in || std::memcmp(h.magic, kMagic, 4) != 0)
        throw domain_error("read_batch: " + path + " is not a batch file");
    if (h.version != kVersion)
        throw domain_error("read_batch: unsupported batch version");
    if (h.spec_hash != spec_hash(spec) || h.n != std::uint32_t(spec.n) ||
        h.m != std::uint32_t(spec.m))
        throw domain_error("read_batch: batch was sampled from another spec");
    TrajectoryBatch batch;
    batch.spec = spec;
    batch.seed = h.seed;
    batch.data.resize(size_t(h.count) * spec.m * spec.n);
    in.read(reinterpret_cast<char*>(batch.data.data()),
            std::streamsize(batch.data.size() * sizeof(double)));
    if (!in || size_t(in.gcount()) != batch.data.size() * sizeof(double))
        throw domain_error("read_batch: " + path + " is truncated");
    return batch;
}

}  // namespace ginprod::ensembles
