#include "ginprod/process.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "ginprod/errors.hpp"
#include "ginprod/specfun.hpp"

namespace ginprod {

void validate(const ProcessSpec& spec) {
    if (spec.n < 1) throw domain_error("n must be >= 1");
    if (spec.m < 1) throw domain_error("m must be >= 1");
    if (static_cast<int>(spec.nu.size()) != spec.m + 1)
        throw domain_error("nu must have m+1 entries (nu_0..nu_m)");
    if (spec.nu[0] != 0) throw domain_error("nu_0 must be 0");
    for (int v : spec.nu)
        if (v < 0) throw domain_error("nu entries must be >= 0");
    switch (spec.family) {
        case Family::ginibre:
            break;
        case Family::truncated_unitary:
            if (spec.l < 2 * spec.n + spec.nu[1])
                throw domain_error("truncated unitary requires l >= 2n + nu_1");
            break;
        case Family::ginibre_source:
            if (static_cast<int>(spec.q.size()) != spec.n)
                throw domain_error("ginibre_source requires exactly n source values");
            for (double v : spec.q)
                if (!(v > 0.0))
                    throw domain_error("source parameters q must be > 0");
            break;
    }
}

std::vector<int> matrix_dims(const ProcessSpec& spec) {
    std::vector<int> dims(spec.m + 1);
    for (int k = 0; k <= spec.m; ++k) dims[k] = spec.n + spec.nu[k];
    return dims;
}

std::function<double(double)> initial_f(const ProcessSpec& spec, int i) {
    if (i < 1 || i > spec.n) throw domain_error("initial_f index out of range");
    switch (spec.family) {
        case Family::ginibre:
            return [i](double x) { return std::pow(x, i - 1); };
        case Family::truncated_unitary: {
            double beta = spec.l - 2 * spec.n - spec.nu[1];
            return [i, beta](double x) {
                if (x <= 0.0 || x >= 1.0) return 0.0;
                return std::exp(x) * std::pow(x, i - 1) * std::pow(1.0 - x, beta);
            };
        }
        case Family::ginibre_source: {
            double qi = spec.q[i - 1];
            double b = spec.nu[1] + 1.0;
            double inv_gamma = 1.0 / std::tgamma(b);
            return [qi, b, inv_gamma](double x) {
                return inv_gamma * specfun::hyp0f1(b, qi * x);
            };
        }
    }
    throw domain_error("unknown family");
}

std::function<double(double)> initial_log_f(const ProcessSpec& spec, int i) {
    if (i < 1 || i > spec.n)
        throw domain_error("initial_log_f index out of range");
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    switch (spec.family) {
        case Family::ginibre:
            return [i, kNegInf](double x) {
                return x > 0.0 ? (i - 1) * std::log(x) : (i == 1 ? 0.0 : kNegInf);
            };
        case Family::truncated_unitary: {
            double beta = spec.l - 2 * spec.n - spec.nu[1];
            return [i, beta, kNegInf](double x) {
                if (x <= 0.0 || x >= 1.0) return kNegInf;
                return x + (i - 1) * std::log(x) + beta * std::log1p(-x);
            };
        }
        case Family::ginibre_source: {
            double qi = spec.q[i - 1];
            double b = spec.nu[1] + 1.0;
            double lg = specfun::log_gamma_real(b);
            return [qi, b, lg, kNegInf](double x) {
                if (x < 0.0) return kNegInf;
                return specfun::log_hyp0f1(b, qi * x) - lg;
            };
        }
    }
    throw domain_error("unknown family");
}

double gauge_g(const ProcessSpec& spec, int r, double x) {
    if (r < 1 || r > spec.m) throw domain_error("gauge_g time index out of range");
    if (spec.m == 1) return 1.0;
    if (r == 1) return std::exp(-x) * std::pow(x, spec.nu[1]);
    if (r == spec.m) return 1.0;
    return std::pow(x, spec.nu[r]);
}

std::string family_name(Family family) {
    switch (family) {
        case Family::ginibre: return "ginibre";
        case Family::truncated_unitary: return "truncated_unitary";
        case Family::ginibre_source: return "ginibre_source";
    }
    return "unknown";
}

std::uint64_t spec_hash(const ProcessSpec& spec) {
    std::string enc = family_name(spec.family);
    char buf[64];
    std::snprintf(buf, sizeof buf, "|n=%d|m=%d|l=%d|nu=", spec.n, spec.m, spec.l);
    enc += buf;
    for (int v : spec.nu) {
        std::snprintf(buf, sizeof buf, "%d,", v);
        enc += buf;
    }
    enc += "|q=";
    for (double v : spec.q) {
        std::snprintf(buf, sizeof buf, "%.17g,", v);
        enc += buf;
    }
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : enc) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ginprod
