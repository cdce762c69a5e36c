#pragma once

#include <algorithm>
#include <numeric>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/int128.hpp"
#include "invkern/perms.hpp"
#include "invkern/rng.hpp"

namespace invkern::spectra {

struct McEntry {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::int64_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct GammaTable {
    int d = 0;
    std::string set_descriptor;
    int kmax = -1;
    bool is_group = false;
    std::size_t set_size = 0;
    std::vector<double> exact;             // gamma_d(k) as reals, k = 0..kmax
    std::vector<Rational> exact_rational;  // present when weights are uniform
    std::vector<int128> nbar;              // N-bar(d,k), present for groups
    std::vector<McEntry> mc;               // present when MC was run
    std::string horizon_policy;
};

// gamma_d(k) = sum_sigma h(sigma) E_x[P_{d,k}(<sigma.x, x>)], via the exact character
// oracle.  With uniform weights the sum stays in integer arithmetic over the common
// denominator N(d,k) |G|; for groups, N-bar(d,k) = gamma_d(k) N(d,k) exactly.
inline GammaTable gamma_exact(const perms::TransformationSet& set, int d, int kmax) {
    if (set.d != d) throw config_error("gamma_exact: set dimension mismatch");
    if (kmax < 0) throw config_error("gamma_exact: kmax must be >= 0");
    GammaTable table;
    table.d = d;
    table.set_descriptor = set.descriptor;
    table.kmax = kmax;
    table.is_group = set.is_group;
    table.set_size = set.size();
    table.horizon_policy = "sup over k in [l, kmax]; tail floored at 1/|G| for groups";

    bool uniform = true;
    for (double w : set.weights) uniform = uniform && w == set.weights[0];

    if (uniform) {
        std::vector<int128> total(kmax + 1, 0);
        for (const auto& sigma : set.elements) {
            auto h = perms::char_series(perms::cycle_stats(sigma), kmax);
            for (int k = 0; k <= kmax; ++k)
                total[k] = checked_add(total[k], h[k] - (k >= 2 ? h[k - 2] : 0));
        }
        int128 g = static_cast<int128>(set.size());
        table.exact_rational.reserve(kmax + 1);
        table.exact.reserve(kmax + 1);
        for (int k = 0; k <= kmax; ++k) {
            Rational val(total[k], checked_mul(g, harmonics::dim_harmonic(d, k)));
            table.exact_rational.push_back(val);
            table.exact.push_back(val.to_double());
        }
        if (set.is_group) {
            table.nbar.reserve(kmax + 1);
            for (int k = 0; k <= kmax; ++k) {
                if (total[k] % g != 0)
                    throw numeric_error("gamma_exact: non-integer N-bar for a group");
                table.nbar.push_back(total[k] / g);
            }
        }
    } else {
        table.exact.assign(kmax + 1, 0.0);
        for (std::size_t i = 0; i < set.elements.size(); ++i) {
            auto h = perms::char_series(perms::cycle_stats(set.elements[i]), kmax);
            for (int k = 0; k <= kmax; ++k) {
                Rational r(h[k] - (k >= 2 ? h[k - 2] : 0), harmonics::dim_harmonic(d, k));
                table.exact[k] += set.weights[i] * r.to_double();
            }
        }
    }
    return table;
}

// Monte-Carlo estimate of gamma_d(k) from n_samples uniform sphere points.
inline McEntry gamma_mc(const perms::TransformationSet& set, int d, int k,
                        std::int64_t n_samples, std::uint64_t seed) {
    if (set.d != d) throw config_error("gamma_mc: set dimension mismatch");
    if (n_samples < 100) throw config_error("gamma_mc: need n_samples >= 100");
    // Normalize by the actual weight total so the estimator is an exact weighted
    // mean (in particular, k = 0 yields exactly 1 regardless of rounding in the
    // stored weights).
    double w_total = std::accumulate(set.weights.begin(), set.weights.end(), 0.0);
    std::vector<double> x(d);
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        double norm2 = 0.0;
        for (int u = 0; u < d; ++u) {
            x[u] = rng::gaussian(seed, rng::stream_mc, static_cast<std::uint64_t>(i) * d + u);
            norm2 += x[u] * x[u];
        }
        double inv_norm2 = 1.0 / norm2;
        double val = 0.0;
        for (std::size_t s = 0; s < set.elements.size(); ++s) {
            const auto& sigma = set.elements[s];
            double dot = 0.0;
            for (int v = 0; v < d; ++v) dot += x[v] * x[sigma[v]];
            double t = std::clamp(dot * inv_norm2, -1.0, 1.0);
            val += set.weights[s] * harmonics::legendre_eval(d, k, t);
        }
        val /= w_total;
        sum += val;
        sumsq += val * val;
    }
    McEntry entry;
    entry.n_samples = n_samples;
    entry.seed = seed;
    entry.estimate = sum / static_cast<double>(n_samples);
    double var = std::max(0.0, (sumsq - sum * entry.estimate) / static_cast<double>(n_samples - 1));
    entry.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
    return entry;
}

// nu_d(l) = sup_{k >= l} gamma_d(k), truncated at kmax; for groups the tail beyond
// kmax is floored at the exact limit 1/|G|.
inline double nu(const GammaTable& table, int l) {
    if (l < 0 || l > table.kmax) throw config_error("nu: l out of range");
    double m = *std::max_element(table.exact.begin() + l, table.exact.end());
    if (table.is_group) m = std::max(m, 1.0 / static_cast<double>(table.set_size));
    return m;
}

// D(l) = sum_{k < l} N-bar(d,k), exact integers (groups only).
inline int128 cum_invariant_dim(const GammaTable& table, int l) {
    if (table.nbar.empty()) throw config_error("cum_invariant_dim: table has no exact N-bar (group tables only)");
    if (l < 0 || l > table.kmax + 1) throw config_error("cum_invariant_dim: l out of range");
    int128 total = 0;
    for (int k = 0; k < l; ++k) total = checked_add(total, table.nbar[k]);
    return total;
}

struct DofPair {
    double nk = 0.0;      // N_K(lambda)
    double nkg = 0.0;     // N_{K_G}(lambda)
    double tail_nk = 0.0; // magnitude of the last retained term, as truncation estimate
    double tail_nkg = 0.0;
};

// N_K(lambda) = sum_k N(d,k) mu_k/(mu_k+lambda), N_{K_G} with N-bar in place of N.
inline DofPair dof_pair(const harmonics::SpectralProfile& profile, const GammaTable& table,
                        double lambda) {
    if (lambda <= 0.0) throw config_error("dof_pair: lambda must be > 0");
    if (profile.d != table.d) throw config_error("dof_pair: dimension mismatch");
    int kmax = std::min(profile.kmax(), table.kmax);
    DofPair out;
    for (int k = 0; k <= kmax; ++k) {
        double ratio = profile.mu[k] / (profile.mu[k] + lambda);
        double nk = static_cast<double>(profile.dims[k]) * ratio;
        double nkg = table.nbar.empty()
                         ? table.exact[k] * static_cast<double>(profile.dims[k]) * ratio
                         : static_cast<double>(table.nbar[k]) * ratio;
        out.nk += nk;
        out.nkg += nkg;
        if (k == kmax) {
            out.tail_nk = nk;
            out.tail_nkg = nkg;
        }
    }
    return out;
}

struct RateParams {
    double alpha = 2.0;      // capacity exponent, > 1
    double r = 0.5;          // source exponent
    double C_K = 1.0;
    double C_fstar = 1.0;
    double sigma_rho = 0.0;
    double nu0 = 1.0;        // asymptotic gain 1/|G| or fitted
    double beta = 1.0;       // correction exponent
    double c_beta = 1.0;     // constant in the nu estimate, default 1
    int d = 3;
    double C2 = 1.0;         // constant in the l_n equation, default 1

    void validate() const {
        if (alpha <= 1.0) throw config_error("RateParams: alpha must be > 1");
        if (!(r > (alpha - 1.0) / (2.0 * alpha)))
            throw config_error("RateParams: source condition requires r > (alpha-1)/(2 alpha)");
    }
};

enum class RateMode { invariant, stable };

// Largest l <= kmax with D(l) <= C2 nu(l)^p n^{1/(2 alpha r + 1)}, where
// p = 2 alpha r/(2 alpha r + 1) in the invariant regime and 2r/(2 alpha r + 1)
// in the stable regime.
inline std::pair<int, double> ln_solver(const RateParams& params,
                                        const std::function<double(int)>& Dfun,
                                        const std::function<double(int)>& nufun,
                                        double n, RateMode mode, int kmax) {
    params.validate();
    if (n < 1.0) throw config_error("ln_solver: n must be >= 1");
    double ar2 = 2.0 * params.alpha * params.r;
    double p = (mode == RateMode::invariant ? ar2 : 2.0 * params.r) / (ar2 + 1.0);
    int best = 0;
    for (int l = 0; l <= kmax; ++l)
        if (Dfun(l) <= params.C2 * std::pow(nufun(l), p) * std::pow(n, 1.0 / (ar2 + 1.0))) best = l;
    return {best, nufun(best)};
}

// Asymptotic estimate of nu_d(l_n):
//   nu0 + C min{ (nu0^{2 alpha r} n)^{-beta/((d-1)(2 alpha r + 1))},
//                n^{-beta/((d-1)(2 alpha r + 1) + 2 beta alpha r)} },
// with alpha r replaced by r in the indicated exponents in the stable regime.
inline double nud_estimate(const RateParams& params, double n, RateMode mode) {
    params.validate();
    double ar2 = 2.0 * params.alpha * params.r;
    double sr2 = mode == RateMode::invariant ? ar2 : 2.0 * params.r;
    double denom1 = (params.d - 1.0) * (ar2 + 1.0);
    double first = std::pow(std::pow(params.nu0, sr2) * n, -params.beta / denom1);
    double second = std::pow(n, -params.beta / (denom1 + params.beta * sr2));
    return params.nu0 + params.c_beta * std::min(first, second);
}

enum class Parity { all, even, odd };

// Least-squares slope of log(gamma_d(k) - floor) against log k.
inline double slope_fit(const GammaTable& table, int k_lo, int k_hi, Parity parity, double floor) {
    if (k_lo < 1 || k_hi > table.kmax || k_lo > k_hi) throw config_error("slope_fit: bad k range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = k_lo; k <= k_hi; ++k) {
        if (parity == Parity::even && k % 2 != 0) continue;
        if (parity == Parity::odd && k % 2 != 1) continue;
        double resid = table.exact[k] - floor;
        if (resid <= 0.0) throw config_error("slope_fit: nonpositive residual at k=" + std::to_string(k));
        double x = std::log(static_cast<double>(k)), y = std::log(resid);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++n;
    }
    if (n < 2) throw config_error("slope_fit: fewer than two points in range");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Approximation error A_H(lambda, f*) for K and K_G from per-frequency coefficient
// masses: each representable coefficient contributes mass * lambda/(mu_k + lambda);
// mass outside the invariant subspace is unrepresentable in H_{K_G} and contributes
// in full.  For invariant targets the two sums coincide.
inline std::pair<double, double> approx_error_pair(const harmonics::SpectralProfile& profile,
                                                   const std::vector<double>& invariant_mass,
                                                   const std::vector<double>& noninvariant_mass,
                                                   double lambda) {
    if (lambda <= 0.0) throw config_error("approx_error_pair: lambda must be > 0");
    double a_k = 0.0, a_kg = 0.0;
    for (std::size_t k = 0; k < invariant_mass.size(); ++k) {
        double mu = k <= static_cast<std::size_t>(profile.kmax()) ? profile.mu[k] : 0.0;
        double pen = mu > 0.0 ? lambda / (mu + lambda) : 1.0;
        double non = k < noninvariant_mass.size() ? noninvariant_mass[k] : 0.0;
        a_k += (invariant_mass[k] + non) * pen;
        a_kg += invariant_mass[k] * pen + non;
    }
    return {a_k, a_kg};
}

}  // namespace invkern::spectra
