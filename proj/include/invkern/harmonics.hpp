#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "invkern/errors.hpp"
#include "invkern/int128.hpp"
#include "json.hpp"

namespace invkern::harmonics {

// omega_{p-1} = 2 pi^{p/2} / Gamma(p/2), the surface area of the unit sphere in R^p.
inline double surface_area(int p) {
    if (p < 1) throw config_error("surface_area: p must be >= 1");
    return 2.0 * std::pow(std::numbers::pi, p / 2.0) / std::tgamma(p / 2.0);
}

// Total mass of the weight dw(t) = (1-t^2)^{(d-3)/2} dt on [-1,1].
inline double weight_mass(int d) { return surface_area(d) / surface_area(d - 1); }

inline void check_dt(int d, double t) {
    if (d < 3) throw config_error("legendre: d must be >= 3");
    if (std::abs(t) > 1.0) throw config_error("legendre: |t| > 1");
}

// P_{d,k}(t), normalized P_{d,k}(1) = 1, by the upward three-term recurrence
// (k+d-2) P_{k+1} = (2k+d-2) t P_k - k P_{k-1}.
inline double legendre_eval(int d, int k, double t) {
    check_dt(d, t);
    if (k == 0) return 1.0;
    double pm = 1.0, p = t;
    for (int j = 1; j < k; ++j) {
        double next = ((2.0 * j + d - 2) * t * p - j * pm) / (j + d - 2);
        pm = p;
        p = next;
    }
    return p;
}

// All P_{d,k}(t) for k = 0..kmax in one recurrence sweep; out must hold kmax+1 values.
inline void legendre_batch_into(int d, int kmax, double t, double* out) {
    out[0] = 1.0;
    if (kmax >= 1) out[1] = t;
    for (int j = 1; j < kmax; ++j)
        out[j + 1] = ((2.0 * j + d - 2) * t * out[j] - j * out[j - 1]) / (j + d - 2);
}

inline std::vector<double> legendre_batch(int d, int kmax, double t) {
    check_dt(d, t);
    std::vector<double> out(kmax + 1);
    legendre_batch_into(d, kmax, t, out.data());
    return out;
}

inline int128 binomial128(long long a, long long b) {
    if (b < 0 || b > a) return 0;
    b = std::min(b, a - b);
    int128 c = 1;
    for (long long i = 1; i <= b; ++i) c = checked_mul(c, a - b + i) / i;
    return c;
}

// N(d,k) = ((2k+d-2)/k) C(k+d-3, d-2), exact integers.
inline std::int64_t dim_harmonic(int d, int k) {
    if (d < 3 || k < 0) throw config_error("dim_harmonic: need d >= 3, k >= 0");
    if (k == 0) return 1;
    int128 n = checked_mul(binomial128(k + d - 3, d - 2), 2 * k + d - 2);
    if (n % k != 0) throw numeric_error("dim_harmonic: non-integer result");
    n /= k;
    if (n > INT64_MAX) throw numeric_error("dim_harmonic: exceeds 64-bit range");
    return static_cast<std::int64_t>(n);
}

struct QuadratureRule {
    std::vector<double> nodes;    // strictly inside (-1,1), increasing
    std::vector<double> weights;  // positive, summing to weight_mass(d)
    int order = 0;                // exact for polynomial degree <= order against dw
};

namespace detail {

inline double legendre_deriv(int d, int k, double t) {
    if (k == 0) return 0.0;
    double pm = 1.0, p = t, dpm = 0.0, dp = 1.0;
    for (int j = 1; j < k; ++j) {
        double pn = ((2.0 * j + d - 2) * t * p - j * pm) / (j + d - 2);
        double dpn = ((2.0 * j + d - 2) * (p + t * dp) - j * dpm) / (j + d - 2);
        pm = p, p = pn, dpm = dp, dp = dpn;
    }
    return dp;
}

// Roots of P_{d,k} for k = 1..n, grown incrementally; roots of successive degrees
// interlace, giving brackets for bisection, finished by Newton.
struct RootTable {
    int d;
    std::vector<std::vector<double>> roots{{}};  // roots[k] = sorted roots of P_{d,k}

    void extend(int n) {
        while (static_cast<int>(roots.size()) <= n) {
            int k = static_cast<int>(roots.size());
            const auto& prev = roots[k - 1];
            std::vector<double> cur(k);
            for (int i = 0; i < k; ++i) {
                double lo = (i == 0) ? -1.0 : prev[i - 1];
                double hi = (i == k - 1) ? 1.0 : prev[i];
                cur[i] = solve(k, lo, hi);
            }
            roots.push_back(std::move(cur));
        }
    }

    double solve(int k, double lo, double hi) const {
        double flo = legendre_eval(d, k, lo);
        for (int it = 0; it < 30; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = legendre_eval(d, k, mid);
            if ((fm < 0) == (flo < 0)) lo = mid, flo = fm;
            else hi = mid;
        }
        double x = 0.5 * (lo + hi);
        for (int it = 0; it < 8; ++it) {
            double f = legendre_eval(d, k, x), df = legendre_deriv(d, k, x);
            if (df == 0.0) break;
            double step = f / df;
            x -= step;
            if (x <= lo || x >= hi) { x = std::clamp(x, lo, hi); break; }
            if (std::abs(step) < 1e-15) break;
        }
        return x;
    }
};

inline RootTable& root_table(int d) {
    static std::map<int, RootTable> cache;
    auto it = cache.find(d);
    if (it == cache.end()) it = cache.emplace(d, RootTable{d}).first;
    return it->second;
}

}  // namespace detail

// Gauss rule for the weight (1-t^2)^{(d-3)/2}: n nodes integrate degree <= 2n-1 exactly.
// Weights are Christoffel values 1 / sum_{k<n} P_{d,k}(x)^2 N(d,k) / mass.
inline QuadratureRule build_quadrature(int d, int order) {
    if (d < 3 || order < 1) throw config_error("build_quadrature: need d >= 3, order >= 1");
    static std::map<std::pair<int, int>, QuadratureRule> cache;
    int n = (order + 2) / 2;  // 2n - 1 >= order
    if (auto it = cache.find({d, n}); it != cache.end()) return it->second;

    auto& table = detail::root_table(d);
    table.extend(n);
    QuadratureRule rule;
    rule.nodes = table.roots[n];
    rule.order = 2 * n - 1;
    double mass = weight_mass(d);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Symmetric weight function: mirror the left half onto the right.
        if (rule.nodes[i] > 1e-14 && i >= n - i - 1) {
            rule.weights[i] = rule.weights[n - 1 - i];
            continue;
        }
        auto p = legendre_batch(d, n - 1, rule.nodes[i]);
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += p[k] * p[k] * static_cast<double>(dim_harmonic(d, k));
        rule.weights[i] = mass / s;
    }
    for (int i = 0; i + 1 < n; ++i)
        if (!(rule.nodes[i] < rule.nodes[i + 1]) || !(std::abs(rule.nodes[i]) < 1.0))
            throw numeric_error("build_quadrature: node solve did not converge");
    cache[{d, n}] = rule;
    return rule;
}

// Dot-product kernels on the sphere, normalized so kappa(1) = 1.
struct KernelFunction {
    enum class Kind { arc_cosine_1, relu_composite, sphere_gaussian, monomial, legendre_single };
    Kind kind = Kind::arc_cosine_1;
    double s = 1.0;  // sphere_gaussian bandwidth
    int p = 1;       // monomial exponent
    int d = 3, j = 0;  // legendre_single parameters

    static double arccos1(double u) {
        return (std::sqrt(std::max(0.0, 1.0 - u * u)) + u * (std::numbers::pi - std::acos(u))) /
               std::numbers::pi;
    }

    double operator()(double u) const {
        switch (kind) {
            case Kind::arc_cosine_1: return arccos1(u);
            case Kind::relu_composite: return 0.5 * (u + 1.0) * arccos1(u);
            case Kind::sphere_gaussian: return std::exp(-(1.0 - u) / (s * s));
            case Kind::monomial: return std::pow(u, p);
            case Kind::legendre_single: return legendre_eval(d, j, u);
        }
        return 0.0;
    }

    std::string str() const {
        switch (kind) {
            case Kind::arc_cosine_1: return "arccos1";
            case Kind::relu_composite: return "relu-composite";
            case Kind::sphere_gaussian: { std::ostringstream o; o << "gauss:s=" << s; return o.str(); }
            case Kind::monomial: { std::ostringstream o; o << "monomial:p=" << p; return o.str(); }
            case Kind::legendre_single: {
                std::ostringstream o; o << "legendre-single:d=" << d << ",k=" << j; return o.str();
            }
        }
        return "";
    }

    static KernelFunction parse(const std::string& spec);
};

namespace detail {
inline std::map<std::string, std::string> parse_kv(const std::string& body) {
    std::map<std::string, std::string> kv;
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw config_error("expected key=value, got '" + item + "'");
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}
}  // namespace detail

inline KernelFunction KernelFunction::parse(const std::string& spec) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    auto kv = colon == std::string::npos ? std::map<std::string, std::string>{}
                                         : detail::parse_kv(spec.substr(colon + 1));
    KernelFunction k;
    try {
        if (name == "arccos1") k.kind = Kind::arc_cosine_1;
        else if (name == "relu-composite") k.kind = Kind::relu_composite;
        else if (name == "gauss") { k.kind = Kind::sphere_gaussian; k.s = std::stod(kv.at("s")); }
        else if (name == "monomial") { k.kind = Kind::monomial; k.p = std::stoi(kv.at("p")); }
        else if (name == "legendre-single") {
            k.kind = Kind::legendre_single;
            k.d = std::stoi(kv.at("d"));
            k.j = std::stoi(kv.at("k"));
        } else throw config_error("unknown kernel '" + name + "'");
    } catch (const std::out_of_range&) {
        throw config_error("missing kernel parameter in '" + spec + "'");
    } catch (const std::invalid_argument&) {
        throw config_error("bad kernel parameter in '" + spec + "'");
    }
    return k;
}

// mu_k = (1/mass) integral of kappa(t) P_{d,k}(t) dw(t), by Gauss quadrature of
// order >= 2k+64, cross-checked against a finer rule; |mu| < 1e-14 clamps to 0.
inline double funk_hecke_coeff(const KernelFunction& kernel, int d, int k) {
    auto integrate = [&](int order) {
        auto rule = build_quadrature(d, order);
        int n = static_cast<int>(rule.nodes.size());
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += rule.weights[i] * kernel(rule.nodes[i]) * legendre_eval(d, k, rule.nodes[i]);
        return acc / weight_mass(d);
    };
    double coarse = integrate(2 * k + 64);
    double fine = integrate(2 * k + 80);
    if (std::abs(coarse - fine) > 1e-8)
        throw numeric_error("funk_hecke_coeff: quadrature non-convergence at d=" + std::to_string(d) +
                            " k=" + std::to_string(k));
    return std::abs(fine) < 1e-14 ? 0.0 : fine;
}

struct SpectralProfile {
    int d = 0;
    std::vector<double> mu;         // mu_k, k = 0..kmax
    std::vector<std::int64_t> dims; // N(d,k)

    int kmax() const { return static_cast<int>(mu.size()) - 1; }
};

inline SpectralProfile build_profile(const KernelFunction& kernel, int d, int kmax) {
    SpectralProfile prof;
    prof.d = d;
    prof.mu.resize(kmax + 1);
    prof.dims.resize(kmax + 1);
    for (int k = 0; k <= kmax; ++k) {
        prof.mu[k] = funk_hecke_coeff(kernel, d, k);
        prof.dims[k] = dim_harmonic(d, k);
    }
    return prof;
}

inline std::string profile_to_csv(const SpectralProfile& profile) {
    std::ostringstream out;
    out.precision(17);
    out << "k,N,mu\n";
    for (int k = 0; k <= profile.kmax(); ++k)
        out << k << "," << profile.dims[k] << "," << profile.mu[k] << "\n";
    return out.str();
}

inline nlohmann::json profile_to_json(const SpectralProfile& profile) {
    return {{"d", profile.d}, {"mu", profile.mu}, {"dims", profile.dims}};
}

inline SpectralProfile profile_from_json(const nlohmann::json& j) {
    SpectralProfile prof;
    prof.d = j.at("d").get<int>();
    prof.mu = j.at("mu").get<std::vector<double>>();
    prof.dims = j.at("dims").get<std::vector<std::int64_t>>();
    if (prof.mu.size() != prof.dims.size() || prof.mu.empty())
        throw config_error("profile_from_json: mu/dims size mismatch");
    return prof;
}

// Truncated Mercer sum: sum_{k<=L} mu_k N(d,k) P_{d,k}(t).
inline double mercer_reconstruct(const SpectralProfile& profile, int L, double t) {
    if (L > profile.kmax()) throw config_error("mercer_reconstruct: L exceeds profile kmax");
    auto p = legendre_batch(profile.d, L, t);
    double acc = 0.0;
    for (int k = 0; k <= L; ++k) acc += profile.mu[k] * static_cast<double>(profile.dims[k]) * p[k];
    return acc;
}

}  // namespace invkern::harmonics
