#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/int128.hpp"

namespace invkern::perms {

// mapping[u] = sigma(u), 0-indexed.
using Permutation = std::vector<int>;

inline Permutation identity_perm(int d) {
    Permutation p(d);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

inline bool is_valid(const Permutation& p) {
    std::vector<char> seen(p.size(), 0);
    for (int v : p) {
        if (v < 0 || v >= static_cast<int>(p.size()) || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

inline Permutation invert(const Permutation& p) {
    Permutation inv(p.size());
    for (int u = 0; u < static_cast<int>(p.size()); ++u) inv[p[u]] = u;
    return inv;
}

// compose(a, b)(u) = a(b(u)).
inline Permutation compose(const Permutation& a, const Permutation& b) {
    Permutation c(a.size());
    for (int u = 0; u < static_cast<int>(a.size()); ++u) c[u] = a[b[u]];
    return c;
}

// Lifted action (sigma . x)(u) = x(sigma^{-1}(u)), i.e. out[sigma(v)] = x[v].
template <class Vec, class Out>
inline void apply_into(const Permutation& sigma, const Vec& x, Out& out) {
    if (static_cast<int>(sigma.size()) != static_cast<int>(x.size()))
        throw config_error("apply: dimension mismatch");
    for (int v = 0; v < static_cast<int>(sigma.size()); ++v) out[sigma[v]] = x[v];
}

inline std::vector<double> apply(const Permutation& sigma, const std::vector<double>& x) {
    std::vector<double> out(x.size());
    apply_into(sigma, x, out);
    return out;
}

struct CycleStats {
    std::vector<int> cycle_lengths;  // sorted increasing, summing to d
    int c = 0;                       // number of cycles = multiplicity of eigenvalue 1
    int fix = 0;                     // fixed points
};

inline CycleStats cycle_stats(const Permutation& p) {
    CycleStats st;
    std::vector<char> seen(p.size(), 0);
    for (int u = 0; u < static_cast<int>(p.size()); ++u) {
        if (seen[u]) continue;
        int len = 0;
        for (int v = u; !seen[v]; v = p[v]) seen[v] = 1, ++len;
        st.cycle_lengths.push_back(len);
        if (len == 1) ++st.fix;
    }
    std::sort(st.cycle_lengths.begin(), st.cycle_lengths.end());
    st.c = static_cast<int>(st.cycle_lengths.size());
    return st;
}

struct TransformationSet {
    int d = 0;
    std::vector<Permutation> elements;
    std::vector<double> weights;  // nonnegative, summing to 1
    bool is_group = false;
    std::string descriptor;

    std::size_t size() const { return elements.size(); }
};

inline bool check_inverse_closed(const TransformationSet& set) {
    std::map<Permutation, double> w;
    for (std::size_t i = 0; i < set.elements.size(); ++i) w[set.elements[i]] = set.weights[i];
    for (std::size_t i = 0; i < set.elements.size(); ++i) {
        auto it = w.find(invert(set.elements[i]));
        if (it == w.end() || it->second != set.weights[i]) return false;
    }
    return true;
}

// Group axioms, checked on construction for |G| <= 1e4.
inline void verify_group(const TransformationSet& set) {
    if (!set.is_group || set.size() > 10'000) return;
    std::map<Permutation, int> index;
    for (std::size_t i = 0; i < set.elements.size(); ++i) index[set.elements[i]] = static_cast<int>(i);
    if (!index.count(identity_perm(set.d))) throw numeric_error("group verification: identity missing");
    for (const auto& a : set.elements)
        for (const auto& b : set.elements)
            if (!index.count(compose(a, b))) throw numeric_error("group verification: not closed");
    if (!check_inverse_closed(set)) throw numeric_error("group verification: inverses missing");
}

inline TransformationSet make_uniform_set(int d, std::vector<Permutation> elems, bool is_group,
                                          std::string descriptor) {
    TransformationSet set;
    set.d = d;
    set.elements = std::move(elems);
    set.weights.assign(set.elements.size(), 1.0 / static_cast<double>(set.elements.size()));
    set.is_group = is_group;
    set.descriptor = std::move(descriptor);
    verify_group(set);
    return set;
}

inline TransformationSet gen_trivial(int d) {
    return make_uniform_set(d, {identity_perm(d)}, true, "trivial:d=" + std::to_string(d));
}

inline TransformationSet gen_cyclic(int d) {
    if (d < 1) throw config_error("gen_cyclic: d must be >= 1");
    std::vector<Permutation> elems;
    for (int j = 0; j < d; ++j) {
        Permutation p(d);
        for (int u = 0; u < d; ++u) p[u] = (u + j) % d;
        elems.push_back(std::move(p));
    }
    return make_uniform_set(d, std::move(elems), true, "cyclic:d=" + std::to_string(d));
}

// r blocks of size s; elements are all r-tuples of within-block translations, |G| = s^r.
inline TransformationSet gen_block_cyclic(int s, int r) {
    if (s < 1 || r < 1) throw config_error("gen_block_cyclic: s, r must be >= 1");
    double count = std::pow(static_cast<double>(s), r);
    if (count > 1e6) throw budget_error("gen_block_cyclic: s^r exceeds enumeration cap 1e6");
    int d = s * r;
    std::vector<Permutation> elems;
    std::vector<int> shifts(r, 0);
    while (true) {
        Permutation p(d);
        for (int b = 0; b < r; ++b)
            for (int u = 0; u < s; ++u) p[b * s + u] = b * s + (u + shifts[b]) % s;
        elems.push_back(std::move(p));
        int b = 0;
        while (b < r && ++shifts[b] == s) shifts[b++] = 0;
        if (b == r) break;
    }
    std::ostringstream desc;
    desc << "blockcyclic:s=" << s << ",r=" << r;
    return make_uniform_set(d, std::move(elems), true, desc.str());
}

inline TransformationSet gen_symmetric(int d) {
    if (d < 1) throw config_error("gen_symmetric: d must be >= 1");
    if (d > 8) throw budget_error("gen_symmetric: d > 8 exceeds enumeration cap d! <= 40320");
    std::vector<Permutation> elems;
    Permutation p = identity_perm(d);
    do elems.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return make_uniform_set(d, std::move(elems), true, "symmetric:d=" + std::to_string(d));
}

namespace detail {

// Line form of the displacement constraint: |pi(u) - pi(v) - (u - v)| <= eps (u - v)
// for all v < u, with plain integer differences.
inline bool line_ok(const int* pi, int len, int eps) {
    for (int u = 1; u < len; ++u)
        for (int v = 0; v < u; ++v)
            if (std::abs(pi[u] - pi[v] - (u - v)) > eps * (u - v)) return false;
    return true;
}

// DFS over the line constraint set L_eps (all start values).
inline void line_dfs(int d, int eps, std::vector<Permutation>& out) {
    std::vector<int> pi(d);
    std::vector<char> used(d, 0);
    auto rec = [&](auto&& self, int u) -> void {
        if (u == d) {
            out.emplace_back(pi.begin(), pi.end());
            return;
        }
        int lo = std::max(0, pi[u - 1] + 1 - eps), hi = std::min(d - 1, pi[u - 1] + 1 + eps);
        for (int v = lo; v <= hi; ++v) {
            if (used[v]) continue;
            pi[u] = v;
            if (!line_ok(pi.data(), u + 1, eps)) continue;
            used[v] = 1;
            self(self, u + 1);
            used[v] = 0;
        }
    };
    for (int v0 = 0; v0 < d; ++v0) {
        pi[0] = v0;
        used[v0] = 1;
        rec(rec, 1);
        used[v0] = 0;
    }
}

// Membership under the translation-quotient reading of "differences modulo d":
// sigma is in Phi_eps iff sigma or sigma^{-1} equals a translation composed with
// a line-constrained map.
inline bool phi_member(const Permutation& sigma, int eps) {
    int d = static_cast<int>(sigma.size());
    Permutation inv = invert(sigma);
    std::vector<int> shifted(d);
    for (const Permutation* cand : {&sigma, static_cast<const Permutation*>(&inv)}) {
        for (int j = 0; j < d; ++j) {
            for (int u = 0; u < d; ++u) shifted[u] = ((*cand)[u] - j + d) % d;
            if (line_ok(shifted.data(), d, eps)) return true;
        }
    }
    return false;
}

}  // namespace detail

// Deformation set Phi_eps: all translations of line-constrained maps, completed
// under inversion (the set itself is then closed under inversion by construction).
inline TransformationSet gen_deformation(int d, int eps, std::size_t max_elements = 5'000'000) {
    if (d < 3 || eps < 0) throw config_error("gen_deformation: need d >= 3, eps >= 0");
    if (eps >= 3 && d > 9)
        throw config_error("gen_deformation: eps >= 3 supported only via the filter oracle, d <= 9");
    if (d > 24) throw config_error("gen_deformation: d > 24 not supported");

    std::vector<Permutation> base;
    if (eps >= 3) {
        Permutation p = identity_perm(d);
        do {
            if (detail::phi_member(p, eps)) base.push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
    } else {
        std::vector<Permutation> line;
        detail::line_dfs(d, eps, line);
        if (2 * line.size() * d > max_elements)
            throw budget_error("gen_deformation: cap exceeded; partial count " +
                               std::to_string(line.size()) + " line maps before translations");
        for (const auto& pi : line) {
            for (int j = 0; j < d; ++j) {
                Permutation p(d);
                for (int u = 0; u < d; ++u) p[u] = (pi[u] + j) % d;
                base.push_back(p);
                base.push_back(invert(base.back()));
            }
        }
        std::sort(base.begin(), base.end());
        base.erase(std::unique(base.begin(), base.end()), base.end());
    }
    std::ostringstream desc;
    desc << "phi:d=" << d << ",eps=" << eps;
    return make_uniform_set(d, std::move(base), eps <= 1, desc.str());
}

// Exhaustive-filter oracle over S_d, d <= 9.
inline TransformationSet gen_deformation_filter(int d, int eps) {
    if (d < 3 || d > 9 || eps < 0) throw config_error("gen_deformation_filter: need 3 <= d <= 9");
    std::vector<Permutation> elems;
    Permutation p = identity_perm(d);
    do {
        if (detail::phi_member(p, eps)) elems.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    std::ostringstream desc;
    desc << "phi-filter:d=" << d << ",eps=" << eps;
    return make_uniform_set(d, std::move(elems), eps <= 1, desc.str());
}

// zeta(G, s) = #{sigma : c(sigma) > s}.
inline std::int64_t zeta_count(const TransformationSet& set, int s) {
    std::int64_t n = 0;
    for (const auto& p : set.elements)
        if (cycle_stats(p).c > s) ++n;
    return n;
}

// !m by the derangement recurrence.
inline int128 subfactorial(int m) {
    if (m < 0) throw config_error("subfactorial: m must be >= 0");
    int128 a = 1, b = 0;  // !0, !1
    if (m == 0) return a;
    for (int i = 2; i <= m; ++i) {
        int128 next = checked_mul(i - 1, checked_add(a, b));
        a = b;
        b = next;
    }
    return b;
}

// xi(S_d, s) = sum_{j=s+1}^d C(d,j) !(d-j): permutations with more than s fixed points.
inline int128 xi_closed_form(int d, int s) {
    int128 total = 0;
    for (int j = s + 1; j <= d; ++j)
        total = checked_add(total, checked_mul(harmonics::binomial128(d, j), subfactorial(d - j)));
    return total;
}

inline std::int64_t xi_brute(const TransformationSet& set, int s) {
    std::int64_t n = 0;
    for (const auto& p : set.elements)
        if (cycle_stats(p).fix > s) ++n;
    return n;
}

// Coefficients h_j of prod_cycles (1 - t^l)^{-1} up to degree kmax: the trace of
// sigma on degree-j homogeneous polynomials.  All coefficients are >= 0.
inline std::vector<int128> char_series(const CycleStats& st, int kmax) {
    std::vector<int128> h(kmax + 1, 0);
    h[0] = 1;
    for (int len : st.cycle_lengths)
        for (int j = len; j <= kmax; ++j) h[j] = checked_add(h[j], h[j - len]);
    return h;
}

// Exact E_x[P_{d,k}(<sigma.x, x>)] = (h_k - h_{k-2}) / N(d,k), the normalized trace
// of sigma on the degree-k harmonics.
inline Rational char_ratio_exact(const Permutation& sigma, int d, int k) {
    if (k < 0) throw config_error("char_ratio_exact: k must be >= 0");
    if (static_cast<int>(sigma.size()) != d) throw config_error("char_ratio_exact: dimension mismatch");
    auto h = char_series(cycle_stats(sigma), k);
    int128 num = h[k] - (k >= 2 ? h[k - 2] : 0);
    return {num, harmonics::dim_harmonic(d, k)};
}

struct BlockTilingCounts {
    // counts[i-1][m] = B(m; B_i) for blocks of size i in {1,2,3}; index m = 0 unused.
    std::array<std::vector<int128>, 3> counts;
    std::vector<int128> totals;
};

// Recursion B(m;B1) = sum_i B(m-1;B_i), B(m;B2) = B(m-2;B1) + B(m-2;B2),
// B(m;B3) = B(m-3;B1), with B(i;B_i) = 1 and B(m;B_i) = 0 for m < i.
inline BlockTilingCounts block_tiling_counts(int L) {
    if (L < 1) throw config_error("block_tiling_counts: L must be >= 1");
    BlockTilingCounts out;
    for (auto& v : out.counts) v.assign(L + 1, 0);
    auto B = [&](int m, int i) -> int128 { return m < 1 ? 0 : out.counts[i - 1][m]; };
    for (int m = 1; m <= L; ++m) {
        if (m == 1) out.counts[0][m] = 1;
        else out.counts[0][m] = checked_add(checked_add(B(m - 1, 1), B(m - 1, 2)), B(m - 1, 3));
        if (m == 2) out.counts[1][m] = 1;
        else if (m > 2) out.counts[1][m] = checked_add(B(m - 2, 1), B(m - 2, 2));
        if (m == 3) out.counts[2][m] = 1;
        else if (m > 3) out.counts[2][m] = B(m - 3, 1);
    }
    out.totals.assign(L + 1, 0);
    for (int m = 1; m <= L; ++m)
        out.totals[m] = checked_add(checked_add(B(m, 1), B(m, 2)), B(m, 3));
    return out;
}

// Root of z = 1 + 1/(z^2-1) + 1/z^3 in (1.5, 2), by bisection plus Newton polish.
inline double growth_root() {
    auto f = [](double z) { return z - 1.0 - 1.0 / (z * z - 1.0) - 1.0 / (z * z * z); };
    double lo = 1.5, hi = 2.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if ((f(mid) < 0) == (f(lo) < 0)) lo = mid;
        else hi = mid;
    }
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < 6; ++it) {
        double df = 1.0 + 2.0 * z / ((z * z - 1.0) * (z * z - 1.0)) + 3.0 / (z * z * z * z);
        z -= f(z) / df;
    }
    return z;
}

// Line-based text format: one permutation per line, space-separated images,
// optional trailing weight column marked "w=".
inline std::string set_to_text(const TransformationSet& set) {
    std::ostringstream out;
    out.precision(17);
    bool uniform = true;
    for (double w : set.weights) uniform = uniform && w == set.weights[0];
    for (std::size_t i = 0; i < set.elements.size(); ++i) {
        for (int u = 0; u < set.d; ++u) out << (u ? " " : "") << set.elements[i][u];
        if (!uniform) out << " w=" << set.weights[i];
        out << "\n";
    }
    return out.str();
}

inline TransformationSet set_from_text(const std::string& text, bool is_group = false,
                                       std::string descriptor = "custom") {
    TransformationSet set;
    set.is_group = is_group;
    set.descriptor = std::move(descriptor);
    std::istringstream in(text);
    std::string line;
    bool any_weight = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Permutation p;
        std::string tok;
        double w = -1.0;
        while (ls >> tok) {
            if (tok.rfind("w=", 0) == 0) {
                w = std::stod(tok.substr(2));
                any_weight = true;
            } else p.push_back(std::stoi(tok));
        }
        if (set.d == 0) set.d = static_cast<int>(p.size());
        if (static_cast<int>(p.size()) != set.d || !is_valid(p))
            throw config_error("set_from_text: invalid permutation line '" + line + "'");
        set.elements.push_back(std::move(p));
        set.weights.push_back(w);
    }
    if (set.elements.empty()) throw config_error("set_from_text: empty set");
    double total = 0.0;
    for (double& w : set.weights) {
        if (w < 0.0) {
            if (any_weight) throw config_error("set_from_text: mixed weighted/unweighted lines");
            w = 1.0 / static_cast<double>(set.elements.size());
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw config_error("set_from_text: weights must sum to 1");
    verify_group(set);
    return set;
}

// Set descriptors used across the CLI: cyclic:d=8, blockcyclic:s=6,r=2,
// symmetric:d=6, phi:d=12,eps=2, trivial:d=6.
inline TransformationSet parse_set_descriptor(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) throw config_error("set descriptor needs parameters: '" + spec + "'");
    std::string name = spec.substr(0, colon);
    auto kv = harmonics::detail::parse_kv(spec.substr(colon + 1));
    try {
        if (name == "cyclic") return gen_cyclic(std::stoi(kv.at("d")));
        if (name == "blockcyclic") return gen_block_cyclic(std::stoi(kv.at("s")), std::stoi(kv.at("r")));
        if (name == "symmetric") return gen_symmetric(std::stoi(kv.at("d")));
        if (name == "phi") return gen_deformation(std::stoi(kv.at("d")), std::stoi(kv.at("eps")));
        if (name == "trivial") return gen_trivial(std::stoi(kv.at("d")));
    } catch (const std::out_of_range&) {
        throw config_error("missing parameter in set descriptor '" + spec + "'");
    } catch (const std::invalid_argument&) {
        throw config_error("bad parameter in set descriptor '" + spec + "'");
    }
    throw config_error("unknown set descriptor '" + name + "'");
}

}  // namespace invkern::perms
