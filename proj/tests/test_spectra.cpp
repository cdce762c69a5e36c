#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/kernel_ridge.hpp"
#include "invkern/perms.hpp"
#include "invkern/spectra.hpp"

using namespace invkern;
using Catch::Approx;

TEST_CASE("gamma_exact anchors") {
    // Identity-only set: gamma = 1 everywhere.
    auto triv = spectra::gamma_exact(perms::gen_trivial(5), 5, 15);
    for (int k = 0; k <= 15; ++k) {
        REQUIRE(triv.exact[k] == Approx(1.0).margin(1e-15));
        REQUIRE(triv.exact_rational[k] == Rational(1));
    }

    // C3 at d=3, k=2: (1 + 2(-1/5))/3 = 1/5, one invariant harmonic of five.
    auto c3 = spectra::gamma_exact(perms::gen_cyclic(3), 3, 6);
    REQUIRE(c3.exact_rational[2] == Rational(1, 5));
    REQUIRE(static_cast<long long>(c3.nbar[2]) == 1);
    REQUIRE(harmonics::dim_harmonic(3, 2) == 5);

    // gamma(0) = 1 for every set with weights summing to one.
    for (const char* desc : {"cyclic:d=8", "blockcyclic:s=2,r=3", "symmetric:d=5", "phi:d=6,eps=2"}) {
        auto t = spectra::gamma_exact(perms::parse_set_descriptor(desc),
                                      perms::parse_set_descriptor(desc).d, 4);
        REQUIRE(t.exact[0] == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("transposition group closed form") {
    // G = {Id, transposition} in d=6: gamma(k) = (1 + 2/(k+2))/2 exactly.
    perms::Permutation transp = {1, 0, 2, 3, 4, 5};
    auto g = perms::make_uniform_set(6, {perms::identity_perm(6), transp}, true, "transp2");
    auto table = spectra::gamma_exact(g, 6, 100);
    for (int k = 1; k <= 100; ++k) {
        Rational expect = (Rational(1) + Rational(2, k + 2)) / Rational(2);
        REQUIRE(table.exact_rational[k] == expect);
    }
}

TEST_CASE("integrality and range for groups") {
    for (const char* desc : {"cyclic:d=3", "cyclic:d=8", "blockcyclic:s=2,r=3",
                             "blockcyclic:s=6,r=2", "symmetric:d=6", "trivial:d=4"}) {
        auto set = perms::parse_set_descriptor(desc);
        auto table = spectra::gamma_exact(set, set.d, 120);
        REQUIRE(table.nbar.size() == 121);
        for (int k = 0; k <= 120; ++k) {
            REQUIRE(table.nbar[k] >= 0);  // nonnegative integer dimension
            REQUIRE(table.exact[k] >= -1e-15);
            REQUIRE(table.exact[k] <= 1.0 + 1e-15);
            // nbar * (1/gamma) reproduces N(d,k) through the rational table.
            REQUIRE(table.exact_rational[k] ==
                    Rational(table.nbar[k], harmonics::dim_harmonic(set.d, k)));
        }
    }
}

TEST_CASE("limit envelope and slope for C8") {
    auto table = spectra::gamma_exact(perms::gen_cyclic(8), 8, 120);
    double tail = 0.0, early = 0.0;
    for (int k = 100; k <= 120; ++k) tail = std::max(tail, std::abs(table.exact[k] - 0.125));
    for (int k = 5; k <= 25; ++k) early = std::max(early, std::abs(table.exact[k] - 0.125));
    REQUIRE(tail <= early);

    double slope = spectra::slope_fit(table, 20, 120, spectra::Parity::even, 0.125);
    REQUIRE(slope >= -5.0);
    REQUIRE(slope <= -3.0);
}

TEST_CASE("slope_fit reference behaviors") {
    // Synthetic table holding 2/(k+2): slope -> -1 over k in [20,100].
    spectra::GammaTable synth;
    synth.d = 6;
    synth.kmax = 100;
    synth.exact.resize(101);
    for (int k = 0; k <= 100; ++k) synth.exact[k] = 2.0 / (k + 2);
    double s = spectra::slope_fit(synth, 20, 100, spectra::Parity::all, 0.0);
    REQUIRE(s >= -1.05);
    REQUIRE(s <= -0.95);

    spectra::GammaTable flat;
    flat.d = 6;
    flat.kmax = 30;
    flat.exact.assign(31, 0.4);
    REQUIRE(spectra::slope_fit(flat, 5, 30, spectra::Parity::all, 0.0) == Approx(0.0).margin(1e-12));

    spectra::GammaTable neg;
    neg.d = 6;
    neg.kmax = 10;
    neg.exact.assign(11, 0.1);
    REQUIRE_THROWS_AS(spectra::slope_fit(neg, 2, 10, spectra::Parity::all, 0.5), config_error);
}

TEST_CASE("gamma positivity for the weighted deformation set") {
    auto phi = perms::gen_deformation(6, 2);
    auto table = spectra::gamma_exact(phi, 6, 40);
    for (int k = 0; k <= 40; ++k) REQUIRE(table.exact[k] >= 0.0);
}

TEST_CASE("gamma_mc determinism and anchors") {
    auto triv = perms::gen_trivial(4);
    auto mc = spectra::gamma_mc(triv, 4, 3, 500, 42);
    REQUIRE(mc.estimate == 1.0);
    REQUIRE(mc.stderr_ == 0.0);

    // k = 0 is exactly 1 for any set.
    auto phi = perms::gen_deformation(5, 2);
    auto mc0 = spectra::gamma_mc(phi, 5, 0, 200, 7);
    REQUIRE(mc0.estimate == 1.0);

    // Same seed, same estimate; different seed differs.
    auto c8 = perms::gen_cyclic(8);
    auto a = spectra::gamma_mc(c8, 8, 4, 2000, 11);
    auto b = spectra::gamma_mc(c8, 8, 4, 2000, 11);
    auto c = spectra::gamma_mc(c8, 8, 4, 2000, 12);
    REQUIRE(a.estimate == b.estimate);
    REQUIRE(a.stderr_ == b.stderr_);
    REQUIRE(a.estimate != c.estimate);

    // C3 d=3 k=2 with 1e5 samples agrees with 1/5 within 4 stderr.
    auto c3 = perms::gen_cyclic(3);
    auto est = spectra::gamma_mc(c3, 3, 2, 100000, 1);
    REQUIRE(std::abs(est.estimate - 0.2) <= 4.0 * est.stderr_);

    REQUIRE_THROWS_AS(spectra::gamma_mc(c3, 3, 2, 50, 1), config_error);
}

TEST_CASE("nu and cumulative invariant dimension") {
    auto c3 = spectra::gamma_exact(perms::gen_cyclic(3), 3, 40);
    REQUIRE(spectra::nu(c3, 0) == Approx(1.0).margin(1e-15));
    double prev = 1.0;
    for (int l = 0; l <= 40; ++l) {
        double v = spectra::nu(c3, l);
        REQUIRE(v <= prev + 1e-15);
        REQUIRE(v >= 1.0 / 3.0 - 1e-15);  // group floor
        prev = v;
    }
    // D(1) = 1; D(3) for C3 at d=3 is 1 + 1 + 1.
    REQUIRE(static_cast<long long>(spectra::cum_invariant_dim(c3, 1)) == 1);
    REQUIRE(static_cast<long long>(spectra::cum_invariant_dim(c3, 3)) == 3);

    // Trivial-group D(l) accumulates the full N(d,k).
    auto triv = spectra::gamma_exact(perms::gen_trivial(5), 5, 10);
    long long total = 0;
    for (int l = 1; l <= 10; ++l) {
        total += harmonics::dim_harmonic(5, l - 1);
        REQUIRE(static_cast<long long>(spectra::cum_invariant_dim(triv, l)) == total);
    }

    // C8 tail: within 10% of 1/8 once l reaches 30.
    auto c8 = spectra::gamma_exact(perms::gen_cyclic(8), 8, 120);
    REQUIRE(std::abs(spectra::nu(c8, 30) - 0.125) <= 0.0125);
}

TEST_CASE("dof pair and the invariant degrees-of-freedom bound") {
    auto kernel = harmonics::KernelFunction::parse("arccos1");
    auto profile = harmonics::build_profile(kernel, 6, 120);
    auto table = spectra::gamma_exact(perms::gen_cyclic(6), 6, 120);

    // Large lambda sends both to zero; trivial group makes them equal.
    auto big = spectra::dof_pair(profile, table, 1e9);
    REQUIRE(big.nk <= 1e-6);
    REQUIRE(big.nkg <= 1e-6);
    auto triv = spectra::gamma_exact(perms::gen_trivial(6), 6, 120);
    for (double lam : {1e-4, 1e-2, 1.0}) {
        auto p = spectra::dof_pair(profile, triv, lam);
        REQUIRE(p.nkg == Approx(p.nk).epsilon(1e-12));
    }
    REQUIRE_THROWS_AS(spectra::dof_pair(profile, table, 0.0), config_error);

    for (double lam : krr::default_lambda_grid())
        for (int l : {0, 2, 5, 10}) {
            auto p = spectra::dof_pair(profile, table, lam);
            double bound = static_cast<double>(spectra::cum_invariant_dim(table, l)) +
                           spectra::nu(table, l) * p.nk;
            REQUIRE(p.nkg <= bound * (1.0 + 1e-12) + 1e-12);
        }
}

TEST_CASE("ln_solver behavior") {
    auto table = spectra::gamma_exact(perms::gen_cyclic(8), 8, 120);
    spectra::RateParams params;
    params.d = 8;
    params.nu0 = 0.125;
    auto Dfun = [&](int l) { return static_cast<double>(spectra::cum_invariant_dim(table, l)); };
    auto nufun = [&](int l) { return spectra::nu(table, l); };

    // Tiny n keeps only l = 0 feasible.
    auto [l_small, nu_small] = spectra::ln_solver(params, Dfun, nufun, 1.0, spectra::RateMode::invariant, 120);
    REQUIRE(l_small == 0);
    REQUIRE(nu_small == Approx(1.0).margin(1e-15));

    // l_n nondecreasing in n.
    int prev = 0;
    for (double n : {10.0, 100.0, 1000.0, 1e4, 1e5, 1e6, 1e7}) {
        auto [l, nu_l] = spectra::ln_solver(params, Dfun, nufun, n, spectra::RateMode::invariant, 120);
        REQUIRE(l >= prev);
        prev = l;
    }

    REQUIRE_THROWS_AS(spectra::ln_solver(params, Dfun, nufun, 0.5, spectra::RateMode::invariant, 120),
                      config_error);
    spectra::RateParams bad;
    bad.alpha = 0.5;
    REQUIRE_THROWS_AS(bad.validate(), config_error);

    // Frozen golden for the C8 profile at default constants (first oracle run):
    // nu is attained at k = 4 with gamma_8(4) = 38/294 = 19/147.
    REQUIRE(table.exact_rational[4] == Rational(19, 147));
    auto [l6, nu6] = spectra::ln_solver(params, Dfun, nufun, 1e6, spectra::RateMode::invariant, 120);
    REQUIRE(l6 == 4);
    REQUIRE(nu6 == Approx(19.0 / 147.0).margin(1e-14));
    auto [l3, nu3] = spectra::ln_solver(params, Dfun, nufun, 1e3, spectra::RateMode::invariant, 120);
    REQUIRE(l3 == 2);
    REQUIRE(nu3 == Approx(19.0 / 147.0).margin(1e-14));
}

TEST_CASE("nud_estimate properties") {
    spectra::RateParams params;
    params.d = 8;
    params.nu0 = 0.125;

    // Monotone nonincreasing in n, tending to nu0.
    double prev = 1e300;
    for (double n : {1.0, 10.0, 1e3, 1e6, 1e9, 1e12}) {
        double v = spectra::nud_estimate(params, n, spectra::RateMode::invariant);
        REQUIRE(v <= prev + 1e-15);
        REQUIRE(v >= params.nu0);
        prev = v;
    }
    // The correction decays like n^{-1/21} for d = 8, so the limit is only
    // visible at astronomically large n.
    REQUIRE(spectra::nud_estimate(params, 1e300, spectra::RateMode::invariant) ==
            Approx(params.nu0).margin(1e-3));

    // beta = 0 collapses the correction to the constant.
    spectra::RateParams flat = params;
    flat.beta = 0.0;
    REQUIRE(spectra::nud_estimate(flat, 12345.0, spectra::RateMode::invariant) ==
            Approx(params.nu0 + flat.c_beta).margin(1e-12));

    // Stable mode decays no faster than invariant mode (smaller exponent).
    for (double n : {1e3, 1e6}) {
        REQUIRE(spectra::nud_estimate(params, n, spectra::RateMode::stable) <=
                spectra::nud_estimate(params, n, spectra::RateMode::invariant) + 1e-12);
    }
}

TEST_CASE("approximation error proxy equality for invariant targets") {
    auto kernel = harmonics::KernelFunction::parse("arccos1");
    auto profile = harmonics::build_profile(kernel, 6, 20);
    std::vector<double> inv_mass(21, 0.0), non_mass(21, 0.0);
    inv_mass[0] = 0.3;
    inv_mass[2] = 0.5;
    inv_mass[4] = 0.2;
    for (double lam : {1e-6, 1e-3, 0.1}) {
        auto [a_k, a_kg] = spectra::approx_error_pair(profile, inv_mass, non_mass, lam);
        REQUIRE(a_kg == Approx(a_k).epsilon(1e-12));
    }
    // Non-invariant mass strictly penalizes the invariant kernel.
    non_mass[2] = 0.4;
    auto [b_k, b_kg] = spectra::approx_error_pair(profile, inv_mass, non_mass, 1e-3);
    REQUIRE(b_kg > b_k);
    REQUIRE_THROWS_AS(spectra::approx_error_pair(profile, inv_mass, non_mass, 0.0), config_error);
}

TEST_CASE("block cyclic tail near the group limit") {
    auto bc = spectra::gamma_exact(perms::parse_set_descriptor("blockcyclic:s=6,r=2"), 12, 120);
    REQUIRE(std::abs(bc.exact[120] - 1.0 / 36.0) <= 0.1 / 36.0);
    double tail = 0.0, early = 0.0;
    for (int k = 100; k <= 120; ++k) tail = std::max(tail, std::abs(bc.exact[k] - 1.0 / 36.0));
    for (int k = 5; k <= 25; ++k) early = std::max(early, std::abs(bc.exact[k] - 1.0 / 36.0));
    REQUIRE(tail <= early);
}
