#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "invkern/datagen.hpp"
#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/io.hpp"
#include "invkern/kernel_ridge.hpp"
#include "invkern/perms.hpp"
#include "invkern/spectra.hpp"

namespace invkern::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline std::vector<std::int64_t> parse_int_list(const std::string& s) {
    std::vector<std::int64_t> out;
    for (const auto& tok : split(s, ',')) {
        try {
            out.push_back(std::stoll(tok));
        } catch (const std::exception&) {
            throw config_error("bad integer '" + tok + "' in list '" + s + "'");
        }
    }
    if (out.empty()) throw config_error("empty integer list");
    return out;
}

inline std::vector<double> parse_lambda_grid(const std::string& s) {
    if (s == "auto") return krr::default_lambda_grid();
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw config_error("bad lambda '" + tok + "' in grid '" + s + "'");
        }
    }
    if (out.empty()) throw config_error("empty lambda grid");
    return out;
}

inline std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

struct CommandOutput {
    std::string command;
    std::map<std::string, std::string> options;  // canonical echo, long names -> values
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<fs::path, std::string>> files;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void add(const fs::path& path, std::string content) { files.emplace_back(path, std::move(content)); }

    // Write all outputs atomically, then the manifest describing the run.
    void finish(const fs::path& out_path) {
        for (const auto& [path, content] : files) io::atomic_write(path, content);
        json manifest;
        manifest["command"] = command;
        manifest["options"] = options;
        manifest["seeds"] = seeds;
        manifest["versions"] = {{"invkern", invkern::version},
                                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                              std::to_string(EIGEN_MINOR_VERSION)},
                                {"compiler", __VERSION__}};
        manifest["wall_clock_sec"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json outs = json::array();
        for (const auto& [path, content] : files) outs.push_back(path.string());
        manifest["outputs"] = outs;
        fs::path mpath = out_path;
        mpath += ".manifest.json";
        io::atomic_write(mpath, manifest.dump(2) + "\n");
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// gamma: exact and/or Monte-Carlo gamma_d(k) tables.
// ---------------------------------------------------------------------------
struct GammaOpts {
    std::string set = "cyclic:d=8";
    int kmax = 40;
    bool exact = false, mc = false;
    std::int64_t n_samples = 100000;
    std::uint64_t seed = 1;
    std::string out = "gamma.csv", format = "csv", svg;
};

inline void run_gamma(const GammaOpts& o) {
    auto set = perms::parse_set_descriptor(o.set);
    bool do_exact = o.exact || !o.mc;
    detail::CommandOutput cmd;
    cmd.command = "gamma";
    cmd.options = {{"set", o.set},
                   {"kmax", std::to_string(o.kmax)},
                   {"exact", do_exact ? "true" : "false"},
                   {"mc", o.mc ? "true" : "false"},
                   {"n-samples", std::to_string(o.n_samples)},
                   {"seed", std::to_string(o.seed)},
                   {"out", o.out},
                   {"format", o.format},
                   {"svg", o.svg}};
    if (o.mc) cmd.seeds = {o.seed};

    spectra::GammaTable table;
    if (do_exact) table = spectra::gamma_exact(set, set.d, o.kmax);
    else {
        table.d = set.d;
        table.set_descriptor = set.descriptor;
        table.kmax = o.kmax;
        table.is_group = set.is_group;
        table.set_size = set.size();
    }
    std::vector<spectra::McEntry> mc;
    if (o.mc)
        for (int k = 0; k <= o.kmax; ++k)
            mc.push_back(spectra::gamma_mc(set, set.d, k, o.n_samples, o.seed));

    if (o.format == "csv") {
        std::ostringstream csv;
        csv << "k,exact,mc,stderr\n";
        for (int k = 0; k <= o.kmax; ++k) {
            csv << k << ",";
            if (do_exact) csv << detail::fmt(table.exact[k]);
            csv << ",";
            if (o.mc) csv << detail::fmt(mc[k].estimate) << "," << detail::fmt(mc[k].stderr_);
            else csv << ",";
            csv << "\n";
        }
        cmd.add(o.out, csv.str());
    } else if (o.format == "json") {
        json j;
        j["d"] = set.d;
        j["set"] = set.descriptor;
        j["kmax"] = o.kmax;
        j["set_size"] = set.size();
        j["is_group"] = set.is_group;
        if (do_exact) {
            j["horizon_policy"] = table.horizon_policy;
            j["exact"] = table.exact;
            if (!table.exact_rational.empty()) {
                std::vector<std::string> rats;
                for (const auto& r : table.exact_rational) rats.push_back(r.str());
                j["exact_rational"] = rats;
            }
            if (!table.nbar.empty()) {
                std::vector<std::string> nb;
                for (const auto& v : table.nbar) nb.push_back(to_string(v));
                j["nbar"] = nb;
            }
        }
        if (o.mc) {
            json rows = json::array();
            for (const auto& e : mc)
                rows.push_back({{"estimate", e.estimate},
                                {"stderr", e.stderr_},
                                {"n_samples", e.n_samples},
                                {"seed", e.seed}});
            j["mc"] = rows;
        }
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");

    if (!o.svg.empty()) {
        std::vector<io::Series> series;
        std::vector<double> ks(o.kmax + 1);
        for (int k = 0; k <= o.kmax; ++k) ks[k] = k;
        if (do_exact) series.push_back({"exact", ks, table.exact});
        if (o.mc) {
            std::vector<double> est;
            for (const auto& e : mc) est.push_back(e.estimate);
            series.push_back({"mc", ks, est});
        }
        io::PlotOptions popt;
        popt.xlabel = "k";
        popt.ylabel = "gamma_d(k)";
        popt.title = set.descriptor;
        popt.hline = 1.0 / static_cast<double>(set.size());
        cmd.add(o.svg, io::svg_plot(series, popt));
    }
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// counts: permutation statistics, deformation-set sizes, tiling totals.
// ---------------------------------------------------------------------------
struct CountsOpts {
    int d = 16;  // deformation sweep upper bound
    int L = 40;  // tiling length bound
    std::string set;  // optional: zeta/xi table for this set
    std::string out = "counts.csv", format = "csv";
};

inline void run_counts(const CountsOpts& o) {
    if (o.d < 5 || o.d > 16) throw config_error("counts: need 5 <= d <= 16 for the phi sweep");
    if (o.L < 4) throw config_error("counts: need L >= 4");
    detail::CommandOutput cmd;
    cmd.command = "counts";
    cmd.options = {{"d", std::to_string(o.d)},
                   {"L", std::to_string(o.L)},
                   {"set", o.set},
                   {"out", o.out},
                   {"format", o.format}};

    std::vector<std::array<std::string, 3>> rows;  // section, key, value
    auto tiling = perms::block_tiling_counts(o.L);
    for (int m = 1; m <= o.L; ++m)
        rows.push_back({"tiling", "total_m=" + std::to_string(m), to_string(tiling.totals[m])});
    {
        int lo = std::min(20, o.L - 1), hi = std::min(40, o.L);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (int m = lo; m <= hi; ++m) {
            double x = m, y = std::log(static_cast<double>(tiling.totals[m]));
            sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
        }
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        rows.push_back({"tiling", "log_growth_fit_m=" + std::to_string(lo) + ".." + std::to_string(hi),
                        detail::fmt(slope)});
        rows.push_back({"tiling", "growth_root", detail::fmt(perms::growth_root())});
    }
    std::map<int, std::int64_t> phi2_sizes;
    for (int d = 5; d <= o.d; ++d) {
        auto phi = perms::gen_deformation(d, 2);
        phi2_sizes[d] = static_cast<std::int64_t>(phi.size());
        rows.push_back({"phi", "size_d=" + std::to_string(d) + "_eps=2", std::to_string(phi.size())});
        rows.push_back({"phi", "inverse_closed_d=" + std::to_string(d),
                        perms::check_inverse_closed(phi) ? "1" : "0"});
        // Elements fixing positions 0 and 1, against the matched tiling length d-2.
        std::int64_t phib = 0;
        for (const auto& p : phi.elements)
            if (p[0] == 0 && p[1] == 1) ++phib;
        rows.push_back({"phi", "phib_d=" + std::to_string(d), std::to_string(phib)});
        rows.push_back({"phi", "b_total_m=" + std::to_string(d - 2),
                        d - 2 <= o.L ? to_string(tiling.totals[d - 2]) : "out-of-range"});
    }
    if (o.d >= 11) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (int d = 10; d <= o.d; ++d) {
            double x = d, y = std::log(static_cast<double>(phi2_sizes[d]));
            sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
        }
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        rows.push_back({"phi", "log_growth_fit_d=10.." + std::to_string(o.d), detail::fmt(slope)});
    }
    if (!o.set.empty()) {
        auto set = perms::parse_set_descriptor(o.set);
        for (int s = 0; s <= set.d; ++s) {
            rows.push_back({"set", "zeta_s=" + std::to_string(s), std::to_string(perms::zeta_count(set, s))});
            rows.push_back({"set", "xi_brute_s=" + std::to_string(s), std::to_string(perms::xi_brute(set, s))});
            rows.push_back({"set", "xi_closed_form_s=" + std::to_string(s),
                            to_string(perms::xi_closed_form(set.d, s))});
        }
    }

    if (o.format == "csv") {
        std::ostringstream csv;
        csv << "section,key,value\n";
        for (const auto& r : rows) csv << r[0] << "," << r[1] << "," << r[2] << "\n";
        cmd.add(o.out, csv.str());
    } else if (o.format == "json") {
        json j = json::array();
        for (const auto& r : rows) j.push_back({{"section", r[0]}, {"key", r[1]}, {"value", r[2]}});
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// krr-curve: learning curves for invariant vs non-invariant kernels.
// ---------------------------------------------------------------------------
struct KrrCurveOpts {
    int d = 6;
    std::string variants = "none;cyclic:d=6;blockcyclic:s=2,r=3;symmetric:d=6";
    std::string kernel = "relu-composite";
    std::string target_set = "symmetric:d=6";
    std::string target_base = "halfspace";
    double threshold = 0.7;
    int target_k = 2;
    int repetitions = 1;
    std::string n_grid = "100,200,400,800,1600,2500";
    int seeds = 5;
    std::int64_t n_test = 2000;
    std::string lambda_grid = "auto";
    double noise = 0.0;
    std::string out = "krr_curve.csv", format = "csv", svg;
};

inline void run_krr_curve(const KrrCurveOpts& o) {
    auto kernel = harmonics::KernelFunction::parse(o.kernel);
    auto n_grid = detail::parse_int_list(o.n_grid);
    auto lambda_grid = detail::parse_lambda_grid(o.lambda_grid);
    if (o.seeds < 1) throw config_error("krr-curve: need seeds >= 1");
    std::int64_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
    for (std::int64_t n : n_grid)
        if (n < 1 || n > n_max) throw config_error("krr-curve: bad n grid");

    struct Variant {
        std::string name;
        std::shared_ptr<const perms::TransformationSet> set;  // null = plain kernel
    };
    std::vector<Variant> variants;
    for (const auto& desc : detail::split(o.variants, ';')) {
        Variant v;
        v.name = desc;
        if (desc != "none") {
            auto set = std::make_shared<perms::TransformationSet>(perms::parse_set_descriptor(desc));
            if (set->d != o.d) throw config_error("krr-curve: variant '" + desc + "' has d != " + std::to_string(o.d));
            v.set = std::move(set);
        }
        variants.push_back(std::move(v));
    }
    if (variants.empty()) throw config_error("krr-curve: no kernel variants");

    // Budget checks happen before any Gram work.
    double total_evals = 0.0;
    for (const auto& v : variants) {
        double g = v.set ? static_cast<double>(v.set->size()) : 1.0;
        if (g >= 500.0 && n_max > 2500)
            throw budget_error("krr-curve: n > 2500 with |set| >= 500 exceeds the experiment budget");
        total_evals += g * (static_cast<double>(n_max) * (n_max + 1) / 2 +
                            static_cast<double>(n_max) * o.n_test) * o.seeds;
    }
    if (total_evals > 2e11)
        throw budget_error("krr-curve: estimated " + std::to_string(total_evals) +
                           " kernel evaluations exceed the 2e11 budget");

    datagen::TargetSpec target = datagen::default_target(o.d);
    if (o.target_base == "halfspace") target.base = datagen::TargetSpec::Base::halfspace;
    else if (o.target_base == "linear") target.base = datagen::TargetSpec::Base::linear;
    else if (o.target_base == "legendre-single") target.base = datagen::TargetSpec::Base::legendre_single;
    else throw config_error("unknown target base '" + o.target_base + "'");
    target.threshold = o.threshold;
    target.legendre_k = o.target_k;
    target.repetitions = o.repetitions;
    if (!o.target_set.empty() && o.target_set != "none") {
        auto set = std::make_shared<perms::TransformationSet>(perms::parse_set_descriptor(o.target_set));
        if (set->d != o.d) throw config_error("krr-curve: target set dimension mismatch");
        target.smoothing = std::move(set);
    }

    detail::CommandOutput cmd;
    cmd.command = "krr-curve";
    cmd.options = {{"d", std::to_string(o.d)},       {"variants", o.variants},
                   {"kernel", o.kernel},             {"target-set", o.target_set},
                   {"target-base", o.target_base},   {"threshold", detail::fmt(o.threshold)},
                   {"target-k", std::to_string(o.target_k)},
                   {"repetitions", std::to_string(o.repetitions)},
                   {"n-grid", o.n_grid},             {"seeds", std::to_string(o.seeds)},
                   {"n-test", std::to_string(o.n_test)},
                   {"lambda-grid", o.lambda_grid},   {"noise", detail::fmt(o.noise)},
                   {"out", o.out},                   {"format", o.format},
                   {"svg", o.svg}};
    for (int s = 0; s < o.seeds; ++s) cmd.seeds.push_back(s);

    // One fixed test set per dimension, disjoint from the train-seed space.
    const std::uint64_t test_seed = 1000003 + static_cast<std::uint64_t>(o.d);
    Eigen::MatrixXd X_test = datagen::sample_sphere(o.n_test, o.d, test_seed);
    Eigen::VectorXd y_test(o.n_test);
    for (std::int64_t i = 0; i < o.n_test; ++i)
        y_test(i) = datagen::eval_target(target, X_test.row(i).transpose());

    // risks[variant][n] = per-seed best risks; lambdas likewise.
    std::map<std::string, std::map<std::int64_t, std::vector<double>>> risks, lambdas;
    for (int seed = 0; seed < o.seeds; ++seed) {
        auto ds = datagen::make_dataset(target, n_max, o.d, o.noise, seed);
        for (const auto& v : variants) {
            krr::KernelSpec spec{kernel, v.set};
            Eigen::MatrixXd K_pool = krr::gram_assemble(ds.X, spec);
            Eigen::MatrixXd C_pool = krr::gram_assemble(ds.X, X_test, spec);
            for (std::int64_t n : n_grid) {
                auto sweep = krr::lambda_sweep(K_pool.topLeftCorner(n, n), ds.y.head(n),
                                               C_pool.topRows(n), y_test, lambda_grid);
                risks[v.name][n].push_back(sweep.best_risk);
                lambdas[v.name][n].push_back(sweep.best_lambda);
            }
        }
    }

    std::ostringstream csv;
    csv << "n,variant,mean_risk,std_risk\n";
    json jrows = json::array();
    for (const auto& v : variants) {
        for (std::int64_t n : n_grid) {
            const auto& r = risks[v.name][n];
            double mean = 0.0;
            for (double x : r) mean += x;
            mean /= static_cast<double>(r.size());
            double var = 0.0;
            for (double x : r) var += (x - mean) * (x - mean);
            double stdev = r.size() > 1 ? std::sqrt(var / static_cast<double>(r.size() - 1)) : 0.0;
            csv << n << "," << v.name << "," << detail::fmt(mean) << "," << detail::fmt(stdev) << "\n";
            json row = {{"n", n},          {"variant", v.name},     {"mean_risk", mean},
                        {"std_risk", stdev}, {"seed_risks", r},     {"best_lambdas", lambdas[v.name][n]}};
            std::vector<bool> bound_ok;
            for (double lam : lambdas[v.name][n])
                bound_ok.push_back(static_cast<double>(n) >= 5.0 / lam * (1.0 + std::log(1.0 / lam)));
            row["n_lambda_bound_ok"] = bound_ok;
            jrows.push_back(row);
        }
    }
    if (o.format == "csv") cmd.add(o.out, csv.str());
    else if (o.format == "json") {
        json j;
        j["config"] = cmd.options;
        j["rows"] = jrows;
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");

    if (!o.svg.empty()) {
        std::vector<io::Series> series;
        for (const auto& v : variants) {
            io::Series s;
            s.name = v.name;
            for (std::int64_t n : n_grid) {
                const auto& r = risks[v.name][n];
                double mean = 0.0;
                for (double x : r) mean += x;
                s.xs.push_back(static_cast<double>(n));
                s.ys.push_back(mean / static_cast<double>(r.size()));
            }
            series.push_back(std::move(s));
        }
        io::PlotOptions popt;
        popt.xlabel = "n";
        popt.ylabel = "test risk";
        popt.title = "KRR learning curves, d=" + std::to_string(o.d);
        popt.xlog = popt.ylog = true;
        cmd.add(o.svg, io::svg_plot(series, popt));
    }
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// rates: effective-gain and learning-rate calculators.
// ---------------------------------------------------------------------------
struct RatesOpts {
    std::string set = "cyclic:d=8";
    int kmax = 120;
    double alpha = 2.0, r = 0.5, beta = 1.0, c_beta = 1.0, C2 = 1.0;
    double nu0 = -1.0;  // <0: use 1/|G|
    std::string n_grid = "100,1000,10000,100000,1000000";
    std::string mode = "both";  // invariant|stable|both
    std::string out = "rates.csv", format = "csv";
};

inline void run_rates(const RatesOpts& o) {
    auto set = perms::parse_set_descriptor(o.set);
    auto table = spectra::gamma_exact(set, set.d, o.kmax);
    auto n_grid = detail::parse_int_list(o.n_grid);
    spectra::RateParams params;
    params.alpha = o.alpha;
    params.r = o.r;
    params.beta = o.beta;
    params.c_beta = o.c_beta;
    params.C2 = o.C2;
    params.d = set.d;
    params.nu0 = o.nu0 > 0 ? o.nu0 : 1.0 / static_cast<double>(set.size());
    params.validate();

    std::vector<spectra::RateMode> modes;
    if (o.mode == "invariant") modes = {spectra::RateMode::invariant};
    else if (o.mode == "stable") modes = {spectra::RateMode::stable};
    else if (o.mode == "both") modes = {spectra::RateMode::invariant, spectra::RateMode::stable};
    else throw config_error("unknown mode '" + o.mode + "'");

    detail::CommandOutput cmd;
    cmd.command = "rates";
    cmd.options = {{"set", o.set},        {"kmax", std::to_string(o.kmax)},
                   {"alpha", detail::fmt(o.alpha)}, {"r", detail::fmt(o.r)},
                   {"beta", detail::fmt(o.beta)},   {"c-beta", detail::fmt(o.c_beta)},
                   {"C2", detail::fmt(o.C2)},       {"nu0", detail::fmt(params.nu0)},
                   {"n-grid", o.n_grid},  {"mode", o.mode},
                   {"out", o.out},        {"format", o.format}};

    auto Dfun = [&](int l) { return static_cast<double>(spectra::cum_invariant_dim(table, l)); };
    auto nufun = [&](int l) { return spectra::nu(table, l); };
    double exponent = 2.0 * o.alpha * o.r / (2.0 * o.alpha * o.r + 1.0);

    std::ostringstream csv;
    csv << "n,mode,l_n,nu_ln,rate_exponent,nud_estimate\n";
    json jrows = json::array();
    for (auto mode : modes) {
        std::string mname = mode == spectra::RateMode::invariant ? "invariant" : "stable";
        for (std::int64_t n : n_grid) {
            auto [ln, nu_ln] =
                spectra::ln_solver(params, Dfun, nufun, static_cast<double>(n), mode, o.kmax);
            double est = spectra::nud_estimate(params, static_cast<double>(n), mode);
            csv << n << "," << mname << "," << ln << "," << detail::fmt(nu_ln) << ","
                << detail::fmt(exponent) << "," << detail::fmt(est) << "\n";
            jrows.push_back({{"n", n},
                             {"mode", mname},
                             {"l_n", ln},
                             {"nu_ln", nu_ln},
                             {"rate_exponent", exponent},
                             {"nud_estimate", est}});
        }
    }
    if (o.format == "csv") cmd.add(o.out, csv.str());
    else if (o.format == "json") {
        json j;
        j["config"] = cmd.options;
        j["rows"] = jrows;
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// mercer-check: truncation error of the Mercer reconstruction.
// ---------------------------------------------------------------------------
struct MercerOpts {
    std::string kernel = "relu-composite";
    int d = 5;
    int kmax = 60;
    std::string L_grid = "5,10,20,40,60";
    std::string out = "mercer.csv", format = "csv";
};

inline void run_mercer_check(const MercerOpts& o) {
    auto kernel = harmonics::KernelFunction::parse(o.kernel);
    auto profile = harmonics::build_profile(kernel, o.d, o.kmax);
    auto L_grid = detail::parse_int_list(o.L_grid);

    detail::CommandOutput cmd;
    cmd.command = "mercer-check";
    cmd.options = {{"kernel", o.kernel}, {"d", std::to_string(o.d)},
                   {"kmax", std::to_string(o.kmax)}, {"L-grid", o.L_grid},
                   {"out", o.out},       {"format", o.format}};

    std::ostringstream csv;
    csv << "check,param,value\n";
    json jrows = json::array();
    for (std::int64_t L : L_grid) {
        if (L > o.kmax) throw config_error("mercer-check: L > kmax");
        double max_err = 0.0;
        for (int i = 0; i <= 500; ++i) {
            double t = -0.99 + 1.98 * i / 500.0;
            max_err = std::max(max_err,
                               std::abs(kernel(t) - harmonics::mercer_reconstruct(
                                                        profile, static_cast<int>(L), t)));
        }
        csv << "mercer_max_abs_err," << L << "," << detail::fmt(max_err) << "\n";
        jrows.push_back({{"check", "mercer_max_abs_err"}, {"param", L}, {"value", max_err}});
    }
    double trace = 0.0;
    for (int k = 0; k <= o.kmax; ++k)
        trace += profile.mu[k] * static_cast<double>(profile.dims[k]);
    double trace_err = std::abs(trace - kernel(1.0));
    csv << "trace_identity_abs_err," << o.kmax << "," << detail::fmt(trace_err) << "\n";
    jrows.push_back({{"check", "trace_identity_abs_err"}, {"param", o.kmax}, {"value", trace_err}});

    if (o.format == "csv") cmd.add(o.out, csv.str());
    else if (o.format == "json") {
        json j;
        j["config"] = cmd.options;
        j["rows"] = jrows;
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// dof: degrees-of-freedom pairs and the invariant upper bound.
// ---------------------------------------------------------------------------
struct DofOpts {
    std::string kernel = "arccos1";
    std::string set = "cyclic:d=6";
    int kmax = 120;
    std::string lambda_grid = "auto";
    std::string l_grid = "0,2,5,10";
    std::string out = "dof.csv", format = "csv";
};

inline void run_dof(const DofOpts& o) {
    auto kernel = harmonics::KernelFunction::parse(o.kernel);
    auto set = perms::parse_set_descriptor(o.set);
    auto profile = harmonics::build_profile(kernel, set.d, o.kmax);
    auto table = spectra::gamma_exact(set, set.d, o.kmax);
    auto lambda_grid = detail::parse_lambda_grid(o.lambda_grid);
    auto l_grid = detail::parse_int_list(o.l_grid);

    detail::CommandOutput cmd;
    cmd.command = "dof";
    cmd.options = {{"kernel", o.kernel}, {"set", o.set},
                   {"kmax", std::to_string(o.kmax)}, {"lambda-grid", o.lambda_grid},
                   {"l-grid", o.l_grid}, {"out", o.out}, {"format", o.format}};

    std::ostringstream csv;
    csv << "lambda,l,nk,nkg,bound,holds\n";
    json jrows = json::array();
    for (double lambda : lambda_grid) {
        auto pair = spectra::dof_pair(profile, table, lambda);
        for (std::int64_t l : l_grid) {
            double D = static_cast<double>(spectra::cum_invariant_dim(table, static_cast<int>(l)));
            double bound = D + spectra::nu(table, static_cast<int>(l)) * pair.nk;
            bool holds = pair.nkg <= bound * (1.0 + 1e-12) + 1e-12;
            csv << detail::fmt(lambda) << "," << l << "," << detail::fmt(pair.nk) << ","
                << detail::fmt(pair.nkg) << "," << detail::fmt(bound) << "," << (holds ? 1 : 0)
                << "\n";
            jrows.push_back({{"lambda", lambda},
                             {"l", l},
                             {"nk", pair.nk},
                             {"nkg", pair.nkg},
                             {"bound", bound},
                             {"holds", holds}});
        }
    }
    if (o.format == "csv") cmd.add(o.out, csv.str());
    else if (o.format == "json") {
        json j;
        j["config"] = cmd.options;
        j["rows"] = jrows;
        cmd.add(o.out, j.dump(2) + "\n");
    } else throw config_error("unknown format '" + o.format + "'");
    cmd.finish(o.out);
}

// ---------------------------------------------------------------------------
// Entry point.  Returns the process exit code: 0 success, 2 config, 3 budget.
// ---------------------------------------------------------------------------
inline int run_cli(std::vector<std::string> args) {
    // Manifest replay rebuilds the original command line and recurses.
    if (!args.empty() && args[0] == "--from-manifest") {
        if (args.size() != 2) {
            std::cerr << "--from-manifest requires a path\n";
            return 2;
        }
        try {
            json manifest = json::parse(io::read_file(args[1]));
            std::vector<std::string> replay;
            replay.push_back(manifest.at("command").get<std::string>());
            for (const auto& [key, value] : manifest.at("options").items()) {
                std::string v = value.get<std::string>();
                if (v.empty()) continue;
                if (v == "true") replay.push_back("--" + key);
                else if (v == "false") continue;
                else {
                    replay.push_back("--" + key);
                    replay.push_back(v);
                }
            }
            return run_cli(std::move(replay));
        } catch (const json::exception& e) {
            std::cerr << "bad manifest: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "bad manifest: " << e.what() << "\n";
            return 2;
        }
    }

    // Flat key=value config files mirror the long flags.  CLI11 only processes
    // config files attached to the root app, so expand the file into flags
    // here; explicit command-line flags take precedence over config entries.
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        std::size_t erase_count = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            erase_count = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            erase_count = 1;
        }
        if (erase_count == 0) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        std::vector<std::string> extra;
        try {
            std::istringstream in(io::read_file(path));
            std::string line;
            while (std::getline(in, line)) {
                line = trim(line);
                if (line.empty() || line[0] == '#' || line[0] == ';') continue;
                auto eq = line.find('=');
                if (eq == std::string::npos)
                    throw config_error("config line is not key=value: '" + line + "'");
                std::string flag = "--" + trim(line.substr(0, eq));
                std::string value = trim(line.substr(eq + 1));
                if (flag == "--") throw config_error("config line has empty key");
                bool given = false;
                for (const auto& a : args)
                    if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
                if (given) continue;
                if (value == "true") extra.push_back(flag);
                else if (value == "false") continue;
                else {
                    extra.push_back(flag);
                    extra.push_back(value);
                }
            }
        } catch (const std::exception& e) {
            std::cerr << "bad config file: " << e.what() << "\n";
            return 2;
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i + erase_count));
        args.insert(args.end(), extra.begin(), extra.end());
        break;
    }

    CLI::App app{"invkern: invariant-kernel spectra, permutation counting, and KRR learning curves"};
    app.require_subcommand(1);

    GammaOpts go;
    auto* gamma = app.add_subcommand("gamma", "gamma_d(k) tables, exact and Monte Carlo");
    gamma->add_option("--set", go.set, "set descriptor, e.g. cyclic:d=8");
    gamma->add_option("--kmax", go.kmax);
    gamma->add_flag("--exact", go.exact);
    gamma->add_flag("--mc", go.mc);
    gamma->add_option("--n-samples,--n", go.n_samples);
    gamma->add_option("--seed", go.seed);
    gamma->add_option("--out", go.out);
    gamma->add_option("--format", go.format);
    gamma->add_option("--svg", go.svg);
    gamma->set_config("--config");

    CountsOpts co;
    auto* counts = app.add_subcommand("counts", "permutation statistics and deformation-set counts");
    counts->add_option("--d", co.d);
    counts->add_option("--L", co.L);
    counts->add_option("--set", co.set);
    counts->add_option("--out", co.out);
    counts->add_option("--format", co.format);
    counts->set_config("--config");

    KrrCurveOpts ko;
    auto* krrc = app.add_subcommand("krr-curve", "KRR learning curves over kernel variants");
    krrc->add_option("--d", ko.d);
    krrc->add_option("--variants", ko.variants, "semicolon-separated set descriptors, or none");
    krrc->add_option("--kernel", ko.kernel);
    krrc->add_option("--target-set", ko.target_set);
    krrc->add_option("--target-base", ko.target_base);
    krrc->add_option("--threshold", ko.threshold);
    krrc->add_option("--target-k", ko.target_k);
    krrc->add_option("--repetitions", ko.repetitions);
    krrc->add_option("--n-grid", ko.n_grid);
    krrc->add_option("--seeds", ko.seeds);
    krrc->add_option("--n-test", ko.n_test);
    krrc->add_option("--lambda-grid", ko.lambda_grid);
    krrc->add_option("--noise", ko.noise);
    krrc->add_option("--out", ko.out);
    krrc->add_option("--format", ko.format);
    krrc->add_option("--svg", ko.svg);
    krrc->set_config("--config");

    RatesOpts ro;
    auto* rates = app.add_subcommand("rates", "effective-gain and rate calculators");
    rates->add_option("--set", ro.set);
    rates->add_option("--kmax", ro.kmax);
    rates->add_option("--alpha", ro.alpha);
    rates->add_option("--r", ro.r);
    rates->add_option("--beta", ro.beta);
    rates->add_option("--c-beta", ro.c_beta);
    rates->add_option("--C2", ro.C2);
    rates->add_option("--nu0", ro.nu0);
    rates->add_option("--n-grid", ro.n_grid);
    rates->add_option("--mode", ro.mode);
    rates->add_option("--out", ro.out);
    rates->add_option("--format", ro.format);
    rates->set_config("--config");

    MercerOpts mo;
    auto* mercer = app.add_subcommand("mercer-check", "Mercer truncation validation");
    mercer->add_option("--kernel", mo.kernel);
    mercer->add_option("--d", mo.d);
    mercer->add_option("--kmax", mo.kmax);
    mercer->add_option("--L-grid", mo.L_grid);
    mercer->add_option("--out", mo.out);
    mercer->add_option("--format", mo.format);
    mercer->set_config("--config");

    DofOpts dopts;
    auto* dof = app.add_subcommand("dof", "degrees-of-freedom pairs and bounds");
    dof->add_option("--kernel", dopts.kernel);
    dof->add_option("--set", dopts.set);
    dof->add_option("--kmax", dopts.kmax);
    dof->add_option("--lambda-grid", dopts.lambda_grid);
    dof->add_option("--l-grid", dopts.l_grid);
    dof->add_option("--out", dopts.out);
    dof->add_option("--format", dopts.format);
    dof->set_config("--config");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gamma->parsed()) run_gamma(go);
        else if (counts->parsed()) run_counts(co);
        else if (krrc->parsed()) run_krr_curve(ko);
        else if (rates->parsed()) run_rates(ro);
        else if (mercer->parsed()) run_mercer_check(mo);
        else if (dof->parsed()) run_dof(dopts);
    } catch (const budget_error& e) {
        std::cerr << "budget error: " << e.what() << "\n";
        return 3;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace invkern::cli
