#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"

#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/io.hpp"
#include "invkern/perms.hpp"
#include "invkern/rng.hpp"

namespace invkern::datagen {

struct TargetSpec {
    enum class Base { halfspace, linear, legendre_single };
    Base base = Base::halfspace;
    double threshold = 0.7;
    int legendre_k = 2;
    Eigen::VectorXd w;  // unit direction; defaults to e_1
    std::shared_ptr<const perms::TransformationSet> smoothing;  // optional
    int repetitions = 1;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["base"] = base == Base::halfspace    ? "halfspace"
                    : base == Base::linear     ? "linear"
                                               : "legendre-single";
        j["threshold"] = threshold;
        j["legendre_k"] = legendre_k;
        j["w"] = std::vector<double>(w.data(), w.data() + w.size());
        j["smoothing"] = smoothing ? smoothing->descriptor : "none";
        j["repetitions"] = repetitions;
        return j;
    }
};

inline TargetSpec default_target(int d) {
    TargetSpec spec;
    spec.w = Eigen::VectorXd::Zero(d);
    spec.w(0) = 1.0;
    return spec;
}

// n unit vectors from normalized Gaussians; coordinate (i,u) is a pure function of
// (seed, i*d+u), so the sample is independent of evaluation order.
inline Eigen::MatrixXd sample_sphere(std::int64_t n, int d, std::uint64_t seed) {
    if (d < 2) throw config_error("sample_sphere: d must be >= 2");
    if (n < 0) throw config_error("sample_sphere: n must be >= 0");
    Eigen::MatrixXd X(n, d);
    for (std::int64_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (int u = 0; u < d; ++u) {
            double g = rng::gaussian(seed, rng::stream_points, static_cast<std::uint64_t>(i) * d + u);
            X(i, u) = g;
            norm2 += g * g;
        }
        X.row(i) /= std::sqrt(norm2);
    }
    return X;
}

namespace detail {

inline double base_value(const TargetSpec& spec, const Eigen::VectorXd& x) {
    double t = spec.w.dot(x);
    switch (spec.base) {
        case TargetSpec::Base::halfspace: return t >= spec.threshold ? 1.0 : 0.0;
        case TargetSpec::Base::linear: return t;
        case TargetSpec::Base::legendre_single:
            return harmonics::legendre_eval(static_cast<int>(x.size()), spec.legendre_k,
                                            std::clamp(t, -1.0, 1.0));
    }
    return 0.0;
}

inline double smoothed_value(const TargetSpec& spec, const Eigen::VectorXd& x, int level) {
    if (level == 0) return base_value(spec, x);
    const auto& set = *spec.smoothing;
    double acc = 0.0;
    Eigen::VectorXd sx(x.size());
    for (std::size_t s = 0; s < set.elements.size(); ++s) {
        const auto& sigma = set.elements[s];
        for (int v = 0; v < set.d; ++v) sx(sigma[v]) = x(v);
        acc += set.weights[s] * smoothed_value(spec, sx, level - 1);
    }
    return acc;
}

}  // namespace detail

// f*(x) = (S_G)^repetitions applied to the base; exact finite averaging only.
inline double eval_target(const TargetSpec& spec, const Eigen::VectorXd& x) {
    if (spec.w.size() != x.size()) throw config_error("eval_target: dimension mismatch");
    if (!spec.smoothing) return detail::base_value(spec, x);
    if (spec.repetitions < 1) throw config_error("eval_target: repetitions must be >= 1");
    double cost = std::pow(static_cast<double>(spec.smoothing->size()), spec.repetitions);
    if (cost > 1e6)
        throw budget_error("eval_target: |set|^repetitions too large to average exactly");
    return detail::smoothed_value(spec, x, spec.repetitions);
}

struct Dataset {
    Eigen::MatrixXd X;  // n x d, unit rows
    Eigen::VectorXd y;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    nlohmann::json metadata;
};

inline Dataset make_dataset(const TargetSpec& spec, std::int64_t n, int d, double noise_sigma,
                            std::uint64_t seed) {
    Dataset ds;
    ds.X = sample_sphere(n, d, seed);
    ds.y.resize(n);
    for (std::int64_t i = 0; i < n; ++i) {
        double y = eval_target(spec, ds.X.row(i).transpose());
        if (noise_sigma > 0.0)
            y += noise_sigma * rng::gaussian(seed, rng::stream_noise, static_cast<std::uint64_t>(i));
        ds.y(i) = y;
    }
    ds.seed = seed;
    ds.noise_sigma = noise_sigma;
    ds.metadata = {{"n", n},       {"d", d},           {"seed", seed},
                   {"noise_sigma", noise_sigma},       {"target", spec.to_json()}};
    return ds;
}

// CSV: d coordinate columns then the label; metadata goes to a JSON sidecar.
inline std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream out;
    out.precision(17);
    for (int u = 0; u < ds.X.cols(); ++u) out << "x" << u << ",";
    out << "y\n";
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        for (int u = 0; u < ds.X.cols(); ++u) out << ds.X(i, u) << ",";
        out << ds.y(i) << "\n";
    }
    return out.str();
}

// Writes <path> (CSV) plus <path>.meta.json (generation metadata), atomically.
inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    io::atomic_write(path, dataset_to_csv(ds));
    io::atomic_write(path.string() + ".meta.json", ds.metadata.dump(2) + "\n");
}

}  // namespace invkern::datagen
