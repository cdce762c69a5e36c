#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "invkern/errors.hpp"
#include "invkern/harmonics.hpp"
#include "invkern/perms.hpp"

namespace invkern::krr {

struct KernelSpec {
    harmonics::KernelFunction kernel;
    std::shared_ptr<const perms::TransformationSet> set;  // null = plain kernel

    nlohmann::json to_json() const {
        return {{"kernel", kernel.str()}, {"set", set ? set->descriptor : "none"}};
    }
};

struct GramOptions {
    double warn_evals = 1e9;   // stderr warning threshold
    double cap_evals = 5e10;   // hard budget
};

namespace detail {

inline void check_budget(double evals, const GramOptions& opts) {
    if (evals > opts.cap_evals)
        throw budget_error("gram_assemble: " + std::to_string(evals) +
                           " kernel evaluations exceed the hard cap " +
                           std::to_string(opts.cap_evals));
    if (evals > opts.warn_evals)
        std::fprintf(stderr, "gram_assemble: warning, %.3g kernel evaluations\n", evals);
}

// Columns of X permuted by the lifted action: (sigma X) col sigma(v) = X col v.
inline Eigen::MatrixXd permute_cols(const Eigen::MatrixXd& X, const perms::Permutation& sigma) {
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (int v = 0; v < static_cast<int>(sigma.size()); ++v) out.col(sigma[v]) = X.col(v);
    return out;
}

}  // namespace detail

// Cross-Gram: entry (i,j) = sum_sigma h(sigma) kappa(<sigma.x_i, x'_j>), inner
// products clamped to [-1,1].  The sigma loop accumulates in set order, so the
// reduction order is fixed regardless of how callers parallelize.
inline Eigen::MatrixXd gram_assemble(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xp,
                                     const KernelSpec& spec, const GramOptions& opts = {}) {
    if (X.cols() != Xp.cols()) throw config_error("gram_assemble: dimension mismatch");
    std::size_t nset = spec.set ? spec.set->size() : 1;
    detail::check_budget(static_cast<double>(X.rows()) * static_cast<double>(Xp.rows()) *
                             static_cast<double>(nset),
                         opts);
    auto kappa = [&](double u) { return spec.kernel(std::clamp(u, -1.0, 1.0)); };
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(X.rows(), Xp.rows());
    Eigen::MatrixXd D(X.rows(), Xp.rows());
    if (!spec.set) {
        D.noalias() = X * Xp.transpose();
        K = D.unaryExpr(kappa);
        return K;
    }
    for (std::size_t s = 0; s < spec.set->size(); ++s) {
        D.noalias() = detail::permute_cols(X, spec.set->elements[s]) * Xp.transpose();
        double w = spec.set->weights[s];
        const double* src = D.data();
        double* dst = K.data();
        for (Eigen::Index idx = 0; idx < D.size(); ++idx) dst[idx] += w * kappa(src[idx]);
    }
    return K;
}

// Self-Gram: upper triangle computed, lower mirrored, so the result is bitwise
// symmetric.  Mirroring is exact because every set is closed under inversion.
inline Eigen::MatrixXd gram_assemble(const Eigen::MatrixXd& X, const KernelSpec& spec,
                                     const GramOptions& opts = {}) {
    std::size_t nset = spec.set ? spec.set->size() : 1;
    double n = static_cast<double>(X.rows());
    detail::check_budget(n * (n + 1) / 2 * static_cast<double>(nset), opts);
    auto kappa = [&](double u) { return spec.kernel(std::clamp(u, -1.0, 1.0)); };
    Eigen::Index rows = X.rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(rows, rows);
    Eigen::MatrixXd D(rows, rows);
    for (std::size_t s = 0; s < (spec.set ? spec.set->size() : 1); ++s) {
        if (spec.set) D.noalias() = detail::permute_cols(X, spec.set->elements[s]) * X.transpose();
        else D.noalias() = X * X.transpose();
        double w = spec.set ? spec.set->weights[s] : 1.0;
        for (Eigen::Index j = 0; j < rows; ++j) {
            const double* src = D.col(j).data();
            double* dst = K.col(j).data();
            for (Eigen::Index i = 0; i <= j; ++i) dst[i] += w * kappa(src[i]);
        }
    }
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i);
    return K;
}

struct KrrModel {
    Eigen::MatrixXd X;  // training points
    Eigen::VectorXd alpha;
    double lambda = 0.0;
    KernelSpec spec;
};

// Solve (K + n lambda I) alpha = y by Cholesky with an escalating jitter ladder
// {0, 1e-10, 1e-8} * trace/n; the fitted model satisfies the residual bound
// ||(K + n lambda I) alpha - y|| <= 1e-8 ||y||.
inline Eigen::VectorXd solve_regularized(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                         double n_lambda) {
    double scale = K.trace() / static_cast<double>(K.rows());
    Eigen::MatrixXd A = K;
    A.diagonal().array() += n_lambda;
    for (double jitter : {0.0, 1e-10, 1e-8}) {
        Eigen::MatrixXd B = A;
        B.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() != Eigen::Success) continue;
        Eigen::VectorXd alpha = llt.solve(y);
        alpha += llt.solve(y - A * alpha);  // refinement against the unjittered system
        if ((A * alpha - y).norm() <= 1e-8 * std::max(y.norm(), 1e-300)) return alpha;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    throw numeric_error("krr_fit: factorization failed after jitter ladder; eigenvalue range [" +
                        std::to_string(es.eigenvalues().minCoeff()) + ", " +
                        std::to_string(es.eigenvalues().maxCoeff()) + "]");
}

inline KrrModel fit_from_gram(const Eigen::MatrixXd& K, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y, const KernelSpec& spec, double lambda) {
    if (lambda <= 0.0) throw config_error("krr_fit: lambda must be > 0");
    KrrModel model;
    model.X = X;
    model.spec = spec;
    model.lambda = lambda;
    model.alpha = solve_regularized(K, y, static_cast<double>(K.rows()) * lambda);
    return model;
}

inline KrrModel krr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& spec,
                        double lambda, const GramOptions& opts = {}) {
    return fit_from_gram(gram_assemble(X, spec, opts), X, y, spec, lambda);
}

// f_hat(x) = sum_i alpha_i K_spec(x_i, x).
inline Eigen::VectorXd predict(const KrrModel& model, const Eigen::MatrixXd& X_test,
                               const GramOptions& opts = {}) {
    if (X_test.rows() == 0) return Eigen::VectorXd(0);
    Eigen::MatrixXd C = gram_assemble(model.X, X_test, model.spec, opts);
    return C.transpose() * model.alpha;
}

inline double mse_risk(const KrrModel& model, const Eigen::MatrixXd& X_test,
                       const Eigen::VectorXd& y_test, const GramOptions& opts = {}) {
    return (predict(model, X_test, opts) - y_test).squaredNorm() /
           static_cast<double>(y_test.size());
}

inline std::vector<double> default_lambda_grid(int points = 12, double lo = 1e-8, double hi = 1.0) {
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = lo * std::pow(hi / lo, points == 1 ? 0.0 : static_cast<double>(i) / (points - 1));
    return grid;
}

struct SweepResult {
    double best_lambda = 0.0;
    double best_risk = 0.0;
    std::vector<double> risks;  // per grid lambda
};

// Test-set risk for each lambda; argmin with ties broken toward larger lambda.
// Grams are assembled once and every lambda reuses them.
inline SweepResult lambda_sweep(const Eigen::MatrixXd& K_train, const Eigen::VectorXd& y_train,
                                const Eigen::MatrixXd& K_cross, const Eigen::VectorXd& y_test,
                                const std::vector<double>& lambda_grid) {
    if (lambda_grid.empty()) throw config_error("lambda_sweep: empty lambda grid");
    SweepResult out;
    out.best_risk = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid) {
        Eigen::VectorXd alpha =
            solve_regularized(K_train, y_train, static_cast<double>(K_train.rows()) * lambda);
        double risk = (K_cross.transpose() * alpha - y_test).squaredNorm() /
                      static_cast<double>(y_test.size());
        out.risks.push_back(risk);
        if (risk <= out.best_risk) {
            out.best_risk = risk;
            out.best_lambda = lambda;
        }
    }
    return out;
}

inline SweepResult lambda_sweep(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                                const Eigen::MatrixXd& X_test, const Eigen::VectorXd& y_test,
                                const KernelSpec& spec, const std::vector<double>& lambda_grid,
                                const GramOptions& opts = {}) {
    return lambda_sweep(gram_assemble(X_train, spec, opts), y_train,
                        gram_assemble(X_train, X_test, spec, opts), y_test, lambda_grid);
}

// Eigenvalue shell counts for Gram/n: eigenvalues are binned around the Mercer
// levels mu_k using geometric midpoints as boundaries; returns one count per level.
inline std::vector<int> shell_counts(const Eigen::VectorXd& eigenvalues,
                                     const std::vector<double>& mu_levels) {
    std::vector<int> counts(mu_levels.size(), 0);
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        double ev = eigenvalues(i);
        if (ev <= 0.0) continue;
        for (std::size_t k = 0; k < mu_levels.size(); ++k) {
            double hi = k == 0 ? std::numeric_limits<double>::infinity()
                               : std::sqrt(mu_levels[k - 1] * mu_levels[k]);
            double lo = k + 1 < mu_levels.size() ? std::sqrt(mu_levels[k] * mu_levels[k + 1])
                                                 : mu_levels[k] / 3.0;
            if (ev < hi && ev >= lo) {
                ++counts[k];
                break;
            }
        }
    }
    return counts;
}

inline nlohmann::json model_to_json(const KrrModel& model) {
    nlohmann::json j;
    j["lambda"] = model.lambda;
    j["spec"] = model.spec.to_json();
    j["alpha"] = std::vector<double>(model.alpha.data(), model.alpha.data() + model.alpha.size());
    std::vector<std::vector<double>> pts;
    for (Eigen::Index i = 0; i < model.X.rows(); ++i) {
        Eigen::VectorXd row = model.X.row(i).transpose();
        pts.emplace_back(row.data(), row.data() + row.size());
    }
    j["points"] = pts;
    return j;
}

// Binary Gram dump: magic, n, d, kernel descriptor, then row-major 64-bit floats.
inline std::string gram_to_binary(const Eigen::MatrixXd& K, int d, const KernelSpec& spec) {
    std::string desc = spec.kernel.str() + "|" + (spec.set ? spec.set->descriptor : "none");
    std::string out = "INVKGRAM";
    auto push64 = [&](std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    push64(static_cast<std::uint64_t>(K.rows()));
    push64(static_cast<std::uint64_t>(d));
    push64(desc.size());
    out += desc;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = K;
    out.append(reinterpret_cast<const char*>(R.data()),
               static_cast<std::size_t>(R.size()) * sizeof(double));
    return out;
}

}  // namespace invkern::krr
