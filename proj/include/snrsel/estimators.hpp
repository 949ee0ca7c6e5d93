#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snrsel/data.hpp"
#include "snrsel/types.hpp"

namespace snrsel {

namespace detail {

inline void check_fit_preconditions(const CenteredData& data, const FitOptions& opts,
                                    bool rank_may_equal_n) {
    if (data.n() < 2) throw PreconditionError("fit: need at least 2 rows");
    if (opts.rank < 1) throw PreconditionError("fit: rank must be at least 1");
    if (opts.rank >= data.dim()) throw PreconditionError("fit: rank must be smaller than d");
    if (rank_may_equal_n ? opts.rank > data.n() : opts.rank >= data.n())
        throw PreconditionError("fit: rank too large for the sample size");
    if (!(opts.tol > 0.0)) throw PreconditionError("fit: tol must be positive");
    if (opts.max_iters < 0) throw PreconditionError("fit: max_iters must be non-negative");
    if (opts.variance_floor < 0.0) throw PreconditionError("fit: variance_floor must be non-negative");
}

inline double resolve_floor(double requested, const Matrix& cov) {
    const double floor = requested > 0.0 ? requested : 1e-8 * cov.diagonal().mean();
    return std::max(floor, std::numeric_limits<double>::min());
}

// Eigenpairs of a symmetric matrix, eigenvalues descending.
inline std::pair<Vector, Matrix> sym_eig_desc(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success)
        throw NumericError("symmetric eigendecomposition failed");
    return {solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

// Rewrites (Gamma, W) so that Gamma has orthonormal columns while the product
// Gamma W^T is unchanged: Gamma = U D V^T gives (U, W V D).
inline std::pair<Matrix, Matrix> orthonormalize(const Matrix& gamma, const Matrix& w) {
    Eigen::JacobiSVD<Matrix> svd(gamma, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix w1 = w * svd.matrixV() * svd.singularValues().asDiagonal();
    return {svd.matrixU(), std::move(w1)};
}

// Gaussian log-likelihood of N(0, W W^T + diag(psi)) against the second
// moment matrix S1 = X^T X / n, evaluated through the r x r capacitance.
inline double lfa_loglik(const Matrix& s1, const Matrix& w, const Vector& psi, Index n) {
    const Index d = s1.rows();
    const Index r = w.cols();
    const Matrix piw = (w.array().colwise() / psi.array()).matrix();
    Matrix cap = Matrix::Identity(r, r) + w.transpose() * piw;
    Eigen::LLT<Matrix> llt(cap);
    if (llt.info() != Eigen::Success)
        throw NumericError("lfa: capacitance matrix not positive definite");
    double logdet = psi.array().log().sum();
    for (Index i = 0; i < r; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const Matrix proj = piw.transpose() * s1 * piw;
    const double trace = (s1.diagonal().array() / psi.array()).sum() - llt.solve(proj).trace();
    return -0.5 * static_cast<double>(n) *
           (static_cast<double>(d) * std::log(2.0 * M_PI) + logdet + trace);
}

// One EM update of (W, psi) expressed through S1 = X^T X / n only.
inline std::pair<Matrix, Vector> lfa_em_step(const Matrix& s1, const Matrix& w,
                                             const Vector& psi, double floor) {
    const Index r = w.cols();
    const Matrix piw = (w.array().colwise() / psi.array()).matrix();
    Matrix cap = Matrix::Identity(r, r) + w.transpose() * piw;
    Eigen::LLT<Matrix> llt(cap);
    if (llt.info() != Eigen::Success)
        throw NumericError("lfa: capacitance matrix not positive definite");
    const Matrix beta = llt.solve(piw.transpose());            // r x d
    const Matrix bs = beta * s1;                               // r x d
    Matrix ezz = Matrix::Identity(r, r) - beta * w + bs * beta.transpose();
    ezz = ((ezz + ezz.transpose()) * 0.5).eval();
    Eigen::LDLT<Matrix> ldlt(ezz);
    if (ldlt.info() != Eigen::Success)
        throw NumericError("lfa: second-moment matrix not factorizable");
    Matrix w_new = ldlt.solve(bs).transpose();                 // d x r
    Vector psi_new = s1.diagonal() - (w_new.cwiseProduct(bs.transpose())).rowwise().sum();
    psi_new = psi_new.cwiseMax(floor);
    return {std::move(w_new), std::move(psi_new)};
}

} // namespace detail

// Closed-form probabilistic PCA: sigma^2 is the mean of the d-r trailing
// eigenvalues of the sample covariance, loading scales are sqrt(lambda_j -
// sigma^2) clamped at zero.
inline LowRankModel fit_ppca(const CenteredData& data, const FitOptions& opts,
                             FitTrace* trace = nullptr) {
    detail::check_fit_preconditions(data, opts, false);
    const Matrix cov = sample_covariance(data);
    const Index d = cov.rows();
    const Index r = opts.rank;
    auto [lambda, basis] = detail::sym_eig_desc(cov);

    const double sigma2 = lambda.tail(d - r).sum() / static_cast<double>(d - r);
    Vector scale(r);
    for (Index j = 0; j < r; ++j) scale[j] = std::sqrt(std::max(lambda[j] - sigma2, 0.0));

    LowRankModel model;
    model.mean = data.mean;
    model.loadings = basis.leftCols(r) * scale.asDiagonal();
    const double floor = detail::resolve_floor(opts.variance_floor, cov);
    model.noise_variances = Vector::Constant(d, std::max(sigma2, floor));
    model.rank = r;
    model.tag = EstimatorTag::ppca;
    if (trace) {
        trace->iterations = 1;
        trace->objective.assign(1, sigma2);
    }
    return model;
}

// EM for the latent factor model, run on second-moment statistics. Stops when
// the log-likelihood moves by at most tol between iterations; a decrease
// beyond 1e-8 means the update is broken and raises an internal error.
inline LowRankModel fit_lfa(const CenteredData& data, const FitOptions& opts,
                            FitTrace* trace = nullptr) {
    detail::check_fit_preconditions(data, opts, false);
    const Index n = data.n();
    const Index r = opts.rank;
    const Matrix cov = sample_covariance(data);
    const Matrix s1 = cov * (static_cast<double>(n - 1) / static_cast<double>(n));
    const double floor = detail::resolve_floor(opts.variance_floor, cov);
    const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 500;

    auto [lambda, basis] = detail::sym_eig_desc(cov);
    Vector scale(r);
    for (Index j = 0; j < r; ++j) scale[j] = std::sqrt(std::max(lambda[j], 0.0));
    Matrix w = basis.leftCols(r) * scale.asDiagonal();
    Vector psi = (cov.diagonal() - w.rowwise().squaredNorm()).cwiseMax(floor);

    double ll_prev = 0.0;
    bool have_prev = false;
    Index iters = 0;
    for (Index it = 0; it < max_iters; ++it) {
        std::tie(w, psi) = detail::lfa_em_step(s1, w, psi, floor);
        const double ll = detail::lfa_loglik(s1, w, psi, n);
        ++iters;
        if (trace) {
            trace->objective.push_back(ll);
            trace->loadings_path.push_back(w);
            trace->noise_path.push_back(psi);
        }
        if (have_prev && ll < ll_prev - 1e-8)
            throw InternalError("lfa: log-likelihood decreased by more than 1e-8");
        if (have_prev && std::abs(ll - ll_prev) <= opts.tol) break;
        ll_prev = ll;
        have_prev = true;
    }

    LowRankModel model;
    model.mean = data.mean;
    model.loadings = std::move(w);
    model.noise_variances = std::move(psi);
    model.rank = r;
    model.tag = EstimatorTag::lfa;
    if (trace) trace->iterations = iters;
    return model;
}

// Alternating weighted low-rank fit. The monitored objective is the
// Psi^{-1/2}-weighted residual norm measured before each Psi refresh; the
// loop stops once it stalls: |obj_prev - obj| <= tol * obj_prev. Successive
// objectives are weighted by different Psi, so a signed decrease test would
// trip on transient wobbles while the fit is still improving.
inline LowRankModel fit_elf(const CenteredData& data, const FitOptions& opts,
                            FitTrace* trace = nullptr) {
    detail::check_fit_preconditions(data, opts, true);
    const Matrix& x = data.values;
    const Index n = data.n();
    const Index d = data.dim();
    const Index r = opts.rank;
    const Matrix cov = sample_covariance(data);
    const double floor = detail::resolve_floor(opts.variance_floor, cov);
    const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 500;
    const double model_scale = 1.0 / std::sqrt(static_cast<double>(n - 1));

    auto [lambda, basis] = detail::sym_eig_desc(cov);
    Matrix w = basis.leftCols(r);
    Matrix gamma = x * w;
    Vector psi = Vector::Ones(d);

    const auto weighted_residual = [&](const Matrix& g, const Matrix& load, const Vector& weights) {
        const Matrix resid = x - g * load.transpose();
        const Vector column_sq = resid.colwise().squaredNorm().transpose();
        return std::sqrt((column_sq.array() / weights.array()).sum());
    };

    double obj_prev = 0.0;
    bool have_prev = false;
    Index iters = 0;
    for (Index it = 0; it < max_iters; ++it) {
        if (trace) trace->fixed_psi_before.push_back(weighted_residual(gamma, w, psi));

        Eigen::LDLT<Matrix> gram(gamma.transpose() * gamma);
        if (gram.info() != Eigen::Success)
            throw NumericError("elf: score Gram matrix not factorizable");
        w = gram.solve(gamma.transpose() * x).transpose();

        const Matrix piw = (w.array().colwise() / psi.array()).matrix();
        Eigen::LDLT<Matrix> wgram(w.transpose() * piw);
        if (wgram.info() != Eigen::Success)
            throw NumericError("elf: weighted loading Gram matrix not factorizable");
        gamma = wgram.solve((x * piw).transpose()).transpose();

        std::tie(gamma, w) = detail::orthonormalize(gamma, w);

        const Matrix resid = x - gamma * w.transpose();
        const Vector column_sq = resid.colwise().squaredNorm().transpose();
        const double obj = std::sqrt((column_sq.array() / psi.array()).sum());
        psi = (column_sq / static_cast<double>(n - 1)).cwiseMax(floor);
        ++iters;
        if (trace) {
            trace->fixed_psi_after.push_back(obj);
            trace->objective.push_back(obj);
            trace->loadings_path.push_back(w * model_scale);
            trace->noise_path.push_back(psi);
        }
        if (have_prev && std::abs(obj_prev - obj) <=
                             opts.tol * std::max(obj_prev, std::numeric_limits<double>::min()))
            break;
        obj_prev = obj;
        have_prev = true;
    }

    if ((gamma.transpose() * gamma - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() >= 1e-8)
        throw InternalError("elf: factor scores lost orthonormality");

    LowRankModel model;
    model.mean = data.mean;
    model.loadings = w * model_scale;
    model.noise_variances = std::move(psi);
    model.rank = r;
    model.tag = EstimatorTag::elf;
    if (trace) {
        trace->iterations = iters;
        trace->factor_scores = std::move(gamma);
    }
    return model;
}

// Diagonal-imputation subspace estimate: the covariance diagonal is replaced
// by the diagonal of the running best rank-r approximation until it settles,
// which removes the heteroskedastic noise bias from the leading eigenvectors.
inline LowRankModel fit_heteropca(const CenteredData& data, const FitOptions& opts,
                                  FitTrace* trace = nullptr) {
    detail::check_fit_preconditions(data, opts, false);
    const Matrix& x = data.values;
    const Index n = data.n();
    const Index d = data.dim();
    const Index r = opts.rank;
    const Matrix cov = sample_covariance(data);
    const double floor = detail::resolve_floor(opts.variance_floor, cov);
    const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 100;
    const double model_scale = 1.0 / std::sqrt(static_cast<double>(n - 1));

    const auto top_by_magnitude = [r](const Vector& lambda) {
        std::vector<Index> order(static_cast<std::size_t>(lambda.size()));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return std::abs(lambda[a]) > std::abs(lambda[b]);
        });
        order.resize(static_cast<std::size_t>(r));
        return order;
    };

    Matrix deflated = cov;
    deflated.diagonal().setZero();
    Index iters = 0;
    for (Index it = 0; it < max_iters; ++it) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(deflated);
        if (solver.info() != Eigen::Success)
            throw NumericError("heteropca: eigendecomposition failed");
        const Vector& lambda = solver.eigenvalues();
        const Matrix& vectors = solver.eigenvectors();
        const auto order = top_by_magnitude(lambda);
        Vector new_diag = Vector::Zero(d);
        for (Index k : order)
            new_diag += lambda[k] * vectors.col(k).cwiseAbs2();
        const double delta = (new_diag - deflated.diagonal()).cwiseAbs().maxCoeff();
        deflated.diagonal() = new_diag;
        ++iters;
        if (trace) trace->objective.push_back(delta);
        if (delta < opts.tol) break;
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(deflated);
    if (solver.info() != Eigen::Success)
        throw NumericError("heteropca: eigendecomposition failed");
    const auto order = top_by_magnitude(solver.eigenvalues());
    Matrix u_hat(d, r);
    for (Index j = 0; j < r; ++j) u_hat.col(j) = solver.eigenvectors().col(order[static_cast<std::size_t>(j)]);

    auto [gamma, w_score] = detail::orthonormalize(x * u_hat, u_hat);
    const Matrix recon = gamma * w_score.transpose();
    Vector psi = ((recon - x).colwise().squaredNorm().transpose() /
                  static_cast<double>(n - 1)).cwiseMax(floor);

    LowRankModel model;
    model.mean = data.mean;
    model.loadings = w_score * model_scale;
    model.noise_variances = std::move(psi);
    model.rank = r;
    model.tag = EstimatorTag::heteropca;
    if (trace) {
        trace->iterations = iters;
        trace->factor_scores = std::move(gamma);
    }
    return model;
}

inline LowRankModel fit(EstimatorTag tag, const CenteredData& data, const FitOptions& opts,
                        FitTrace* trace = nullptr) {
    switch (tag) {
        case EstimatorTag::ppca: return fit_ppca(data, opts, trace);
        case EstimatorTag::lfa: return fit_lfa(data, opts, trace);
        case EstimatorTag::elf: return fit_elf(data, opts, trace);
        case EstimatorTag::heteropca: return fit_heteropca(data, opts, trace);
    }
    throw InternalError("fit: bad estimator tag");
}

} // namespace snrsel
