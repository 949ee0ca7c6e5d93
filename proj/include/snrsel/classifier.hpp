#pragma once

#include <algorithm>
#include <utility>

#include "snrsel/snr.hpp"
#include "snrsel/types.hpp"

namespace snrsel {

// Reference quadratic form (x-mu)^T cov^{-1} (x-mu). O(m^3); survives as the
// oracle the fast path is tested against.
inline double mahalanobis_direct(const Vector& x, const Vector& mean, const Matrix& cov) {
    if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size())
        throw PreconditionError("mahalanobis_direct: dimension mismatch");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericError("mahalanobis_direct: covariance not positive definite");
    const Vector diff = x - mean;
    return diff.dot(llt.solve(diff));
}

// Mahalanobis distance under cov = L diag(d_vec) L^T + lambda I without ever
// forming the m x m matrix:
//   r(x) = (||x-mu||^2 - sum_i d_i/(d_i+lambda) * t_i^2) / lambda,  t = L^T (x-mu).
// Cost O(m r).
inline double r_score(const Vector& x, const Vector& mean, const Matrix& basis,
                      const Vector& d_vec, double lambda) {
    if (x.size() != mean.size() || basis.rows() != x.size() || basis.cols() != d_vec.size())
        throw PreconditionError("r_score: dimension mismatch");
    if (!(lambda > 0.0))
        throw PreconditionError("r_score: lambda must be positive");
    if (d_vec.size() > 0 && d_vec.minCoeff() < 0.0)
        throw PreconditionError("r_score: d_vec entries must be non-negative");
    if (basis.cols() > 0 &&
        (basis.transpose() * basis - Matrix::Identity(basis.cols(), basis.cols()))
                .cwiseAbs().maxCoeff() > 1e-8)
        throw PreconditionError("r_score: basis columns must be orthonormal");
    const Vector diff = x - mean;
    const Vector t = basis.transpose() * diff;
    double shrunk = 0.0;
    for (Index i = 0; i < t.size(); ++i)
        shrunk += d_vec[i] / (d_vec[i] + lambda) * t[i] * t[i];
    return (diff.squaredNorm() - shrunk) / lambda;
}

// Heteroskedastic extension: whiten by diag(psi)^{-1/2} and apply r_score with
// lambda = 1. basis/d_vec must describe the whitened covariance
// diag(psi)^{-1/2} (L D L^T) diag(psi)^{-1/2}.
inline double general_r_score(const Vector& x, const Vector& mean, const Matrix& basis,
                              const Vector& d_vec, const Vector& psi) {
    if (psi.size() != x.size())
        throw PreconditionError("general_r_score: psi length mismatch");
    if (psi.minCoeff() <= 0.0)
        throw PreconditionError("general_r_score: psi entries must be positive");
    const Vector inv_sqrt = psi.cwiseSqrt().cwiseInverse();
    return r_score(x.cwiseProduct(inv_sqrt), mean.cwiseProduct(inv_sqrt), basis, d_vec, 1.0);
}

// One class's model restricted to its selected features, with the whitened
// spectral factors cached so scoring is O(m r).
struct ClassModel {
    std::uint32_t class_id = 0;
    LowRankModel model;
    SnrRanking ranking;
    Vector mean_sel;       // length m
    Vector inv_sqrt_psi;   // length m
    Matrix basis;          // m x min(m, r), orthonormal columns
    Vector d_vec;          // squared singular values of psi^{-1/2} W restricted
};

// Restriction marginalizes the Gaussian: cov_S = W_S W_S^T + diag(psi_S), so
// no refit is needed. The factors come from the thin SVD of psi_S^{-1/2} W_S.
inline ClassModel build_class_model(std::uint32_t class_id, LowRankModel model,
                                    SnrRanking ranking) {
    if (ranking.dim() != model.dim())
        throw PreconditionError("build_class_model: ranking dimension does not match model");
    if (ranking.m < 1 || static_cast<Index>(ranking.selected.size()) != ranking.m)
        throw PreconditionError("build_class_model: ranking has no selected features");
    const Index m = ranking.m;
    ClassModel out;
    out.class_id = class_id;
    out.mean_sel.resize(m);
    out.inv_sqrt_psi.resize(m);
    Matrix w_sel(m, model.rank);
    for (Index k = 0; k < m; ++k) {
        const Index j = ranking.selected[static_cast<std::size_t>(k)];
        out.mean_sel[k] = model.mean[j];
        out.inv_sqrt_psi[k] = 1.0 / std::sqrt(model.noise_variances[j]);
        w_sel.row(k) = model.loadings.row(j);
    }
    const Matrix whitened = out.inv_sqrt_psi.asDiagonal() * w_sel;
    Eigen::JacobiSVD<Matrix> svd(whitened, Eigen::ComputeThinU);
    out.basis = svd.matrixU();
    out.d_vec = svd.singularValues().cwiseAbs2();
    out.model = std::move(model);
    out.ranking = std::move(ranking);
    return out;
}

// Mahalanobis distance of a full-dimensional observation to this class,
// evaluated on the class's selected coordinates.
inline double score(const ClassModel& cls, const Vector& x_full) {
    if (x_full.size() != cls.model.dim())
        throw PreconditionError("score: observation dimension mismatch");
    const Index m = cls.ranking.m;
    Vector gathered(m);
    for (Index k = 0; k < m; ++k)
        gathered[k] = x_full[cls.ranking.selected[static_cast<std::size_t>(k)]];
    const Vector whitened_x = gathered.cwiseProduct(cls.inv_sqrt_psi);
    const Vector whitened_mean = cls.mean_sel.cwiseProduct(cls.inv_sqrt_psi);
    return r_score(whitened_x, whitened_mean, cls.basis, cls.d_vec, 1.0);
}

// Minimum-distance multi-class classifier. Classes are independent, so adding
// or removing one never touches the others.
struct ClassifierBank {
    std::vector<ClassModel> classes;

    bool empty() const { return classes.empty(); }

    const ClassModel* find(std::uint32_t class_id) const {
        for (const auto& cls : classes)
            if (cls.class_id == class_id) return &cls;
        return nullptr;
    }

    void add_class(ClassModel cls) {
        if (find(cls.class_id))
            throw PreconditionError("add_class: duplicate class id");
        classes.push_back(std::move(cls));
    }

    void remove_class(std::uint32_t class_id) {
        auto it = std::find_if(classes.begin(), classes.end(),
                               [&](const ClassModel& c) { return c.class_id == class_id; });
        if (it == classes.end())
            throw PreconditionError("remove_class: no such class id");
        classes.erase(it);
    }

    // Predicted class plus the per-class score vector in storage order.
    // Ties go to the lowest class id.
    std::pair<std::uint32_t, Vector> predict_scored(const Vector& x_full) const {
        if (classes.empty())
            throw PreconditionError("predict: empty classifier bank");
        Vector scores(static_cast<Index>(classes.size()));
        std::uint32_t best_id = 0;
        double best = 0.0;
        bool first = true;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const double s = score(classes[c], x_full);
            scores[static_cast<Index>(c)] = s;
            if (first || s < best || (s == best && classes[c].class_id < best_id)) {
                best = s;
                best_id = classes[c].class_id;
                first = false;
            }
        }
        return {best_id, std::move(scores)};
    }

    std::uint32_t predict(const Vector& x_full) const { return predict_scored(x_full).first; }

    std::vector<std::uint32_t> predict_batch(const Matrix& rows) const {
        std::vector<std::uint32_t> out(static_cast<std::size_t>(rows.rows()));
        for (Index i = 0; i < rows.rows(); ++i)
            out[static_cast<std::size_t>(i)] = predict(rows.row(i).transpose());
        return out;
    }
};

} // namespace snrsel
