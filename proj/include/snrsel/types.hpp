#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snrsel/error.hpp"

namespace snrsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// n x d observations, rows are samples, columns are features.
struct DataMatrix {
    Matrix values;
    std::optional<std::vector<std::uint32_t>> labels;

    Index n() const { return values.rows(); }
    Index dim() const { return values.cols(); }

    void validate() const {
        if (values.rows() < 1 || values.cols() < 1)
            throw PreconditionError("DataMatrix: need at least one row and one column");
        if (!values.allFinite())
            throw PreconditionError("DataMatrix: non-finite entry");
        if (labels && static_cast<Index>(labels->size()) != values.rows())
            throw PreconditionError("DataMatrix: label count does not match row count");
    }
};

// Column means removed; mean retains them so the original data can be rebuilt.
struct CenteredData {
    Matrix values;
    Vector mean;

    Index n() const { return values.rows(); }
    Index dim() const { return values.cols(); }
};

enum class EstimatorTag { ppca, lfa, elf, heteropca };

inline const char* to_string(EstimatorTag tag) {
    switch (tag) {
        case EstimatorTag::ppca: return "ppca";
        case EstimatorTag::lfa: return "lfa";
        case EstimatorTag::elf: return "elf";
        case EstimatorTag::heteropca: return "heteropca";
    }
    throw InternalError("to_string: bad estimator tag");
}

inline EstimatorTag estimator_from_string(const std::string& name) {
    if (name == "ppca") return EstimatorTag::ppca;
    if (name == "lfa") return EstimatorTag::lfa;
    if (name == "elf") return EstimatorTag::elf;
    if (name == "heteropca") return EstimatorTag::heteropca;
    throw ParseError("unknown estimator '" + name + "' (expected ppca|lfa|elf|heteropca)");
}

// Fitted generative model for one class: x ~ N(mean, W W^T + diag(noise_variances)).
struct LowRankModel {
    Vector mean;
    Matrix loadings;          // d x r
    Vector noise_variances;   // length d, every entry >= the variance floor
    Index rank = 0;
    EstimatorTag tag = EstimatorTag::ppca;

    Index dim() const { return loadings.rows(); }
};

struct FitOptions {
    Index rank = 1;
    // 0 picks the method default: 500 for the EM and ELF loops, 100 for the
    // diagonal-imputation loop inside heteropca.
    Index max_iters = 0;
    double tol = 1e-6;
    std::uint64_t seed = 0;   // reserved; every fitter is deterministic from data alone
    // 0 resolves to 1e-8 * mean sample variance of the fitted data.
    double variance_floor = 0.0;
};

// Optional per-fit diagnostics, filled when a fitter receives a non-null pointer.
struct FitTrace {
    std::vector<double> objective;          // per-iteration monitored quantity
    // ELF only: weighted residual norm around one (W, Gamma) update at fixed Psi.
    std::vector<double> fixed_psi_before;
    std::vector<double> fixed_psi_after;
    std::vector<Matrix> loadings_path;      // per-iteration loadings, model scale
    std::vector<Vector> noise_path;         // per-iteration floored noise variances
    Matrix factor_scores;                   // final n x r scores where the method defines them
    Index iterations = 0;
};

} // namespace snrsel
