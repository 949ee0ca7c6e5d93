#pragma once

#include <map>

#include "snrsel/types.hpp"

namespace snrsel {

inline CenteredData center(const Matrix& values) {
    if (values.rows() < 2)
        throw PreconditionError("center: need at least 2 rows");
    CenteredData out;
    out.mean = values.colwise().mean();
    out.values = values.rowwise() - out.mean.transpose();
    return out;
}

inline CenteredData center(const DataMatrix& data) {
    data.validate();
    return center(data.values);
}

inline std::map<std::uint32_t, DataMatrix> partition_by_class(const DataMatrix& data) {
    data.validate();
    if (!data.labels)
        throw PreconditionError("partition_by_class: data has no labels");
    std::map<std::uint32_t, std::vector<Index>> rows;
    for (Index i = 0; i < data.n(); ++i) rows[(*data.labels)[i]].push_back(i);
    std::map<std::uint32_t, DataMatrix> out;
    for (const auto& [label, idx] : rows) {
        DataMatrix part;
        part.values.resize(static_cast<Index>(idx.size()), data.dim());
        for (std::size_t k = 0; k < idx.size(); ++k)
            part.values.row(static_cast<Index>(k)) = data.values.row(idx[k]);
        out.emplace(label, std::move(part));
    }
    return out;
}

// (1/(n-1)) X^T X of already-centered data.
inline Matrix sample_covariance(const CenteredData& data) {
    if (data.n() < 2)
        throw PreconditionError("sample_covariance: need at least 2 rows");
    const double denom = static_cast<double>(data.n() - 1);
    Matrix cov = data.values.transpose() * data.values / denom;
    cov = ((cov + cov.transpose()) * 0.5).eval();
    return cov;
}

} // namespace snrsel
