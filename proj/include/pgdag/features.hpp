#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"

namespace pgdag {

/// d rows laid out as [mean, variance, correlation row (d), MI row (d)].
struct NodeFeatureMatrix {
    Eigen::MatrixXd rows;

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(rows.rows()); }
    std::size_t width() const noexcept { return static_cast<std::size_t>(rows.cols()); }

    static constexpr std::size_t width_for(std::size_t d) noexcept { return 2 + 2 * d; }

    Eigen::MatrixXd correlation() const {
        const auto d = rows.rows();
        return rows.block(0, 2, d, d);
    }
    Eigen::MatrixXd mutual_information() const {
        const auto d = rows.rows();
        return rows.block(0, 2 + d, d, d);
    }
};

inline constexpr std::size_t kMiBins = 10;

/// Bin index per sample. Continuous columns use equal-width bins over the
/// observed range; discrete columns use their sorted levels, with every
/// level past the cap folded into the last bin.
inline std::vector<std::size_t> discretize(const Eigen::Ref<const Eigen::VectorXd>& col,
                                           ColumnKind kind, std::size_t bins = kMiBins) {
    const auto m = static_cast<std::size_t>(col.size());
    std::vector<std::size_t> out(m, 0);
    if (kind == ColumnKind::discrete) {
        std::map<double, std::size_t> level;
        for (std::size_t r = 0; r < m; ++r) level.emplace(col(static_cast<Eigen::Index>(r)), 0);
        std::size_t k = 0;
        for (auto& [value, idx] : level) idx = std::min(k++, bins - 1);
        for (std::size_t r = 0; r < m; ++r) out[r] = level.at(col(static_cast<Eigen::Index>(r)));
        return out;
    }
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (!(hi > lo)) return out;
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t r = 0; r < m; ++r) {
        const auto b = static_cast<std::size_t>((col(static_cast<Eigen::Index>(r)) - lo) / width);
        out[r] = std::min(b, bins - 1);
    }
    return out;
}

/// Plug-in mutual information (nats) of two binned columns.
inline double histogram_mi(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                           std::size_t bins = kMiBins) {
    const double m = static_cast<double>(a.size());
    std::vector<double> joint(bins * bins, 0.0), pa(bins, 0.0), pb(bins, 0.0);
    for (std::size_t r = 0; r < a.size(); ++r) {
        joint[a[r] * bins + b[r]] += 1.0;
        pa[a[r]] += 1.0;
        pb[b[r]] += 1.0;
    }
    double mi = 0.0;
    for (std::size_t i = 0; i < bins; ++i)
        for (std::size_t j = 0; j < bins; ++j) {
            const double n = joint[i * bins + j];
            if (n > 0.0) mi += (n / m) * std::log(n * m / (pa[i] * pb[j]));
        }
    return std::max(0.0, mi);
}

namespace detail {

inline Eigen::VectorXd zscore(Eigen::VectorXd v) {
    const double mean = v.mean();
    v.array() -= mean;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
    if (sd > 1e-12) v /= sd;
    else v.setZero();
    return v;
}

}  // namespace detail

/// Per-node statistics for the data encoder. The mean and variance columns
/// are the raw column moments z-scored across nodes; correlation and MI are
/// computed on the standardized data (so the result does not depend on
/// whether x was standardized first).
inline NodeFeatureMatrix compute_features(const Dataset& x) {
    const std::size_t d = x.variables();
    const auto di = static_cast<Eigen::Index>(d);
    const double m = static_cast<double>(x.samples());

    Eigen::VectorXd means = x.values.colwise().mean().transpose();
    Eigen::VectorXd vars(di);
    for (Eigen::Index j = 0; j < di; ++j)
        vars(j) = (x.values.col(j).array() - means(j)).square().sum() / m;

    const auto std_x = standardize(x);
    const Eigen::MatrixXd& z = std_x.data.values;
    Eigen::MatrixXd corr = (z.transpose() * z) / m;
    for (Eigen::Index i = 0; i < di; ++i) {
        for (Eigen::Index j = 0; j < di; ++j) corr(i, j) = std::clamp(corr(i, j), -1.0, 1.0);
        corr(i, i) = 1.0;
    }
    corr = (0.5 * (corr + corr.transpose())).eval();

    std::vector<std::vector<std::size_t>> binned;
    binned.reserve(d);
    for (std::size_t j = 0; j < d; ++j)
        binned.push_back(discretize(z.col(static_cast<Eigen::Index>(j)), x.column_kinds[j]));
    Eigen::MatrixXd mi = Eigen::MatrixXd::Zero(di, di);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double v = histogram_mi(binned[i], binned[j]);
            mi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            mi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }

    NodeFeatureMatrix f;
    f.rows.resize(di, static_cast<Eigen::Index>(NodeFeatureMatrix::width_for(d)));
    f.rows.col(0) = detail::zscore(means);
    f.rows.col(1) = detail::zscore(vars);
    f.rows.block(0, 2, di, di) = corr;
    f.rows.block(0, 2 + di, di, di) = mi;
    return f;
}

}  // namespace pgdag
