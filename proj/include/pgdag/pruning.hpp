#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/rng.hpp"

namespace pgdag {

/// W(i, j) = OLS coefficient of parent j when predicting node i.
/// Zero wherever the candidate graph has no edge j -> i.
struct WeightMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> node_names;

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// Per-node least squares with intercept on the parents {j : a(j, i) = 1}.
/// Collinear parent sets get the minimum-norm slope vector.
inline WeightMatrix regression_weights(const Dataset& x, const AdjacencyMatrix& a) {
    const std::size_t d = x.variables();
    if (a.size() != d)
        throw LoadError("graph has " + std::to_string(a.size()) + " nodes, data has " +
                        std::to_string(d));
    const Eigen::RowVectorXd mean = x.values.colwise().mean();
    const Eigen::MatrixXd centred = x.values.rowwise() - mean;

    WeightMatrix w{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
                   a.node_names()};
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<Eigen::Index> parents;
        for (std::size_t j = 0; j < d; ++j)
            if (a(j, i)) parents.push_back(static_cast<Eigen::Index>(j));
        if (parents.empty()) continue;
        Eigen::MatrixXd design(centred.rows(), static_cast<Eigen::Index>(parents.size()));
        for (std::size_t k = 0; k < parents.size(); ++k)
            design.col(static_cast<Eigen::Index>(k)) = centred.col(parents[k]);
        const Eigen::VectorXd coef =
            design.completeOrthogonalDecomposition().solve(centred.col(static_cast<Eigen::Index>(i)));
        for (std::size_t k = 0; k < parents.size(); ++k)
            w.values(static_cast<Eigen::Index>(i), parents[k]) = coef(static_cast<Eigen::Index>(k));
    }
    return w;
}

/// The d-th largest |w| over the whole matrix; if fewer than d entries are
/// nonzero, the smallest nonzero |w| (0 when everything is zero).
inline double prune_threshold(const WeightMatrix& w) {
    const std::size_t d = w.size();
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < w.values.rows(); ++i)
        for (Eigen::Index j = 0; j < w.values.cols(); ++j)
            if (w.values(i, j) != 0.0) mags.push_back(std::abs(w.values(i, j)));
    if (mags.empty()) return 0.0;
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return mags[std::min(d, mags.size()) - 1];
}

/// Keeps parent->child edges with |W| at or above the threshold, then breaks
/// cycles weakest-|W| first.
inline AdjacencyMatrix prune(const WeightMatrix& w, Rng& rng) {
    const std::size_t d = w.size();
    const double th = prune_threshold(w);
    Eigen::MatrixXd edge_w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double mag = std::abs(w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            // row i holds the parents of i, so W(i, j) is the edge j -> i
            if (mag > 0.0 && mag >= th)
                edge_w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = mag;
        }
    auto names = w.node_names.empty() ? default_node_names(d) : w.node_names;
    return remove_cycles(WeightedDigraph(std::move(edge_w), std::move(names)), rng);
}

}  // namespace pgdag
