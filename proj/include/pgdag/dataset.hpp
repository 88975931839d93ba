#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"

namespace pgdag {

enum class ColumnKind { continuous, discrete };

/// m x d observations with labelled columns. Rows are samples.
struct Dataset {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;
    std::vector<ColumnKind> column_kinds;

    std::size_t samples() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t variables() const noexcept { return static_cast<std::size_t>(values.cols()); }

    /// Throws LoadError if any invariant is broken.
    void validate() const {
        const auto d = variables();
        if (samples() < 2) throw LoadError("dataset needs at least 2 samples");
        if (d == 0) throw LoadError("dataset has no columns");
        if (column_names.size() != d || column_kinds.size() != d)
            throw LoadError("dataset column metadata does not match its width");
        if (!values.allFinite()) throw LoadError("dataset contains NaN or Inf");
        std::vector<std::string> sorted = column_names;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw LoadError("dataset column names must be unique");
    }
};

/// Integer-valued with at most max_levels distinct values.
inline ColumnKind detect_kind(const Eigen::Ref<const Eigen::VectorXd>& column,
                              std::size_t max_levels = 20) {
    std::set<double> levels;
    for (Eigen::Index r = 0; r < column.size(); ++r) {
        const double v = column(r);
        if (v != std::round(v)) return ColumnKind::continuous;
        levels.insert(v);
        if (levels.size() > max_levels) return ColumnKind::continuous;
    }
    return ColumnKind::discrete;
}

inline Dataset make_dataset(Eigen::MatrixXd values, std::vector<std::string> names = {}) {
    Dataset x;
    const auto d = static_cast<std::size_t>(values.cols());
    x.column_names = names.empty() ? default_node_names(d) : std::move(names);
    x.column_kinds.reserve(d);
    for (Eigen::Index j = 0; j < values.cols(); ++j)
        x.column_kinds.push_back(detect_kind(values.col(j)));
    x.values = std::move(values);
    x.validate();
    return x;
}

struct StandardizedDataset {
    Dataset data;
    std::vector<bool> degenerate;  // zero-variance columns, mapped to all zeros
};

/// Zero mean, unit (population) variance per column.
inline StandardizedDataset standardize(const Dataset& x) {
    StandardizedDataset out{x, std::vector<bool>(x.variables(), false)};
    const double m = static_cast<double>(x.samples());
    for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
        auto col = out.data.values.col(j);
        const double mean = col.mean();
        col.array() -= mean;
        const double var = col.squaredNorm() / m;
        if (var <= 1e-300) {
            col.setZero();
            out.degenerate[static_cast<std::size_t>(j)] = true;
        } else {
            col /= std::sqrt(var);
        }
    }
    return out;
}

/// Row subset, preserving column metadata.
inline Dataset select_rows(const Dataset& x, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.column_names = x.column_names;
    out.column_kinds = x.column_kinds;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), x.values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.values.row(static_cast<Eigen::Index>(r)) = x.values.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

}  // namespace pgdag
