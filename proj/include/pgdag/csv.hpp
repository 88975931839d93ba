#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"
#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/pruning.hpp"
#include "pgdag/scoring.hpp"

namespace pgdag::csv {

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(b, e - b + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split(line));
    }
    return rows;
}

inline bool all_numeric(const std::vector<std::string>& row) {
    for (const auto& cell : row)
        if (!parse_number(cell)) return false;
    return true;
}

/// Square numeric matrix with an optional header row of names.
inline std::pair<Eigen::MatrixXd, std::vector<std::string>> read_square(
    const std::filesystem::path& path) {
    auto rows = read_rows(path);
    if (rows.empty()) throw LoadError(path.string() + " is empty");
    std::vector<std::string> names;
    if (!all_numeric(rows.front())) {
        names = rows.front();
        rows.erase(rows.begin());
    }
    const std::size_t d = rows.size();
    if (d == 0) throw LoadError(path.string() + " has no matrix rows");
    if (!names.empty() && names.size() != d)
        throw LoadError(path.string() + ": header has " + std::to_string(names.size()) +
                        " names but the matrix has " + std::to_string(d) + " rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        if (rows[i].size() != d)
            throw LoadError(path.string() + ": row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " values, expected " +
                            std::to_string(d));
        for (std::size_t j = 0; j < d; ++j) {
            const auto v = parse_number(rows[i][j]);
            if (!v) throw LoadError(path.string() + ": non-numeric entry '" + rows[i][j] + "'");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
        }
    }
    return {m, names};
}

inline void write_header(std::ostream& out, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    return out;
}

}  // namespace detail

/// First row = column names, then numeric rows. Missing or non-numeric cells
/// reject the file. Discrete columns are auto-detected unless overridden.
inline Dataset read_dataset(const std::filesystem::path& path,
                            const std::vector<std::string>& force_discrete = {},
                            const std::vector<std::string>& force_continuous = {}) {
    const auto rows = detail::read_rows(path);
    if (rows.size() < 2) throw LoadError(path.string() + " needs a header and at least one row");
    const auto& header = rows.front();
    const auto d = static_cast<Eigen::Index>(header.size());
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size() - 1), d);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != d)
            throw LoadError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " fields, expected " +
                            std::to_string(d));
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto v = detail::parse_number(rows[r][static_cast<std::size_t>(j)]);
            if (!v || !std::isfinite(*v))
                throw LoadError(path.string() + ": missing or invalid value at row " +
                                std::to_string(r + 1) + ", column " + std::to_string(j + 1));
            values(static_cast<Eigen::Index>(r - 1), j) = *v;
        }
    }
    Dataset x = make_dataset(std::move(values), header);
    for (std::size_t j = 0; j < x.column_names.size(); ++j) {
        for (const auto& n : force_discrete)
            if (n == x.column_names[j]) x.column_kinds[j] = ColumnKind::discrete;
        for (const auto& n : force_continuous)
            if (n == x.column_names[j]) x.column_kinds[j] = ColumnKind::continuous;
    }
    return x;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& x) {
    auto out = detail::open_out(path);
    detail::write_header(out, x.column_names);
    char buf[32];
    for (Eigen::Index r = 0; r < x.values.rows(); ++r) {
        for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
            const auto res = std::to_chars(buf, buf + sizeof buf, x.values(r, j));
            out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

inline AdjacencyMatrix read_adjacency(const std::filesystem::path& path) {
    auto [m, names] = detail::read_square(path);
    try {
        return AdjacencyMatrix::from_dense(m, std::move(names));
    } catch (const ConfigError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

inline void write_adjacency(const std::filesystem::path& path, const AdjacencyMatrix& a) {
    auto out = detail::open_out(path);
    detail::write_header(out, a.node_names());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) out << (j ? "," : "") << (a(i, j) ? 1 : 0);
        out << '\n';
    }
}

inline PriorMatrix read_prior(const std::filesystem::path& path) {
    const auto [m, names] = detail::read_square(path);
    try {
        return PriorMatrix::from_dense(m);
    } catch (const ConfigError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

inline void write_prior(const std::filesystem::path& path, const PriorMatrix& p,
                        const std::vector<std::string>& names = {}) {
    auto out = detail::open_out(path);
    if (!names.empty()) detail::write_header(out, names);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) out << (j ? "," : "") << p(i, j);
        out << '\n';
    }
}

/// Written in adjacency orientation: cell (i, j) is the weight of edge i -> j,
/// i.e. W(j, i).
inline void write_weights(const std::filesystem::path& path, const WeightMatrix& w) {
    auto out = detail::open_out(path);
    detail::write_header(out, w.node_names);
    char buf[32];
    for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.values.cols(); ++j) {
            const auto res = std::to_chars(buf, buf + sizeof buf, w.values(j, i));
            out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

}  // namespace pgdag::csv
