#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/error.hpp"
#include "pgdag/rng.hpp"

namespace pgdag {

using Edge = std::pair<std::size_t, std::size_t>;

inline std::vector<std::string> default_node_names(std::size_t d) {
    std::vector<std::string> names;
    names.reserve(d);
    for (std::size_t i = 0; i < d; ++i) names.push_back("X" + std::to_string(i));
    return names;
}

namespace detail {

inline void check_names(std::size_t d, const std::vector<std::string>& names) {
    if (names.size() != d)
        throw ConfigError("node_names has " + std::to_string(names.size()) +
                          " labels, expected " + std::to_string(d));
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("node_names must be unique");
}

}  // namespace detail

/// Binary d x d adjacency matrix; entry (i, j) = 1 means edge i -> j.
/// Self-loops are rejected at construction and by set().
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;

    explicit AdjacencyMatrix(std::size_t d) : AdjacencyMatrix(d, default_node_names(d)) {}

    AdjacencyMatrix(std::size_t d, std::vector<std::string> names)
        : d_(d), entries_(d * d, 0), names_(std::move(names)) {
        if (d == 0) throw ConfigError("adjacency matrix needs at least one node");
        detail::check_names(d_, names_);
    }

    /// Accepts any real matrix whose entries are exactly 0 or 1.
    static AdjacencyMatrix from_dense(const Eigen::MatrixXd& m,
                                      std::vector<std::string> names = {}) {
        if (m.rows() != m.cols()) throw ConfigError("adjacency matrix must be square");
        const auto d = static_cast<std::size_t>(m.rows());
        if (names.empty()) names = default_node_names(d);
        AdjacencyMatrix a(d, std::move(names));
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double v = m(i, j);
                if (v != 0.0 && v != 1.0)
                    throw ConfigError("adjacency entries must be 0 or 1");
                if (v == 1.0) a.set(i, j, true);
            }
        }
        return a;
    }

    std::size_t size() const noexcept { return d_; }
    const std::vector<std::string>& node_names() const noexcept { return names_; }

    bool operator()(std::size_t i, std::size_t j) const { return entries_[i * d_ + j] != 0; }

    void set(std::size_t i, std::size_t j, bool present) {
        if (i == j && present)
            throw ConfigError("self-loop on node " + std::to_string(i) + " is not allowed");
        entries_[i * d_ + j] = present ? 1 : 0;
    }

    std::size_t edge_count() const noexcept {
        return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), 1));
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if ((*this)(i, j)) out.emplace_back(i, j);
        return out;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_, d_);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if ((*this)(i, j)) m(i, j) = 1.0;
        return m;
    }

    bool same_edges(const AdjacencyMatrix& o) const { return d_ == o.d_ && entries_ == o.entries_; }

    friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) = default;

private:
    std::size_t d_ = 0;
    std::vector<std::uint8_t> entries_;
    std::vector<std::string> names_;
};

/// Nonnegative edge weights; 0 means no edge.
class WeightedDigraph {
public:
    WeightedDigraph(Eigen::MatrixXd weights, std::vector<std::string> names = {})
        : weights_(std::move(weights)), names_(std::move(names)) {
        if (weights_.rows() != weights_.cols() || weights_.rows() == 0)
            throw ConfigError("weight matrix must be square and non-empty");
        if (names_.empty()) names_ = default_node_names(size());
        detail::check_names(size(), names_);
        for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
            if (weights_(i, i) != 0.0)
                throw ConfigError("weighted digraph has a self-loop on node " + std::to_string(i));
            for (Eigen::Index j = 0; j < weights_.cols(); ++j)
                if (!(weights_(i, j) >= 0.0) || !std::isfinite(weights_(i, j)))
                    throw ConfigError("edge weights must be finite and nonnegative");
        }
    }

    /// Unit weights on the edges of a.
    static WeightedDigraph from_adjacency(const AdjacencyMatrix& a) {
        return WeightedDigraph(a.to_dense(), a.node_names());
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    const std::vector<std::string>& node_names() const noexcept { return names_; }

private:
    Eigen::MatrixXd weights_;
    std::vector<std::string> names_;
};

/// Edge probabilities in [0,1] with a zero diagonal.
class ProbabilityMatrix {
public:
    explicit ProbabilityMatrix(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
        if (probs_.rows() != probs_.cols() || probs_.rows() == 0)
            throw ConfigError("probability matrix must be square and non-empty");
        for (Eigen::Index i = 0; i < probs_.rows(); ++i)
            for (Eigen::Index j = 0; j < probs_.cols(); ++j)
                if (!(probs_(i, j) >= 0.0 && probs_(i, j) <= 1.0))
                    throw ConfigError("edge probabilities must lie in [0,1]");
        probs_.diagonal().setZero();
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.rows()); }
    double operator()(std::size_t i, std::size_t j) const { return probs_(i, j); }
    const Eigen::MatrixXd& probs() const noexcept { return probs_; }

private:
    Eigen::MatrixXd probs_;
};

/// Kahn's algorithm on the support of a dense d x d matrix (nonzero = edge).
inline bool is_dag_dense(const Eigen::MatrixXd& m) {
    const auto d = static_cast<std::size_t>(m.rows());
    std::vector<std::size_t> indeg(d, 0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (m(i, j) != 0.0) ++indeg[j];
    std::vector<std::size_t> ready;
    for (std::size_t j = 0; j < d; ++j)
        if (indeg[j] == 0) ready.push_back(j);
    std::size_t visited = 0;
    while (!ready.empty()) {
        const std::size_t u = ready.back();
        ready.pop_back();
        ++visited;
        for (std::size_t v = 0; v < d; ++v)
            if (m(u, v) != 0.0 && --indeg[v] == 0) ready.push_back(v);
    }
    return visited == d;
}

inline bool is_dag(const AdjacencyMatrix& a) { return is_dag_dense(a.to_dense()); }

/// exp(M) by scaling and squaring around a truncated Taylor series.
/// M is scaled by 2^-s so that ||M||_1 <= 0.5; the series then runs until the
/// next term drops below 1e-18 relative to the partial sum, capped at
/// max(2d, 30) terms. For nilpotent M (a DAG) any run of >= d terms is exact.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
    const auto d = m.rows();
    const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
    const int max_terms = std::max<int>(static_cast<int>(2 * d), 30);
    for (int k = 1; k <= max_terms; ++k) {
        term = (term * scaled) / static_cast<double>(k);
        result += term;
        const double t = term.cwiseAbs().maxCoeff();
        if (t == 0.0 || t < 1e-18 * result.cwiseAbs().maxCoeff()) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

/// h(A) = tr(exp(A)) - d. Zero (up to roundoff) exactly on DAGs.
inline double acyclicity_h(const AdjacencyMatrix& a) {
    const Eigen::MatrixXd e = matrix_exponential(a.to_dense());
    return e.trace() - static_cast<double>(a.size());
}

/// A[i][j] = 1 iff probs[i][j] >= tau, i != j.
inline AdjacencyMatrix threshold(const ProbabilityMatrix& p, double tau,
                                 std::vector<std::string> names = {}) {
    if (!(tau > 0.0 && tau < 1.0))
        throw ConfigError("threshold tau must lie in (0,1), got " + std::to_string(tau));
    const std::size_t d = p.size();
    if (names.empty()) names = default_node_names(d);
    AdjacencyMatrix a(d, std::move(names));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (i != j && p(i, j) >= tau) a.set(i, j, true);
    return a;
}

/// One simple directed cycle as its edge list, or empty if the support of
/// w is acyclic. DFS roots and neighbours are visited in ascending index order.
inline std::vector<Edge> find_cycle(const Eigen::MatrixXd& w) {
    const auto d = static_cast<std::size_t>(w.rows());
    enum class Mark : std::uint8_t { white, grey, black };
    std::vector<Mark> mark(d, Mark::white);
    std::vector<std::size_t> path;
    std::vector<std::size_t> next_child;

    for (std::size_t root = 0; root < d; ++root) {
        if (mark[root] != Mark::white) continue;
        path.assign(1, root);
        next_child.assign(1, 0);
        mark[root] = Mark::grey;
        while (!path.empty()) {
            const std::size_t u = path.back();
            std::size_t& c = next_child.back();
            while (c < d && w(u, c) == 0.0) ++c;
            if (c == d) {
                mark[u] = Mark::black;
                path.pop_back();
                next_child.pop_back();
                continue;
            }
            const std::size_t v = c++;
            if (mark[v] == Mark::grey) {
                std::vector<Edge> cycle;
                auto it = std::find(path.begin(), path.end(), v);
                for (; it + 1 != path.end(); ++it) cycle.emplace_back(*it, *(it + 1));
                cycle.emplace_back(u, v);
                return cycle;
            }
            if (mark[v] == Mark::white) {
                mark[v] = Mark::grey;
                path.push_back(v);
                next_child.push_back(0);
            }
        }
    }
    return {};
}

/// Greedy cycle breaking: while a cycle exists, delete its minimum-weight
/// edge, choosing uniformly among exact ties with rng. Returns the binary
/// support of what is left.
inline AdjacencyMatrix remove_cycles(const WeightedDigraph& g, Rng& rng) {
    Eigen::MatrixXd w = g.weights();
    for (;;) {
        const std::vector<Edge> cycle = find_cycle(w);
        if (cycle.empty()) break;
        double w_min = std::numeric_limits<double>::infinity();
        std::vector<Edge> lightest;
        for (const auto& [u, v] : cycle) {
            const double x = w(u, v);
            if (x < w_min) {
                w_min = x;
                lightest.assign(1, {u, v});
            } else if (x == w_min) {
                lightest.emplace_back(u, v);
            }
        }
        std::size_t pick = 0;
        if (lightest.size() > 1) {
            std::uniform_int_distribution<std::size_t> dist(0, lightest.size() - 1);
            pick = dist(rng);
        }
        w(lightest[pick].first, lightest[pick].second) = 0.0;
    }
    AdjacencyMatrix out(g.size(), g.node_names());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            if (w(i, j) > 0.0) out.set(i, j, true);
    return out;
}

}  // namespace pgdag
