#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"
#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/rng.hpp"
#include "pgdag/scoring.hpp"

namespace pgdag {

/// Hidden common cause of two observed variables.
struct Confounder {
    std::size_t first = 0;
    std::size_t second = 0;
    double strength = 1.0;
};

/// Linear-Gaussian SEM. weights(i, j) is the coefficient of parent i in child j.
struct SemSpec {
    AdjacencyMatrix graph;
    Eigen::MatrixXd weights;
    Eigen::VectorXd noise_scale;
    std::size_t samples = 0;
    std::vector<Confounder> confounders;
    double prior_fraction = 0.25;
    std::uint64_t seed = 0;

    std::size_t nodes() const noexcept { return graph.size(); }

    void validate() const {
        const auto d = static_cast<Eigen::Index>(nodes());
        if (d == 0) throw ConfigError("SEM needs at least one node");
        if (!is_dag(graph)) throw ConfigError("SEM graph must be acyclic");
        if (weights.rows() != d || weights.cols() != d || noise_scale.size() != d)
            throw ConfigError("SEM weight / noise shapes do not match the graph");
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                if (!graph(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) && weights(i, j) != 0.0)
                    throw ConfigError("SEM weight set on a non-edge");
        if (!weights.allFinite() || !noise_scale.allFinite() || (noise_scale.array() < 0).any())
            throw ConfigError("SEM weights and noise scales must be finite, noise nonnegative");
        for (const auto& c : confounders) {
            if (c.first >= nodes() || c.second >= nodes() || c.first == c.second)
                throw ConfigError("confounder must affect two distinct observed nodes");
            if (!std::isfinite(c.strength)) throw ConfigError("confounder strength must be finite");
        }
        if (!(prior_fraction >= 0.0 && prior_fraction <= 1.0))
            throw ConfigError("prior fraction must lie in [0,1]");
        if (samples < 2) throw ConfigError("SEM needs at least 2 samples");
    }
};

/// Random topological order; each order-respecting pair becomes an edge with
/// probability expected_edges / (d(d-1)/2).
inline AdjacencyMatrix random_dag(std::size_t d, double expected_edges, Rng& rng) {
    const double pairs = static_cast<double>(d) * static_cast<double>(d - 1) / 2.0;
    if (d == 0 || expected_edges < 0 || expected_edges > pairs)
        throw ConfigError("expected edges must lie in [0, d(d-1)/2]");
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const double p = pairs > 0 ? expected_edges / pairs : 0.0;
    AdjacencyMatrix a(d);
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = u + 1; v < d; ++v)
            if (uniform01(rng) < p) a.set(order[u], order[v], true);
    return a;
}

/// Edge weights with magnitude in [0.5, 2.0] and random sign.
inline Eigen::MatrixXd random_edge_weights(const AdjacencyMatrix& g, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [i, j] : g.edges()) {
        const double mag = 0.5 + 1.5 * uniform01(rng);
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = uniform01(rng) < 0.5 ? -mag : mag;
    }
    return w;
}

/// Random DAG plus random weights and unit noise.
inline SemSpec make_sem_spec(std::size_t d, double expected_edges, std::size_t samples,
                             std::uint64_t seed, double prior_fraction = 0.25,
                             std::vector<Confounder> confounders = {}) {
    Rng rng = make_rng(seed, "sem-structure");
    SemSpec s;
    s.graph = random_dag(d, expected_edges, rng);
    s.weights = random_edge_weights(s.graph, rng);
    s.noise_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
    s.samples = samples;
    s.confounders = std::move(confounders);
    s.prior_fraction = prior_fraction;
    s.seed = seed;
    return s;
}

struct Simulation {
    Dataset data;
    AdjacencyMatrix truth;
    PriorMatrix prior;
};

inline std::vector<std::size_t> topological_order(const AdjacencyMatrix& g) {
    const std::size_t d = g.size();
    std::vector<std::size_t> indeg(d, 0), order;
    for (const auto& [i, j] : g.edges()) ++indeg[j];
    std::vector<std::size_t> ready;
    for (std::size_t v = d; v-- > 0;)
        if (indeg[v] == 0) ready.push_back(v);
    while (!ready.empty()) {
        // smallest ready index first
        auto it = std::min_element(ready.begin(), ready.end());
        const std::size_t u = *it;
        ready.erase(it);
        order.push_back(u);
        for (std::size_t v = 0; v < d; ++v)
            if (g(u, v) && --indeg[v] == 0) ready.push_back(v);
    }
    if (order.size() != d) throw ConfigError("graph has a cycle");
    return order;
}

/// Marks round(f * |E|) true edges, sampled uniformly without replacement, as
/// known (1); everything else stays unspecified (-1).
inline PriorMatrix derive_prior(const AdjacencyMatrix& truth, double fraction, Rng& rng) {
    auto edges = truth.edges();
    std::shuffle(edges.begin(), edges.end(), rng);
    const auto known = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(edges.size())));
    PriorMatrix p(truth.size());
    for (std::size_t k = 0; k < std::min(known, edges.size()); ++k)
        p.set(edges[k].first, edges[k].second, 1);
    return p;
}

/// Samples in topological order: X_j = sum_i w(i,j) X_i + sum_U s U + noise_j.
inline Simulation simulate(const SemSpec& spec) {
    spec.validate();
    const std::size_t d = spec.nodes();
    const auto m = static_cast<Eigen::Index>(spec.samples);
    Rng rng = make_rng(spec.seed, "sem-noise");
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd hidden(m, static_cast<Eigen::Index>(spec.confounders.size()));
    for (Eigen::Index c = 0; c < hidden.cols(); ++c)
        for (Eigen::Index r = 0; r < m; ++r) hidden(r, c) = normal(rng);

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(d));
    for (std::size_t j : topological_order(spec.graph)) {
        const auto jj = static_cast<Eigen::Index>(j);
        auto col = values.col(jj);
        for (Eigen::Index r = 0; r < m; ++r) col(r) = spec.noise_scale(jj) * normal(rng);
        for (std::size_t i = 0; i < d; ++i)
            if (spec.graph(i, j)) col += spec.weights(static_cast<Eigen::Index>(i), jj) * values.col(static_cast<Eigen::Index>(i));
        for (std::size_t c = 0; c < spec.confounders.size(); ++c) {
            const auto& cf = spec.confounders[c];
            if (cf.first == j || cf.second == j) col += cf.strength * hidden.col(static_cast<Eigen::Index>(c));
        }
    }

    Simulation out{make_dataset(std::move(values), spec.graph.node_names()), spec.graph, PriorMatrix(d)};
    Rng prior_rng = make_rng(spec.seed, "sem-prior");
    out.prior = derive_prior(spec.graph, spec.prior_fraction, prior_rng);
    return out;
}

}  // namespace pgdag
