#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"
#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"

namespace pgdag {

/// Partial edge knowledge: 1 asserted edge, 0 asserted non-edge, -1 unspecified.
class PriorMatrix {
public:
    PriorMatrix() = default;

    /// All entries unspecified.
    explicit PriorMatrix(std::size_t d) : d_(d), entries_(d * d, -1) {
        if (d == 0) throw ConfigError("prior matrix needs at least one node");
    }

    static PriorMatrix from_dense(const Eigen::MatrixXd& m) {
        if (m.rows() != m.cols()) throw ConfigError("prior matrix must be square");
        PriorMatrix p(static_cast<std::size_t>(m.rows()));
        for (std::size_t i = 0; i < p.d_; ++i)
            for (std::size_t j = 0; j < p.d_; ++j) {
                const double v = m(i, j);
                if (v != -1.0 && v != 0.0 && v != 1.0)
                    throw ConfigError("prior entries must be -1, 0 or 1");
                p.set(i, j, static_cast<int>(v));
            }
        return p;
    }

    /// Every entry specified: 1 on the edges of a, 0 elsewhere (diagonal 0).
    static PriorMatrix from_adjacency(const AdjacencyMatrix& a) {
        PriorMatrix p(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) p.set(i, j, a(i, j) ? 1 : 0);
        return p;
    }

    std::size_t size() const noexcept { return d_; }
    int operator()(std::size_t i, std::size_t j) const { return entries_[i * d_ + j]; }

    void set(std::size_t i, std::size_t j, int v) {
        if (v < -1 || v > 1) throw ConfigError("prior entries must be -1, 0 or 1");
        if (i == j && v == 1)
            throw ConfigError("prior may not assert a self-loop on node " + std::to_string(i));
        entries_[i * d_ + j] = static_cast<std::int8_t>(v);
    }

    bool all_unspecified() const {
        return std::all_of(entries_.begin(), entries_.end(), [](auto v) { return v == -1; });
    }

    std::vector<Edge> asserted_edges() const {
        std::vector<Edge> out;
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if ((*this)(i, j) == 1) out.emplace_back(i, j);
        return out;
    }

    /// Encoder view: -1 mapped to 0.
    Eigen::MatrixXd binary_view() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_, d_);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if ((*this)(i, j) == 1) m(i, j) = 1.0;
        return m;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd m(d_, d_);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j) m(i, j) = (*this)(i, j);
        return m;
    }

    friend bool operator==(const PriorMatrix&, const PriorMatrix&) = default;

private:
    std::size_t d_ = 0;
    std::vector<std::int8_t> entries_;
};

/// Specified entries of `known` override `initial`; the rest of `initial`
/// enters with its own value. Either side may be absent.
inline PriorMatrix merge_priors(std::size_t d, const std::optional<PriorMatrix>& known,
                                const std::optional<PriorMatrix>& initial) {
    PriorMatrix out(d);
    for (const auto* src : {initial ? &*initial : nullptr, known ? &*known : nullptr}) {
        if (!src) continue;
        if (src->size() != d)
            throw LoadError("prior has " + std::to_string(src->size()) + " nodes, data has " +
                            std::to_string(d));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if ((*src)(i, j) != -1) out.set(i, j, (*src)(i, j));
    }
    return out;
}

enum class ScoreVariant { pooled_variance, per_node_variance };

struct RewardConfig {
    double lambda1 = 1.0;  // weight on h(A)
    double lambda2 = 2.0;  // weight on the cyclic indicator
    double beta = 0.5;     // prior-disagreement weight
    double tau_calibration = 0.0;
    bool calibration_enabled = true;
    std::size_t calibration_window = 10;
    ScoreVariant score_variant = ScoreVariant::pooled_variance;
    // reward uses bic / m, so an edge costs log(m)/m
    bool bic_per_sample = true;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || beta < 0)
            throw ConfigError("lambda1, lambda2 and beta must be nonnegative");
        if (calibration_window == 0) throw ConfigError("calibration window must be positive");
    }
};

struct RewardBreakdown {
    double bic = 0.0;
    double acyclicity = 0.0;
    double prior = 0.0;
    double total = 0.0;
    bool degenerate_rss = false;  // sum of RSS was clamped before the log
};

/// Linear-Gaussian BIC from the centred cross-product matrix of a dataset.
/// Each node is regressed (with intercept) on its parents; collinear parent
/// sets fall back to the minimum-norm least-squares solution.
class BicScorer {
public:
    explicit BicScorer(const Dataset& x, ScoreVariant variant = ScoreVariant::pooled_variance)
        : m_(static_cast<double>(x.samples())), variant_(variant) {
        const Eigen::RowVectorXd mean = x.values.colwise().mean();
        const Eigen::MatrixXd centred = x.values.rowwise() - mean;
        gram_ = centred.transpose() * centred;
    }

    std::size_t variables() const noexcept { return static_cast<std::size_t>(gram_.rows()); }
    double samples() const noexcept { return m_; }

    /// RSS of node i given the parent indices.
    double node_rss(std::size_t i, const std::vector<std::size_t>& parents) const {
        const auto ii = static_cast<Eigen::Index>(i);
        if (parents.empty()) return gram_(ii, ii);
        const auto k = static_cast<Eigen::Index>(parents.size());
        Eigen::MatrixXd gss(k, k);
        Eigen::VectorXd gsi(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            const auto pa = static_cast<Eigen::Index>(parents[static_cast<std::size_t>(a)]);
            gsi(a) = gram_(pa, ii);
            for (Eigen::Index b = 0; b < k; ++b)
                gss(a, b) = gram_(pa, static_cast<Eigen::Index>(parents[static_cast<std::size_t>(b)]));
        }
        const Eigen::VectorXd coef = gss.completeOrthogonalDecomposition().solve(gsi);
        return std::max(0.0, gram_(ii, ii) - gsi.dot(coef));
    }

    struct Result {
        double value = 0.0;
        bool degenerate = false;
    };

    Result evaluate(const AdjacencyMatrix& a) const {
        const std::size_t d = variables();
        if (a.size() != d)
            throw LoadError("graph has " + std::to_string(a.size()) + " nodes, data has " +
                            std::to_string(d));
        const double md = m_ * static_cast<double>(d);
        const double edges = static_cast<double>(a.edge_count());
        std::vector<std::size_t> parents;
        Result r;
        double rss_sum = 0.0;
        double per_node = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            parents.clear();
            for (std::size_t j = 0; j < d; ++j)
                if (a(j, i)) parents.push_back(j);
            const double rss = node_rss(i, parents);
            rss_sum += rss;
            double arg = rss / m_;
            if (arg < 1e-12) {
                arg = 1e-12;
                if (variant_ == ScoreVariant::per_node_variance) r.degenerate = true;
            }
            per_node += m_ * std::log(arg);
        }
        if (variant_ == ScoreVariant::pooled_variance) {
            double arg = rss_sum / md;
            if (arg < 1e-12) {
                arg = 1e-12;
                r.degenerate = true;
            }
            r.value = md * std::log(arg) + edges * std::log(m_);
        } else {
            r.value = per_node + edges * std::log(m_);
        }
        return r;
    }

private:
    double m_;
    ScoreVariant variant_;
    Eigen::MatrixXd gram_;
};

/// m*d*log(sum RSS / (m*d)) + #edges*log(m).
inline double bic_penalty(const Dataset& x, const AdjacencyMatrix& a,
                          ScoreVariant variant = ScoreVariant::pooled_variance) {
    return BicScorer(x, variant).evaluate(a).value;
}

inline double acyclicity_penalty(const AdjacencyMatrix& a, const RewardConfig& cfg) {
    if (cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0) return 0.0;
    if (is_dag(a)) return 0.0;
    return cfg.lambda1 * std::max(0.0, acyclicity_h(a)) + cfg.lambda2;
}

/// beta times the number of specified off-diagonal entries a disagrees with.
inline double prior_penalty(const AdjacencyMatrix& a, const PriorMatrix& prior,
                            const RewardConfig& cfg) {
    if (a.size() != prior.size())
        throw LoadError("graph has " + std::to_string(a.size()) + " nodes, prior has " +
                        std::to_string(prior.size()));
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (i == j) continue;
            const int p = prior(i, j);
            if (p != -1 && static_cast<int>(a(i, j)) != p) ++mismatches;
        }
    return cfg.beta * static_cast<double>(mismatches);
}

/// Lower is better.
inline RewardBreakdown total_reward(const BicScorer& scorer, const AdjacencyMatrix& a,
                                    const PriorMatrix& prior, const RewardConfig& cfg) {
    RewardBreakdown r;
    const auto bic = scorer.evaluate(a);
    r.bic = cfg.bic_per_sample ? bic.value / scorer.samples() : bic.value;
    r.degenerate_rss = bic.degenerate;
    r.acyclicity = acyclicity_penalty(a, cfg);
    r.prior = prior_penalty(a, prior, cfg);
    r.total = r.bic + r.acyclicity + r.prior;
    return r;
}

inline RewardBreakdown total_reward(const Dataset& x, const AdjacencyMatrix& a,
                                    const PriorMatrix& prior, const RewardConfig& cfg) {
    return total_reward(BicScorer(x, cfg.score_variant), a, prior, cfg);
}

/// BIC change attributable to the prior's asserted edges on `graph`.
/// With both directions of every asserted pair cleared from `graph`, compares
/// base + asserted edges against the better of base alone and base + the
/// reversed edges. Cycles closed by the added edges are broken by dropping
/// base edges first. Negative means the prior's orientation beats both
/// alternatives. nullopt when the prior asserts no edges.
inline std::optional<double> prior_delta_bic(const BicScorer& heldout, const AdjacencyMatrix& graph,
                                             const PriorMatrix& prior) {
    const auto asserted = prior.asserted_edges();
    if (asserted.empty()) return std::nullopt;
    AdjacencyMatrix base = graph;
    for (const auto& [i, j] : asserted) {
        base.set(i, j, false);
        base.set(j, i, false);
    }
    auto with_edges = [&](bool reversed) {
        Eigen::MatrixXd w = base.to_dense();
        for (const auto& [i, j] : asserted) {
            const auto [s, t] = reversed ? Edge{j, i} : Edge{i, j};
            w(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = 2.0;
        }
        Rng rng = make_rng(0, "calibration");
        return remove_cycles(WeightedDigraph(w), rng);
    };
    const double asserted_bic = heldout.evaluate(with_edges(false)).value;
    const double alternative =
        std::min(heldout.evaluate(base).value, heldout.evaluate(with_edges(true)).value);
    return asserted_bic - alternative;
}

/// beta0 while the mean prior-attributable BIC change over the trailing
/// window stays below tau_calibration, 0 otherwise.
inline double calibrate_beta(std::span<const double> delta_history, double beta0,
                             const RewardConfig& cfg) {
    if (!cfg.calibration_enabled || delta_history.empty()) return beta0;
    const std::size_t n = std::min(cfg.calibration_window, delta_history.size());
    double sum = 0.0;
    for (std::size_t k = delta_history.size() - n; k < delta_history.size(); ++k)
        sum += delta_history[k];
    return (sum / static_cast<double>(n)) < cfg.tau_calibration ? beta0 : 0.0;
}

}  // namespace pgdag
