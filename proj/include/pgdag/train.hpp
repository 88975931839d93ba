#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/dataset.hpp"
#include "pgdag/features.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/nn.hpp"
#include "pgdag/policy.hpp"
#include "pgdag/rng.hpp"
#include "pgdag/scoring.hpp"

namespace pgdag {

struct TrainConfig {
    std::size_t num_epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double gamma = 0.99;  // kept for the config echo; one-step episodes never discount
    std::size_t max_steps = 100;
    double grad_clip_norm = 0.5;
    double tau = 0.5;
    double baseline_decay = 0.99;
    double dropout = 0.2;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (num_epochs == 0 || batch_size == 0 || max_steps == 0 || threads == 0)
            throw ConfigError("epochs, batch size, steps and threads must be positive");
        if (!(learning_rate > 0) || !(grad_clip_norm > 0) || !(gamma > 0))
            throw ConfigError("learning rate, gradient clip and gamma must be positive");
        if (!(tau > 0 && tau < 1)) throw ConfigError("tau must lie in (0,1)");
        if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0,1)");
    }
};

struct SearchState {
    AdjacencyMatrix best_graph;
    double best_total = std::numeric_limits<double>::infinity();
    double baseline = 0.0;
    std::size_t step_count = 0;
    std::vector<double> loss_trace;  // mean batch total per step
    std::vector<double> best_trace;  // best_total after each step
    std::vector<double> beta_trace;  // beta in force during each epoch
    std::size_t nonfinite_steps = 0;
    bool learning_rate_halved = false;
    bool degenerate_rss_seen = false;
    Rng rng;
};

struct TrainResult {
    SearchState state;
    PolicyModel model;
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t k = t; k < n; k += threads) body(k);
        });
}

/// Sampled edges weighted for weakest-edge selection. Ranked by logit, which
/// orders edges as their probabilities do but keeps saturated ones apart.
inline WeightedDigraph edge_weights(const AdjacencyMatrix& a, const Eigen::MatrixXd& logits) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : a.edges())
        lo = std::min(lo, logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
    for (const auto& [i, j] : a.edges()) {
        const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(j);
        w(r, c) = logits(r, c) - lo + 1.0;
    }
    return WeightedDigraph(std::move(w), a.node_names());
}

/// Seeded 80/20 row split: {train rows, held-out rows}.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::size_t m, std::uint64_t seed) {
    std::vector<std::size_t> rows(m);
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng = make_rng(seed, "holdout-split");
    for (std::size_t k = m; k > 1; --k) {
        const auto r = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k));
        std::swap(rows[k - 1], rows[std::min(r, k - 1)]);
    }
    const std::size_t n_train = std::max<std::size_t>(2, (m * 8) / 10);
    std::vector<std::size_t> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> held(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    std::sort(train.begin(), train.end());
    std::sort(held.begin(), held.end());
    return {train, held};
}

}  // namespace detail

/// REINFORCE over Bernoulli edge policies. Each step samples batch_size
/// graphs, breaks their cycles, scores them, and descends the score-function
/// estimate of the expected total. Advantages are centred on the batch mean;
/// the EMA baseline is tracked and used only for single-sample batches.
///
/// `prior` is the penalty prior; `prior_init` feeds the prior encoder.
/// With calibration enabled, rewards use an 80% row split and beta is
/// recomputed between epochs from held-out BIC on the remaining 20%.
inline TrainResult train(const Dataset& x, const PriorMatrix& prior, const PriorMatrix& prior_init,
                         const TrainConfig& cfg, RewardConfig rcfg) {
    cfg.validate();
    rcfg.validate();
    x.validate();
    const std::size_t d = x.variables();
    if (prior.size() != d || prior_init.size() != d)
        throw LoadError("prior matrices must have " + std::to_string(d) + " nodes");

    const NodeFeatureMatrix feats = compute_features(x);
    const Eigen::MatrixXd prior_binary = prior_init.binary_view();

    std::optional<BicScorer> heldout;
    std::optional<BicScorer> scorer;
    if (rcfg.calibration_enabled && x.samples() >= 10) {
        const auto [train_rows, held_rows] = detail::holdout_split(x.samples(), cfg.seed);
        scorer.emplace(select_rows(x, train_rows), rcfg.score_variant);
        heldout.emplace(select_rows(x, held_rows), rcfg.score_variant);
    } else {
        scorer.emplace(x, rcfg.score_variant);
    }

    Rng init_rng = make_rng(cfg.seed, "init");
    TrainResult out{SearchState{}, PolicyModel::create(d, init_rng, cfg.dropout)};
    SearchState& st = out.state;
    PolicyModel& model = out.model;
    st.rng = make_rng(cfg.seed, "search");
    st.best_graph = AdjacencyMatrix(d, x.column_names);

    std::vector<Eigen::MatrixXd*> param_ptrs;
    model.params.for_each([&](const char*, Eigen::MatrixXd& m) { param_ptrs.push_back(&m); });
    nn::Adam adam({.lr = cfg.learning_rate});

    const double beta0 = rcfg.beta;
    std::vector<double> delta_history;
    bool baseline_ready = false;

    std::vector<AdjacencyMatrix> samples(cfg.batch_size);
    std::vector<AdjacencyMatrix> scored(cfg.batch_size);
    std::vector<RewardBreakdown> rewards(cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.num_epochs; ++epoch) {
        st.beta_trace.push_back(rcfg.beta);
        for (std::size_t step = 0; step < cfg.max_steps; ++step, ++st.step_count) {
            const std::uint64_t t = st.step_count;
            Rng drop_rng = make_rng(cfg.seed, "dropout", t);
            const Eigen::MatrixXd mask = make_dropout_mask(
                static_cast<Eigen::Index>(d), PolicyShape::data_hidden, model.dropout, drop_rng);
            const ForwardCache cache = forward_cached(model, feats, prior_binary, mask);
            const ProbabilityMatrix probs(cache.probs);

            detail::parallel_for(cfg.batch_size, cfg.threads, [&](std::size_t b) {
                Rng rng = make_rng(cfg.seed, "sample", t, b);
                samples[b] = sample_graph(probs, rng, x.column_names);
                scored[b] = remove_cycles(detail::edge_weights(samples[b], cache.logits), rng);
                rewards[b] = total_reward(*scorer, scored[b], prior, rcfg);
            });

            double mean_total = 0.0;
            std::size_t best_b = 0;
            bool finite = true;
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                finite = finite && std::isfinite(rewards[b].total);
                st.degenerate_rss_seen = st.degenerate_rss_seen || rewards[b].degenerate_rss;
                mean_total += rewards[b].total;
                if (rewards[b].total < rewards[best_b].total) best_b = b;
            }
            mean_total /= static_cast<double>(cfg.batch_size);

            std::optional<PolicyParams> grads;
            if (finite) {
                if (!baseline_ready) {
                    st.baseline = mean_total;
                    baseline_ready = true;
                }
                // batch mean when there is more than one sample, EMA otherwise
                const double reference = cfg.batch_size > 1 ? mean_total : st.baseline;
                std::vector<double> adv(cfg.batch_size);
                for (std::size_t b = 0; b < cfg.batch_size; ++b) adv[b] = rewards[b].total - reference;
                grads = backward(model, cache, surrogate_logit_gradient(cache.probs, samples, adv));
                finite = grads->all_finite();
            }
            if (!finite) {
                ++st.nonfinite_steps;
                if (!st.learning_rate_halved) {
                    adam.set_learning_rate(adam.learning_rate() * 0.5);
                    st.learning_rate_halved = true;
                }
                st.loss_trace.push_back(mean_total);
                st.best_trace.push_back(st.best_total);
                continue;
            }

            const double norm = std::sqrt(grads->squared_norm());
            if (norm > cfg.grad_clip_norm) {
                const double scale = cfg.grad_clip_norm / norm;
                grads->for_each([&](const char*, Eigen::MatrixXd& m) { m *= scale; });
            }
            std::vector<const Eigen::MatrixXd*> grad_ptrs;
            grads->for_each([&](const char*, const Eigen::MatrixXd& m) { grad_ptrs.push_back(&m); });
            adam.step(param_ptrs, grad_ptrs);

            st.baseline = cfg.baseline_decay * st.baseline + (1.0 - cfg.baseline_decay) * mean_total;
            if (rewards[best_b].total < st.best_total) {
                st.best_total = rewards[best_b].total;
                st.best_graph = scored[best_b];
            }
            st.loss_trace.push_back(mean_total);
            st.best_trace.push_back(st.best_total);

            if (heldout) {
                if (auto delta = prior_delta_bic(*heldout, scored[best_b], prior))
                    delta_history.push_back(rcfg.bic_per_sample ? *delta / heldout->samples() : *delta);
            }
        }
        if (heldout) rcfg.beta = calibrate_beta(delta_history, beta0, rcfg);
    }
    return out;
}

/// Thresholds the trained policy and breaks any remaining cycles, weakest
/// probability first. The result is always a DAG.
inline AdjacencyMatrix infer(SearchState& state, const PolicyModel& model,
                             const NodeFeatureMatrix& feats, const PriorMatrix& prior_init,
                             double tau, std::vector<std::string> names = {}) {
    const ForwardCache cache = forward_cached(model, feats, prior_init.binary_view(), std::nullopt);
    const AdjacencyMatrix a = threshold(ProbabilityMatrix(cache.probs), tau, std::move(names));
    AdjacencyMatrix dag = remove_cycles(detail::edge_weights(a, cache.logits), state.rng);
    if (!is_dag(dag)) throw std::logic_error("infer produced a cyclic graph");
    return dag;
}

}  // namespace pgdag
