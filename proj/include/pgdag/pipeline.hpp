#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "pgdag/dataset.hpp"
#include "pgdag/features.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/pruning.hpp"
#include "pgdag/scoring.hpp"
#include "pgdag/train.hpp"

namespace pgdag {

struct RunConfig {
    TrainConfig train;
    RewardConfig reward;

    /// Flat keys named after the published hyperparameter table.
    nlohmann::json to_json() const {
        return {
            {"num_epochs", train.num_epochs},
            {"batch_size", train.batch_size},
            {"actor_lr", train.learning_rate},
            {"gamma", train.gamma},
            {"max_steps", train.max_steps},
            {"clip_grad_norm", train.grad_clip_norm},
            {"tau", train.tau},
            {"baseline_decay", train.baseline_decay},
            {"dropout", train.dropout},
            {"seed", train.seed},
            {"threads", train.threads},
            {"lambda1", reward.lambda1},
            {"lambda2", reward.lambda2},
            {"lambda3", reward.beta},
            {"tau_calibration", reward.tau_calibration},
            {"calibration", reward.calibration_enabled},
            {"calibration_window", reward.calibration_window},
            {"bic_per_sample", reward.bic_per_sample},
            {"score_type", reward.score_variant == ScoreVariant::pooled_variance ? "BIC"
                                                                                 : "BIC_different_var"},
        };
    }

    /// Overwrites the fields present in j; unknown keys are rejected.
    void merge_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [key, v] : j.items()) {
            if (key == "num_epochs") train.num_epochs = v.get<std::size_t>();
            else if (key == "batch_size") train.batch_size = v.get<std::size_t>();
            else if (key == "actor_lr") train.learning_rate = v.get<double>();
            else if (key == "gamma") train.gamma = v.get<double>();
            else if (key == "max_steps") train.max_steps = v.get<std::size_t>();
            else if (key == "clip_grad_norm") train.grad_clip_norm = v.get<double>();
            else if (key == "tau") train.tau = v.get<double>();
            else if (key == "baseline_decay") train.baseline_decay = v.get<double>();
            else if (key == "dropout") train.dropout = v.get<double>();
            else if (key == "seed") train.seed = v.get<std::uint64_t>();
            else if (key == "threads") train.threads = v.get<std::size_t>();
            else if (key == "lambda1") reward.lambda1 = v.get<double>();
            else if (key == "lambda2") reward.lambda2 = v.get<double>();
            else if (key == "lambda3" || key == "beta") reward.beta = v.get<double>();
            else if (key == "tau_calibration") reward.tau_calibration = v.get<double>();
            else if (key == "calibration") reward.calibration_enabled = v.get<bool>();
            else if (key == "calibration_window") reward.calibration_window = v.get<std::size_t>();
            else if (key == "bic_per_sample") reward.bic_per_sample = v.get<bool>();
            else if (key == "score_type") {
                const auto s = v.get<std::string>();
                if (s == "BIC") reward.score_variant = ScoreVariant::pooled_variance;
                else if (s == "BIC_different_var") reward.score_variant = ScoreVariant::per_node_variance;
                else throw ConfigError("unknown score_type '" + s + "'");
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    }
};

struct DiscoveryResult {
    TrainResult training;
    AdjacencyMatrix candidate;  // thresholded policy, cycles removed
    WeightMatrix weights;
    AdjacencyMatrix final_graph;
};

/// features -> train -> infer -> prune. Either prior may be absent; the
/// penalty uses `known` entries over `initial` ones, the prior encoder sees
/// `initial` (or, without it, the known edges).
inline DiscoveryResult discover(const Dataset& x, const std::optional<PriorMatrix>& known,
                                const std::optional<PriorMatrix>& initial, const RunConfig& cfg) {
    x.validate();
    const std::size_t d = x.variables();
    const PriorMatrix penalty_prior = merge_priors(d, known, initial);
    const PriorMatrix encoder_prior = initial ? *initial : (known ? *known : PriorMatrix(d));
    if (encoder_prior.size() != d)
        throw LoadError("prior has " + std::to_string(encoder_prior.size()) + " nodes, data has " +
                        std::to_string(d));

    DiscoveryResult r{train(x, penalty_prior, encoder_prior, cfg.train, cfg.reward), {}, {}, {}};
    const NodeFeatureMatrix feats = compute_features(x);
    r.candidate = infer(r.training.state, r.training.model, feats, encoder_prior, cfg.train.tau,
                        x.column_names);
    r.weights = regression_weights(x, r.candidate);
    Rng prune_rng = make_rng(cfg.train.seed, "prune");
    r.final_graph = prune(r.weights, prune_rng);
    return r;
}

}  // namespace pgdag
