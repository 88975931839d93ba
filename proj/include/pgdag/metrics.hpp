#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"

namespace pgdag {

/// Counts over ordered pairs (i, j), i != j.
struct EdgeConfusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    // predicted i->j (and not j->i) where truth has j->i (and not i->j)
    std::size_t reversals = 0;
};

struct MetricReport {
    double tpr = 0, fdr = 0, fpr = 0;
    std::size_t shd = 0;
    double tp_nnz = 0;
    std::optional<double> rp;
    std::size_t nnz = 0;
    std::size_t d = 0;
};

/// pred re-indexed to truth's node order. Throws if the label sets differ.
inline AdjacencyMatrix align_to(const AdjacencyMatrix& pred, const AdjacencyMatrix& truth) {
    if (pred.size() != truth.size())
        throw AlignmentError("predicted graph has " + std::to_string(pred.size()) +
                             " nodes, truth has " + std::to_string(truth.size()));
    if (pred.node_names() == truth.node_names()) return pred;
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < pred.size(); ++i) pos.emplace(pred.node_names()[i], i);
    std::vector<std::size_t> map(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto it = pos.find(truth.node_names()[i]);
        if (it == pos.end())
            throw AlignmentError("node '" + truth.node_names()[i] + "' missing from predicted graph");
        map[i] = it->second;
    }
    AdjacencyMatrix out(truth.size(), truth.node_names());
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = 0; j < truth.size(); ++j)
            if (i != j && pred(map[i], map[j])) out.set(i, j, true);
    return out;
}

inline EdgeConfusion confusion(const AdjacencyMatrix& pred_in, const AdjacencyMatrix& truth) {
    const AdjacencyMatrix pred = align_to(pred_in, truth);
    EdgeConfusion c;
    const std::size_t d = truth.size();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool p = pred(i, j), t = truth(i, j);
            if (p && t) ++c.tp;
            else if (p) {
                ++c.fp;
                if (truth(j, i) && !pred(j, i)) ++c.reversals;
            } else if (t) ++c.fn;
            else ++c.tn;
        }
    return c;
}

/// Additions + deletions + reversals, with a reversed edge costing 1.
inline std::size_t shd(const AdjacencyMatrix& pred, const AdjacencyMatrix& truth) {
    const EdgeConfusion c = confusion(pred, truth);
    // a reversal shows up as one fp plus one fn; it is charged once
    return c.fp + c.fn - c.reversals;
}

/// tp / (#predicted edges); 0 when nothing is predicted.
inline double tp_nnz(const AdjacencyMatrix& pred, const AdjacencyMatrix& truth) {
    const EdgeConfusion c = confusion(pred, truth);
    const std::size_t nnz = c.tp + c.fp;
    return nnz == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(nnz);
}

/// (best - x) / best over a cohort of TP/NNZ values; absent when best is 0.
inline std::optional<double> rp(double model_tp_nnz, std::span<const double> cohort) {
    if (cohort.empty()) return std::nullopt;
    const double best = *std::max_element(cohort.begin(), cohort.end());
    if (!(best > 0.0)) return std::nullopt;
    return (best - model_tp_nnz) / best;
}

inline MetricReport report(const AdjacencyMatrix& pred, const AdjacencyMatrix& truth,
                           std::optional<std::span<const double>> cohort = std::nullopt) {
    const EdgeConfusion c = confusion(pred, truth);
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    MetricReport r;
    r.d = truth.size();
    r.nnz = c.tp + c.fp;
    r.tpr = ratio(c.tp, c.tp + c.fn);
    r.fdr = ratio(c.fp, c.tp + c.fp);
    r.fpr = ratio(c.fp, c.fp + c.tn);
    r.shd = c.fp + c.fn - c.reversals;
    r.tp_nnz = ratio(c.tp, r.nnz);
    if (cohort) r.rp = rp(r.tp_nnz, *cohort);
    return r;
}

}  // namespace pgdag
