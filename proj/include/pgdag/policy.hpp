#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/error.hpp"
#include "pgdag/features.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/nn.hpp"
#include "pgdag/rng.hpp"
#include "pgdag/scoring.hpp"

namespace pgdag {

/// Layer widths of the edge policy.
struct PolicyShape {
    static constexpr Eigen::Index data_hidden = 128;
    static constexpr Eigen::Index node_width = 64;    // H_data and H_prior
    static constexpr Eigen::Index fused_width = 128;  // [H_data | H_prior]
    static constexpr Eigen::Index pair_hidden = 64;
    static constexpr Eigen::Index prior_stats = 4;    // in/out degree, row/col sum
    static constexpr Eigen::Index embedding = 16;

    std::size_t nodes = 0;
    std::size_t feature_width = 0;
};

/// Every trainable tensor of the policy. Also used to hold gradients.
///
///  data encoder   X(d x F) -> relu(128) -> dropout -> relu(64)           = H_data
///  prior encoder  [stats(4) | embedding(16)] -> gated(64) -> gated(64)    = H_prior
///  fusion         H = [H_data | H_prior];  S = H Ws^T + bs,  T = H Wt^T + bt
///                 logit(i,j) = w2 . relu(W1 (S_i * T_j) + b1) + b2
///
/// A gated layer computes sigmoid(Wg x + bg) * tanh(Wh x + bh).
struct PolicyParams {
    Eigen::MatrixXd e1_w1, e1_b1, e1_w2, e1_b2;
    Eigen::MatrixXd embedding;
    Eigen::MatrixXd e2_gw1, e2_gb1, e2_hw1, e2_hb1;
    Eigen::MatrixXd e2_gw2, e2_gb2, e2_hw2, e2_hb2;
    Eigen::MatrixXd src_w, src_b, dst_w, dst_b;
    Eigen::MatrixXd fuse_w1, fuse_b1, fuse_w2, fuse_b2;

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        f("e1_w1", self.e1_w1);
        f("e1_b1", self.e1_b1);
        f("e1_w2", self.e1_w2);
        f("e1_b2", self.e1_b2);
        f("embedding", self.embedding);
        f("e2_gw1", self.e2_gw1);
        f("e2_gb1", self.e2_gb1);
        f("e2_hw1", self.e2_hw1);
        f("e2_hb1", self.e2_hb1);
        f("e2_gw2", self.e2_gw2);
        f("e2_gb2", self.e2_gb2);
        f("e2_hw2", self.e2_hw2);
        f("e2_hb2", self.e2_hb2);
        f("src_w", self.src_w);
        f("src_b", self.src_b);
        f("dst_w", self.dst_w);
        f("dst_b", self.dst_b);
        f("fuse_w1", self.fuse_w1);
        f("fuse_b1", self.fuse_b1);
        f("fuse_w2", self.fuse_w2);
        f("fuse_b2", self.fuse_b2);
    }

    template <class F>
    void for_each(F&& f) { visit(*this, f); }
    template <class F>
    void for_each(F&& f) const { visit(*this, f); }

    PolicyParams zeros_like() const {
        PolicyParams z = *this;
        z.for_each([](const char*, Eigen::MatrixXd& m) { m.setZero(); });
        return z;
    }

    double squared_norm() const {
        double s = 0.0;
        for_each([&](const char*, const Eigen::MatrixXd& m) { s += m.squaredNorm(); });
        return s;
    }

    bool all_finite() const {
        bool ok = true;
        for_each([&](const char*, const Eigen::MatrixXd& m) { ok = ok && m.allFinite(); });
        return ok;
    }
};

struct PolicyModel {
    PolicyShape shape;
    PolicyParams params;
    double dropout = 0.2;

    /// Xavier-uniform weights, zero biases.
    static PolicyModel create(std::size_t d, Rng& rng, double dropout = 0.2) {
        PolicyModel m;
        m.dropout = dropout;
        m.shape.nodes = d;
        m.shape.feature_width = NodeFeatureMatrix::width_for(d);
        const auto F = static_cast<Eigen::Index>(m.shape.feature_width);
        const auto n = static_cast<Eigen::Index>(d);
        using S = PolicyShape;
        auto& p = m.params;
        auto weight = [&](Eigen::Index out, Eigen::Index in) {
            Eigen::MatrixXd w(out, in);
            nn::xavier_uniform(w, rng);
            return w;
        };
        auto bias = [](Eigen::Index out) { return Eigen::MatrixXd::Zero(out, 1); };
        p.e1_w1 = weight(S::data_hidden, F);
        p.e1_b1 = bias(S::data_hidden);
        p.e1_w2 = weight(S::node_width, S::data_hidden);
        p.e1_b2 = bias(S::node_width);
        p.embedding = weight(n, S::embedding);
        const Eigen::Index e2_in = S::prior_stats + S::embedding;
        p.e2_gw1 = weight(S::node_width, e2_in);
        p.e2_gb1 = bias(S::node_width);
        p.e2_hw1 = weight(S::node_width, e2_in);
        p.e2_hb1 = bias(S::node_width);
        p.e2_gw2 = weight(S::node_width, S::node_width);
        p.e2_gb2 = bias(S::node_width);
        p.e2_hw2 = weight(S::node_width, S::node_width);
        p.e2_hb2 = bias(S::node_width);
        p.src_w = weight(S::fused_width, S::fused_width);
        p.src_b = bias(S::fused_width);
        p.dst_w = weight(S::fused_width, S::fused_width);
        p.dst_b = bias(S::fused_width);
        p.fuse_w1 = weight(S::pair_hidden, S::fused_width);
        p.fuse_b1 = bias(S::pair_hidden);
        p.fuse_w2 = weight(1, S::pair_hidden);
        p.fuse_b2 = bias(1);
        return m;
    }
};

/// Per-node inputs of the prior encoder, scaled by 1/(d-1).
inline Eigen::MatrixXd prior_node_stats(const Eigen::MatrixXd& prior_binary) {
    const auto d = prior_binary.rows();
    const double scale = d > 1 ? 1.0 / static_cast<double>(d - 1) : 0.0;
    Eigen::MatrixXd q(d, PolicyShape::prior_stats);
    const Eigen::VectorXd row = prior_binary.rowwise().sum();
    const Eigen::VectorXd col = prior_binary.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index in_deg = 0, out_deg = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j == i) continue;
            if (prior_binary(j, i) != 0.0) ++in_deg;
            if (prior_binary(i, j) != 0.0) ++out_deg;
        }
        q(i, 0) = static_cast<double>(in_deg) * scale;
        q(i, 1) = static_cast<double>(out_deg) * scale;
        q(i, 2) = row(i) * scale;
        q(i, 3) = col(i) * scale;
    }
    return q;
}

/// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
    Eigen::MatrixXd x;                          // d x F
    Eigen::MatrixXd z1, a1, drop_mask, a1d;     // d x 128
    Eigen::MatrixXd z2, h_data;                 // d x 64
    Eigen::MatrixXd u;                          // d x 20
    Eigen::MatrixXd g1, t1, o1, g2, t2, h_prior;  // d x 64
    Eigen::MatrixXd h;                          // d x 128
    Eigen::MatrixXd src, dst;                   // d x 128
    Eigen::MatrixXd pair, pair_pre, pair_hidden;  // d^2 x {128, 64, 64}
    Eigen::MatrixXd logits;                     // d x d, diagonal unused
    Eigen::MatrixXd probs;                      // d x d, zero diagonal
};

/// Dropout keep-mask already scaled by 1/(1-rate).
inline Eigen::MatrixXd make_dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                                         Rng& rng) {
    Eigen::MatrixXd mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = uniform01(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

/// Forward pass. With no mask, dropout is off (inference behaviour).
inline ForwardCache forward_cached(const PolicyModel& model, const NodeFeatureMatrix& feats,
                                   const Eigen::MatrixXd& prior_binary,
                                   const std::optional<Eigen::MatrixXd>& dropout_mask = {}) {
    const auto d = static_cast<Eigen::Index>(model.shape.nodes);
    if (static_cast<Eigen::Index>(feats.nodes()) != d ||
        feats.width() != model.shape.feature_width || prior_binary.rows() != d ||
        prior_binary.cols() != d)
        throw ConfigError("policy input shapes do not match a " + std::to_string(d) + "-node model");
    const auto& p = model.params;
    ForwardCache c;
    c.x = feats.rows;

    c.z1 = nn::affine(c.x, p.e1_w1, p.e1_b1);
    c.a1 = nn::relu(c.z1);
    c.drop_mask = dropout_mask ? *dropout_mask : Eigen::MatrixXd::Ones(c.a1.rows(), c.a1.cols());
    c.a1d = c.a1.cwiseProduct(c.drop_mask);
    c.z2 = nn::affine(c.a1d, p.e1_w2, p.e1_b2);
    c.h_data = nn::relu(c.z2);

    c.u.resize(d, PolicyShape::prior_stats + PolicyShape::embedding);
    c.u.leftCols(PolicyShape::prior_stats) = prior_node_stats(prior_binary);
    c.u.rightCols(PolicyShape::embedding) = p.embedding;
    c.g1 = nn::sigmoid(nn::affine(c.u, p.e2_gw1, p.e2_gb1));
    c.t1 = nn::affine(c.u, p.e2_hw1, p.e2_hb1).array().tanh().matrix();
    c.o1 = c.g1.cwiseProduct(c.t1);
    c.g2 = nn::sigmoid(nn::affine(c.o1, p.e2_gw2, p.e2_gb2));
    c.t2 = nn::affine(c.o1, p.e2_hw2, p.e2_hb2).array().tanh().matrix();
    c.h_prior = c.g2.cwiseProduct(c.t2);

    c.h.resize(d, PolicyShape::fused_width);
    c.h << c.h_data, c.h_prior;
    c.src = nn::affine(c.h, p.src_w, p.src_b);
    c.dst = nn::affine(c.h, p.dst_w, p.dst_b);

    c.pair.resize(d * d, PolicyShape::fused_width);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            c.pair.row(i * d + j) = c.src.row(i).cwiseProduct(c.dst.row(j));
    c.pair_pre = nn::affine(c.pair, p.fuse_w1, p.fuse_b1);
    c.pair_hidden = nn::relu(c.pair_pre);
    const Eigen::MatrixXd flat = nn::affine(c.pair_hidden, p.fuse_w2, p.fuse_b2);

    c.logits.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) c.logits(i, j) = flat(i * d + j, 0);
    c.probs = nn::sigmoid(c.logits);
    c.probs.diagonal().setZero();
    return c;
}

/// Edge probabilities with dropout disabled.
inline ProbabilityMatrix forward(const PolicyModel& model, const NodeFeatureMatrix& feats,
                                 const PriorMatrix& prior_init) {
    return ProbabilityMatrix(forward_cached(model, feats, prior_init.binary_view()).probs);
}

/// Gradient of a scalar objective with respect to all parameters, given its
/// gradient with respect to the logits (diagonal entries are ignored).
inline PolicyParams backward(const PolicyModel& model, const ForwardCache& c,
                             const Eigen::MatrixXd& dlogits) {
    const auto d = static_cast<Eigen::Index>(model.shape.nodes);
    const auto& p = model.params;
    PolicyParams g = p.zeros_like();

    Eigen::MatrixXd dflat(d * d, 1);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) dflat(i * d + j, 0) = i == j ? 0.0 : dlogits(i, j);

    g.fuse_b2(0, 0) = dflat.sum();
    g.fuse_w2 = dflat.transpose() * c.pair_hidden;
    const Eigen::MatrixXd dpre = (dflat * p.fuse_w2).cwiseProduct(nn::relu_mask(c.pair_pre));
    g.fuse_w1 = dpre.transpose() * c.pair;
    g.fuse_b1 = dpre.colwise().sum().transpose();
    const Eigen::MatrixXd dpair = dpre * p.fuse_w1;

    Eigen::MatrixXd dsrc = Eigen::MatrixXd::Zero(d, PolicyShape::fused_width);
    Eigen::MatrixXd ddst = Eigen::MatrixXd::Zero(d, PolicyShape::fused_width);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            if (i == j) continue;
            const auto row = dpair.row(i * d + j);
            dsrc.row(i) += row.cwiseProduct(c.dst.row(j));
            ddst.row(j) += row.cwiseProduct(c.src.row(i));
        }
    g.src_w = dsrc.transpose() * c.h;
    g.src_b = dsrc.colwise().sum().transpose();
    g.dst_w = ddst.transpose() * c.h;
    g.dst_b = ddst.colwise().sum().transpose();
    const Eigen::MatrixXd dh = dsrc * p.src_w + ddst * p.dst_w;
    const Eigen::MatrixXd dh_data = dh.leftCols(PolicyShape::node_width);
    const Eigen::MatrixXd dh_prior = dh.rightCols(PolicyShape::node_width);

    // prior encoder
    auto gated_back = [](const Eigen::MatrixXd& dout, const Eigen::MatrixXd& gate,
                         const Eigen::MatrixXd& cand, Eigen::MatrixXd& da_g, Eigen::MatrixXd& da_h) {
        da_g = dout.cwiseProduct(cand).cwiseProduct(gate).cwiseProduct(
            (1.0 - gate.array()).matrix());
        da_h = dout.cwiseProduct(gate).cwiseProduct((1.0 - cand.array().square()).matrix());
    };
    Eigen::MatrixXd dag2, dah2;
    gated_back(dh_prior, c.g2, c.t2, dag2, dah2);
    g.e2_gw2 = dag2.transpose() * c.o1;
    g.e2_gb2 = dag2.colwise().sum().transpose();
    g.e2_hw2 = dah2.transpose() * c.o1;
    g.e2_hb2 = dah2.colwise().sum().transpose();
    const Eigen::MatrixXd do1 = dag2 * p.e2_gw2 + dah2 * p.e2_hw2;
    Eigen::MatrixXd dag1, dah1;
    gated_back(do1, c.g1, c.t1, dag1, dah1);
    g.e2_gw1 = dag1.transpose() * c.u;
    g.e2_gb1 = dag1.colwise().sum().transpose();
    g.e2_hw1 = dah1.transpose() * c.u;
    g.e2_hb1 = dah1.colwise().sum().transpose();
    const Eigen::MatrixXd du = dag1 * p.e2_gw1 + dah1 * p.e2_hw1;
    g.embedding = du.rightCols(PolicyShape::embedding);

    // data encoder
    const Eigen::MatrixXd dz2 = dh_data.cwiseProduct(nn::relu_mask(c.z2));
    g.e1_w2 = dz2.transpose() * c.a1d;
    g.e1_b2 = dz2.colwise().sum().transpose();
    const Eigen::MatrixXd dz1 =
        (dz2 * p.e1_w2).cwiseProduct(c.drop_mask).cwiseProduct(nn::relu_mask(c.z1));
    g.e1_w1 = dz1.transpose() * c.x;
    g.e1_b1 = dz1.colwise().sum().transpose();
    return g;
}

/// Independent Bernoulli draw for every off-diagonal entry.
inline AdjacencyMatrix sample_graph(const ProbabilityMatrix& p, Rng& rng,
                                    std::vector<std::string> names = {}) {
    const std::size_t d = p.size();
    if (names.empty()) names = default_node_names(d);
    AdjacencyMatrix a(d, std::move(names));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            const double u = uniform01(rng);
            if (u < p(i, j)) a.set(i, j, true);
        }
    return a;
}

inline constexpr double kProbClamp = 1e-7;

/// Sum over off-diagonal entries of the Bernoulli log-likelihood of a under p.
inline double log_prob(const ProbabilityMatrix& p, const AdjacencyMatrix& a) {
    if (p.size() != a.size()) throw ConfigError("log_prob: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (i == j) continue;
            const double q = std::clamp(p(i, j), kProbClamp, 1.0 - kProbClamp);
            s += a(i, j) ? std::log(q) : std::log1p(-q);
        }
    return s;
}

/// Score-function surrogate: mean_b advantage_b * log_prob(sample_b).
/// Its gradient with respect to logit (i,j) is mean_b advantage_b * (a_b(i,j) - p(i,j)).
inline double surrogate_loss(const ProbabilityMatrix& p, const std::vector<AdjacencyMatrix>& samples,
                             const std::vector<double>& advantages) {
    double s = 0.0;
    for (std::size_t b = 0; b < samples.size(); ++b) s += advantages[b] * log_prob(p, samples[b]);
    return s / static_cast<double>(samples.size());
}

inline Eigen::MatrixXd surrogate_logit_gradient(const Eigen::MatrixXd& probs,
                                                const std::vector<AdjacencyMatrix>& samples,
                                                const std::vector<double>& advantages) {
    const auto d = probs.rows();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const Eigen::MatrixXd a = samples[b].to_dense();
        g += advantages[b] * (a - probs);
    }
    g /= static_cast<double>(samples.size());
    g.diagonal().setZero();
    return g;
}

}  // namespace pgdag
