#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pgdag/rng.hpp"

namespace pgdag::nn {

/// Xavier/Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void xavier_uniform(Eigen::MatrixXd& w, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * uniform01(rng) - 1.0) * a;
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
    return x.unaryExpr([](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

inline Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& x) {
    return (x.array() > 0.0).cast<double>().matrix();
}

/// Affine map applied to each row of x: x * W^T + b^T, with W stored out x in.
/// Biases are stored as out x 1 matrices.
inline Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                              const Eigen::MatrixXd& b) {
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.col(0).transpose();
    return y;
}

/// Adaptive-moment first-order optimizer over a fixed list of tensors.
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(Options opt) : opt_(opt) {}

    double learning_rate() const noexcept { return opt_.lr; }
    void set_learning_rate(double lr) noexcept { opt_.lr = lr; }

    void step(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<const Eigen::MatrixXd*>& grads) {
        if (m_.empty()) {
            for (const auto* p : params) {
                m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
                v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            const Eigen::MatrixXd& g = *grads[k];
            m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * g;
            v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
            params[k]->array() -=
                opt_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + opt_.eps);
        }
    }

private:
    Options opt_;
    std::vector<Eigen::MatrixXd> m_, v_;
    long t_ = 0;
};

}  // namespace pgdag::nn
