#pragma once

#include <cmath>
#include <vector>

#include "trajseg/numerics/autodiff.hpp"

namespace trajseg {

struct AdamWOptions {
    double learning_rate = 3e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.0;  // global L2 norm; 0 disables
};

/// Adam with decoupled weight decay. Moments are kept in double.
template <typename S>
class AdamW {
public:
    explicit AdamW(AdamWOptions options = {}) : opt_(options) {}

    /// Applies one update with `grads` scaled by `scale` (e.g. 1/batch).
    /// Returns the global gradient norm before clipping.
    double step(ParamStore<S>& params, const Gradients<S>& grads, double scale = 1.0) {
        if (m_.size() != params.size()) {
            m_.assign(params.size(), Eigen::MatrixXd());
            v_.assign(params.size(), Eigen::MatrixXd());
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i] = Eigen::MatrixXd::Zero(params[i].value.rows(), params[i].value.cols());
                v_[i] = m_[i];
            }
        }
        double norm2 = 0;
        for (std::size_t i = 0; i < params.size() && i < grads.grads.size(); ++i) {
            if (grads.grads[i].size() != 0) norm2 += grads.grads[i].template cast<double>().squaredNorm() * scale * scale;
        }
        const double norm = std::sqrt(norm2);
        double g_scale = scale;
        if (opt_.grad_clip > 0 && norm > opt_.grad_clip) g_scale *= opt_.grad_clip / norm;
        ++t_;
        const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Eigen::MatrixXd p = params[i].value.template cast<double>();
            if (opt_.weight_decay != 0) p *= 1.0 - opt_.learning_rate * opt_.weight_decay;
            if (i < grads.grads.size() && grads.grads[i].size() != 0) {
                const Eigen::MatrixXd g = grads.grads[i].template cast<double>() * g_scale;
                m_[i] = opt_.beta1 * m_[i] + (1 - opt_.beta1) * g;
                v_[i] = opt_.beta2 * v_[i] + (1 - opt_.beta2) * g.cwiseProduct(g);
            } else {
                m_[i] *= opt_.beta1;
                v_[i] *= opt_.beta2;
            }
            p.array() -= opt_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
            params[i].value = p.template cast<S>();
        }
        return norm;
    }

    [[nodiscard]] long long steps() const { return t_; }

private:
    AdamWOptions opt_;
    std::vector<Eigen::MatrixXd> m_, v_;
    long long t_ = 0;
};

}  // namespace trajseg
