#pragma once

#include <cmath>
#include <vector>

#include "fm/params.hpp"
#include "fm/tensor.hpp"

namespace fm {

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Decay is applied uniformly to every
// non-frozen parameter, directly against the weights rather than through the
// gradient moments. step() consumes and clears the accumulated gradients.
template <typename T>
class Adam {
public:
    Adam(ParamStore<T>& params, AdamConfig cfg = {}) : params_(params), cfg_(cfg) {
        state_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state_[i].m = Tensor<T>(params.at(i).value.shape());
            state_[i].v = Tensor<T>(params.at(i).value.shape());
        }
    }

    const AdamConfig& config() const { return cfg_; }
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
    long step_count() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter<T>& p = params_.at(i);
            if (p.frozen)
                continue;
            Tensor<T>& m = state_[i].m;
            Tensor<T>& v = state_[i].v;
            for (idx_t j = 0; j < p.value.numel(); ++j) {
                const double g = static_cast<double>(p.grad[j]);
                const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * g;
                const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                const double w = static_cast<double>(p.value[j]);
                p.value[j] = static_cast<T>(
                    w - cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                              cfg_.weight_decay * w));
            }
        }
        params_.zero_grads();
    }

private:
    struct State {
        Tensor<T> m;
        Tensor<T> v;
    };

    ParamStore<T>& params_;
    AdamConfig cfg_;
    std::vector<State> state_;
    long t_ = 0;
};

} // namespace fm
