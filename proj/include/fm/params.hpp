#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fm/errors.hpp"
#include "fm/tensor.hpp"

namespace fm {

// A named trainable tensor plus its gradient accumulator.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool frozen = false;

    void zero_grad() {
        std::fill(grad.data(), grad.data() + grad.numel(), T(0));
    }
};

// Owns parameters in insertion order. Order is part of the public contract:
// checkpoints serialize tensors in this order, so it must be deterministic.
template <typename T>
class ParamStore {
public:
    Parameter<T>& add(const std::string& name, Tensor<T> value) {
        if (index_.count(name))
            throw RunError("duplicate parameter name: " + name);
        auto p = std::make_unique<Parameter<T>>();
        p->name = name;
        p->grad = Tensor<T>(value.shape());
        p->value = std::move(value);
        index_.emplace(name, params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Parameter<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end())
            throw RunError("unknown parameter: " + name);
        return *params_[it->second];
    }

    const Parameter<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw RunError("unknown parameter: " + name);
        return *params_[it->second];
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    Parameter<T>& at(std::size_t i) { return *params_.at(i); }
    const Parameter<T>& at(std::size_t i) const { return *params_.at(i); }

    idx_t total_values() const {
        idx_t n = 0;
        for (const auto& p : params_)
            n += p->value.numel();
        return n;
    }

    // Deep copy of values and frozen flags; gradients start at zero.
    ParamStore clone() const {
        ParamStore out;
        for (const auto& p : params_) {
            Parameter<T>& q = out.add(p->name, p->value);
            q.frozen = p->frozen;
        }
        return out;
    }

    void zero_grads() {
        for (auto& p : params_)
            p->zero_grad();
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace fm
