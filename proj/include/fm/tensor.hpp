#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "fm/errors.hpp"

namespace fm {

using idx_t = std::int64_t;

// Dense row-major tensor. float for training, double for gradient checks.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<idx_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), T(0));
    }

    Tensor(std::vector<idx_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != static_cast<idx_t>(data_.size()))
            throw RunError("tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<idx_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<idx_t> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<idx_t>& shape() const { return shape_; }
    idx_t numel() const { return static_cast<idx_t>(data_.size()); }
    idx_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](idx_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](idx_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // 2-D convenience accessors.
    idx_t rows() const { return shape_.at(0); }
    idx_t cols() const { return shape_.at(1); }
    T& at(idx_t r, idx_t c) { return data_[static_cast<std::size_t>(r * cols() + c)]; }
    const T& at(idx_t r, idx_t c) const {
        return data_[static_cast<std::size_t>(r * cols() + c)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (const T v : data_)
            if (!std::isfinite(static_cast<double>(v)))
                return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + "]";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (idx_t i = 0; i < numel(); ++i)
            out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
        return out;
    }

    static idx_t count(const std::vector<idx_t>& shape) {
        idx_t n = 1;
        for (const idx_t d : shape) {
            if (d < 0)
                throw RunError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<idx_t> shape_;
    std::vector<T> data_;
};

} // namespace fm
