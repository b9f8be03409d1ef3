#pragma once

// Math kernels used by the autodiff tape. Every kernel exists twice: the
// OpenMP-parallel default in fm::kernels and a plain serial reference in
// fm::kernels::serial. The parallel variants distribute whole output rows
// (or elements) across threads and keep the per-element arithmetic order
// identical to the reference, so both produce bitwise-equal results. Tests
// compare them directly and tools/kernel_bench times them against each other.

#include <cmath>
#include <cstdint>

#include "fm/tensor.hpp"

namespace fm::kernels {

namespace detail {

template <typename T>
inline T dot_step(const T* a, const T* b, idx_t k, idx_t stride_a, idx_t stride_b) {
    T acc = 0;
    for (idx_t i = 0; i < k; ++i)
        acc += a[i * stride_a] * b[i * stride_b];
    return acc;
}

// One output element of C = op(A)·op(B). Shared by both variants so the
// accumulation order cannot drift between them.
template <typename T>
inline T gemm_cell(const T* a, const T* b, idx_t i, idx_t j, idx_t m, idx_t n, idx_t k,
                   bool trans_a, bool trans_b) {
    const T* arow = trans_a ? a + i : a + i * k;
    const idx_t astride = trans_a ? m : 1;
    const T* bcol = trans_b ? b + j * k : b + j;
    const idx_t bstride = trans_b ? 1 : n;
    return dot_step(arow, bcol, k, astride, bstride);
}

template <typename T>
inline void softmax_row(const T* in, T* out, idx_t cols) {
    T mx = in[0];
    for (idx_t c = 1; c < cols; ++c)
        if (in[c] > mx)
            mx = in[c];
    T sum = 0;
    for (idx_t c = 0; c < cols; ++c) {
        out[c] = std::exp(in[c] - mx);
        sum += out[c];
    }
    for (idx_t c = 0; c < cols; ++c)
        out[c] /= sum;
}

template <typename T>
inline void layer_norm_row(const T* in, T* out, const T* gain, const T* bias, idx_t cols,
                           T eps) {
    T mean = 0;
    for (idx_t c = 0; c < cols; ++c)
        mean += in[c];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (idx_t c = 0; c < cols; ++c) {
        const T d = in[c] - mean;
        var += d * d;
    }
    var /= static_cast<T>(cols);
    const T inv = T(1) / std::sqrt(var + eps);
    for (idx_t c = 0; c < cols; ++c)
        out[c] = gain[c] * ((in[c] - mean) * inv) + bias[c];
}

template <typename T>
inline T gelu_one(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

} // namespace detail

namespace serial {

// C(m,n) = op(A)·op(B), op = transpose when the flag is set.
// accumulate adds into C instead of overwriting it.
template <typename T>
void gemm(const T* a, const T* b, T* c, idx_t m, idx_t n, idx_t k, bool trans_a = false,
          bool trans_b = false, bool accumulate = false) {
    for (idx_t i = 0; i < m; ++i)
        for (idx_t j = 0; j < n; ++j) {
            const T v = detail::gemm_cell(a, b, i, j, m, n, k, trans_a, trans_b);
            c[i * n + j] = accumulate ? c[i * n + j] + v : v;
        }
}

template <typename T>
void softmax_rows(const T* in, T* out, idx_t rows, idx_t cols) {
    for (idx_t r = 0; r < rows; ++r)
        detail::softmax_row(in + r * cols, out + r * cols, cols);
}

template <typename T>
void layer_norm_rows(const T* in, T* out, const T* gain, const T* bias, idx_t rows,
                     idx_t cols, T eps) {
    for (idx_t r = 0; r < rows; ++r)
        detail::layer_norm_row(in + r * cols, out + r * cols, gain, bias, cols, eps);
}

template <typename T>
void gelu(const T* in, T* out, idx_t n) {
    for (idx_t i = 0; i < n; ++i)
        out[i] = detail::gelu_one(in[i]);
}

template <typename T>
void tanh_map(const T* in, T* out, idx_t n) {
    for (idx_t i = 0; i < n; ++i)
        out[i] = std::tanh(in[i]);
}

} // namespace serial

template <typename T>
void gemm(const T* a, const T* b, T* c, idx_t m, idx_t n, idx_t k, bool trans_a = false,
          bool trans_b = false, bool accumulate = false) {
#pragma omp parallel for schedule(static)
    for (idx_t i = 0; i < m; ++i)
        for (idx_t j = 0; j < n; ++j) {
            const T v = detail::gemm_cell(a, b, i, j, m, n, k, trans_a, trans_b);
            c[i * n + j] = accumulate ? c[i * n + j] + v : v;
        }
}

template <typename T>
void softmax_rows(const T* in, T* out, idx_t rows, idx_t cols) {
#pragma omp parallel for schedule(static)
    for (idx_t r = 0; r < rows; ++r)
        detail::softmax_row(in + r * cols, out + r * cols, cols);
}

template <typename T>
void layer_norm_rows(const T* in, T* out, const T* gain, const T* bias, idx_t rows,
                     idx_t cols, T eps) {
#pragma omp parallel for schedule(static)
    for (idx_t r = 0; r < rows; ++r)
        detail::layer_norm_row(in + r * cols, out + r * cols, gain, bias, cols, eps);
}

template <typename T>
void gelu(const T* in, T* out, idx_t n) {
#pragma omp parallel for schedule(static)
    for (idx_t i = 0; i < n; ++i)
        out[i] = detail::gelu_one(in[i]);
}

template <typename T>
void tanh_map(const T* in, T* out, idx_t n) {
#pragma omp parallel for schedule(static)
    for (idx_t i = 0; i < n; ++i)
        out[i] = std::tanh(in[i]);
}

} // namespace fm::kernels
