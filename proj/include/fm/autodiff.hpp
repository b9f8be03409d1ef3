#pragma once

// Reverse-mode autodiff over dense tensors. Operations append nodes to a
// Tape; backward() walks the tape once in reverse and accumulates parameter
// gradients into Parameter::grad. The op set is exactly what the encoder and
// classification heads need; every op validates input shapes up front.
//
// A tape is single-shot: build a forward graph, call backward() at most once,
// then discard it. Gradients survive in the parameters, not the tape.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fm/errors.hpp"
#include "fm/kernels.hpp"
#include "fm/params.hpp"
#include "fm/rng.hpp"
#include "fm/tensor.hpp"

namespace fm {

using ValueId = int;

template <typename T>
class Tape {
public:
    const Tensor<T>& value(ValueId id) const {
        const Node& n = node(id);
        return n.param ? n.param->value : n.owned;
    }

    // Gradient buffer for a node, allocated on first touch. Parameter leaves
    // alias Parameter::grad directly so accumulation lands in the store.
    Tensor<T>& grad(ValueId id) {
        Node& n = node(id);
        if (n.param)
            return n.param->grad;
        if (!n.grad)
            n.grad = std::make_unique<Tensor<T>>(value(id).shape());
        return *n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    ValueId constant(Tensor<T> t) {
        Node n;
        n.owned = std::move(t);
        return push(std::move(n));
    }

    ValueId param(Parameter<T>& p) {
        Node n;
        n.param = &p;
        return push(std::move(n));
    }

    // C(m,n) = A(m,k) · B(k,n)
    ValueId matmul(ValueId a, ValueId b) {
        const auto& av = value(a);
        const auto& bv = value(b);
        require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(), "matmul",
                {a, b});
        const idx_t m = av.rows(), k = av.cols(), nn = bv.cols();
        Tensor<T> out({m, nn});
        kernels::gemm(av.data(), bv.data(), out.data(), m, nn, k);
        return push_op(std::move(out), [this, a, b, m, k, nn](ValueId self) {
            const T* g = grad(self).data();
            kernels::gemm(g, value(b).data(), grad(a).data(), m, k, nn, false, true, true);
            kernels::gemm(value(a).data(), g, grad(b).data(), k, nn, m, true, false, true);
        });
    }

    // Batched matmul: A(B,m,k) · B(B,k,n), or A(B,m,k) · B(B,n,k)^T per batch.
    ValueId bmm(ValueId a, ValueId b, bool trans_b = false) {
        const auto& av = value(a);
        const auto& bv = value(b);
        require(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0), "bmm", {a, b});
        const idx_t nb = av.dim(0), m = av.dim(1), k = av.dim(2);
        const idx_t n = trans_b ? bv.dim(1) : bv.dim(2);
        require(trans_b ? bv.dim(2) == k : bv.dim(1) == k, "bmm", {a, b});
        Tensor<T> out({nb, m, n});
        for (idx_t i = 0; i < nb; ++i)
            kernels::gemm(av.data() + i * m * k, bv.data() + i * (trans_b ? n * k : k * n),
                          out.data() + i * m * n, m, n, k, false, trans_b);
        return push_op(std::move(out), [this, a, b, trans_b, nb, m, k, n](ValueId self) {
            for (idx_t i = 0; i < nb; ++i) {
                const T* g = grad(self).data() + i * m * n;
                const T* bp = value(b).data() + i * (trans_b ? n * k : k * n);
                const T* ap = value(a).data() + i * m * k;
                T* ga = grad(a).data() + i * m * k;
                T* gb = grad(b).data() + i * (trans_b ? n * k : k * n);
                if (trans_b) {
                    // C = A·B^T: dA += dC·B, dB += dC^T·A
                    kernels::gemm(g, bp, ga, m, k, n, false, false, true);
                    kernels::gemm(g, ap, gb, n, k, m, true, false, true);
                } else {
                    kernels::gemm(g, bp, ga, m, k, n, false, true, true);
                    kernels::gemm(ap, g, gb, k, n, m, true, false, true);
                }
            }
        });
    }

    ValueId add(ValueId a, ValueId b) {
        const auto& av = value(a);
        const auto& bv = value(b);
        require(av.same_shape(bv), "add", {a, b});
        Tensor<T> out(av.shape());
        for (idx_t i = 0; i < out.numel(); ++i)
            out[i] = av[i] + bv[i];
        return push_op(std::move(out), [this, a, b](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            Tensor<T>& gb = grad(b);
            for (idx_t i = 0; i < g.numel(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        });
    }

    // Broadcast-add a rank-1 vector over the last dimension.
    ValueId add_last(ValueId a, ValueId v) {
        const auto& av = value(a);
        const auto& vv = value(v);
        require(av.rank() >= 1 && vv.rank() == 1, "add_last", {a, v});
        const idx_t c = av.shape().back();
        require(vv.numel() == c, "add_last", {a, v});
        const idx_t rows = av.numel() / c;
        Tensor<T> out(av.shape());
        for (idx_t r = 0; r < rows; ++r)
            for (idx_t j = 0; j < c; ++j)
                out[r * c + j] = av[r * c + j] + vv[j];
        return push_op(std::move(out), [this, a, v, rows, c](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            Tensor<T>& gv = grad(v);
            for (idx_t r = 0; r < rows; ++r)
                for (idx_t j = 0; j < c; ++j) {
                    ga[r * c + j] += g[r * c + j];
                    gv[j] += g[r * c + j];
                }
        });
    }

    ValueId scale(ValueId a, T s) {
        const auto& av = value(a);
        Tensor<T> out(av.shape());
        for (idx_t i = 0; i < out.numel(); ++i)
            out[i] = av[i] * s;
        return push_op(std::move(out), [this, a, s](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t i = 0; i < g.numel(); ++i)
                ga[i] += g[i] * s;
        });
    }

    // Softmax over the last dimension.
    ValueId softmax_last(ValueId a) {
        const auto& av = value(a);
        require(av.rank() >= 1, "softmax_last", {a});
        const idx_t c = av.shape().back();
        const idx_t rows = av.numel() / c;
        Tensor<T> out(av.shape());
        kernels::softmax_rows(av.data(), out.data(), rows, c);
        return push_op(std::move(out), [this, a, rows, c](ValueId self) {
            const Tensor<T>& y = value(self);
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t r = 0; r < rows; ++r) {
                T dot = 0;
                for (idx_t j = 0; j < c; ++j)
                    dot += g[r * c + j] * y[r * c + j];
                for (idx_t j = 0; j < c; ++j)
                    ga[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
            }
        });
    }

    // Per-row normalization over the last dimension with learned gain/bias.
    ValueId layer_norm(ValueId a, ValueId gain, ValueId bias, T eps) {
        const auto& av = value(a);
        const auto& gv = value(gain);
        const auto& bv = value(bias);
        const idx_t c = av.shape().back();
        require(gv.rank() == 1 && bv.rank() == 1 && gv.numel() == c && bv.numel() == c,
                "layer_norm", {a, gain, bias});
        const idx_t rows = av.numel() / c;
        Tensor<T> out(av.shape());
        kernels::layer_norm_rows(av.data(), out.data(), gv.data(), bv.data(), rows, c, eps);
        return push_op(std::move(out), [this, a, gain, bias, eps, rows, c](ValueId self) {
            const Tensor<T>& x = value(a);
            const Tensor<T>& gn = value(gain);
            const Tensor<T>& g = grad(self);
            Tensor<T>& gx = grad(a);
            Tensor<T>& gg = grad(gain);
            Tensor<T>& gb = grad(bias);
            std::vector<T> xhat(static_cast<std::size_t>(c));
            for (idx_t r = 0; r < rows; ++r) {
                const T* xr = x.data() + r * c;
                const T* gr = g.data() + r * c;
                T mean = 0;
                for (idx_t j = 0; j < c; ++j)
                    mean += xr[j];
                mean /= static_cast<T>(c);
                T var = 0;
                for (idx_t j = 0; j < c; ++j)
                    var += (xr[j] - mean) * (xr[j] - mean);
                var /= static_cast<T>(c);
                const T inv = T(1) / std::sqrt(var + eps);
                T sum_dh = 0, sum_dh_xhat = 0;
                for (idx_t j = 0; j < c; ++j) {
                    xhat[j] = (xr[j] - mean) * inv;
                    const T dh = gr[j] * gn[j];
                    sum_dh += dh;
                    sum_dh_xhat += dh * xhat[j];
                    gg[j] += gr[j] * xhat[j];
                    gb[j] += gr[j];
                }
                const T inv_c = T(1) / static_cast<T>(c);
                for (idx_t j = 0; j < c; ++j) {
                    const T dh = gr[j] * gn[j];
                    gx[r * c + j] += inv * (dh - sum_dh * inv_c - xhat[j] * sum_dh_xhat * inv_c);
                }
            }
        });
    }

    ValueId gelu(ValueId a) {
        const auto& av = value(a);
        Tensor<T> out(av.shape());
        kernels::gelu(av.data(), out.data(), av.numel());
        return push_op(std::move(out), [this, a](ValueId self) {
            const Tensor<T>& x = value(a);
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t i = 0; i < g.numel(); ++i) {
                const T xi = x[i];
                const T cdf = T(0.5) * (T(1) + std::erf(xi * T(0.7071067811865475)));
                const T pdf = std::exp(T(-0.5) * xi * xi) * T(0.3989422804014327);
                ga[i] += g[i] * (cdf + xi * pdf);
            }
        });
    }

    ValueId tanh_(ValueId a) {
        const auto& av = value(a);
        Tensor<T> out(av.shape());
        kernels::tanh_map(av.data(), out.data(), av.numel());
        return push_op(std::move(out), [this, a](ValueId self) {
            const Tensor<T>& y = value(self);
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t i = 0; i < g.numel(); ++i)
                ga[i] += g[i] * (T(1) - y[i] * y[i]);
        });
    }

    // Inverted dropout. In eval mode (or p == 0) this is the identity and no
    // node is added. Mask elements are drawn one by one from rng, so the
    // stream consumption is reproducible.
    ValueId dropout(ValueId a, double p, bool training, Rng& rng) {
        if (p < 0.0 || p >= 1.0)
            throw RunError("dropout probability must be in [0,1)");
        if (!training || p == 0.0)
            return a;
        const auto& av = value(a);
        auto mask = std::make_shared<std::vector<T>>(static_cast<std::size_t>(av.numel()));
        const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
        Tensor<T> out(av.shape());
        for (idx_t i = 0; i < av.numel(); ++i) {
            const T m = rng.uniform() < p ? T(0) : keep_scale;
            (*mask)[static_cast<std::size_t>(i)] = m;
            out[i] = av[i] * m;
        }
        return push_op(std::move(out), [this, a, mask](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t i = 0; i < g.numel(); ++i)
                ga[i] += g[i] * (*mask)[static_cast<std::size_t>(i)];
        });
    }

    // Gather rows of a (V, H) table: out(i, :) = table(ids[i], :).
    ValueId embedding_rows(ValueId table, const std::vector<int>& ids) {
        const auto& tv = value(table);
        require(tv.rank() == 2, "embedding_rows", {table});
        const idx_t v = tv.rows(), h = tv.cols();
        for (const int id : ids)
            if (id < 0 || id >= v)
                throw RunError("embedding index " + std::to_string(id) +
                               " out of range for table with " + std::to_string(v) +
                               " rows");
        const idx_t n = static_cast<idx_t>(ids.size());
        Tensor<T> out({n, h});
        for (idx_t i = 0; i < n; ++i)
            for (idx_t j = 0; j < h; ++j)
                out[i * h + j] = tv[static_cast<idx_t>(ids[i]) * h + j];
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        return push_op(std::move(out), [this, table, ids_copy, n, h](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& gt = grad(table);
            for (idx_t i = 0; i < n; ++i)
                for (idx_t j = 0; j < h; ++j)
                    gt[static_cast<idx_t>((*ids_copy)[static_cast<std::size_t>(i)]) * h + j] +=
                        g[i * h + j];
        });
    }

    // (L, H) -> (heads, L, H/heads)
    ValueId split_heads(ValueId a, idx_t heads) {
        const auto& av = value(a);
        require(av.rank() == 2 && heads > 0 && av.cols() % heads == 0, "split_heads", {a});
        const idx_t l = av.rows(), h = av.cols(), dh = h / heads;
        Tensor<T> out({heads, l, dh});
        for (idx_t hd = 0; hd < heads; ++hd)
            for (idx_t i = 0; i < l; ++i)
                for (idx_t d = 0; d < dh; ++d)
                    out[(hd * l + i) * dh + d] = av[i * h + hd * dh + d];
        return push_op(std::move(out), [this, a, heads, l, h, dh](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t hd = 0; hd < heads; ++hd)
                for (idx_t i = 0; i < l; ++i)
                    for (idx_t d = 0; d < dh; ++d)
                        ga[i * h + hd * dh + d] += g[(hd * l + i) * dh + d];
        });
    }

    // (heads, L, dh) -> (L, heads*dh)
    ValueId merge_heads(ValueId a) {
        const auto& av = value(a);
        require(av.rank() == 3, "merge_heads", {a});
        const idx_t heads = av.dim(0), l = av.dim(1), dh = av.dim(2);
        const idx_t h = heads * dh;
        Tensor<T> out({l, h});
        for (idx_t hd = 0; hd < heads; ++hd)
            for (idx_t i = 0; i < l; ++i)
                for (idx_t d = 0; d < dh; ++d)
                    out[i * h + hd * dh + d] = av[(hd * l + i) * dh + d];
        return push_op(std::move(out), [this, a, heads, l, dh, h](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t hd = 0; hd < heads; ++hd)
                for (idx_t i = 0; i < l; ++i)
                    for (idx_t d = 0; d < dh; ++d)
                        ga[(hd * l + i) * dh + d] += g[i * h + hd * dh + d];
        });
    }

    // Extract row r of a 2-D tensor as a (1, C) tensor.
    ValueId row(ValueId a, idx_t r) {
        const auto& av = value(a);
        require(av.rank() == 2 && r >= 0 && r < av.rows(), "row", {a});
        const idx_t c = av.cols();
        Tensor<T> out({1, c});
        for (idx_t j = 0; j < c; ++j)
            out[j] = av[r * c + j];
        return push_op(std::move(out), [this, a, r, c](ValueId self) {
            const Tensor<T>& g = grad(self);
            Tensor<T>& ga = grad(a);
            for (idx_t j = 0; j < c; ++j)
                ga[r * c + j] += g[j];
        });
    }

    // Stack 2-D tensors with equal column counts along the row axis.
    ValueId concat_rows(const std::vector<ValueId>& parts) {
        if (parts.empty())
            throw RunError("concat_rows: empty input list");
        const idx_t c = value(parts[0]).cols();
        idx_t total = 0;
        for (const ValueId p : parts) {
            require(value(p).rank() == 2 && value(p).cols() == c, "concat_rows", {p});
            total += value(p).rows();
        }
        Tensor<T> out({total, c});
        idx_t off = 0;
        for (const ValueId p : parts) {
            const auto& pv = value(p);
            for (idx_t i = 0; i < pv.numel(); ++i)
                out[off + i] = pv[i];
            off += pv.numel();
        }
        auto parts_copy = std::make_shared<std::vector<ValueId>>(parts);
        return push_op(std::move(out), [this, parts_copy](ValueId self) {
            const Tensor<T>& g = grad(self);
            idx_t off = 0;
            for (const ValueId p : *parts_copy) {
                Tensor<T>& gp = grad(p);
                for (idx_t i = 0; i < gp.numel(); ++i)
                    gp[i] += g[off + i];
                off += gp.numel();
            }
        });
    }

    // Sum of all elements, as a (1,) scalar.
    ValueId sum(ValueId a) {
        const auto& av = value(a);
        T s = 0;
        for (idx_t i = 0; i < av.numel(); ++i)
            s += av[i];
        Tensor<T> out({1});
        out[0] = s;
        return push_op(std::move(out), [this, a](ValueId self) {
            const T g = grad(self)[0];
            Tensor<T>& ga = grad(a);
            for (idx_t i = 0; i < ga.numel(); ++i)
                ga[i] += g;
        });
    }

    // Mean softmax cross-entropy of (N, C) logits against integer labels,
    // computed via per-row log-sum-exp. Returns a (1,) scalar.
    ValueId cross_entropy_mean(ValueId logits, const std::vector<int>& labels) {
        const auto& lv = value(logits);
        require(lv.rank() == 2 && lv.rows() == static_cast<idx_t>(labels.size()),
                "cross_entropy_mean", {logits});
        const idx_t n = lv.rows(), c = lv.cols();
        for (const int lab : labels)
            if (lab < 0 || lab >= c)
                throw RunError("label " + std::to_string(lab) + " out of range for " +
                               std::to_string(c) + " classes");
        T total = 0;
        for (idx_t i = 0; i < n; ++i) {
            const T* rowp = lv.data() + i * c;
            T mx = rowp[0];
            for (idx_t j = 1; j < c; ++j)
                if (rowp[j] > mx)
                    mx = rowp[j];
            T se = 0;
            for (idx_t j = 0; j < c; ++j)
                se += std::exp(rowp[j] - mx);
            total += mx + std::log(se) - rowp[labels[static_cast<std::size_t>(i)]];
        }
        Tensor<T> out({1});
        out[0] = total / static_cast<T>(n);
        auto labels_copy = std::make_shared<std::vector<int>>(labels);
        return push_op(std::move(out), [this, logits, labels_copy, n, c](ValueId self) {
            const T g = grad(self)[0] / static_cast<T>(n);
            const Tensor<T>& lv2 = value(logits);
            Tensor<T>& gl = grad(logits);
            std::vector<T> p(static_cast<std::size_t>(c));
            for (idx_t i = 0; i < n; ++i) {
                kernels::detail::softmax_row(lv2.data() + i * c, p.data(), c);
                for (idx_t j = 0; j < c; ++j) {
                    const T onehot =
                        j == (*labels_copy)[static_cast<std::size_t>(i)] ? T(1) : T(0);
                    gl[i * c + j] += g * (p[static_cast<std::size_t>(j)] - onehot);
                }
            }
        });
    }

    // Reverse sweep from a scalar node. Seeds its gradient with 1 and visits
    // every node that contributed to it, newest first.
    void backward(ValueId loss) {
        if (value(loss).numel() != 1)
            throw RunError("backward requires a scalar loss, got shape " +
                           value(loss).shape_str());
        grad(loss)[0] += T(1);
        for (ValueId id = static_cast<ValueId>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.back && (n.param || n.grad))
                n.back(id);
        }
    }

private:
    struct Node {
        Tensor<T> owned;
        Parameter<T>* param = nullptr;
        std::unique_ptr<Tensor<T>> grad;
        std::function<void(ValueId)> back;
    };

    Node& node(ValueId id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const Node& node(ValueId id) const { return nodes_.at(static_cast<std::size_t>(id)); }

    ValueId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<ValueId>(nodes_.size()) - 1;
    }

    ValueId push_op(Tensor<T> out, std::function<void(ValueId)> back) {
        Node n;
        n.owned = std::move(out);
        n.back = std::move(back);
        return push(std::move(n));
    }

    void require(bool ok, const char* op, std::initializer_list<ValueId> ins) {
        if (ok)
            return;
        std::string msg = std::string(op) + ": incompatible shapes";
        for (const ValueId id : ins)
            msg += " " + value(id).shape_str();
        throw RunError(msg);
    }

    std::vector<Node> nodes_;
};

} // namespace fm
