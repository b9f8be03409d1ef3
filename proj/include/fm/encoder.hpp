#pragma once

// BERT-style transformer encoder built on the autodiff tape: token/position/
// segment embeddings, masked multi-head self-attention, GELU feed-forward
// blocks, residual + layer-norm sublayers, and a tanh pooler over the CLS
// position. Shapes come from EncoderConfig; named presets cover the published
// base configurations plus a toy shape for tests.

#include <cmath>
#include <string>
#include <vector>

#include "fm/autodiff.hpp"
#include "fm/errors.hpp"
#include "fm/params.hpp"
#include "fm/rng.hpp"
#include "fm/tensor.hpp"
#include "fm/tokenizer.hpp"

namespace fm {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kInitStd = 0.02;
inline constexpr double kMaskBias = -1e9;
inline constexpr int kSegmentTypes = 2;

struct EncoderConfig {
    int num_layers = 2;
    int hidden_size = 32;
    int num_heads = 2;
    int ffn_size = 64;
    int vocab_size = 100;
    int max_positions = 64;
    double dropout_p = 0.1;
    bool cased = false;

    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

struct TensorSpec {
    std::string name;
    std::vector<idx_t> shape;

    idx_t numel() const { return Tensor<float>::count(shape); }
};

// Encoder parameters in their canonical (serialization) order.
std::vector<TensorSpec> encoder_param_specs(const EncoderConfig& cfg);

idx_t encoder_param_count(const EncoderConfig& cfg);

struct Preset {
    std::string name;
    EncoderConfig config;
};

const std::vector<Preset>& preset_registry();
const EncoderConfig& find_preset(const std::string& name);

// Attention probabilities per layer, captured when a trace is requested.
template <typename T>
struct AttentionTrace {
    std::vector<Tensor<T>> layer_probs; // each (heads, L, L)
};

namespace detail {
inline std::string layer_param(int layer, const char* suffix) {
    return "layer." + std::to_string(layer) + "." + suffix;
}

inline bool is_norm_gain(const std::string& name) {
    return name.size() > 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
}

inline bool is_bias(const std::string& name) {
    return name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
}
} // namespace detail

// Fills a store with freshly initialized encoder weights: truncated normal
// (std 0.02) for matrices and embeddings, ones for layer-norm gains, zeros
// for biases. Draws happen in canonical spec order, so a seed pins every bit.
template <typename T>
void init_encoder(ParamStore<T>& store, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    for (const TensorSpec& spec : encoder_param_specs(cfg)) {
        Tensor<T> t(spec.shape);
        if (detail::is_norm_gain(spec.name)) {
            std::fill(t.data(), t.data() + t.numel(), T(1));
        } else if (detail::is_bias(spec.name)) {
            // already zero
        } else {
            for (idx_t i = 0; i < t.numel(); ++i)
                t[i] = static_cast<T>(rng.truncated_normal(kInitStd));
        }
        store.add(spec.name, std::move(t));
    }
}

// Full encoder stack for one example. Returns the (L, hidden) hidden states.
// PAD key positions get an additive -1e9 before every softmax, so their
// attention mass vanishes. Dropout consumes rng only when training is true.
template <typename T>
ValueId encoder_forward(Tape<T>& tape, ParamStore<T>& store, const EncoderConfig& cfg,
                        const EncodedInput& x, bool training, Rng& rng,
                        AttentionTrace<T>* trace = nullptr) {
    cfg.validate();
    const idx_t l = x.length();
    if (l == 0)
        throw RunError("encoder_forward: empty input");
    if (l > cfg.max_positions)
        throw RunError("sequence length " + std::to_string(l) +
                       " exceeds max_positions " + std::to_string(cfg.max_positions));
    if (x.mask.size() != x.ids.size() || x.segments.size() != x.ids.size())
        throw RunError("encoder_forward: ids/mask/segments lengths differ");
    for (const int s : x.segments)
        if (s < 0 || s >= kSegmentTypes)
            throw RunError("segment id out of range: " + std::to_string(s));

    std::vector<int> positions(static_cast<std::size_t>(l));
    for (idx_t i = 0; i < l; ++i)
        positions[static_cast<std::size_t>(i)] = static_cast<int>(i);

    const ValueId tok =
        tape.embedding_rows(tape.param(store.get("embeddings.token")), x.ids);
    const ValueId pos =
        tape.embedding_rows(tape.param(store.get("embeddings.position")), positions);
    const ValueId seg =
        tape.embedding_rows(tape.param(store.get("embeddings.segment")), x.segments);
    ValueId h = tape.layer_norm(tape.add(tape.add(tok, pos), seg),
                                tape.param(store.get("embeddings.norm.gain")),
                                tape.param(store.get("embeddings.norm.bias")),
                                static_cast<T>(kLayerNormEps));
    h = tape.dropout(h, cfg.dropout_p, training, rng);

    Tensor<T> mask_bias({l});
    for (idx_t i = 0; i < l; ++i)
        mask_bias[i] = x.mask[static_cast<std::size_t>(i)] ? T(0) : static_cast<T>(kMaskBias);
    const ValueId mask_vec = tape.constant(std::move(mask_bias));

    const idx_t heads = cfg.num_heads;
    const T inv_sqrt_dh =
        static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.hidden_size / cfg.num_heads)));

    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        auto proj = [&](const char* which) {
            const ValueId w = tape.param(
                store.get(detail::layer_param(layer, which) + std::string(".weight")));
            const ValueId b = tape.param(
                store.get(detail::layer_param(layer, which) + std::string(".bias")));
            return tape.add_last(tape.matmul(h, w), b);
        };
        const ValueId q = tape.split_heads(proj("attention.query"), heads);
        const ValueId k = tape.split_heads(proj("attention.key"), heads);
        const ValueId v = tape.split_heads(proj("attention.value"), heads);

        const ValueId scores =
            tape.add_last(tape.scale(tape.bmm(q, k, true), inv_sqrt_dh), mask_vec);
        const ValueId probs = tape.softmax_last(scores);
        if (trace)
            trace->layer_probs.push_back(tape.value(probs));

        const ValueId ctx = tape.bmm(tape.dropout(probs, cfg.dropout_p, training, rng), v);
        ValueId attn = tape.add_last(
            tape.matmul(tape.merge_heads(ctx),
                        tape.param(store.get(
                            detail::layer_param(layer, "attention.output.weight")))),
            tape.param(store.get(detail::layer_param(layer, "attention.output.bias"))));
        attn = tape.dropout(attn, cfg.dropout_p, training, rng);
        h = tape.layer_norm(
            tape.add(h, attn),
            tape.param(store.get(detail::layer_param(layer, "attention.norm.gain"))),
            tape.param(store.get(detail::layer_param(layer, "attention.norm.bias"))),
            static_cast<T>(kLayerNormEps));

        const ValueId inner = tape.gelu(tape.add_last(
            tape.matmul(h,
                        tape.param(store.get(detail::layer_param(layer, "ffn.inner.weight")))),
            tape.param(store.get(detail::layer_param(layer, "ffn.inner.bias")))));
        ValueId ffn = tape.add_last(
            tape.matmul(inner,
                        tape.param(store.get(detail::layer_param(layer, "ffn.output.weight")))),
            tape.param(store.get(detail::layer_param(layer, "ffn.output.bias"))));
        ffn = tape.dropout(ffn, cfg.dropout_p, training, rng);
        h = tape.layer_norm(
            tape.add(h, ffn),
            tape.param(store.get(detail::layer_param(layer, "ffn.norm.gain"))),
            tape.param(store.get(detail::layer_param(layer, "ffn.norm.bias"))),
            static_cast<T>(kLayerNormEps));
    }
    return h;
}

// BERT pooler: tanh(affine(hidden[0])), a (1, hidden) row.
template <typename T>
ValueId pool(Tape<T>& tape, ParamStore<T>& store, ValueId hidden) {
    return tape.tanh_(tape.add_last(
        tape.matmul(tape.row(hidden, 0), tape.param(store.get("pooler.weight"))),
        tape.param(store.get("pooler.bias"))));
}

} // namespace fm
