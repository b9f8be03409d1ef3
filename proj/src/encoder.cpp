#include "fm/encoder.hpp"

namespace fm {

void EncoderConfig::validate() const {
    if (num_layers < 1)
        throw RunError("encoder config: num_layers must be >= 1");
    if (hidden_size < 1 || num_heads < 1 || ffn_size < 1)
        throw RunError("encoder config: sizes must be positive");
    if (hidden_size % num_heads != 0)
        throw RunError("encoder config: hidden_size " + std::to_string(hidden_size) +
                       " not divisible by num_heads " + std::to_string(num_heads));
    if (vocab_size < 1 || max_positions < 1)
        throw RunError("encoder config: vocab_size and max_positions must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw RunError("encoder config: dropout_p must be in [0,1)");
}

std::vector<TensorSpec> encoder_param_specs(const EncoderConfig& cfg) {
    cfg.validate();
    const idx_t h = cfg.hidden_size;
    const idx_t f = cfg.ffn_size;
    std::vector<TensorSpec> specs;
    specs.push_back({"embeddings.token", {cfg.vocab_size, h}});
    specs.push_back({"embeddings.position", {cfg.max_positions, h}});
    specs.push_back({"embeddings.segment", {kSegmentTypes, h}});
    specs.push_back({"embeddings.norm.gain", {h}});
    specs.push_back({"embeddings.norm.bias", {h}});
    for (int l = 0; l < cfg.num_layers; ++l) {
        for (const char* which : {"attention.query", "attention.key", "attention.value",
                                  "attention.output"}) {
            specs.push_back({detail::layer_param(l, which) + ".weight", {h, h}});
            specs.push_back({detail::layer_param(l, which) + ".bias", {h}});
        }
        specs.push_back({detail::layer_param(l, "attention.norm.gain"), {h}});
        specs.push_back({detail::layer_param(l, "attention.norm.bias"), {h}});
        specs.push_back({detail::layer_param(l, "ffn.inner.weight"), {h, f}});
        specs.push_back({detail::layer_param(l, "ffn.inner.bias"), {f}});
        specs.push_back({detail::layer_param(l, "ffn.output.weight"), {f, h}});
        specs.push_back({detail::layer_param(l, "ffn.output.bias"), {h}});
        specs.push_back({detail::layer_param(l, "ffn.norm.gain"), {h}});
        specs.push_back({detail::layer_param(l, "ffn.norm.bias"), {h}});
    }
    specs.push_back({"pooler.weight", {h, h}});
    specs.push_back({"pooler.bias", {h}});
    return specs;
}

idx_t encoder_param_count(const EncoderConfig& cfg) {
    idx_t n = 0;
    for (const TensorSpec& s : encoder_param_specs(cfg))
        n += s.numel();
    return n;
}

const std::vector<Preset>& preset_registry() {
    static const std::vector<Preset> presets = [] {
        std::vector<Preset> v;
        EncoderConfig base;
        base.num_layers = 12;
        base.hidden_size = 768;
        base.num_heads = 12;
        base.ffn_size = 3072;
        base.max_positions = 512;
        base.dropout_p = 0.1;

        EncoderConfig en = base;
        en.vocab_size = 30522;
        en.cased = false;
        v.push_back({"english-base", en});

        EncoderConfig it = base;
        it.vocab_size = 31102;
        it.cased = true;
        v.push_back({"italian-base", it});

        EncoderConfig ml = base;
        ml.vocab_size = 105879;
        ml.cased = false;
        v.push_back({"multilingual-base", ml});

        EncoderConfig toy;
        toy.num_layers = 2;
        toy.hidden_size = 32;
        toy.num_heads = 2;
        toy.ffn_size = 64;
        toy.vocab_size = 100;
        toy.max_positions = 64;
        toy.dropout_p = 0.1;
        toy.cased = false;
        v.push_back({"toy", toy});
        return v;
    }();
    return presets;
}

const EncoderConfig& find_preset(const std::string& name) {
    for (const Preset& p : preset_registry())
        if (p.name == name)
            return p.config;
    std::string known;
    for (const Preset& p : preset_registry())
        known += (known.empty() ? "" : ", ") + p.name;
    throw UsageError("unknown preset '" + name + "' (known: " + known + ")");
}

} // namespace fm
