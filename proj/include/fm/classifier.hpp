#pragma once

// Binary-relevance classification on top of the encoder: one binary softmax
// head (and its own fine-tuned encoder copy) per label, trained with
// validation-accuracy checkpointing, plus argmax fusion of the three
// positive-class probabilities into the final label.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/autodiff.hpp"
#include "fm/corpus.hpp"
#include "fm/encoder.hpp"
#include "fm/params.hpp"
#include "fm/tokenizer.hpp"

namespace fm {

struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 32;
    int epochs = 2;
    int eval_every = 50; // optimizer steps between validation passes
    std::uint64_t seed = 42;
    bool undersample = true;
    double head_dropout = 0.3;
    double weight_decay = 0.01;
    bool freeze_encoder = false;

    void validate() const;
};

struct EvalPoint {
    long step = 0;
    double accuracy = 0.0;
};

// One trained binary model: encoder copy + 2-way head, snapshotted at the
// best validation accuracy seen during training (earliest step wins ties).
struct BinaryModel {
    Label target = Label::problem_report;
    ParamStore<float> params;
    double val_accuracy = 0.0;
    long best_step = 0;
    std::size_t train_size = 0; // training examples actually used (after undersampling)
    std::string config_digest;
    std::vector<EvalPoint> evals;
};

struct TriClassifier {
    EncoderConfig encoder;
    TokenizerConfig tokenizer;
    Vocabulary vocab;
    std::array<BinaryModel, kNumLabels> models; // canonical label order
};

struct Prediction {
    std::array<double, kNumLabels> probs{}; // positive-class prob per label
    Label fused = Label::problem_report;
};

// Logits of the binary head over pooled rows: dropout -> affine -> (N, 2).
// Column 1 holds the positive class.
template <typename T>
ValueId head_logits(Tape<T>& tape, ParamStore<T>& store, ValueId pooled, double dropout_p,
                    bool training, Rng& rng) {
    const ValueId dropped = tape.dropout(pooled, dropout_p, training, rng);
    return tape.add_last(tape.matmul(dropped, tape.param(store.get("head.weight"))),
                         tape.param(store.get("head.bias")));
}

template <typename T>
ValueId head_forward(Tape<T>& tape, ParamStore<T>& store, ValueId pooled, double dropout_p,
                     bool training, Rng& rng) {
    return tape.softmax_last(head_logits(tape, store, pooled, dropout_p, training, rng));
}

// Adds head.weight (hidden, 2) and head.bias (2,) after the encoder weights,
// drawn from the same stream so a seed pins the whole model.
template <typename T>
void init_binary_model(ParamStore<T>& store, const EncoderConfig& cfg, Rng& rng) {
    init_encoder(store, cfg, rng);
    Tensor<T> w({cfg.hidden_size, 2});
    for (idx_t i = 0; i < w.numel(); ++i)
        w[i] = static_cast<T>(rng.truncated_normal(kInitStd));
    store.add("head.weight", std::move(w));
    store.add("head.bias", Tensor<T>({2}));
}

std::vector<TensorSpec> binary_model_specs(const EncoderConfig& cfg);

// Positive-class probability for one encoded input, eval mode (no dropout).
double predict_positive(ParamStore<float>& params, const EncoderConfig& cfg,
                        const EncodedInput& x);

// Trains one binary model. Undersampling (when enabled) touches only the
// training task; validation keeps its natural distribution. Evaluates every
// cfg.eval_every optimizer steps and at each epoch end, and returns the
// parameter snapshot with the best validation accuracy. Aborts with
// diagnostics if the loss turns non-finite. When initial_weights is given it
// must hold encoder weights matching cfg (a head is appended if missing);
// otherwise weights are freshly initialized from the seed.
BinaryModel train_binary(const BinaryTask& train_task, const BinaryTask& val_task,
                         const TrainConfig& cfg, const EncoderConfig& enc_cfg,
                         const Vocabulary& vocab, const TokenizerConfig& tok_cfg,
                         const ParamStore<float>* initial_weights = nullptr);

// Three train_binary runs with derived seeds (seed, seed+1, seed+2), one per
// label in canonical order.
TriClassifier train_tri(const Corpus& train, const Corpus& val, const TrainConfig& cfg,
                        const EncoderConfig& enc_cfg, const Vocabulary& vocab,
                        const TokenizerConfig& tok_cfg,
                        const ParamStore<float>* initial_weights = nullptr);

// Argmax over canonical label order; ties resolve to the earliest label.
Label fuse_argmax(const std::array<double, kNumLabels>& probs);

Prediction predict(TriClassifier& tri, const std::string& text);
std::vector<Prediction> predict_batch(TriClassifier& tri,
                                      const std::vector<UserComment>& comments);

// Bundle directory layout: manifest.json + one checkpoint per label + a copy
// of the vocabulary. All three models must share tokenizer and vocabulary.
void save_bundle(const TriClassifier& tri, const std::string& dir);
TriClassifier load_bundle(const std::string& dir);

std::string train_config_digest(const TrainConfig& cfg, const EncoderConfig& enc_cfg,
                                Label target);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

} // namespace fm
