#include "fm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fm/checkpoint.hpp"
#include "fm/log.hpp"
#include "fm/optim.hpp"

namespace fs = std::filesystem;

namespace fm {

using nlohmann::json;

void TrainConfig::validate() const {
    if (learning_rate <= 0.0)
        throw UsageError("train config: learning_rate must be positive");
    if (batch_size < 1)
        throw UsageError("train config: batch_size must be >= 1");
    if (epochs < 1)
        throw UsageError("train config: epochs must be >= 1");
    if (eval_every < 1)
        throw UsageError("train config: eval_every must be >= 1");
    if (head_dropout < 0.0 || head_dropout >= 1.0)
        throw UsageError("train config: head_dropout must be in [0,1)");
    if (weight_decay < 0.0)
        throw UsageError("train config: weight_decay must be >= 0");
}

void to_json(json& j, const TrainConfig& cfg) {
    j = json{{"learning_rate", cfg.learning_rate},
             {"batch_size", cfg.batch_size},
             {"epochs", cfg.epochs},
             {"eval_every", cfg.eval_every},
             {"seed", cfg.seed},
             {"undersample", cfg.undersample},
             {"head_dropout", cfg.head_dropout},
             {"weight_decay", cfg.weight_decay},
             {"freeze_encoder", cfg.freeze_encoder}};
}

void from_json(const json& j, TrainConfig& cfg) {
    cfg = TrainConfig{};
    if (j.contains("learning_rate"))
        j.at("learning_rate").get_to(cfg.learning_rate);
    if (j.contains("batch_size"))
        j.at("batch_size").get_to(cfg.batch_size);
    if (j.contains("epochs"))
        j.at("epochs").get_to(cfg.epochs);
    if (j.contains("eval_every"))
        j.at("eval_every").get_to(cfg.eval_every);
    if (j.contains("seed"))
        j.at("seed").get_to(cfg.seed);
    if (j.contains("undersample"))
        j.at("undersample").get_to(cfg.undersample);
    if (j.contains("head_dropout"))
        j.at("head_dropout").get_to(cfg.head_dropout);
    if (j.contains("weight_decay"))
        j.at("weight_decay").get_to(cfg.weight_decay);
    if (j.contains("freeze_encoder"))
        j.at("freeze_encoder").get_to(cfg.freeze_encoder);
}

std::string train_config_digest(const TrainConfig& cfg, const EncoderConfig& enc_cfg,
                                Label target) {
    json j;
    to_json(j["train"], cfg);
    to_json(j["encoder"], enc_cfg);
    j["target"] = to_string(target);
    const std::string s = j.dump();
    const std::uint32_t h = crc32(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", h);
    return buf;
}

std::vector<TensorSpec> binary_model_specs(const EncoderConfig& cfg) {
    std::vector<TensorSpec> specs = encoder_param_specs(cfg);
    specs.push_back({"head.weight", {cfg.hidden_size, 2}});
    specs.push_back({"head.bias", {2}});
    return specs;
}

Label fuse_argmax(const std::array<double, kNumLabels>& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best])
            best = i;
    return kAllLabels[best];
}

double predict_positive(ParamStore<float>& params, const EncoderConfig& cfg,
                        const EncodedInput& x) {
    Tape<float> tape;
    Rng unused(0);
    const ValueId hidden = encoder_forward(tape, params, cfg, x, false, unused);
    const ValueId probs =
        head_forward(tape, params, pool(tape, params, hidden), 0.0, false, unused);
    return static_cast<double>(tape.value(probs).at(0, 1));
}

namespace {

double eval_accuracy(ParamStore<float>& params, const EncoderConfig& cfg,
                     const std::vector<EncodedInput>& xs, const std::vector<int>& ys) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool pred = predict_positive(params, cfg, xs[i]) >= 0.5;
        correct += pred == (ys[i] == 1);
    }
    return static_cast<double>(correct) / static_cast<double>(xs.size());
}

void check_initial_weights(const ParamStore<float>& params, const EncoderConfig& cfg) {
    for (const TensorSpec& spec : encoder_param_specs(cfg)) {
        if (!params.contains(spec.name))
            throw DataError("initial weights missing tensor '" + spec.name + "'");
        if (params.get(spec.name).value.shape() != spec.shape)
            throw DataError("initial weights tensor '" + spec.name +
                            "' does not match the encoder config");
    }
}

} // namespace

BinaryModel train_binary(const BinaryTask& train_task, const BinaryTask& val_task,
                         const TrainConfig& cfg, const EncoderConfig& enc_cfg,
                         const Vocabulary& vocab, const TokenizerConfig& tok_cfg,
                         const ParamStore<float>* initial_weights) {
    cfg.validate();
    enc_cfg.validate();
    if (train_task.items.empty())
        throw DataError("binary training task is empty");
    if (val_task.items.empty())
        throw DataError("binary validation task is empty");
    if (tok_cfg.max_len > enc_cfg.max_positions)
        throw UsageError("tokenizer max_len exceeds encoder max_positions");

    const BinaryTask train_used =
        cfg.undersample ? undersample(train_task, cfg.seed) : train_task;

    ParamStore<float> params;
    if (initial_weights) {
        params = initial_weights->clone();
        check_initial_weights(params, enc_cfg);
        if (!params.contains("head.weight")) {
            Rng head_rng(Rng::mix(cfg.seed, 0x01));
            Tensor<float> w({enc_cfg.hidden_size, 2});
            for (idx_t i = 0; i < w.numel(); ++i)
                w[i] = static_cast<float>(head_rng.truncated_normal(kInitStd));
            params.add("head.weight", std::move(w));
            params.add("head.bias", Tensor<float>({2}));
        }
    } else {
        Rng init_rng(Rng::mix(cfg.seed, 0x01));
        init_binary_model(params, enc_cfg, init_rng);
    }
    if (cfg.freeze_encoder) {
        // The pooler stays trainable together with the head.
        for (auto& p : params)
            if (p->name.rfind("head.", 0) != 0 && p->name.rfind("pooler.", 0) != 0)
                p->frozen = true;
    }

    std::vector<EncodedInput> train_x;
    std::vector<int> train_y;
    for (const BinaryItem& item : train_used.items) {
        train_x.push_back(encode(item.comment.text, vocab, tok_cfg));
        train_y.push_back(item.positive ? 1 : 0);
    }
    std::vector<EncodedInput> val_x;
    std::vector<int> val_y;
    for (const BinaryItem& item : val_task.items) {
        val_x.push_back(encode(item.comment.text, vocab, tok_cfg));
        val_y.push_back(item.positive ? 1 : 0);
    }

    AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    acfg.weight_decay = cfg.weight_decay;
    Adam<float> adam(params, acfg);
    Rng drop_rng(Rng::mix(cfg.seed, 0x02));

    BinaryModel best;
    best.target = train_task.target;
    best.config_digest = train_config_digest(cfg, enc_cfg, train_task.target);
    best.train_size = train_used.items.size();
    best.val_accuracy = -1.0;

    std::vector<EvalPoint> evals;
    long step = 0;
    long last_eval_step = -1;
    const auto evaluate_now = [&] {
        const double acc = eval_accuracy(params, enc_cfg, val_x, val_y);
        evals.push_back({step, acc});
        last_eval_step = step;
        if (acc > best.val_accuracy) {
            best.val_accuracy = acc;
            best.best_step = step;
            best.params = params.clone();
        }
        log_debug("eval step=", step, " target=", to_string(train_task.target),
                  " val_accuracy=", acc);
    };

    const std::size_t n = train_x.size();
    std::vector<std::size_t> order(n);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(Rng::mix(cfg.seed, 0x100 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            Tape<float> tape;
            std::vector<ValueId> pooled_rows;
            std::vector<int> labels;
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const ValueId hidden =
                    encoder_forward(tape, params, enc_cfg, train_x[i], true, drop_rng);
                pooled_rows.push_back(pool(tape, params, hidden));
                labels.push_back(train_y[i]);
            }
            const ValueId logits = head_logits(tape, params, tape.concat_rows(pooled_rows),
                                               cfg.head_dropout, true, drop_rng);
            const ValueId loss = tape.cross_entropy_mean(logits, labels);
            const double loss_value = static_cast<double>(tape.value(loss)[0]);
            if (!std::isfinite(loss_value))
                throw RunError("non-finite loss at epoch " + std::to_string(epoch) +
                               " step " + std::to_string(step + 1) + " (lr=" +
                               std::to_string(cfg.learning_rate) + ", batch of " +
                               std::to_string(labels.size()) + "); aborting training");
            tape.backward(loss);
            adam.step();
            ++step;
            if (step % cfg.eval_every == 0)
                evaluate_now();
        }
        if (last_eval_step != step)
            evaluate_now();
    }

    best.evals = std::move(evals);
    log_info("trained binary model target=", to_string(train_task.target), " best_step=",
             best.best_step, " val_accuracy=", best.val_accuracy, " (", best.evals.size(),
             " evaluations, ", step, " steps)");
    return best;
}

TriClassifier train_tri(const Corpus& train, const Corpus& val, const TrainConfig& cfg,
                        const EncoderConfig& enc_cfg, const Vocabulary& vocab,
                        const TokenizerConfig& tok_cfg,
                        const ParamStore<float>* initial_weights) {
    if (train.comments.empty())
        throw DataError("training corpus is empty");
    if (val.comments.empty())
        throw DataError("validation corpus is empty");
    TriClassifier tri;
    tri.encoder = enc_cfg;
    tri.tokenizer = tok_cfg;
    tri.vocab = vocab;
    for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
        const Label target = kAllLabels[i];
        TrainConfig task_cfg = cfg;
        task_cfg.seed = cfg.seed + i;
        tri.models[i] = train_binary(to_binary_task(train, target),
                                     to_binary_task(val, target), task_cfg, enc_cfg, vocab,
                                     tok_cfg, initial_weights);
    }
    return tri;
}

Prediction predict(TriClassifier& tri, const std::string& text) {
    const EncodedInput x = encode(text, tri.vocab, tri.tokenizer);
    Prediction p;
    for (std::size_t i = 0; i < kAllLabels.size(); ++i)
        p.probs[i] = predict_positive(tri.models[i].params, tri.encoder, x);
    p.fused = fuse_argmax(p.probs);
    return p;
}

std::vector<Prediction> predict_batch(TriClassifier& tri,
                                      const std::vector<UserComment>& comments) {
    std::vector<Prediction> out;
    out.reserve(comments.size());
    for (const UserComment& c : comments)
        out.push_back(predict(tri, c.text));
    return out;
}

void save_bundle(const TriClassifier& tri, const std::string& dir) {
    fs::create_directories(dir);
    save_vocab(tri.vocab, (fs::path(dir) / "vocab.txt").string());

    json manifest;
    manifest["vocab"] = "vocab.txt";
    manifest["tokenizer"] = {{"lowercase", tri.tokenizer.lowercase},
                             {"max_len", tri.tokenizer.max_len},
                             {"continuation_prefix", tri.tokenizer.continuation_prefix}};
    json tie = json::array();
    for (const Label lab : kAllLabels)
        tie.push_back(to_string(lab));
    manifest["tie_break"] = tie;
    json files;
    for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
        const std::string name = to_string(kAllLabels[i]);
        files[name] = name + ".ckpt";
    }
    manifest["labels"] = files;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf)
        throw DataError("cannot write bundle manifest in " + dir);
    mf << manifest.dump(2) << "\n";

    for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
        const BinaryModel& m = tri.models[i];
        json cfg;
        to_json(cfg["encoder"], tri.encoder);
        cfg["target"] = to_string(m.target);
        cfg["val_accuracy"] = m.val_accuracy;
        cfg["best_step"] = m.best_step;
        cfg["config_digest"] = m.config_digest;
        save_checkpoint((fs::path(dir) / (std::string(to_string(kAllLabels[i])) + ".ckpt")).string(),
                        cfg, m.params);
    }
}

TriClassifier load_bundle(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream mf(root / "manifest.json");
    if (!mf)
        throw DataError("cannot open bundle manifest in " + dir);
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw DataError("malformed bundle manifest in " + dir + ": " + e.what());
    }

    TriClassifier tri;
    try {
        tri.tokenizer.lowercase = manifest.at("tokenizer").at("lowercase").get<bool>();
        tri.tokenizer.max_len = manifest.at("tokenizer").at("max_len").get<int>();
        tri.tokenizer.continuation_prefix =
            manifest.at("tokenizer").at("continuation_prefix").get<std::string>();
        tri.vocab = load_vocab((root / manifest.at("vocab").get<std::string>()).string());

        for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
            const std::string name = to_string(kAllLabels[i]);
            const std::string file = manifest.at("labels").at(name).get<std::string>();
            const LoadedCheckpoint ckpt = load_checkpoint((root / file).string());
            EncoderConfig enc;
            from_json(ckpt.config.at("encoder"), enc);
            verify_manifest(ckpt, binary_model_specs(enc));
            if (i == 0)
                tri.encoder = enc;
            else if (!(enc == tri.encoder))
                throw DataError("bundle models disagree on encoder configuration");
            BinaryModel& m = tri.models[i];
            m.target = kAllLabels[i];
            m.params = ckpt.to_store();
            m.val_accuracy = ckpt.config.value("val_accuracy", 0.0);
            m.best_step = ckpt.config.value("best_step", 0L);
            m.config_digest = ckpt.config.value("config_digest", "");
        }
    } catch (const json::exception& e) {
        throw DataError("malformed bundle in " + dir + ": " + e.what());
    }

    if (static_cast<int>(tri.vocab.size()) != tri.encoder.vocab_size)
        throw DataError("bundle vocabulary has " + std::to_string(tri.vocab.size()) +
                        " entries but the encoder expects " +
                        std::to_string(tri.encoder.vocab_size));
    if (tri.tokenizer.max_len > tri.encoder.max_positions)
        throw DataError("bundle tokenizer max_len exceeds encoder max_positions");
    return tri;
}

} // namespace fm
