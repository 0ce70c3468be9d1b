#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pkit/encode.hpp"
#include "pkit/rng.hpp"

namespace pkit {

struct ModelConfig {
    int layers = 2;
    int heads = 2;
    int model_dim = 64;
    int ff_dim = 256;
    int vocab_size = 0;
    int max_position = 160;
    int max_turn = 72;
    int max_type = 3;
    std::uint64_t seed = 0;

    void validate() const;
    json to_json() const;
    static ModelConfig from_json(const json& j);
};

struct LayerWeights {
    std::vector<double> ln1_g, ln1_b;
    std::vector<double> wq, bq, wk, bk, wv, bv, wo, bo;  // w*: d x d row-major
    std::vector<double> ln2_g, ln2_b;
    std::vector<double> w1, b1;  // d x ff
    std::vector<double> w2, b2;  // ff x d
};

// All trainable tensors. visit() walks the named blocks in a fixed order; the
// optimizer, finite-difference checks and the checkpoint format all rely on
// that order being stable.
struct ParamSet {
    std::vector<double> tok_emb, pos_emb, turn_emb, type_emb;
    std::vector<LayerWeights> layer;
    std::vector<double> lnf_g, lnf_b;
    std::vector<double> out_w, out_b;  // d x V, V

    void allocate(const ModelConfig& cfg);

    template <class F>
    void visit(F&& f) {
        f("tok_emb", tok_emb);
        f("pos_emb", pos_emb);
        f("turn_emb", turn_emb);
        f("type_emb", type_emb);
        for (std::size_t l = 0; l < layer.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            auto& w = layer[l];
            f(p + "ln1_g", w.ln1_g);
            f(p + "ln1_b", w.ln1_b);
            f(p + "wq", w.wq);
            f(p + "bq", w.bq);
            f(p + "wk", w.wk);
            f(p + "bk", w.bk);
            f(p + "wv", w.wv);
            f(p + "bv", w.bv);
            f(p + "wo", w.wo);
            f(p + "bo", w.bo);
            f(p + "ln2_g", w.ln2_g);
            f(p + "ln2_b", w.ln2_b);
            f(p + "w1", w.w1);
            f(p + "b1", w.b1);
            f(p + "w2", w.w2);
            f(p + "b2", w.b2);
        }
        f("lnf_g", lnf_g);
        f("lnf_b", lnf_b);
        f("out_w", out_w);
        f("out_b", out_b);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<ParamSet*>(this)->visit(
            [&](const std::string& n, std::vector<double>& v) { f(n, v); });
    }

    void zero();
    void add_scaled(const ParamSet& other, double scale);
};

struct ModelParams {
    ModelConfig cfg;
    ParamSet p;

    // Gaussian(0, 0.02) weights, zero biases, unit LayerNorm gains.
    static ModelParams init(const ModelConfig& cfg);
};

// Probability rows over the vocabulary, one per target token, each predicting
// that token given persona, context and the preceding target tokens. Rows are
// softmax-normalized. Out-of-range channel values are a hard error.
std::vector<std::vector<double>> forward(const ModelParams& m, const EncodedExample& e);

// Distribution over the next token after the current sequence end (used by
// decoding; e.target_len may be 0).
std::vector<double> next_token_distribution(const ModelParams& m, const EncodedExample& e);

// Mean over all target tokens in the batch of -log p(token | source, prefix).
double nll_loss(const ModelParams& m, const std::vector<EncodedExample>& batch);

struct BatchGrad {
    ParamSet grads;          // d(mean nll)/d(theta)
    double loss = 0.0;       // mean nll over the batch's target tokens
    std::uint64_t target_tokens = 0;
};

// Exact gradients of nll_loss. Serial reference and the OpenMP version reduce
// per-example gradients in example order, so both produce identical bits for
// any thread count.
BatchGrad batch_gradients_serial(const ModelParams& m, const std::vector<EncodedExample>& batch);
BatchGrad batch_gradients_parallel(const ModelParams& m, const std::vector<EncodedExample>& batch,
                                   int threads);

struct TrainSchedule {
    double peak_lr = 3e-3;
    int warmup_steps = 50;
    int total_steps = 500;
    int batch_size = 16;

    void validate() const;
    // Linear warmup to peak at s == warmup_steps, cosine decay to 0 at
    // s == total_steps. 1-based steps.
    double lr_at(int step) const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct StepRecord {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

// Seeded epoch shuffling, Adam updates, per-step trace. Non-finite loss aborts
// with a DataError carrying the last step. Deterministic for a fixed seed.
std::vector<StepRecord> train(ModelParams& m, const std::vector<EncodedExample>& dataset,
                              const TrainSchedule& schedule, const AdamConfig& adam, int threads,
                              const std::function<void(const StepRecord&)>& on_step = nullptr);

// exp(mean per-token NLL) over the dataset.
double perplexity(const ModelParams& m, const std::vector<EncodedExample>& dataset, int threads);

enum class Decoding { greedy, top_k };

struct GenerateConfig {
    Decoding decoding = Decoding::greedy;
    int top_k = 8;
    std::uint64_t seed = 0;
    int max_len = 32;  // generated tokens, [EOS] excluded from the result
};

// Autoregressive decode from a source-only encoding until [EOS] or max_len.
std::vector<int> generate(const ModelParams& m, const EncodedExample& source,
                          const GenerateConfig& cfg);

// Persona+context half of assemble_sequence, for decoding.
EncodedExample assemble_source(const TrainingExample& x, const Tokenizer& tok,
                               const EncoderConfig& cfg);

void save_checkpoint(const ModelParams& m, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace pkit
