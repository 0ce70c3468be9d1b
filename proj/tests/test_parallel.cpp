#include <doctest.h>

#include "pkit/augment.hpp"
#include "pkit/encode.hpp"
#include "pkit/eval.hpp"
#include "pkit/filter.hpp"
#include "pkit/model.hpp"
#include "pkit/synthetic.hpp"

using namespace pkit;

// The OpenMP kernels must reproduce the serial reference bit for bit: outputs
// land in per-index slots and every floating-point reduction folds in a fixed
// order, so the thread count cannot change results.

namespace {

struct Fixtures {
    SyntheticWorld world = SyntheticWorld::default_world();
    std::vector<TrainingExample> records;
    std::vector<AnnotatedSession> annotated;
    AttributeRegistry reg{AttributeRegistry::from_symbols({"like", "have", "live_in", "play",
                                                           "eat"})};

    Fixtures() {
        SyntheticConfig cfg;
        cfg.n_sessions = 400;
        cfg.persona_rate = 0.6;
        cfg.contradiction_rate = 0.1;
        cfg.biased = false;
        cfg.distractors_min = 0;
        cfg.distractors_max = 2;
        cfg.seed = 2;
        for (auto& r : generate_corpus(world, cfg)) records.push_back(std::move(r.example));
        for (const auto& x : records) {
            AnnotatedSession a;
            a.session.session_id = "s";
            a.session.utterances = x.context;
            a.session.utterances.push_back(x.response);
            for (std::size_t i = 0; i < a.session.utterances.size(); ++i) {
                if (!x.profile.triples.empty() && i + 1 == a.session.utterances.size())
                    a.summaries.push_back({serialize_triple(x.profile.triples.front(),
                                                            TripleStyle::sep_delimited)});
                else
                    a.summaries.push_back({"[None]"});
            }
            annotated.push_back(std::move(a));
        }
    }
};

}  // namespace

TEST_CASE("filter_stream: serial == parallel, any thread count") {
    Fixtures f;
    HashedTfidfSimilarity sim(4096);
    FilterConfig cfg{5, 0.1, &f.reg, &sim};
    FilterStats s_serial;
    auto a = filter_stream_serial(f.annotated, cfg, s_serial);
    for (int threads : {0, 2, 3}) {
        FilterStats s_par;
        auto b = filter_stream_parallel(f.annotated, cfg, s_par, threads);
        CHECK(s_par.by_reason == s_serial.by_reason);
        REQUIRE(b.size() == a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].triples.size() == b[i].triples.size());
            for (std::size_t k = 0; k < a[i].triples.size(); ++k) {
                CHECK(a[i].triples[k].has_value() == b[i].triples[k].has_value());
                if (a[i].triples[k]) CHECK(*a[i].triples[k] == *b[i].triples[k]);
            }
        }
    }
}

TEST_CASE("encode_batch: serial == parallel") {
    Fixtures f;
    const WhitespaceVocab vocab = build_vocab(f.records, 4096);
    EncodeStats s1, s2;
    auto a = encode_batch_serial(f.records, vocab, EncoderConfig{}, s1);
    auto b = encode_batch_parallel(f.records, vocab, EncoderConfig{}, s2, 0);
    CHECK(s1.encoded == s2.encoded);
    CHECK(s1.skipped_empty_response == s2.skipped_empty_response);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tokens == b[i].tokens);
        CHECK(a[i].positions == b[i].positions);
        CHECK(a[i].turns == b[i].turns);
        CHECK(a[i].types == b[i].types);
    }
}

TEST_CASE("augment_batch: serial == parallel") {
    Fixtures f;
    const PersonaPool pool = build_pool(f.records);
    REQUIRE(!pool.empty());
    AugmentationConfig cfg;
    cfg.seed = 9;
    auto a = augment_batch_serial(f.records, pool, cfg);
    auto b = augment_batch_parallel(f.records, pool, cfg, 0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(example_to_json(a[i]).dump() == example_to_json(b[i]).dump());
}

TEST_CASE("batch_gradients: serial == parallel bitwise, and loss too") {
    Fixtures f;
    const WhitespaceVocab vocab = build_vocab(f.records, 4096);
    EncodeStats es;
    auto shards = encode_batch_serial(f.records, vocab, EncoderConfig{}, es);
    shards.resize(24);

    ModelConfig mc;
    mc.vocab_size = vocab.vocab_size();
    mc.model_dim = 16;
    mc.ff_dim = 32;
    mc.seed = 4;
    const ModelParams params = ModelParams::init(mc);

    const BatchGrad a = batch_gradients_serial(params, shards);
    for (int threads : {0, 2}) {
        const BatchGrad b = batch_gradients_parallel(params, shards, threads);
        CHECK(a.loss == b.loss);  // bitwise
        CHECK(a.target_tokens == b.target_tokens);
        std::vector<const std::vector<double>*> ga, gb;
        a.grads.visit([&](const std::string&, const std::vector<double>& v) { ga.push_back(&v); });
        b.grads.visit([&](const std::string&, const std::vector<double>& v) { gb.push_back(&v); });
        for (std::size_t k = 0; k < ga.size(); ++k) CHECK(*ga[k] == *gb[k]);
    }
}

TEST_CASE("perplexity: serial == parallel bitwise") {
    Fixtures f;
    const WhitespaceVocab vocab = build_vocab(f.records, 4096);
    EncodeStats es;
    auto shards = encode_batch_serial(f.records, vocab, EncoderConfig{}, es);
    shards.resize(64);
    ModelConfig mc;
    mc.vocab_size = vocab.vocab_size();
    mc.seed = 4;
    const ModelParams params = ModelParams::init(mc);
    CHECK(perplexity(params, shards, 1) == perplexity(params, shards, 0));
}
