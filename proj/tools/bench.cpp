// Serial vs OpenMP throughput for the data-parallel kernels: quality filter,
// encoding, augmentation and batch gradients. Results must match bitwise; this
// binary only reports timing.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "pkit/augment.hpp"
#include "pkit/encode.hpp"
#include "pkit/filter.hpp"
#include "pkit/model.hpp"
#include "pkit/synthetic.hpp"

using namespace pkit;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Best of several runs after one warmup; the warmup also absorbs the one-off
// allocator-arena setup the first multi-threaded pass pays.
template <class F>
double time_ms(F&& f) {
    f();
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
        const double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, int threads) {
    std::printf("%-18s serial %9.1f ms   omp(%d) %9.1f ms   speedup %.2fx\n", kernel, serial_ms,
                threads, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = 20000;
    if (argc > 1) n = static_cast<std::size_t>(std::stoull(argv[1]));
    const int threads = omp_get_max_threads();
    std::printf("kernel benchmark over %zu records, %d OpenMP threads\n\n", n, threads);

    const SyntheticWorld world = SyntheticWorld::default_world();
    SyntheticConfig sc;
    sc.n_sessions = n;
    sc.persona_rate = 0.7;
    sc.biased = false;
    sc.distractors_min = 1;
    sc.distractors_max = 3;
    sc.seed = 7;

    std::vector<TrainingExample> records;
    for (auto& r : generate_corpus(world, sc)) records.push_back(std::move(r.example));

    // Annotated fixtures for the filter kernel.
    std::vector<std::string> registry_symbols;
    for (const auto& a : world.attributes) registry_symbols.push_back(a.symbol);
    const AttributeRegistry reg = AttributeRegistry::from_symbols(registry_symbols);
    std::vector<AnnotatedSession> annotated;
    annotated.reserve(records.size());
    for (const auto& x : records) {
        AnnotatedSession a;
        a.session.session_id = "bench";
        for (const auto& u : x.context) a.session.utterances.push_back(u);
        a.session.utterances.push_back(x.response);
        for (const auto& u : a.session.utterances) {
            if (!x.profile.triples.empty())
                a.summaries.push_back(
                    {serialize_triple(x.profile.triples.front(), TripleStyle::sep_delimited)});
            else
                a.summaries.push_back({u.text});  // exercises the bad_format path
        }
        annotated.push_back(std::move(a));
    }

    {
        HashedTfidfSimilarity sim(4096);
        FilterConfig fc{5, 0.1, &reg, &sim};
        FilterStats s1, s2;
        std::vector<FilteredSession> a, b;
        const double ts = time_ms([&] { a = filter_stream_serial(annotated, fc, s1); });
        const double tp =
            time_ms([&] { b = filter_stream_parallel(annotated, fc, s2, threads); });
        report("filter_stream", ts, tp, threads);
    }

    const WhitespaceVocab vocab = build_vocab(records, 4096);
    EncoderConfig ec;
    {
        EncodeStats s1, s2;
        std::vector<EncodedExample> a, b;
        const double ts = time_ms([&] { a = encode_batch_serial(records, vocab, ec, s1); });
        const double tp =
            time_ms([&] { b = encode_batch_parallel(records, vocab, ec, s2, threads); });
        report("encode_batch", ts, tp, threads);
    }

    {
        const PersonaPool pool = build_pool(records);
        AugmentationConfig ac;
        ac.seed = 11;
        std::vector<TrainingExample> a, b;
        const double ts = time_ms([&] { a = augment_batch_serial(records, pool, ac); });
        const double tp =
            time_ms([&] { b = augment_batch_parallel(records, pool, ac, threads); });
        report("augment_batch", ts, tp, threads);
    }

    {
        EncodeStats es;
        auto shards = encode_batch_serial(records, vocab, ec, es);
        shards.resize(std::min<std::size_t>(shards.size(), 64));
        ModelConfig mc;
        mc.vocab_size = vocab.vocab_size();
        mc.seed = 3;
        const ModelParams params = ModelParams::init(mc);
        BatchGrad a, b;
        const double ts = time_ms([&] { a = batch_gradients_serial(params, shards); });
        const double tp =
            time_ms([&] { b = batch_gradients_parallel(params, shards, threads); });
        char label[48];
        std::snprintf(label, sizeof(label), "batch_grad(%zu)", shards.size());
        report(label, ts, tp, threads);
    }

    return 0;
}
