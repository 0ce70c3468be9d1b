// personakit: persona dialogue corpus pipeline.
//
// Subcommands compose through line-delimited files:
//   synth-comments -> ingest -> extract -> filter -> build -> augment
//     -> encode -> train -> generate -> eval      (plus stats, synth-dataset)
//
// Exit codes: 0 ok, 1 usage/config, 2 data error, 3 external-service failure.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pkit/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config, "pipeline config file (JSON)");
    sub->add_option("--seed", args.seed, "override config seed");
    sub->add_option("--threads", args.threads, "override worker threads (0 = OpenMP default)");
}

pkit::PipelineConfig resolve(const CommonArgs& args) {
    pkit::PipelineConfig cfg = args.config.empty() ? pkit::PipelineConfig{}
                                                   : pkit::PipelineConfig::load(args.config);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.synthetic.seed = *args.seed;
        cfg.augment.seed = *args.seed;
        cfg.model.seed = *args.seed;
        cfg.generation.seed = *args.seed;
    }
    if (args.threads) cfg.threads = *args.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persona dialogue corpus pipeline"};
    app.require_subcommand(1);

    CommonArgs common;

    std::string in, out, vocab_in, vocab_out, ckpt, trace, data, report, ppl_shards, ppl_ckpt,
        world_out;
    bool strip_persona = false;
    std::optional<double> mix_ratio, persona_rate, contradiction_rate;
    std::optional<std::size_t> n_sessions;
    std::optional<int> total_steps, batch_size;
    std::optional<bool> biased;

    auto* s_ingest = app.add_subcommand("ingest", "raw comment dump -> dialogue sessions");
    s_ingest->add_option("-i,--in", in, "comment dump (jsonl)")->required();
    s_ingest->add_option("-o,--out", out, "sessions output (jsonl)")->required();
    add_common(s_ingest, common);

    auto* s_extract = app.add_subcommand("extract", "sessions -> per-utterance persona summaries");
    s_extract->add_option("-i,--in", in)->required();
    s_extract->add_option("-o,--out", out)->required();
    add_common(s_extract, common);

    auto* s_filter = app.add_subcommand("filter", "apply the persona quality rules");
    s_filter->add_option("-i,--in", in)->required();
    s_filter->add_option("-o,--out", out)->required();
    add_common(s_filter, common);

    auto* s_build = app.add_subcommand("build", "profiles + training examples + stats");
    s_build->add_option("-i,--in", in)->required();
    s_build->add_option("-o,--out", out)->required();
    add_common(s_build, common);

    auto* s_stats = app.add_subcommand("stats", "corpus statistics table");
    s_stats->add_option("-i,--in", in)->required();
    add_common(s_stats, common);

    auto* s_augment = app.add_subcommand("augment", "unrelated-persona augmentation + merge");
    s_augment->add_option("-i,--in", in)->required();
    s_augment->add_option("-o,--out", out)->required();
    s_augment->add_option("--mix-ratio", mix_ratio, "fraction of augmented records in output");
    add_common(s_augment, common);

    auto* s_encode = app.add_subcommand("encode", "records -> four-channel shards");
    s_encode->add_option("-i,--in", in)->required();
    s_encode->add_option("-o,--out", out)->required();
    s_encode->add_option("--vocab-out", vocab_out, "write the built vocabulary here");
    s_encode->add_option("--vocab", vocab_in, "reuse an existing vocabulary file");
    s_encode->add_flag("--strip-persona", strip_persona, "encode with an empty persona segment");
    add_common(s_encode, common);

    auto* s_train = app.add_subcommand("train", "train the unified-transformer model");
    s_train->add_option("-i,--in", in, "encoded shards")->required();
    s_train->add_option("--vocab", vocab_in)->required();
    s_train->add_option("-o,--out", ckpt, "checkpoint output")->required();
    s_train->add_option("--trace", trace, "loss trace output (jsonl)");
    s_train->add_option("--steps", total_steps, "override schedule.total_steps");
    s_train->add_option("--batch-size", batch_size, "override schedule.batch_size");
    add_common(s_train, common);

    auto* s_generate = app.add_subcommand("generate", "decode responses for a dataset");
    s_generate->add_option("-i,--in", in, "dataset records")->required();
    s_generate->add_option("--checkpoint", ckpt)->required();
    s_generate->add_option("--vocab", vocab_in)->required();
    s_generate->add_option("-o,--out", out, "responses output")->required();
    s_generate->add_flag("--strip-persona", strip_persona);
    add_common(s_generate, common);

    auto* s_eval = app.add_subcommand("eval", "metrics report for generated responses");
    s_eval->add_option("-i,--in", in, "responses (jsonl)")->required();
    s_eval->add_option("--data", data, "dataset records the responses answer")->required();
    s_eval->add_option("-o,--out", report, "report output (json)")->required();
    s_eval->add_option("--ppl-shards", ppl_shards, "encoded shards for perplexity");
    s_eval->add_option("--ppl-checkpoint", ppl_ckpt, "checkpoint for perplexity");
    add_common(s_eval, common);

    auto* s_synthc = app.add_subcommand("synth-comments", "synthetic raw comment dump");
    s_synthc->add_option("-o,--out", out)->required();
    s_synthc->add_option("--world-out", world_out, "save the world description");
    s_synthc->add_option("--sessions", n_sessions, "override synthetic.n_sessions");
    s_synthc->add_option("--persona-rate", persona_rate);
    s_synthc->add_option("--contradiction-rate", contradiction_rate);
    s_synthc->add_option("--biased", biased);
    add_common(s_synthc, common);

    auto* s_synthd = app.add_subcommand("synth-dataset", "synthetic dataset records");
    s_synthd->add_option("-o,--out", out)->required();
    s_synthd->add_option("--world-out", world_out);
    s_synthd->add_option("--sessions", n_sessions);
    s_synthd->add_option("--persona-rate", persona_rate);
    s_synthd->add_option("--contradiction-rate", contradiction_rate);
    s_synthd->add_option("--biased", biased);
    add_common(s_synthd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        pkit::PipelineConfig cfg = resolve(common);
        if (mix_ratio) cfg.augment.mix_ratio = *mix_ratio;
        if (strip_persona) cfg.encoder.strip_persona = true;
        if (total_steps) cfg.schedule.total_steps = *total_steps;
        if (batch_size) cfg.schedule.batch_size = *batch_size;
        if (n_sessions) cfg.synthetic.n_sessions = *n_sessions;
        if (persona_rate) cfg.synthetic.persona_rate = *persona_rate;
        if (contradiction_rate) cfg.synthetic.contradiction_rate = *contradiction_rate;
        if (biased) cfg.synthetic.biased = *biased;

        if (s_ingest->parsed()) cmd_ingest(cfg, in, out);
        else if (s_extract->parsed()) cmd_extract(cfg, in, out);
        else if (s_filter->parsed()) cmd_filter(cfg, in, out);
        else if (s_build->parsed()) cmd_build(cfg, in, out);
        else if (s_stats->parsed()) cmd_stats(cfg, in);
        else if (s_augment->parsed()) cmd_augment(cfg, in, out);
        else if (s_encode->parsed()) cmd_encode(cfg, in, out, vocab_out, vocab_in);
        else if (s_train->parsed())
            cmd_train(cfg, in, vocab_in, ckpt, trace.empty() ? ckpt + ".trace.jsonl" : trace);
        else if (s_generate->parsed()) cmd_generate(cfg, in, ckpt, vocab_in, out);
        else if (s_eval->parsed()) cmd_eval(cfg, in, data, report, ppl_shards, ppl_ckpt);
        else if (s_synthc->parsed()) cmd_synth_comments(cfg, out, world_out);
        else if (s_synthd->parsed()) cmd_synth_dataset(cfg, out, world_out);
    } catch (const pkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const pkit::ExternalServiceError& e) {
        std::cerr << "external service error: " << e.what() << "\n";
        return 3;
    } catch (const pkit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
