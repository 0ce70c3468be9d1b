#include "pkit/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "pkit/hash.hpp"
#include "pkit/parallel.hpp"
#include "pkit/text.hpp"

namespace pkit {

namespace fs = std::filesystem;

void log_line(LogLevel level, const std::string& msg) {
    static const LogLevel threshold = [] {
        const char* env = std::getenv("PKIT_LOG");
        if (!env) return LogLevel::info;
        const std::string v = lower_ascii(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "warn") return LogLevel::warn;
        if (v == "error") return LogLevel::error;
        return LogLevel::info;
    }();
    if (level < threshold) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

void require_known_keys(const json& j, const std::vector<std::string>& known,
                        const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + tmp);
        fn(out);
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw DataError("short write to " + tmp);
        }
    }
    fs::rename(tmp, path);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input " + path);
    return in;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        json j = json::parse(text);
        return from_json(j, path);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + ":" + std::to_string(line_of_offset(text, e.byte)) +
                          ": " + e.what());
    }
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::string& source) {
    PipelineConfig c;
    require_known_keys(j, {"seed", "threads", "registry", "rules", "cleaning", "extraction",
                           "filter", "profile_cap", "augment", "encoder", "vocab_budget", "model",
                           "schedule", "generate", "eval", "synthetic"},
                       source);
    try {
        get_if(j, "seed", c.seed);
        get_if(j, "threads", c.threads);
        get_if(j, "registry", c.registry_path);
        get_if(j, "rules", c.rules_path);
        if (j.contains("cleaning")) {
            const auto& s = j["cleaning"];
            require_known_keys(
                s, {"lowercase", "min_tokens", "max_tokens", "min_printable_ratio"},
                source + ":cleaning");
            get_if(s, "lowercase", c.cleaning.lowercase);
            get_if(s, "min_tokens", c.cleaning.min_tokens);
            get_if(s, "max_tokens", c.cleaning.max_tokens);
            get_if(s, "min_printable_ratio", c.cleaning.min_printable_ratio);
        }
        if (j.contains("extraction")) {
            const auto& s = j["extraction"];
            require_known_keys(s,
                               {"backend", "endpoint", "timeout_ms", "retries", "batch_size",
                                "max_in_flight"},
                               source + ":extraction");
            get_if(s, "backend", c.extraction.backend);
            get_if(s, "endpoint", c.extraction.remote.endpoint);
            get_if(s, "timeout_ms", c.extraction.remote.timeout_ms);
            get_if(s, "retries", c.extraction.remote.retries);
            get_if(s, "batch_size", c.extraction.remote.batch_size);
            get_if(s, "max_in_flight", c.extraction.remote.max_in_flight);
            if (c.extraction.backend != "rules" && c.extraction.backend != "remote")
                throw ConfigError(source + ": extraction.backend must be rules|remote");
        }
        if (j.contains("filter")) {
            const auto& s = j["filter"];
            require_known_keys(s,
                               {"max_subject_tokens", "min_similarity", "similarity_dims",
                                "use_idf", "audit_log"},
                               source + ":filter");
            get_if(s, "max_subject_tokens", c.filter.max_subject_tokens);
            get_if(s, "min_similarity", c.filter.min_similarity);
            get_if(s, "similarity_dims", c.filter.similarity_dims);
            get_if(s, "use_idf", c.filter.use_idf);
            get_if(s, "audit_log", c.filter.audit_log);
            if (c.filter.min_similarity < 0.0 || c.filter.min_similarity > 1.0)
                throw ConfigError(source + ": filter.min_similarity must be in [0,1]");
            if (c.filter.max_subject_tokens < 1)
                throw ConfigError(source + ": filter.max_subject_tokens must be >= 1");
            if (c.filter.similarity_dims < 64)
                throw ConfigError(source + ": filter.similarity_dims must be >= 64");
        }
        get_if(j, "profile_cap", c.profile_cap);
        if (j.contains("augment")) {
            const auto& s = j["augment"];
            require_known_keys(s, {"min_added", "max_added", "mix_ratio"}, source + ":augment");
            get_if(s, "min_added", c.augment.min_added);
            get_if(s, "max_added", c.augment.max_added);
            get_if(s, "mix_ratio", c.augment.mix_ratio);
            if (c.augment.min_added < 0 || c.augment.min_added > c.augment.max_added)
                throw ConfigError(source + ": augment needs 0 <= min_added <= max_added");
            if (c.augment.mix_ratio < 0.0 || c.augment.mix_ratio > 1.0)
                throw ConfigError(source + ": augment.mix_ratio must be in [0,1]");
        }
        if (j.contains("encoder")) {
            const auto& s = j["encoder"];
            require_known_keys(s,
                               {"max_persona_tokens", "max_context_tokens", "max_response_tokens",
                                "strip_persona"},
                               source + ":encoder");
            get_if(s, "max_persona_tokens", c.encoder.max_persona_tokens);
            get_if(s, "max_context_tokens", c.encoder.max_context_tokens);
            get_if(s, "max_response_tokens", c.encoder.max_response_tokens);
            get_if(s, "strip_persona", c.encoder.strip_persona);
            c.encoder.validate();
        }
        get_if(j, "vocab_budget", c.vocab_budget);
        if (j.contains("model")) {
            const auto& s = j["model"];
            require_known_keys(
                s, {"layers", "heads", "model_dim", "ff_dim", "max_position", "max_turn"},
                source + ":model");
            get_if(s, "layers", c.model.layers);
            get_if(s, "heads", c.model.heads);
            get_if(s, "model_dim", c.model.model_dim);
            get_if(s, "ff_dim", c.model.ff_dim);
            get_if(s, "max_position", c.model.max_position);
            get_if(s, "max_turn", c.model.max_turn);
        }
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            require_known_keys(s, {"peak_lr", "warmup_steps", "total_steps", "batch_size"},
                               source + ":schedule");
            get_if(s, "peak_lr", c.schedule.peak_lr);
            get_if(s, "warmup_steps", c.schedule.warmup_steps);
            get_if(s, "total_steps", c.schedule.total_steps);
            get_if(s, "batch_size", c.schedule.batch_size);
            c.schedule.validate();
        }
        if (j.contains("generate")) {
            const auto& s = j["generate"];
            require_known_keys(s, {"decoding", "top_k", "max_len"}, source + ":generate");
            std::string dec = "greedy";
            get_if(s, "decoding", dec);
            if (dec == "greedy") c.generation.decoding = Decoding::greedy;
            else if (dec == "top_k") c.generation.decoding = Decoding::top_k;
            else throw ConfigError(source + ": generate.decoding must be greedy|top_k");
            get_if(s, "top_k", c.generation.top_k);
            get_if(s, "max_len", c.generation.max_len);
        }
        if (j.contains("eval")) {
            const auto& s = j["eval"];
            require_known_keys(s, {"nli", "world", "endpoint", "timeout_ms", "retries"},
                               source + ":eval");
            get_if(s, "nli", c.eval.nli);
            get_if(s, "world", c.eval.world_path);
            get_if(s, "endpoint", c.eval.endpoint);
            get_if(s, "timeout_ms", c.eval.timeout_ms);
            get_if(s, "retries", c.eval.retries);
            if (c.eval.nli != "oracle" && c.eval.nli != "remote")
                throw ConfigError(source + ": eval.nli must be oracle|remote");
        }
        if (j.contains("synthetic")) {
            const auto& s = j["synthetic"];
            require_known_keys(s,
                               {"n_sessions", "persona_rate", "contradiction_rate", "biased",
                                "distractors_min", "distractors_max", "chatter_max"},
                               source + ":synthetic");
            get_if(s, "n_sessions", c.synthetic.n_sessions);
            get_if(s, "persona_rate", c.synthetic.persona_rate);
            get_if(s, "contradiction_rate", c.synthetic.contradiction_rate);
            get_if(s, "biased", c.synthetic.biased);
            get_if(s, "distractors_min", c.synthetic.distractors_min);
            get_if(s, "distractors_max", c.synthetic.distractors_max);
            get_if(s, "chatter_max", c.synthetic.chatter_max);
            if (c.synthetic.persona_rate < 0.0 || c.synthetic.persona_rate > 1.0)
                throw ConfigError(source + ": synthetic.persona_rate must be in [0,1]");
            if (c.synthetic.contradiction_rate < 0.0 || c.synthetic.contradiction_rate > 1.0)
                throw ConfigError(source + ": synthetic.contradiction_rate must be in [0,1]");
        }
    } catch (const json::exception& e) {
        throw ConfigError("config: " + source + ": " + e.what());
    }
    c.synthetic.seed = c.seed;
    c.augment.seed = c.seed;
    c.model.seed = c.seed;
    c.generation.seed = c.seed;
    return c;
}

json PipelineConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["threads"] = threads;
    j["registry"] = registry_path;
    j["rules"] = rules_path;
    j["cleaning"] = {{"lowercase", cleaning.lowercase},
                     {"min_tokens", cleaning.min_tokens},
                     {"max_tokens", cleaning.max_tokens},
                     {"min_printable_ratio", cleaning.min_printable_ratio}};
    j["extraction"] = {{"backend", extraction.backend},
                       {"endpoint", extraction.remote.endpoint},
                       {"timeout_ms", extraction.remote.timeout_ms},
                       {"retries", extraction.remote.retries},
                       {"batch_size", extraction.remote.batch_size},
                       {"max_in_flight", extraction.remote.max_in_flight}};
    j["filter"] = {{"max_subject_tokens", filter.max_subject_tokens},
                   {"min_similarity", filter.min_similarity},
                   {"similarity_dims", filter.similarity_dims},
                   {"use_idf", filter.use_idf},
                   {"audit_log", filter.audit_log}};
    j["profile_cap"] = profile_cap;
    j["augment"] = {{"min_added", augment.min_added},
                    {"max_added", augment.max_added},
                    {"mix_ratio", augment.mix_ratio}};
    j["encoder"] = {{"max_persona_tokens", encoder.max_persona_tokens},
                    {"max_context_tokens", encoder.max_context_tokens},
                    {"max_response_tokens", encoder.max_response_tokens},
                    {"strip_persona", encoder.strip_persona}};
    j["vocab_budget"] = vocab_budget;
    j["model"] = {{"layers", model.layers},       {"heads", model.heads},
                  {"model_dim", model.model_dim}, {"ff_dim", model.ff_dim},
                  {"max_position", model.max_position}, {"max_turn", model.max_turn}};
    j["schedule"] = {{"peak_lr", schedule.peak_lr},
                     {"warmup_steps", schedule.warmup_steps},
                     {"total_steps", schedule.total_steps},
                     {"batch_size", schedule.batch_size}};
    j["generate"] = {{"decoding", generation.decoding == Decoding::greedy ? "greedy" : "top_k"},
                     {"top_k", generation.top_k},
                     {"max_len", generation.max_len}};
    j["eval"] = {{"nli", eval.nli},
                 {"world", eval.world_path},
                 {"endpoint", eval.endpoint},
                 {"timeout_ms", eval.timeout_ms},
                 {"retries", eval.retries}};
    j["synthetic"] = {{"n_sessions", synthetic.n_sessions},
                      {"persona_rate", synthetic.persona_rate},
                      {"contradiction_rate", synthetic.contradiction_rate},
                      {"biased", synthetic.biased},
                      {"distractors_min", synthetic.distractors_min},
                      {"distractors_max", synthetic.distractors_max},
                      {"chatter_max", synthetic.chatter_max}};
    return j;
}

std::string PipelineConfig::config_hash() const { return "fnv64:" + to_hex(fnv1a64(to_json().dump())); }

// ---------------------------------------------------------------------------
// Intermediate-file IO

namespace {

json session_to_json(const DialogueSession& s) {
    json j;
    j["session_id"] = s.session_id;
    j["utterances"] = json::array();
    for (const auto& u : s.utterances)
        j["utterances"].push_back(json{{"speaker", u.speaker}, {"text", u.text}});
    return j;
}

DialogueSession session_from_json(const json& j) {
    DialogueSession s;
    s.session_id = j.at("session_id").get<std::string>();
    for (const auto& u : j.at("utterances"))
        s.utterances.push_back(
            {u.at("speaker").get<std::string>(), u.at("text").get<std::string>()});
    return s;
}

template <class T>
std::vector<T> read_jsonl_as(const std::string& path, T (*decode)(const json&)) {
    auto in = open_input(path);
    std::vector<T> out;
    try {
        for_each_jsonl_strict(in, path, [&](json&& j) { out.push_back(decode(j)); });
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return out;
}

}  // namespace

std::vector<DialogueSession> read_sessions(const std::string& path) {
    return read_jsonl_as<DialogueSession>(path, [](const json& j) { return session_from_json(j); });
}

std::vector<AnnotatedSession> read_annotated(const std::string& path) {
    return read_jsonl_as<AnnotatedSession>(path, [](const json& j) {
        AnnotatedSession a;
        a.session = session_from_json(j);
        for (const auto& s : j.at("summaries")) a.summaries.push_back({s.get<std::string>()});
        if (a.summaries.size() != a.session.utterances.size())
            throw DataError("annotated record: summary arity mismatch in session " +
                            a.session.session_id);
        return a;
    });
}

std::vector<FilteredSession> read_filtered(const std::string& path) {
    return read_jsonl_as<FilteredSession>(path, [](const json& j) {
        FilteredSession f;
        f.session = session_from_json(j);
        for (const auto& t : j.at("triples")) {
            if (t.is_null()) {
                f.triples.push_back(std::nullopt);
            } else {
                PersonaTriple p;
                p.subject = split_ws(t.at("subject").get<std::string>());
                p.attribute = t.at("attribute").get<std::string>();
                p.object = split_ws(t.at("object").get<std::string>());
                f.triples.push_back(std::move(p));
            }
        }
        if (f.triples.size() != f.session.utterances.size())
            throw DataError("filtered record: triple arity mismatch in session " +
                            f.session.session_id);
        return f;
    });
}

std::vector<TrainingExample> read_records(const std::string& path) {
    return read_jsonl_as<TrainingExample>(path, [](const json& j) { return example_from_json(j); });
}

std::vector<EncodedExample> read_shards(const std::string& path) {
    return read_jsonl_as<EncodedExample>(path, [](const json& j) { return encoded_from_json(j); });
}

std::vector<std::string> read_responses(const std::string& path) {
    return read_jsonl_as<std::string>(
        path, [](const json& j) { return j.at("response").get<std::string>(); });
}

void write_manifest(const std::string& subcommand, const PipelineConfig& cfg,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& counters) {
    if (outputs.empty()) return;
    json m;
    m["subcommand"] = subcommand;
    m["config_hash"] = cfg.config_hash();
    m["seed"] = cfg.seed;
    m["inputs"] = json::object();
    for (const auto& p : inputs) m["inputs"][p] = hash_file(p);
    m["outputs"] = json::object();
    for (const auto& p : outputs) m["outputs"][p] = hash_file(p);
    m["counters"] = counters;
    atomic_write(outputs.front() + ".manifest.json", [&](std::ostream& os) {
        os << m.dump(2) << '\n';
    });
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(const PipelineConfig& cfg, const std::string& in, const std::string& out) {
    auto stream = open_input(in);
    IngestStats stats;
    auto sessions = ingest_stream(stream, cfg.cleaning, stats);
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& s : sessions) os << session_to_json(s).dump() << '\n';
    });
    log_line(LogLevel::info, "ingest: " + std::to_string(stats.comments_parsed) + " comments -> " +
                                 std::to_string(sessions.size()) + " sessions (" +
                                 std::to_string(stats.lines_skipped) + " lines skipped)");
    write_manifest("ingest", cfg, {in}, {out},
                   json{{"comments_parsed", stats.comments_parsed},
                        {"lines_skipped", stats.lines_skipped},
                        {"comments_dropped", stats.comments_dropped},
                        {"orphaned", stats.orphaned},
                        {"sessions", stats.sessions}});
}

void cmd_extract(const PipelineConfig& cfg, const std::string& in, const std::string& out) {
    auto sessions = read_sessions(in);
    const AttributeRegistry reg = AttributeRegistry::load(cfg.registry_path);

    std::unique_ptr<ExtractorBackend> backend;
    RemoteExtractor* remote = nullptr;
    if (cfg.extraction.backend == "remote") {
        if (cfg.extraction.remote.endpoint.empty())
            throw ConfigError("extraction.backend=remote requires extraction.endpoint");
        auto r = std::make_unique<RemoteExtractor>(cfg.extraction.remote);
        remote = r.get();
        backend = std::move(r);
    } else {
        backend = std::make_unique<RuleExtractor>(RuleSet::load(cfg.rules_path, reg));
    }

    auto annotated = annotate_sessions(std::move(sessions), *backend, cfg.threads);
    if (remote && remote->batches_sent() > 0 && remote->failed_batches() == remote->batches_sent())
        throw ExternalServiceError("extraction service unreachable: every batch failed (" +
                                   cfg.extraction.remote.endpoint + ")");

    atomic_write(out, [&](std::ostream& os) {
        for (const auto& a : annotated) {
            json j = session_to_json(a.session);
            j["summaries"] = json::array();
            for (const auto& s : a.summaries) j["summaries"].push_back(s.raw);
            os << j.dump() << '\n';
        }
    });
    json counters{{"sessions", annotated.size()}};
    if (remote) {
        counters["batches_sent"] = remote->batches_sent();
        counters["failed_batches"] = remote->failed_batches();
    }
    write_manifest("extract", cfg, {in}, {out}, counters);
}

void cmd_filter(const PipelineConfig& cfg, const std::string& in, const std::string& out) {
    auto annotated = read_annotated(in);
    const AttributeRegistry reg = AttributeRegistry::load(cfg.registry_path);

    DocFreq df;
    if (cfg.filter.use_idf) {
        std::vector<std::string> docs;
        for (const auto& a : annotated)
            for (const auto& u : a.session.utterances) docs.push_back(u.text);
        df = build_doc_freq(docs);
    }
    HashedTfidfSimilarity sim(cfg.filter.similarity_dims, cfg.filter.use_idf ? &df : nullptr);
    FilterConfig fc{cfg.filter.max_subject_tokens, cfg.filter.min_similarity, &reg, &sim};

    FilterStats stats;
    std::vector<RejectionRecord> audit;
    auto filtered = filter_stream_parallel(annotated, fc, stats, cfg.threads,
                                           cfg.filter.audit_log.empty() ? nullptr : &audit);

    atomic_write(out, [&](std::ostream& os) {
        for (const auto& f : filtered) {
            json j = session_to_json(f.session);
            j["triples"] = json::array();
            for (const auto& t : f.triples) {
                if (!t) j["triples"].push_back(nullptr);
                else
                    j["triples"].push_back(json{{"subject", join_tokens(t->subject)},
                                                {"attribute", t->attribute},
                                                {"object", join_tokens(t->object)}});
            }
            os << j.dump() << '\n';
        }
    });
    if (!cfg.filter.audit_log.empty()) {
        atomic_write(cfg.filter.audit_log, [&](std::ostream& os) {
            for (const auto& r : audit)
                os << json{{"session_id", r.session_id},
                           {"utterance_index", r.utterance_index},
                           {"reason", filter_reason_name(r.reason)},
                           {"summary", r.summary}}
                          .dump()
                   << '\n';
        });
    }

    json by_reason;
    for (int r = 0; r < kFilterReasonCount; ++r)
        by_reason[filter_reason_name(static_cast<FilterReason>(r))] =
            stats.by_reason[static_cast<std::size_t>(r)];
    write_manifest("filter", cfg, {in}, {out},
                   json{{"verdicts", by_reason}, {"total", stats.total()}});
}

void cmd_build(const PipelineConfig& cfg, const std::string& in, const std::string& out) {
    auto filtered = read_filtered(in);
    const CorpusStats stats = corpus_stats(filtered);

    std::uint64_t examples = 0;
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& f : filtered) {
            for (const auto& x : session_examples(f, cfg.profile_cap)) {
                os << example_to_json(x).dump() << '\n';
                ++examples;
            }
        }
    });
    log_line(LogLevel::info,
             "build: " + std::to_string(stats.sessions) + " sessions -> " +
                 std::to_string(examples) + " examples");
    write_manifest("build", cfg, {in}, {out},
                   json{{"sessions", stats.sessions},
                        {"utterances", stats.utterances},
                        {"personas", stats.personas},
                        {"tokens", stats.tokens},
                        {"tokens_per_utterance", stats.tokens_per_utterance()},
                        {"examples", examples}});
}

void cmd_stats(const PipelineConfig& cfg, const std::string& in) {
    (void)cfg;
    const CorpusStats s = corpus_stats(read_filtered(in));
    std::cout << "#Session\t#Utterance\t#Persona\t#Token\t#Token/Utterance\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu\t%llu\t%llu\t%llu\t%.2f\n",
                  static_cast<unsigned long long>(s.sessions),
                  static_cast<unsigned long long>(s.utterances),
                  static_cast<unsigned long long>(s.personas),
                  static_cast<unsigned long long>(s.tokens), s.tokens_per_utterance());
    std::cout << buf;
}

void cmd_augment(const PipelineConfig& cfg, const std::string& in, const std::string& out) {
    auto raw = read_records(in);
    const PersonaPool pool = build_pool(raw);
    std::vector<TrainingExample> merged;
    if (pool.empty()) {
        log_line(LogLevel::warn, "augment: empty persona pool, output equals input");
        merged = raw;
    } else {
        auto augmented = augment_batch_parallel(raw, pool, cfg.augment, cfg.threads);
        merged = merge_datasets(raw, augmented, cfg.augment);
    }
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& x : merged) os << example_to_json(x).dump() << '\n';
    });
    write_manifest("augment", cfg, {in}, {out},
                   json{{"raw_records", raw.size()},
                        {"pool_size", pool.size()},
                        {"merged_records", merged.size()},
                        {"mix_ratio", cfg.augment.mix_ratio}});
}

void cmd_encode(const PipelineConfig& cfg, const std::string& in, const std::string& out,
                const std::string& vocab_out, const std::string& vocab_in) {
    auto records = read_records(in);

    std::optional<WhitespaceVocab> vocab;
    if (!vocab_in.empty()) {
        vocab = WhitespaceVocab::load_file(vocab_in);
    } else {
        vocab = build_vocab(records, cfg.vocab_budget);
        if (vocab_out.empty())
            throw ConfigError("encode: need --vocab-out (or --vocab to reuse one)");
        vocab->save(vocab_out);
    }

    EncodeStats stats;
    auto shards = encode_batch_parallel(records, *vocab, cfg.encoder, stats, cfg.threads);
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& e : shards) os << encoded_to_json(e).dump() << '\n';
    });

    std::vector<std::string> outputs{out};
    if (vocab_in.empty()) outputs.push_back(vocab_out);
    write_manifest("encode", cfg, {in}, outputs,
                   json{{"encoded", stats.encoded},
                        {"skipped_empty_response", stats.skipped_empty_response},
                        {"vocab_size", vocab->vocab_size()},
                        {"strip_persona", cfg.encoder.strip_persona}});
}

namespace {

ModelConfig resolve_model_config(const PipelineConfig& cfg, const WhitespaceVocab& vocab) {
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.vocab_size();
    mc.seed = cfg.seed;
    mc.validate();
    return mc;
}

}  // namespace

void cmd_train(const PipelineConfig& cfg, const std::string& shards, const std::string& vocab,
               const std::string& ckpt_out, const std::string& trace_out) {
    auto dataset = read_shards(shards);
    if (dataset.empty()) throw DataError("train: no encoded examples in " + shards);
    const WhitespaceVocab vv = WhitespaceVocab::load_file(vocab);

    ModelParams params = ModelParams::init(resolve_model_config(cfg, vv));
    auto trace = train(params, dataset, cfg.schedule, AdamConfig{}, cfg.threads);

    save_checkpoint(params, ckpt_out);
    atomic_write(trace_out, [&](std::ostream& os) {
        for (const auto& r : trace)
            os << json{{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}}.dump() << '\n';
    });
    write_manifest("train", cfg, {shards, vocab}, {ckpt_out, trace_out},
                   json{{"steps", trace.size()},
                        {"final_loss", trace.empty() ? 0.0 : trace.back().loss},
                        {"examples", dataset.size()}});
}

void cmd_generate(const PipelineConfig& cfg, const std::string& data_in, const std::string& ckpt,
                  const std::string& vocab, const std::string& out) {
    auto records = read_records(data_in);
    const WhitespaceVocab vv = WhitespaceVocab::load_file(vocab);
    const ModelParams params = load_checkpoint(ckpt);

    std::vector<std::string> responses(records.size());
    parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
        EncodedExample src = assemble_source(records[i], vv, cfg.encoder);
        GenerateConfig gc = cfg.generation;
        gc.seed = cfg.seed ^ (0x9e3779b97f4a7c15ull * (i + 1));
        responses[i] = vv.decode(generate(params, src, gc));
    });

    atomic_write(out, [&](std::ostream& os) {
        for (const auto& r : responses) os << json{{"response", r}}.dump() << '\n';
    });
    write_manifest("generate", cfg, {data_in, ckpt, vocab}, {out},
                   json{{"responses", responses.size()},
                        {"strip_persona", cfg.encoder.strip_persona}});
}

void cmd_eval(const PipelineConfig& cfg, const std::string& responses_in,
              const std::string& data_in, const std::string& report_out,
              const std::string& ppl_shards, const std::string& ppl_ckpt) {
    auto responses = read_responses(responses_in);
    auto records = read_records(data_in);

    std::optional<SyntheticWorld> world;
    std::unique_ptr<NliBackend> nli;
    if (cfg.eval.nli == "remote") {
        if (cfg.eval.endpoint.empty()) throw ConfigError("eval.nli=remote requires eval.endpoint");
        nli = std::make_unique<RemoteNli>(cfg.eval.endpoint, cfg.eval.timeout_ms,
                                          cfg.eval.retries);
    } else {
        if (cfg.eval.world_path.empty()) throw ConfigError("eval.nli=oracle requires eval.world");
        world = SyntheticWorld::load(cfg.eval.world_path);
        nli = std::make_unique<OracleNli>(*world);
    }

    std::optional<double> ppl;
    if (!ppl_shards.empty() && !ppl_ckpt.empty()) {
        const ModelParams params = load_checkpoint(ppl_ckpt);
        ppl = perplexity(params, read_shards(ppl_shards), cfg.threads);
    }

    const EvalReport rep = evaluate(responses, records, *nli, ppl);
    atomic_write(report_out, [&](std::ostream& os) { os << rep.to_json().dump(2) << '\n'; });
    std::cout << rep.table_row() << "\n";

    std::vector<std::string> inputs{responses_in, data_in};
    if (!ppl_shards.empty() && !ppl_ckpt.empty()) {
        inputs.push_back(ppl_shards);
        inputs.push_back(ppl_ckpt);
    }
    write_manifest("eval", cfg, inputs, {report_out}, rep.to_json());
}

void cmd_synth_comments(const PipelineConfig& cfg, const std::string& out,
                        const std::string& world_out) {
    const SyntheticWorld world = SyntheticWorld::default_world();
    auto lines = generate_comment_dump(world, cfg.synthetic);
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& l : lines) os << l << '\n';
    });
    if (!world_out.empty()) world.save(world_out);
    std::vector<std::string> outputs{out};
    if (!world_out.empty()) outputs.push_back(world_out);
    write_manifest("synth-comments", cfg, {}, outputs,
                   json{{"comments", lines.size()}, {"sessions", cfg.synthetic.n_sessions}});
}

void cmd_synth_dataset(const PipelineConfig& cfg, const std::string& out,
                       const std::string& world_out) {
    const SyntheticWorld world = SyntheticWorld::default_world();
    auto records = generate_corpus(world, cfg.synthetic);
    atomic_write(out, [&](std::ostream& os) {
        for (const auto& r : records) os << example_to_json(r.example).dump() << '\n';
    });
    if (!world_out.empty()) world.save(world_out);
    std::vector<std::string> outputs{out};
    if (!world_out.empty()) outputs.push_back(world_out);
    write_manifest("synth-dataset", cfg, {}, outputs, json{{"records", records.size()}});
}

}  // namespace pkit
