#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pkit/augment.hpp"
#include "pkit/encode.hpp"
#include "pkit/eval.hpp"
#include "pkit/extract.hpp"
#include "pkit/filter.hpp"
#include "pkit/ingest.hpp"
#include "pkit/model.hpp"
#include "pkit/synthetic.hpp"

namespace pkit {

// One config file drives every subcommand; flags may override scalars.
struct PipelineConfig {
    std::uint64_t seed = 42;
    int threads = 0;  // 0 = OpenMP default

    std::string registry_path = "configs/attributes.txt";
    std::string rules_path = "configs/rules.txt";

    CleaningConfig cleaning;

    struct Extraction {
        std::string backend = "rules";  // rules | remote
        RemoteConfig remote;
    } extraction;

    struct Filter {
        std::size_t max_subject_tokens = 5;
        double min_similarity = 0.1;
        std::size_t similarity_dims = 4096;
        bool use_idf = false;
        std::string audit_log;  // empty = off
    } filter;

    std::size_t profile_cap = kDefaultProfileCap;
    AugmentationConfig augment;

    EncoderConfig encoder;
    std::size_t vocab_budget = 8192;

    ModelConfig model;  // vocab_size resolved from the vocab file at run time
    TrainSchedule schedule;
    GenerateConfig generation;

    struct Eval {
        std::string nli = "oracle";  // oracle | remote
        std::string world_path;
        std::string endpoint;
        int timeout_ms = 5000;
        int retries = 2;
    } eval;

    SyntheticConfig synthetic;

    static PipelineConfig load(const std::string& path);
    static PipelineConfig from_json(const json& j, const std::string& source_name);
    json to_json() const;
    std::string config_hash() const;
};

// stderr logger; PKIT_LOG=debug|info|warn|error (default info).
enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
void log_line(LogLevel level, const std::string& msg);

// Dataset and intermediate-file IO (formats in docs/formats.md). Writers go
// through a temp file and rename, so failed runs leave no partial artifact.
std::vector<DialogueSession> read_sessions(const std::string& path);
std::vector<AnnotatedSession> read_annotated(const std::string& path);
std::vector<FilteredSession> read_filtered(const std::string& path);
std::vector<TrainingExample> read_records(const std::string& path);
std::vector<EncodedExample> read_shards(const std::string& path);
std::vector<std::string> read_responses(const std::string& path);

void write_manifest(const std::string& subcommand, const PipelineConfig& cfg,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& counters);

// Subcommand drivers; errors are thrown (ConfigError/DataError/
// ExternalServiceError) and mapped to exit codes by the CLI.
void cmd_ingest(const PipelineConfig& cfg, const std::string& in, const std::string& out);
void cmd_extract(const PipelineConfig& cfg, const std::string& in, const std::string& out);
void cmd_filter(const PipelineConfig& cfg, const std::string& in, const std::string& out);
void cmd_build(const PipelineConfig& cfg, const std::string& in, const std::string& out);
void cmd_stats(const PipelineConfig& cfg, const std::string& in);
void cmd_augment(const PipelineConfig& cfg, const std::string& in, const std::string& out);
void cmd_encode(const PipelineConfig& cfg, const std::string& in, const std::string& out,
                const std::string& vocab_out, const std::string& vocab_in);
void cmd_train(const PipelineConfig& cfg, const std::string& shards, const std::string& vocab,
               const std::string& ckpt_out, const std::string& trace_out);
void cmd_generate(const PipelineConfig& cfg, const std::string& data_in, const std::string& ckpt,
                  const std::string& vocab, const std::string& out);
void cmd_eval(const PipelineConfig& cfg, const std::string& responses_in,
              const std::string& data_in, const std::string& report_out,
              const std::string& ppl_shards, const std::string& ppl_ckpt);
void cmd_synth_comments(const PipelineConfig& cfg, const std::string& out,
                        const std::string& world_out);
void cmd_synth_dataset(const PipelineConfig& cfg, const std::string& out,
                       const std::string& world_out);

}  // namespace pkit
