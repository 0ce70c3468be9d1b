#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pkit/ingest.hpp"
#include "pkit/persona.hpp"

namespace pkit {

// Produces one PersonaSummary per utterance. Total: always answers, possibly
// with "[None]".
class ExtractorBackend {
public:
    virtual ~ExtractorBackend() = default;

    virtual PersonaSummary extract(const std::string& text) = 0;

    // One summary per input, order preserved.
    virtual std::vector<PersonaSummary> extract_batch(const std::vector<std::string>& texts,
                                                      int threads) = 0;
};

// "i like {x}" -> attribute `like`, fixed subject tokens. Exactly one capture
// slot, and it must be the final pattern token.
struct PatternRule {
    std::vector<std::string> prefix;   // literal tokens before the slot
    std::string attribute;
    std::vector<std::string> subject;
};

class RuleSet {
public:
    // File format: one rule per line, "pattern<TAB>attribute<TAB>subject",
    // '#' comments. Patterns/subjects are lowercased.
    static RuleSet load(const std::string& path, const AttributeRegistry& reg);
    static RuleSet from_rules(std::vector<PatternRule> rules, const AttributeRegistry& reg);

    const std::vector<PatternRule>& rules() const { return rules_; }

private:
    std::vector<PatternRule> rules_;
};

// First matching rule in document order wins; the capture is cut at the first
// clause boundary and at 8 tokens; no match -> "[None]". Pure function.
PersonaSummary rule_extract(const std::string& text, const std::vector<PatternRule>& rules);

class RuleExtractor : public ExtractorBackend {
public:
    explicit RuleExtractor(RuleSet rules) : rules_(std::move(rules)) {}

    PersonaSummary extract(const std::string& text) override {
        return rule_extract(text, rules_.rules());
    }
    std::vector<PersonaSummary> extract_batch(const std::vector<std::string>& texts,
                                              int threads) override;

private:
    RuleSet rules_;
};

struct RemoteConfig {
    std::string endpoint;        // e.g. "http://127.0.0.1:8601"
    int timeout_ms = 5000;
    int retries = 2;             // attempts = retries + 1
    std::size_t batch_size = 64;
    int max_in_flight = 4;
};

// HTTP client for a served extraction model. POST /extract with
// {"utterances": [...]} -> {"summaries": [...]} of equal length. A batch whose
// retries are exhausted degrades to all-"[None]" and bumps failed_batches;
// failures never abort the stream.
class RemoteExtractor : public ExtractorBackend {
public:
    explicit RemoteExtractor(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

    PersonaSummary extract(const std::string& text) override;
    std::vector<PersonaSummary> extract_batch(const std::vector<std::string>& texts,
                                              int threads) override;

    std::uint64_t failed_batches() const { return failed_batches_.load(); }
    std::uint64_t batches_sent() const { return batches_sent_.load(); }

private:
    // One summary per input or nullopt on protocol/transport failure.
    std::optional<std::vector<PersonaSummary>> send_batch(
        const std::vector<std::string>& texts);

    RemoteConfig cfg_;
    std::atomic<std::uint64_t> failed_batches_{0};
    std::atomic<std::uint64_t> batches_sent_{0};
};

struct AnnotatedSession {
    DialogueSession session;
    std::vector<PersonaSummary> summaries;  // one per utterance
};

// One summary per utterance; session content untouched.
std::vector<AnnotatedSession> annotate_sessions(std::vector<DialogueSession> sessions,
                                                ExtractorBackend& backend, int threads);

}  // namespace pkit
