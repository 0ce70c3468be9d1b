#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pkit/extract.hpp"
#include "pkit/persona.hpp"

namespace pkit {

// Cosine similarity of two texts in [-1, 1]; the baseline backend is
// deterministic, returns values in [0, 1], 1 on identical non-empty texts.
class SimilarityBackend {
public:
    virtual ~SimilarityBackend() = default;
    virtual double similarity(const std::string& a, const std::string& b) const = 0;
};

// Document frequencies for IDF weighting; optional.
struct DocFreq {
    std::unordered_map<std::string, std::uint64_t> df;
    std::uint64_t n_docs = 0;
};

DocFreq build_doc_freq(const std::vector<std::string>& docs);

// Cosine of token-hashed bag-of-words vectors, IDF-weighted when stats are
// supplied, uniform otherwise. Tokens are lowercased whitespace tokens hashed
// with fnv1a64 into `dims` buckets. 0 when either text has no tokens.
double tfidf_hash_similarity(const std::string& a, const std::string& b, std::size_t dims,
                             const DocFreq* stats);

class HashedTfidfSimilarity : public SimilarityBackend {
public:
    explicit HashedTfidfSimilarity(std::size_t dims = 4096, const DocFreq* stats = nullptr)
        : dims_(dims), stats_(stats) {}

    double similarity(const std::string& a, const std::string& b) const override {
        return tfidf_hash_similarity(a, b, dims_, stats_);
    }

private:
    std::size_t dims_;
    const DocFreq* stats_;
};

enum class FilterReason : int {
    ok = 0,
    none_summary,
    bad_format,
    unknown_attribute,
    subject_too_long,
    low_similarity,
};
constexpr int kFilterReasonCount = 6;
const char* filter_reason_name(FilterReason r);

struct FilterVerdict {
    bool kept = false;
    FilterReason reason = FilterReason::none_summary;
};

struct FilterConfig {
    std::size_t max_subject_tokens = 5;
    double min_similarity = 0.1;
    const AttributeRegistry* registry = nullptr;
    const SimilarityBackend* similarity = nullptr;
};

struct FilterStats {
    std::array<std::uint64_t, kFilterReasonCount> by_reason{};

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto v : by_reason) t += v;
        return t;
    }
    std::uint64_t kept() const { return by_reason[0]; }
    FilterStats& operator+=(const FilterStats& o) {
        for (int i = 0; i < kFilterReasonCount; ++i) by_reason[size_t(i)] += o.by_reason[size_t(i)];
        return *this;
    }
};

// Rules in fixed order, cheapest first: none_summary, bad_format,
// unknown_attribute, subject_too_long (kept iff <= max), low_similarity
// (kept iff similarity >= min, compared against the triple's surface form).
// First failure is reported. Total: every input yields a verdict.
std::pair<std::optional<PersonaTriple>, FilterVerdict> filter_one(const PersonaSummary& summary,
                                                                  const std::string& source,
                                                                  const FilterConfig& cfg);

struct FilteredSession {
    DialogueSession session;
    std::vector<std::optional<PersonaTriple>> triples;  // aligned with utterances
};

struct RejectionRecord {
    std::string session_id;
    std::size_t utterance_index;
    FilterReason reason;
    std::string summary;
};

// Serial reference and OpenMP implementations produce identical results;
// stats merge additively. `audit` (optional) collects one record per rejection.
std::vector<FilteredSession> filter_stream_serial(const std::vector<AnnotatedSession>& annotated,
                                                  const FilterConfig& cfg, FilterStats& stats,
                                                  std::vector<RejectionRecord>* audit = nullptr);
std::vector<FilteredSession> filter_stream_parallel(const std::vector<AnnotatedSession>& annotated,
                                                    const FilterConfig& cfg, FilterStats& stats,
                                                    int threads,
                                                    std::vector<RejectionRecord>* audit = nullptr);

}  // namespace pkit
