#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pkit/profile.hpp"
#include "pkit/synthetic.hpp"

namespace pkit {

enum class NliLabel { entail, neutral, contradict };

inline int nli_value(NliLabel l) {
    switch (l) {
        case NliLabel::entail: return 1;
        case NliLabel::neutral: return 0;
        case NliLabel::contradict: return -1;
    }
    return 0;
}

const char* nli_label_name(NliLabel l);
std::optional<NliLabel> nli_label_from_name(const std::string& s);

class NliBackend {
public:
    virtual ~NliBackend() = default;
    virtual NliLabel classify(const PersonaTriple& premise, const std::string& hypothesis) = 0;
};

// Deterministic stand-in judged against the synthetic world's templates:
// entail when the hypothesis surface-realizes (attribute, object); contradict
// when it realizes the same attribute with a different object from the world's
// alternative set; neutral otherwise. Contradiction dominates when both occur.
class OracleNli : public NliBackend {
public:
    explicit OracleNli(const SyntheticWorld& world) : world_(&world) {}
    NliLabel classify(const PersonaTriple& premise, const std::string& hypothesis) override;

private:
    const SyntheticWorld* world_;
};

// POST /nli {"premise": <surface text>, "hypothesis": ...} -> {"label": ...}.
// A failed call degrades to neutral and bumps the failure counter.
class RemoteNli : public NliBackend {
public:
    RemoteNli(std::string endpoint, int timeout_ms = 5000, int retries = 2)
        : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms), retries_(retries) {}

    NliLabel classify(const PersonaTriple& premise, const std::string& hypothesis) override;
    std::uint64_t failed_calls() const { return failed_calls_; }

private:
    std::string endpoint_;
    int timeout_ms_;
    int retries_;
    std::uint64_t failed_calls_ = 0;
};

// (distinct n-grams across all responses) / (total n-gram count). Throws
// DataError when no response yields an n-gram.
double distinct_n(const std::vector<std::vector<std::string>>& responses, int n);

// Eq: CS(R) = sum over profile triples of {entail:+1, neutral:0, contradict:-1}.
int consistency_score(const std::string& response, const PersonaProfile& profile,
                      NliBackend& nli);

struct EncRatios {
    double entail = 0.0;
    double neutral = 0.0;
    double contradict = 0.0;
};

// Response-level label with precedence contradict > entail > neutral, ratios
// over persona-bearing pairs. Throws DataError when none is persona-bearing.
EncRatios enc_ratios(const std::vector<std::pair<std::string, PersonaProfile>>& pairs,
                     NliBackend& nli);

struct EvalReport {
    double dist1 = 0.0;
    double dist2 = 0.0;
    EncRatios ratios;
    double mean_cs = 0.0;
    std::optional<double> ppl;
    std::uint64_t n_responses = 0;

    json to_json() const;
    std::string table_row() const;  // one formatted line for the CLI
};

// responses[i] answers records[i]; sizes must match.
EvalReport evaluate(const std::vector<std::string>& responses,
                    const std::vector<TrainingExample>& records, NliBackend& nli,
                    std::optional<double> ppl = std::nullopt);

}  // namespace pkit
