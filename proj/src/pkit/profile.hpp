#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pkit/filter.hpp"
#include "pkit/ingest.hpp"
#include "pkit/jsonl.hpp"
#include "pkit/persona.hpp"

namespace pkit {

// Per-(session, speaker) merged triples: deduplicated, first-appearance order,
// truncated at the profile cap.
struct PersonaProfile {
    std::string owner;
    std::vector<PersonaTriple> triples;

    bool operator==(const PersonaProfile&) const = default;
};

struct TrainingExample {
    PersonaProfile profile;          // possibly empty
    std::vector<Utterance> context;  // non-empty; all utterances before the response
    Utterance response;
    std::string responder;           // == response.speaker == profile.owner
    bool augmented = false;
    int added_count = 0;
};

constexpr std::size_t kDefaultProfileCap = 10;

std::map<std::string, PersonaProfile> build_profiles(
    const DialogueSession& session, const std::vector<std::optional<PersonaTriple>>& triples,
    std::size_t profile_cap = kDefaultProfileCap);

// One example per utterance index >= 2 (1-based): the prefix is the context,
// that utterance the response. Empty profiles are kept.
std::vector<TrainingExample> build_examples(const DialogueSession& session,
                                            const std::map<std::string, PersonaProfile>& profiles);

std::vector<TrainingExample> session_examples(const FilteredSession& fs,
                                              std::size_t profile_cap = kDefaultProfileCap);

struct CorpusStats {
    std::uint64_t sessions = 0;
    std::uint64_t utterances = 0;
    std::uint64_t personas = 0;  // kept triples
    std::uint64_t tokens = 0;    // whitespace tokens over utterances

    double tokens_per_utterance() const {
        return utterances ? static_cast<double>(tokens) / static_cast<double>(utterances) : 0.0;
    }
    CorpusStats& operator+=(const CorpusStats& o) {
        sessions += o.sessions;
        utterances += o.utterances;
        personas += o.personas;
        tokens += o.tokens;
        return *this;
    }
};

CorpusStats corpus_stats(const std::vector<FilteredSession>& stream);

// Canonical dataset record <-> JSON (docs/formats.md).
json example_to_json(const TrainingExample& x);
TrainingExample example_from_json(const json& j);

}  // namespace pkit
