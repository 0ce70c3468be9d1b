#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pkit/profile.hpp"

namespace pkit {

// A small closed world of attributes, objects and response templates. Persona
// realizations are token sequences "i <surface> <object>", so the oracle NLI
// can invert every generated response exactly.
struct SyntheticWorld {
    struct Attribute {
        std::string symbol;                 // registry symbol, e.g. "live_in"
        std::vector<std::string> surface;   // realization tokens, e.g. {"live","in"}
        std::vector<std::string> objects;   // >= 2 alternatives, space-joined token strings
        std::string question;               // context cue for this attribute
    };

    std::vector<Attribute> attributes;
    std::vector<std::string> neutral_contexts;
    std::vector<std::string> neutral_responses;

    const Attribute* find(const std::string& symbol) const;

    // "i <surface> <object>"
    std::string realize(const Attribute& a, const std::string& object) const;

    static SyntheticWorld default_world();

    json to_json() const;
    static SyntheticWorld from_json(const json& j);
    void save(const std::string& path) const;
    static SyntheticWorld load(const std::string& path);
};

struct SyntheticConfig {
    std::size_t n_sessions = 1000;
    double persona_rate = 0.6;
    double contradiction_rate = 0.0;
    // Deliberate bias: profiles attach only to persona-realizing (or
    // contradicting) responses. With biased=false profiles always attach.
    bool biased = true;
    int distractors_min = 0;  // extra conflict-free profile triples
    int distractors_max = 0;
    int chatter_max = 2;      // neutral context exchanges before the cue
    std::uint64_t seed = 0;
};

// Label the generator intended for a record; recoverable via the oracle.
enum class IntendedLabel { entail, neutral, contradict };

struct SyntheticRecord {
    TrainingExample example;
    IntendedLabel intended = IntendedLabel::neutral;
};

std::vector<SyntheticRecord> generate_corpus(const SyntheticWorld& world,
                                             const SyntheticConfig& cfg);

// Raw comment-dump rendering of the same world: one thread per session, a
// root-to-leaf chain alternating two users, the leaf carrying the response.
// Feeding this through ingest/extract/filter/build reproduces the biased
// corpus that generate_corpus emits directly.
std::vector<std::string> generate_comment_dump(const SyntheticWorld& world,
                                               const SyntheticConfig& cfg);

}  // namespace pkit
