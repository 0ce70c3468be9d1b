#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pkit/profile.hpp"

namespace pkit {

// Token ids; specials pinned at fixed low ids.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSep = 2;
    static constexpr int kBos = 3;
    static constexpr int kEos = 4;
    static constexpr int kNumSpecials = 5;

    virtual ~Tokenizer() = default;
    virtual std::vector<int> encode(const std::string& text) const = 0;
    virtual std::string decode(const std::vector<int>& ids) const = 0;
    virtual int vocab_size() const = 0;
};

// Whitespace + lowercase tokenizer over a frequency-ranked vocabulary.
// decode(encode(t)) == t for in-vocabulary, whitespace-normal, lowercase text.
class WhitespaceVocab : public Tokenizer {
public:
    explicit WhitespaceVocab(std::vector<std::string> words);  // non-special words, rank order

    std::vector<int> encode(const std::string& text) const override;
    std::string decode(const std::vector<int>& ids) const override;
    int vocab_size() const override { return static_cast<int>(id_to_word_.size()); }

    void save(const std::string& path) const;
    static WhitespaceVocab load_file(const std::string& path);

private:
    std::vector<std::string> id_to_word_;
    std::unordered_map<std::string, int> word_to_id_;
};

// Frequency-ranked vocabulary over the dataset's texts and persona surface
// forms; ties broken lexicographically. max_size includes the 5 specials.
WhitespaceVocab build_vocab(const std::vector<TrainingExample>& corpus, std::size_t max_size);

struct EncoderConfig {
    std::size_t max_persona_tokens = 128;
    std::size_t max_context_tokens = 128;
    std::size_t max_response_tokens = 128;
    bool strip_persona = false;  // ablation: encode as if the profile were empty

    void validate() const;
};

// One flat token sequence with four aligned channels.
//
// Layout:  [BOS] p1 [SEP] p2 [SEP] ... | c1 [SEP] ... cN [SEP] | r1..rT [EOS]
//   positions  index of the token within its unit, restarting per persona
//              triple / context utterance / response; a separator takes the
//              next index of the unit it closes ([BOS] is its own unit).
//   turns      turn distance to the response: c_i -> N-i+1 over the kept
//              context (last utterance 1); persona and response 0.
//   types      2 persona segment; context utterance: 0 if spoken by the
//              responder else 1; response 0.
struct EncodedExample {
    std::vector<int> tokens;
    std::vector<int> positions;
    std::vector<int> turns;
    std::vector<int> types;
    int source_len = 0;  // persona + context
    int target_len = 0;  // response incl. [EOS]

    std::size_t total_len() const { return tokens.size(); }
};

// Per-utterance turn values for a kept context of length n: [n, n-1, ..., 1].
std::vector<int> turn_indices(std::size_t context_len);

// Row-major (S+T)^2 self-attention mask: position i may attend to j iff
// (j < S) or (S <= j <= i). Source is bidirectional, target causal.
std::vector<std::uint8_t> build_unilm_mask(std::size_t source_len, std::size_t target_len);

// Nothing is returned when the response tokenizes to zero tokens; the caller
// counts the skip.
std::optional<EncodedExample> assemble_sequence(const TrainingExample& x, const Tokenizer& tok,
                                                const EncoderConfig& cfg);

struct EncodeStats {
    std::uint64_t encoded = 0;
    std::uint64_t skipped_empty_response = 0;
};

std::vector<EncodedExample> encode_batch_serial(const std::vector<TrainingExample>& dataset,
                                                const Tokenizer& tok, const EncoderConfig& cfg,
                                                EncodeStats& stats);
std::vector<EncodedExample> encode_batch_parallel(const std::vector<TrainingExample>& dataset,
                                                  const Tokenizer& tok, const EncoderConfig& cfg,
                                                  EncodeStats& stats, int threads);

json encoded_to_json(const EncodedExample& e);
EncodedExample encoded_from_json(const json& j);

}  // namespace pkit
