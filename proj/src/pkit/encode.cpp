#include "pkit/encode.hpp"

#include <algorithm>
#include <fstream>

#include "pkit/parallel.hpp"
#include "pkit/text.hpp"

namespace pkit {

namespace {
const char* kSpecialNames[Tokenizer::kNumSpecials] = {"[PAD]", "[UNK]", "[SEP]", "[BOS]",
                                                      "[EOS]"};
}

WhitespaceVocab::WhitespaceVocab(std::vector<std::string> words) {
    id_to_word_.reserve(words.size() + kNumSpecials);
    for (auto* s : kSpecialNames) id_to_word_.emplace_back(s);
    for (auto& w : words) id_to_word_.push_back(std::move(w));
    for (std::size_t i = 0; i < id_to_word_.size(); ++i)
        word_to_id_.emplace(id_to_word_[i], static_cast<int>(i));
}

std::vector<int> WhitespaceVocab::encode(const std::string& text) const {
    std::vector<int> out;
    for (const auto& t : split_ws(lower_ascii(text))) {
        auto it = word_to_id_.find(t);
        out.push_back(it == word_to_id_.end() ? kUnk : it->second);
    }
    return out;
}

std::string WhitespaceVocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> toks;
    for (int id : ids) {
        if (id >= 0 && static_cast<std::size_t>(id) < id_to_word_.size())
            toks.push_back(id_to_word_[static_cast<std::size_t>(id)]);
        else
            toks.push_back(kSpecialNames[kUnk]);
    }
    return join_tokens(toks);
}

void WhitespaceVocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("vocab: cannot write " + path);
    for (const auto& w : id_to_word_) out << w << '\n';
}

WhitespaceVocab WhitespaceVocab::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("vocab: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.size() < kNumSpecials) throw ConfigError("vocab: truncated file " + path);
    for (int i = 0; i < kNumSpecials; ++i)
        if (lines[static_cast<std::size_t>(i)] != kSpecialNames[i])
            throw ConfigError("vocab: specials not pinned in " + path);
    return WhitespaceVocab(
        std::vector<std::string>(lines.begin() + kNumSpecials, lines.end()));
}

WhitespaceVocab build_vocab(const std::vector<TrainingExample>& corpus, std::size_t max_size) {
    std::unordered_map<std::string, std::uint64_t> freq;
    auto count = [&](const std::string& text) {
        for (auto& t : split_ws(lower_ascii(text))) ++freq[t];
    };
    for (const auto& x : corpus) {
        for (const auto& t : x.profile.triples) count(serialize_triple(t, TripleStyle::surface));
        for (const auto& u : x.context) count(u.text);
        count(x.response.text);
    }

    std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    const std::size_t budget =
        max_size > Tokenizer::kNumSpecials ? max_size - Tokenizer::kNumSpecials : 0;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < ranked.size() && i < budget; ++i)
        words.push_back(ranked[i].first);
    return WhitespaceVocab(std::move(words));
}

void EncoderConfig::validate() const {
    if (max_persona_tokens < 2 || max_context_tokens < 2 || max_response_tokens < 2)
        throw ConfigError("encoder: every segment cap must be >= 2");
}

std::vector<int> turn_indices(std::size_t context_len) {
    std::vector<int> out(context_len);
    for (std::size_t i = 0; i < context_len; ++i)
        out[i] = static_cast<int>(context_len - i);
    return out;
}

std::vector<std::uint8_t> build_unilm_mask(std::size_t source_len, std::size_t target_len) {
    const std::size_t n = source_len + target_len;
    std::vector<std::uint8_t> mask(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t* row = mask.data() + i * n;
        for (std::size_t j = 0; j < source_len; ++j) row[j] = 1;
        if (i >= source_len)
            for (std::size_t j = source_len; j <= i; ++j) row[j] = 1;
    }
    return mask;
}

std::optional<EncodedExample> assemble_sequence(const TrainingExample& x, const Tokenizer& tok,
                                                const EncoderConfig& cfg) {
    cfg.validate();

    std::vector<int> resp = tok.encode(x.response.text);
    if (resp.empty()) return std::nullopt;
    if (resp.size() > cfg.max_response_tokens - 1) resp.resize(cfg.max_response_tokens - 1);

    EncodedExample e;
    auto push = [&](int token, int position, int turn, int type) {
        e.tokens.push_back(token);
        e.positions.push_back(position);
        e.turns.push_back(turn);
        e.types.push_back(type);
    };

    // Persona segment: [BOS] then whole triples while they fit the cap.
    push(Tokenizer::kBos, 0, 0, 2);
    std::size_t persona_len = 1;
    if (!cfg.strip_persona) {
        for (const auto& t : x.profile.triples) {
            std::vector<int> ids = tok.encode(serialize_triple(t, TripleStyle::surface));
            if (persona_len + ids.size() + 1 > cfg.max_persona_tokens) break;
            for (std::size_t p = 0; p < ids.size(); ++p)
                push(ids[p], static_cast<int>(p), 0, 2);
            push(Tokenizer::kSep, static_cast<int>(ids.size()), 0, 2);
            persona_len += ids.size() + 1;
        }
    }

    // Context: drop whole oldest utterances first; if the most recent
    // utterance alone exceeds the cap, keep its tail.
    std::vector<std::vector<int>> ctx_ids;
    for (const auto& u : x.context) ctx_ids.push_back(tok.encode(u.text));

    std::size_t first_kept = x.context.size();
    std::size_t ctx_len = 0;
    for (std::size_t i = x.context.size(); i-- > 0;) {
        const std::size_t unit = ctx_ids[i].size() + 1;
        if (ctx_len + unit > cfg.max_context_tokens) break;
        ctx_len += unit;
        first_kept = i;
    }
    if (first_kept == x.context.size()) {
        // Nothing fit whole; cut the head of the last utterance.
        first_kept = x.context.size() - 1;
        auto& ids = ctx_ids[first_kept];
        const std::size_t keep = cfg.max_context_tokens - 1;
        ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(keep));
    }

    const std::size_t kept = x.context.size() - first_kept;
    const auto turns = turn_indices(kept);
    for (std::size_t i = first_kept; i < x.context.size(); ++i) {
        const int turn = turns[i - first_kept];
        const int type = x.context[i].speaker == x.responder ? 0 : 1;
        const auto& ids = ctx_ids[i];
        for (std::size_t p = 0; p < ids.size(); ++p)
            push(ids[p], static_cast<int>(p), turn, type);
        push(Tokenizer::kSep, static_cast<int>(ids.size()), turn, type);
    }

    e.source_len = static_cast<int>(e.tokens.size());

    for (std::size_t p = 0; p < resp.size(); ++p)
        push(resp[p], static_cast<int>(p), 0, 0);
    push(Tokenizer::kEos, static_cast<int>(resp.size()), 0, 0);
    e.target_len = static_cast<int>(e.tokens.size()) - e.source_len;

    return e;
}

std::vector<EncodedExample> encode_batch_serial(const std::vector<TrainingExample>& dataset,
                                                const Tokenizer& tok, const EncoderConfig& cfg,
                                                EncodeStats& stats) {
    std::vector<EncodedExample> out;
    out.reserve(dataset.size());
    for (const auto& x : dataset) {
        auto e = assemble_sequence(x, tok, cfg);
        if (e) {
            out.push_back(std::move(*e));
            ++stats.encoded;
        } else {
            ++stats.skipped_empty_response;
        }
    }
    return out;
}

std::vector<EncodedExample> encode_batch_parallel(const std::vector<TrainingExample>& dataset,
                                                  const Tokenizer& tok, const EncoderConfig& cfg,
                                                  EncodeStats& stats, int threads) {
    std::vector<std::optional<EncodedExample>> slots(dataset.size());
    parallel_for(dataset.size(), threads,
                 [&](std::size_t i) { slots[i] = assemble_sequence(dataset[i], tok, cfg); });
    std::vector<EncodedExample> out;
    out.reserve(dataset.size());
    for (auto& s : slots) {
        if (s) {
            out.push_back(std::move(*s));
            ++stats.encoded;
        } else {
            ++stats.skipped_empty_response;
        }
    }
    return out;
}

json encoded_to_json(const EncodedExample& e) {
    return json{{"tokens", e.tokens},     {"positions", e.positions}, {"turns", e.turns},
                {"types", e.types},       {"source_len", e.source_len},
                {"target_len", e.target_len}};
}

EncodedExample encoded_from_json(const json& j) {
    EncodedExample e;
    e.tokens = j.at("tokens").get<std::vector<int>>();
    e.positions = j.at("positions").get<std::vector<int>>();
    e.turns = j.at("turns").get<std::vector<int>>();
    e.types = j.at("types").get<std::vector<int>>();
    e.source_len = j.at("source_len").get<int>();
    e.target_len = j.at("target_len").get<int>();
    if (e.tokens.size() != e.positions.size() || e.tokens.size() != e.turns.size() ||
        e.tokens.size() != e.types.size() ||
        e.tokens.size() != static_cast<std::size_t>(e.source_len + e.target_len))
        throw DataError("encoded record: channel lengths disagree");
    return e;
}

}  // namespace pkit
