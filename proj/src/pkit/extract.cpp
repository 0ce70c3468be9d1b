#include "pkit/extract.hpp"

#include <fstream>

#include <httplib.h>

#include "pkit/jsonl.hpp"
#include "pkit/parallel.hpp"
#include "pkit/text.hpp"

namespace pkit {

namespace {

constexpr std::size_t kMaxCaptureTokens = 8;

bool is_conjunction(const std::string& tok) {
    return tok == "and" || tok == "but" || tok == "or" || tok == "because" || tok == "so" ||
           tok == "then";
}

bool is_punct_only(const std::string& tok) {
    for (char c : tok)
        if (std::isalnum(static_cast<unsigned char>(c))) return false;
    return true;
}

bool has_trailing_boundary(const std::string& tok) {
    char c = tok.back();
    return c == '.' || c == ',' || c == ';' || c == '!' || c == '?' || c == ':';
}

std::string strip_trailing_boundary(std::string tok) {
    while (!tok.empty() && has_trailing_boundary(tok)) tok.pop_back();
    return tok;
}

// Tokens after the matched prefix, cut at the first clause boundary and at
// kMaxCaptureTokens. May be empty, in which case the rule does not match.
std::vector<std::string> capture_tokens(const std::vector<std::string>& toks,
                                        std::size_t from) {
    std::vector<std::string> out;
    for (std::size_t i = from; i < toks.size() && out.size() < kMaxCaptureTokens; ++i) {
        const std::string& t = toks[i];
        if (is_conjunction(t) || is_punct_only(t)) break;
        if (has_trailing_boundary(t)) {
            std::string stem = strip_trailing_boundary(t);
            if (!stem.empty()) out.push_back(std::move(stem));
            break;
        }
        out.push_back(t);
    }
    return out;
}

}  // namespace

RuleSet RuleSet::load(const std::string& path, const AttributeRegistry& reg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("rule file: cannot open " + path);
    std::vector<PatternRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;

        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            auto tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(pos));
                break;
            }
            cols.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        if (cols.size() != 3)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected pattern<TAB>attribute<TAB>subject");

        PatternRule r;
        auto pat = split_ws(lower_ascii(cols[0]));
        if (pat.empty() || pat.back() != "{x}")
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": pattern must end with a single {x} slot");
        pat.pop_back();
        for (const auto& t : pat)
            if (t == "{x}")
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": pattern has more than one {x} slot");
        r.prefix = std::move(pat);
        r.attribute = lower_ascii(trim(cols[1]));
        r.subject = split_ws(lower_ascii(cols[2]));
        if (r.prefix.empty() || r.subject.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty pattern or subject");
        rules.push_back(std::move(r));
    }
    return from_rules(std::move(rules), reg);
}

RuleSet RuleSet::from_rules(std::vector<PatternRule> rules, const AttributeRegistry& reg) {
    for (const auto& r : rules)
        if (!reg.contains(r.attribute))
            throw ConfigError("rule attribute not in registry: " + r.attribute);
    RuleSet rs;
    rs.rules_ = std::move(rules);
    return rs;
}

PersonaSummary rule_extract(const std::string& text, const std::vector<PatternRule>& rules) {
    const auto toks = split_ws(lower_ascii(text));
    for (const auto& rule : rules) {
        if (rule.prefix.size() >= toks.size()) continue;
        for (std::size_t start = 0; start + rule.prefix.size() < toks.size(); ++start) {
            bool hit = true;
            for (std::size_t k = 0; k < rule.prefix.size(); ++k) {
                if (toks[start + k] != rule.prefix[k]) {
                    hit = false;
                    break;
                }
            }
            if (!hit) continue;
            auto object = capture_tokens(toks, start + rule.prefix.size());
            if (object.empty()) continue;  // boundary right after the prefix
            PersonaTriple t{rule.subject, rule.attribute, std::move(object)};
            return {serialize_triple(t, TripleStyle::sep_delimited)};
        }
    }
    return {kNoneSummary};
}

std::vector<PersonaSummary> RuleExtractor::extract_batch(const std::vector<std::string>& texts,
                                                         int threads) {
    std::vector<PersonaSummary> out(texts.size());
    parallel_for(texts.size(), threads,
                 [&](std::size_t i) { out[i] = rule_extract(texts[i], rules_.rules()); });
    return out;
}

std::optional<std::vector<PersonaSummary>> RemoteExtractor::send_batch(
    const std::vector<std::string>& texts) {
    json req;
    req["utterances"] = texts;
    const std::string body = req.dump();

    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
        httplib::Client cli(cfg_.endpoint);
        cli.set_connection_timeout(0, cfg_.timeout_ms * 1000);
        cli.set_read_timeout(0, cfg_.timeout_ms * 1000);
        auto res = cli.Post("/extract", body, "application/json");
        if (!res || res->status != 200) continue;
        json rep = json::parse(res->body, nullptr, false);
        if (rep.is_discarded() || !rep.contains("summaries") || !rep["summaries"].is_array())
            continue;
        const auto& arr = rep["summaries"];
        if (arr.size() != texts.size()) continue;  // length mismatch = protocol failure
        std::vector<PersonaSummary> out;
        out.reserve(arr.size());
        bool ok = true;
        for (const auto& s : arr) {
            if (!s.is_string()) {
                ok = false;
                break;
            }
            out.push_back({s.get<std::string>()});
        }
        if (ok) return out;
    }
    return std::nullopt;
}

PersonaSummary RemoteExtractor::extract(const std::string& text) {
    return extract_batch({text}, 1).front();
}

std::vector<PersonaSummary> RemoteExtractor::extract_batch(const std::vector<std::string>& texts,
                                                           int threads) {
    const std::size_t bs = std::max<std::size_t>(1, cfg_.batch_size);
    const std::size_t n_batches = (texts.size() + bs - 1) / bs;
    std::vector<std::vector<PersonaSummary>> slots(n_batches);

    int in_flight = std::min<int>(cfg_.max_in_flight, static_cast<int>(n_batches));
    if (threads == 1) in_flight = 1;
    parallel_for(n_batches, std::max(1, in_flight), [&](std::size_t b) {
        const std::size_t lo = b * bs;
        const std::size_t hi = std::min(texts.size(), lo + bs);
        std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(lo),
                                       texts.begin() + static_cast<std::ptrdiff_t>(hi));
        batches_sent_.fetch_add(1);
        auto reply = send_batch(chunk);
        if (reply) {
            slots[b] = std::move(*reply);
        } else {
            failed_batches_.fetch_add(1);
            slots[b].assign(chunk.size(), {kNoneSummary});
        }
    });

    std::vector<PersonaSummary> out;
    out.reserve(texts.size());
    for (auto& s : slots)
        for (auto& p : s) out.push_back(std::move(p));
    return out;
}

std::vector<AnnotatedSession> annotate_sessions(std::vector<DialogueSession> sessions,
                                                ExtractorBackend& backend, int threads) {
    std::vector<std::string> texts;
    for (const auto& s : sessions)
        for (const auto& u : s.utterances) texts.push_back(u.text);

    auto summaries = backend.extract_batch(texts, threads);
    if (summaries.size() != texts.size())
        throw DataError("extractor arity violation: " + std::to_string(summaries.size()) +
                        " summaries for " + std::to_string(texts.size()) + " utterances");

    std::vector<AnnotatedSession> out;
    out.reserve(sessions.size());
    std::size_t k = 0;
    for (auto& s : sessions) {
        AnnotatedSession a;
        a.summaries.assign(summaries.begin() + static_cast<std::ptrdiff_t>(k),
                           summaries.begin() + static_cast<std::ptrdiff_t>(k + s.utterances.size()));
        k += s.utterances.size();
        a.session = std::move(s);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace pkit
