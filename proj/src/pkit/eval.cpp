#include "pkit/eval.hpp"

#include <cmath>
#include <unordered_set>

#include <httplib.h>

#include "pkit/text.hpp"

namespace pkit {

const char* nli_label_name(NliLabel l) {
    switch (l) {
        case NliLabel::entail: return "entail";
        case NliLabel::neutral: return "neutral";
        case NliLabel::contradict: return "contradict";
    }
    return "?";
}

std::optional<NliLabel> nli_label_from_name(const std::string& s) {
    if (s == "entail") return NliLabel::entail;
    if (s == "neutral") return NliLabel::neutral;
    if (s == "contradict") return NliLabel::contradict;
    return std::nullopt;
}

namespace {

bool contains_subsequence(const std::vector<std::string>& hay,
                          const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (hay[i + j] != needle[j]) {
                hit = false;
                break;
            }
        }
        if (hit) return true;
    }
    return false;
}

}  // namespace

NliLabel OracleNli::classify(const PersonaTriple& premise, const std::string& hypothesis) {
    const auto* attr = world_->find(premise.attribute);
    if (!attr) return NliLabel::neutral;

    const auto toks = split_ws(lower_ascii(hypothesis));
    auto realizes = [&](const std::vector<std::string>& object_tokens) {
        std::vector<std::string> pattern{"i"};
        pattern.insert(pattern.end(), attr->surface.begin(), attr->surface.end());
        pattern.insert(pattern.end(), object_tokens.begin(), object_tokens.end());
        return contains_subsequence(toks, pattern);
    };

    bool entails = realizes(premise.object);
    bool contradicts = false;
    const std::string own = join_tokens(premise.object);
    for (const auto& alt : attr->objects) {
        if (alt == own) continue;
        if (realizes(split_ws(alt))) {
            contradicts = true;
            break;
        }
    }
    if (contradicts) return NliLabel::contradict;
    if (entails) return NliLabel::entail;
    return NliLabel::neutral;
}

NliLabel RemoteNli::classify(const PersonaTriple& premise, const std::string& hypothesis) {
    json req{{"premise", serialize_triple(premise, TripleStyle::surface)},
             {"hypothesis", hypothesis}};
    const std::string body = req.dump();
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client cli(endpoint_);
        cli.set_connection_timeout(0, timeout_ms_ * 1000);
        cli.set_read_timeout(0, timeout_ms_ * 1000);
        auto res = cli.Post("/nli", body, "application/json");
        if (!res || res->status != 200) continue;
        json rep = json::parse(res->body, nullptr, false);
        if (rep.is_discarded() || !rep.contains("label") || !rep["label"].is_string()) continue;
        auto label = nli_label_from_name(rep["label"].get<std::string>());
        if (label) return *label;
    }
    ++failed_calls_;
    return NliLabel::neutral;
}

double distinct_n(const std::vector<std::vector<std::string>>& responses, int n) {
    std::unordered_set<std::string> distinct;
    std::uint64_t total = 0;
    for (const auto& r : responses) {
        if (r.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i) {
            std::string gram = r[i];
            for (int j = 1; j < n; ++j) gram += '\x1f' + r[i + static_cast<std::size_t>(j)];
            distinct.insert(std::move(gram));
            ++total;
        }
    }
    if (total == 0)
        throw DataError("distinct_n: no " + std::to_string(n) + "-grams in the response set");
    return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

int consistency_score(const std::string& response, const PersonaProfile& profile,
                      NliBackend& nli) {
    int cs = 0;
    for (const auto& t : profile.triples) cs += nli_value(nli.classify(t, response));
    return cs;
}

namespace {

NliLabel response_label(const std::string& response, const PersonaProfile& profile,
                        NliBackend& nli) {
    bool any_entail = false;
    for (const auto& t : profile.triples) {
        const NliLabel l = nli.classify(t, response);
        if (l == NliLabel::contradict) return NliLabel::contradict;
        if (l == NliLabel::entail) any_entail = true;
    }
    return any_entail ? NliLabel::entail : NliLabel::neutral;
}

}  // namespace

EncRatios enc_ratios(const std::vector<std::pair<std::string, PersonaProfile>>& pairs,
                     NliBackend& nli) {
    std::uint64_t e = 0, n = 0, c = 0, bearing = 0;
    for (const auto& [response, profile] : pairs) {
        if (profile.triples.empty()) continue;
        ++bearing;
        switch (response_label(response, profile, nli)) {
            case NliLabel::entail: ++e; break;
            case NliLabel::neutral: ++n; break;
            case NliLabel::contradict: ++c; break;
        }
    }
    if (bearing == 0) throw DataError("enc_ratios: no persona-bearing pairs");
    const double d = static_cast<double>(bearing);
    return {static_cast<double>(e) / d, static_cast<double>(n) / d, static_cast<double>(c) / d};
}

json EvalReport::to_json() const {
    json j{{"dist1", dist1},
           {"dist2", dist2},
           {"entail_ratio", ratios.entail},
           {"neutral_ratio", ratios.neutral},
           {"contradict_ratio", ratios.contradict},
           {"mean_cs", mean_cs},
           {"n_responses", n_responses}};
    if (ppl) j["ppl"] = *ppl;
    return j;
}

std::string EvalReport::table_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "PPL %s  Dist-1/2 %.4f/%.4f  E %.3f  N %.3f  C %.3f  CS %.3f  (n=%llu)",
                  ppl ? std::to_string(*ppl).c_str() : "-", dist1, dist2, ratios.entail,
                  ratios.neutral, ratios.contradict, mean_cs,
                  static_cast<unsigned long long>(n_responses));
    return buf;
}

EvalReport evaluate(const std::vector<std::string>& responses,
                    const std::vector<TrainingExample>& records, NliBackend& nli,
                    std::optional<double> ppl) {
    if (responses.size() != records.size())
        throw DataError("evaluate: " + std::to_string(responses.size()) + " responses vs " +
                        std::to_string(records.size()) + " records");

    EvalReport rep;
    rep.n_responses = responses.size();
    rep.ppl = ppl;

    std::vector<std::vector<std::string>> token_lists;
    token_lists.reserve(responses.size());
    for (const auto& r : responses) token_lists.push_back(split_ws(lower_ascii(r)));
    rep.dist1 = distinct_n(token_lists, 1);
    rep.dist2 = distinct_n(token_lists, 2);

    double cs_sum = 0.0;
    std::vector<std::pair<std::string, PersonaProfile>> pairs;
    pairs.reserve(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
        cs_sum += consistency_score(responses[i], records[i].profile, nli);
        pairs.emplace_back(responses[i], records[i].profile);
    }
    rep.mean_cs = cs_sum / static_cast<double>(responses.size());
    rep.ratios = enc_ratios(pairs, nli);
    return rep;
}

}  // namespace pkit
