#include "pkit/profile.hpp"

#include <unordered_set>

#include "pkit/text.hpp"

namespace pkit {

std::map<std::string, PersonaProfile> build_profiles(
    const DialogueSession& session, const std::vector<std::optional<PersonaTriple>>& triples,
    std::size_t profile_cap) {
    std::map<std::string, PersonaProfile> out;
    std::map<std::string, std::unordered_set<std::string>> seen;
    for (std::size_t i = 0; i < session.utterances.size() && i < triples.size(); ++i) {
        if (!triples[i]) continue;
        const std::string& speaker = session.utterances[i].speaker;
        auto& profile = out[speaker];
        if (profile.owner.empty()) profile.owner = speaker;
        if (profile.triples.size() >= profile_cap) continue;
        if (seen[speaker].insert(triple_key(*triples[i])).second)
            profile.triples.push_back(*triples[i]);
    }
    return out;
}

std::vector<TrainingExample> build_examples(
    const DialogueSession& session, const std::map<std::string, PersonaProfile>& profiles) {
    std::vector<TrainingExample> out;
    for (std::size_t i = 1; i < session.utterances.size(); ++i) {
        TrainingExample x;
        x.context.assign(session.utterances.begin(),
                         session.utterances.begin() + static_cast<std::ptrdiff_t>(i));
        x.response = session.utterances[i];
        x.responder = x.response.speaker;
        auto it = profiles.find(x.responder);
        if (it != profiles.end()) x.profile = it->second;
        x.profile.owner = x.responder;
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<TrainingExample> session_examples(const FilteredSession& fs,
                                              std::size_t profile_cap) {
    return build_examples(fs.session, build_profiles(fs.session, fs.triples, profile_cap));
}

CorpusStats corpus_stats(const std::vector<FilteredSession>& stream) {
    CorpusStats s;
    for (const auto& fs : stream) {
        ++s.sessions;
        s.utterances += fs.session.utterances.size();
        for (const auto& u : fs.session.utterances) s.tokens += split_ws(u.text).size();
        for (const auto& t : fs.triples)
            if (t) ++s.personas;
    }
    return s;
}

namespace {

json triple_to_json(const PersonaTriple& t) {
    return json{{"subject", join_tokens(t.subject)},
                {"attribute", t.attribute},
                {"object", join_tokens(t.object)}};
}

PersonaTriple triple_from_json(const json& j) {
    PersonaTriple t;
    t.subject = split_ws(j.at("subject").get<std::string>());
    t.attribute = j.at("attribute").get<std::string>();
    t.object = split_ws(j.at("object").get<std::string>());
    return t;
}

}  // namespace

json example_to_json(const TrainingExample& x) {
    json j;
    j["profile"] = json::array();
    for (const auto& t : x.profile.triples) j["profile"].push_back(triple_to_json(t));
    j["context"] = json::array();
    for (const auto& u : x.context)
        j["context"].push_back(json{{"speaker", u.speaker}, {"text", u.text}});
    j["response"] = json{{"speaker", x.response.speaker}, {"text", x.response.text}};
    if (x.augmented) {
        j["augmented"] = true;
        j["added_count"] = x.added_count;
    }
    return j;
}

TrainingExample example_from_json(const json& j) {
    TrainingExample x;
    for (const auto& t : j.at("profile")) x.profile.triples.push_back(triple_from_json(t));
    for (const auto& u : j.at("context"))
        x.context.push_back({u.at("speaker").get<std::string>(), u.at("text").get<std::string>()});
    x.response = {j.at("response").at("speaker").get<std::string>(),
                  j.at("response").at("text").get<std::string>()};
    x.responder = x.response.speaker;
    x.profile.owner = x.responder;
    if (j.contains("augmented")) x.augmented = j["augmented"].get<bool>();
    if (j.contains("added_count")) x.added_count = j["added_count"].get<int>();
    return x;
}

}  // namespace pkit
