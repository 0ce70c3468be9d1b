#include "pkit/synthetic.hpp"

#include <algorithm>
#include <fstream>

#include "pkit/rng.hpp"
#include "pkit/text.hpp"

namespace pkit {

const SyntheticWorld::Attribute* SyntheticWorld::find(const std::string& symbol) const {
    for (const auto& a : attributes)
        if (a.symbol == symbol) return &a;
    return nullptr;
}

std::string SyntheticWorld::realize(const Attribute& a, const std::string& object) const {
    std::string out = "i";
    for (const auto& t : a.surface) out += " " + t;
    return out + " " + object;
}

SyntheticWorld SyntheticWorld::default_world() {
    SyntheticWorld w;
    w.attributes = {
        {"like", {"like"}, {"tea", "coffee", "swimming", "tennis", "chess"},
         "what do you like ?"},
        {"have", {"have"}, {"a dog", "a cat", "a bike", "a piano"}, "what do you have ?"},
        {"live_in", {"live", "in"}, {"paris", "london", "tokyo", "berlin"},
         "where do you live ?"},
        {"play", {"play"}, {"tennis", "chess", "football", "swimming"}, "what do you play ?"},
        {"eat", {"eat"}, {"pizza", "sushi", "salad", "noodles"}, "what do you eat ?"},
    };
    w.neutral_contexts = {
        "how was your day ?",
        "nice weather we are having",
        "did you watch the game last night ?",
        "that meeting ran really long today",
    };
    w.neutral_responses = {
        "it was fine thanks",
        "yeah it really is",
        "no i missed it",
        "tell me about it",
    };
    return w;
}

json SyntheticWorld::to_json() const {
    json j;
    j["attributes"] = json::array();
    for (const auto& a : attributes)
        j["attributes"].push_back(json{{"symbol", a.symbol},
                                       {"surface", a.surface},
                                       {"objects", a.objects},
                                       {"question", a.question}});
    j["neutral_contexts"] = neutral_contexts;
    j["neutral_responses"] = neutral_responses;
    return j;
}

SyntheticWorld SyntheticWorld::from_json(const json& j) {
    SyntheticWorld w;
    for (const auto& a : j.at("attributes"))
        w.attributes.push_back({a.at("symbol").get<std::string>(),
                                a.at("surface").get<std::vector<std::string>>(),
                                a.at("objects").get<std::vector<std::string>>(),
                                a.at("question").get<std::string>()});
    w.neutral_contexts = j.at("neutral_contexts").get<std::vector<std::string>>();
    w.neutral_responses = j.at("neutral_responses").get<std::vector<std::string>>();
    return w;
}

void SyntheticWorld::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("world: cannot write " + path);
    out << to_json().dump(2) << '\n';
}

SyntheticWorld SyntheticWorld::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("world: cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("world: malformed json in " + path);
    return from_json(j);
}

namespace {

struct SessionPlan {
    std::vector<Utterance> context;  // last utterance cues the response
    Utterance response;
    std::vector<PersonaTriple> profile;
    IntendedLabel intended = IntendedLabel::neutral;
};

PersonaTriple make_triple(const SyntheticWorld::Attribute& a, const std::string& object) {
    return PersonaTriple{{"i"}, a.symbol, split_ws(object)};
}

// One dialogue: optional neutral exchange, then either an attribute question
// answered from the responder's persona (realized or contradicted) or a
// neutral line answered neutrally.
SessionPlan plan_session(const SyntheticWorld& w, const SyntheticConfig& cfg, Rng& rng) {
    SessionPlan plan;

    const double u = rng.uniform_real();
    if (u < cfg.contradiction_rate)
        plan.intended = IntendedLabel::contradict;
    else if (u < cfg.contradiction_rate + (1.0 - cfg.contradiction_rate) * cfg.persona_rate)
        plan.intended = IntendedLabel::entail;
    else
        plan.intended = IntendedLabel::neutral;

    const bool persona_bearing = plan.intended != IntendedLabel::neutral;

    // In persona sessions only the asker chats before the cue; the responder
    // stays silent until the response, so a profile never co-occurs with a
    // neutral utterance by its owner anywhere in the raw corpus.
    const int chatter = persona_bearing ? rng.uniform_int(0, cfg.chatter_max > 0 ? 1 : 0)
                                        : rng.uniform_int(0, cfg.chatter_max);
    for (int j = 0; j < chatter; ++j) {
        const bool asker = persona_bearing || j % 2 == 0;
        const auto& bank = asker ? w.neutral_contexts : w.neutral_responses;
        plan.context.push_back({asker ? "a" : "b", bank[rng.bounded(bank.size())]});
    }

    std::vector<bool> used(w.attributes.size(), false);

    if (persona_bearing) {
        const std::size_t ai = rng.bounded(w.attributes.size());
        const auto& attr = w.attributes[ai];
        used[ai] = true;
        const std::size_t oi = rng.bounded(attr.objects.size());
        plan.profile.push_back(make_triple(attr, attr.objects[oi]));
        plan.context.push_back({"a", attr.question});
        if (plan.intended == IntendedLabel::entail) {
            plan.response = {"b", w.realize(attr, attr.objects[oi])};
        } else {
            std::size_t oj = rng.bounded(attr.objects.size() - 1);
            if (oj >= oi) ++oj;
            plan.response = {"b", w.realize(attr, attr.objects[oj])};
        }
    } else {
        plan.context.push_back({"a", w.neutral_contexts[rng.bounded(w.neutral_contexts.size())]});
        plan.response = {"b", w.neutral_responses[rng.bounded(w.neutral_responses.size())]};
    }

    const bool attach = persona_bearing || !cfg.biased;
    if (attach) {
        const int extra = rng.uniform_int(cfg.distractors_min, cfg.distractors_max);
        for (int j = 0; j < extra; ++j) {
            std::size_t ai = rng.bounded(w.attributes.size());
            if (used[ai]) continue;  // conflict-free by construction, not resampled
            used[ai] = true;
            const auto& attr = w.attributes[ai];
            plan.profile.push_back(make_triple(attr, attr.objects[rng.bounded(attr.objects.size())]));
        }
        // The relevant triple must not be identifiable by position alone.
        for (std::size_t i = plan.profile.size(); i > 1; --i)
            std::swap(plan.profile[i - 1], plan.profile[rng.bounded(i)]);
    } else if (!persona_bearing) {
        plan.profile.clear();
    }
    return plan;
}

}  // namespace

std::vector<SyntheticRecord> generate_corpus(const SyntheticWorld& world,
                                             const SyntheticConfig& cfg) {
    std::vector<SyntheticRecord> out;
    out.reserve(cfg.n_sessions);
    for (std::size_t i = 0; i < cfg.n_sessions; ++i) {
        Rng rng = Rng::derive(cfg.seed, i);
        SessionPlan plan = plan_session(world, cfg, rng);
        SyntheticRecord rec;
        rec.intended = plan.intended;
        rec.example.context = plan.context;
        rec.example.response = plan.response;
        rec.example.responder = plan.response.speaker;
        rec.example.profile.owner = plan.response.speaker;
        rec.example.profile.triples = plan.profile;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<std::string> generate_comment_dump(const SyntheticWorld& world,
                                               const SyntheticConfig& cfg) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < cfg.n_sessions; ++i) {
        Rng rng = Rng::derive(cfg.seed, i);
        SessionPlan plan = plan_session(world, cfg, rng);

        const std::string thread = "th" + std::to_string(i);
        std::string parent;
        std::int64_t ts = 1600000000 + static_cast<std::int64_t>(i) * 1000;
        std::size_t seq = 0;
        auto emit = [&](const std::string& speaker, const std::string& text) {
            json j;
            j["id"] = thread + "c" + std::to_string(seq++);
            if (!parent.empty()) j["parent_id"] = "t1_" + parent;
            else j["parent_id"] = "t3_" + thread;
            j["link_id"] = "t3_" + thread;
            j["author"] = speaker + std::to_string(i);
            j["body"] = text;
            j["created_utc"] = ts++;
            parent = j["id"].get<std::string>();
            lines.push_back(j.dump());
        };

        for (const auto& u : plan.context) emit(u.speaker, u.text);
        emit(plan.response.speaker, plan.response.text);
    }
    return lines;
}

}  // namespace pkit
