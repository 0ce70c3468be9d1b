#include "pkit/ingest.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "pkit/jsonl.hpp"
#include "pkit/text.hpp"

namespace pkit {

namespace detail {

namespace {

std::string strip_type_prefix(std::string s) {
    // Reddit fullnames look like "t1_abc" / "t3_abc".
    if (s.size() > 3 && s[0] == 't' && s[2] == '_' && s[1] >= '1' && s[1] <= '6')
        return s.substr(3);
    return s;
}

}  // namespace

std::optional<RawComment> comment_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("id") || !j["id"].is_string()) return std::nullopt;
    if (!j.contains("author") || !j["author"].is_string()) return std::nullopt;
    if (!j.contains("body") || !j["body"].is_string()) return std::nullopt;

    RawComment c;
    c.id = j["id"].get<std::string>();
    if (c.id.empty()) return std::nullopt;
    c.author = j["author"].get<std::string>();
    c.body = j["body"].get<std::string>();

    if (j.contains("link_id") && j["link_id"].is_string())
        c.thread_id = strip_type_prefix(j["link_id"].get<std::string>());
    else if (j.contains("thread_id") && j["thread_id"].is_string())
        c.thread_id = j["thread_id"].get<std::string>();
    if (c.thread_id.empty()) return std::nullopt;

    if (j.contains("parent_id") && j["parent_id"].is_string()) {
        std::string p = strip_type_prefix(j["parent_id"].get<std::string>());
        // Parent equal to the submission itself marks a top-level comment.
        if (!p.empty() && p != c.thread_id) c.parent_id = std::move(p);
    }

    if (j.contains("created_utc")) {
        const auto& v = j["created_utc"];
        if (v.is_number()) c.created_at = v.get<std::int64_t>();
        else if (v.is_string()) {
            try {
                c.created_at = std::stoll(v.get<std::string>());
            } catch (...) {
                return std::nullopt;
            }
        }
    }
    return c;
}

}  // namespace detail

std::optional<Utterance> clean_comment(const RawComment& c, const CleaningConfig& rules) {
    const std::string body = trim(c.body);
    if (body == "[deleted]" || body == "[removed]") return std::nullopt;

    const std::string author_lower = lower_ascii(c.author);
    if (author_lower.size() >= 3 && author_lower.ends_with("bot")) return std::nullopt;

    std::string text = collapse_ws(strip_markup(c.body));
    if (text.empty()) return std::nullopt;
    if (printable_ascii_ratio(text) < rules.min_printable_ratio) return std::nullopt;
    if (rules.lowercase) text = lower_ascii(text);

    const auto tokens = split_ws(text);
    if (tokens.size() < rules.min_tokens || tokens.size() > rules.max_tokens)
        return std::nullopt;

    return Utterance{c.author, std::move(text)};
}

namespace {

struct ThreadGroup {
    std::string thread_id;
    std::vector<std::size_t> members;  // indices into the surviving-comment array
};

}  // namespace

std::vector<DialogueSession> thread_sessions(const std::vector<RawComment>& comments,
                                             const CleaningConfig& rules,
                                             IngestStats& stats) {
    struct Survivor {
        const RawComment* c;
        Utterance utt;
    };
    std::vector<Survivor> survivors;
    survivors.reserve(comments.size());
    for (const auto& c : comments) {
        auto utt = clean_comment(c, rules);
        if (!utt) {
            ++stats.comments_dropped;
            continue;
        }
        survivors.push_back({&c, std::move(*utt)});
    }

    // Group by thread in order of first appearance.
    std::vector<ThreadGroup> groups;
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        const std::string& tid = survivors[i].c->thread_id;
        auto it = group_of.find(tid);
        if (it == group_of.end()) {
            it = group_of.emplace(tid, groups.size()).first;
            groups.push_back({tid, {}});
        }
        groups[it->second].members.push_back(i);
    }

    std::vector<DialogueSession> sessions;
    for (const auto& g : groups) {
        std::unordered_map<std::string, std::size_t> by_id;
        for (std::size_t m : g.members) by_id.emplace(survivors[m].c->id, m);

        // Forest over survivors: a parent link only counts if the parent
        // survived in the same thread; otherwise the comment is a root.
        std::unordered_map<std::size_t, std::vector<std::size_t>> children;
        std::vector<std::size_t> roots;
        for (std::size_t m : g.members) {
            const auto& c = *survivors[m].c;
            if (c.parent_id) {
                auto it = by_id.find(*c.parent_id);
                if (it != by_id.end() && it->second != m) {
                    children[it->second].push_back(m);
                    continue;
                }
                ++stats.orphaned;
            }
            roots.push_back(m);
        }
        auto by_time_then_id = [&](std::size_t a, std::size_t b) {
            const auto* ca = survivors[a].c;
            const auto* cb = survivors[b].c;
            if (ca->created_at != cb->created_at) return ca->created_at < cb->created_at;
            return ca->id < cb->id;
        };
        std::sort(roots.begin(), roots.end(), by_time_then_id);
        for (auto& [_, kids] : children) std::sort(kids.begin(), kids.end(), by_time_then_id);

        // Iterative DFS emitting each root-to-leaf path with length >= 2.
        std::vector<std::size_t> path;
        std::vector<std::pair<std::size_t, std::size_t>> stack;  // (node, next child slot)
        for (std::size_t root : roots) {
            path.clear();
            stack.clear();
            stack.push_back({root, 0});
            path.push_back(root);
            std::unordered_set<std::size_t> on_path{root};  // guards against id cycles
            while (!stack.empty()) {
                auto& [node, slot] = stack.back();
                auto it = children.find(node);
                const std::vector<std::size_t>* kids =
                    it == children.end() ? nullptr : &it->second;
                std::size_t next = std::size_t(-1);
                while (kids && slot < kids->size()) {
                    std::size_t cand = (*kids)[slot++];
                    if (!on_path.count(cand)) {
                        next = cand;
                        break;
                    }
                }
                if (next != std::size_t(-1)) {
                    stack.push_back({next, 0});
                    path.push_back(next);
                    on_path.insert(next);
                    continue;
                }
                // Leaf (no unvisited children): emit if deep enough.
                bool is_leaf = !kids || std::all_of(kids->begin(), kids->end(),
                                                    [&](std::size_t k) { return on_path.count(k); });
                if (is_leaf && path.size() >= 2) {
                    DialogueSession s;
                    s.session_id = g.thread_id + "#" + survivors[path.back()].c->id;
                    std::unordered_map<std::string, std::string> relabel;
                    for (std::size_t m : path) {
                        const std::string& author = survivors[m].c->author;
                        auto [it2, inserted] =
                            relabel.emplace(author, "s" + std::to_string(relabel.size()));
                        (void)inserted;
                        s.utterances.push_back({it2->second, survivors[m].utt.text});
                    }
                    sessions.push_back(std::move(s));
                }
                on_path.erase(node);
                path.pop_back();
                stack.pop_back();
            }
        }
    }
    stats.sessions += sessions.size();
    return sessions;
}

std::vector<DialogueSession> ingest_stream(std::istream& in, const CleaningConfig& rules,
                                           IngestStats& stats) {
    std::vector<RawComment> comments;
    parse_dump(in, DumpFormat::jsonl, [&](RawComment&& c) { comments.push_back(std::move(c)); },
               stats);
    return thread_sessions(comments, rules, stats);
}

}  // namespace pkit
