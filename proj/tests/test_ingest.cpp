#include <doctest.h>

#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pkit/ingest.hpp"
#include "pkit/jsonl.hpp"
#include "pkit/rng.hpp"

using namespace pkit;

namespace {

std::string dump_line(const std::string& id, const std::string& parent, const std::string& link,
                      const std::string& author, const std::string& body, std::int64_t ts) {
    json j;
    j["id"] = id;
    if (!parent.empty()) j["parent_id"] = parent;
    j["link_id"] = link;
    j["author"] = author;
    j["body"] = body;
    j["created_utc"] = ts;
    return j.dump();
}

std::vector<RawComment> parse_all(const std::string& text, IngestStats& stats) {
    std::istringstream in(text);
    std::vector<RawComment> out;
    parse_dump(in, DumpFormat::jsonl, [&](RawComment&& c) { out.push_back(std::move(c)); }, stats);
    return out;
}

RawComment make(const std::string& id, const std::string& parent, const std::string& author,
                const std::string& body, std::int64_t ts, const std::string& thread = "t") {
    RawComment c;
    c.id = id;
    if (!parent.empty()) c.parent_id = parent;
    c.thread_id = thread;
    c.author = author;
    c.body = body;
    c.created_at = ts;
    return c;
}

}  // namespace

TEST_CASE("parse_dump: well-formed line round-trips the six fields") {
    IngestStats stats;
    auto cs = parse_all(dump_line("abc", "t1_par", "t3_link", "alice", "Hello", 5) + "\n", stats);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].id == "abc");
    REQUIRE(cs[0].parent_id.has_value());
    CHECK(*cs[0].parent_id == "par");     // tN_ prefix stripped
    CHECK(cs[0].thread_id == "link");
    CHECK(cs[0].author == "alice");
    CHECK(cs[0].body == "Hello");
    CHECK(cs[0].created_at == 5);
    CHECK(stats.lines_skipped == 0);
}

TEST_CASE("parse_dump: empty stream") {
    IngestStats stats;
    CHECK(parse_all("", stats).empty());
    CHECK(stats.lines_skipped == 0);
}

TEST_CASE("parse_dump: a truncated line is skipped, not fatal") {
    IngestStats stats;
    const std::string text = dump_line("a", "", "t3_x", "u1", "one", 1) + "\n" +
                             R"({"id":"b","author":"u2","body")" + "\n" +
                             dump_line("c", "", "t3_x", "u3", "three", 3) + "\n";
    auto cs = parse_all(text, stats);
    CHECK(cs.size() == 2);
    CHECK(stats.lines_skipped == 1);
}

TEST_CASE("parse_dump: parent equal to the link marks a root") {
    IngestStats stats;
    auto cs = parse_all(dump_line("a", "t3_link", "t3_link", "u", "root", 1), stats);
    REQUIRE(cs.size() == 1);
    CHECK(!cs[0].parent_id.has_value());
}

TEST_CASE("clean_comment drop rules") {
    CleaningConfig rules;

    CHECK(!clean_comment(make("a", "", "u", "[deleted]", 1), rules));
    CHECK(!clean_comment(make("a", "", "u", "[removed]", 1), rules));
    CHECK(!clean_comment(make("a", "", "HelperBot", "hi there", 1), rules));
    CHECK(!clean_comment(make("a", "", "u", "   ", 1), rules));

    // token budget: 200 tokens > 128
    std::string long_body;
    for (int i = 0; i < 200; ++i) long_body += "w ";
    CHECK(!clean_comment(make("a", "", "u", long_body, 1), rules));

    // mostly non-printable
    std::string binary(40, '\x02');
    CHECK(!clean_comment(make("a", "", "u", binary + " ok", 1), rules));
}

TEST_CASE("clean_comment normalizes") {
    CleaningConfig rules;
    auto u = clean_comment(make("a", "", "alice", "Hello there!", 1), rules);
    REQUIRE(u.has_value());
    CHECK(u->speaker == "alice");
    CHECK(u->text == "hello there!");

    rules.lowercase = false;
    auto v = clean_comment(make("a", "", "alice", "  Hello   there! ", 1), rules);
    REQUIRE(v.has_value());
    CHECK(v->text == "Hello there!");
}

TEST_CASE("thread_sessions: single chain gives one session") {
    IngestStats stats;
    auto sessions = thread_sessions(
        {make("a", "", "u1", "one", 1), make("b", "a", "u2", "two", 2),
         make("c", "b", "u1", "three", 3)},
        CleaningConfig{}, stats);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].session_id == "t#c");
    REQUIRE(sessions[0].utterances.size() == 3);
    CHECK(sessions[0].utterances[0].text == "one");
    CHECK(sessions[0].utterances[2].text == "three");
    // speakers relabeled per session, first appearance order
    CHECK(sessions[0].utterances[0].speaker == "s0");
    CHECK(sessions[0].utterances[1].speaker == "s1");
    CHECK(sessions[0].utterances[2].speaker == "s0");
}

TEST_CASE("thread_sessions: two replies to one root give two sessions") {
    IngestStats stats;
    auto sessions = thread_sessions(
        {make("a", "", "u1", "root", 1), make("b", "a", "u2", "left", 2),
         make("c", "a", "u3", "right", 3)},
        CleaningConfig{}, stats);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].utterances.size() == 2);
    CHECK(sessions[0].utterances[1].text == "left");
    CHECK(sessions[1].utterances[1].text == "right");
}

TEST_CASE("thread_sessions: single comment emits nothing") {
    IngestStats stats;
    CHECK(thread_sessions({make("a", "", "u1", "alone", 1)}, CleaningConfig{}, stats).empty());
}

TEST_CASE("thread_sessions: orphaned parent becomes a root") {
    IngestStats stats;
    auto sessions = thread_sessions(
        {make("a", "zzz", "u1", "orphan", 1), make("b", "a", "u2", "child", 2)},
        CleaningConfig{}, stats);
    REQUIRE(sessions.size() == 1);
    CHECK(stats.orphaned == 1);
    CHECK(sessions[0].utterances.size() == 2);
}

TEST_CASE("thread_sessions: a dropped parent orphans its children") {
    IngestStats stats;
    auto sessions = thread_sessions(
        {make("a", "", "u1", "[deleted]", 1), make("b", "a", "u2", "hi", 2),
         make("c", "b", "u3", "yo", 3)},
        CleaningConfig{}, stats);
    REQUIRE(sessions.size() == 1);  // b -> c survives as its own chain
    CHECK(sessions[0].utterances.size() == 2);
}

TEST_CASE("thread_sessions never mixes threads and is deterministic") {
    std::vector<RawComment> comments;
    for (int t = 0; t < 3; ++t) {
        const std::string th = "th" + std::to_string(t);
        comments.push_back(make(th + "r", "", "u1", "root " + th, 1, th));
        comments.push_back(make(th + "x", th + "r", "u2", "reply " + th, 2, th));
    }
    IngestStats s1, s2;
    auto a = thread_sessions(comments, CleaningConfig{}, s1);
    auto b = thread_sessions(comments, CleaningConfig{}, s2);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].session_id == b[i].session_id);
        const std::string th = a[i].session_id.substr(0, a[i].session_id.find('#'));
        for (const auto& u : a[i].utterances)
            CHECK(u.text.find(th) != std::string::npos);
    }
}

// Brute-force oracle: over random forests, the emitted session count equals
// the number of surviving-forest leaves whose root-to-leaf path has length
// >= 2, summed over threads.
TEST_CASE("thread_sessions path count matches the leaf-count oracle") {
    Rng rng(2024);
    for (int round = 0; round < 30; ++round) {
        std::vector<RawComment> comments;
        const int threads = rng.uniform_int(1, 3);
        for (int t = 0; t < threads; ++t) {
            const std::string th = "t" + std::to_string(t);
            const int n = rng.uniform_int(1, 12);
            for (int i = 0; i < n; ++i) {
                std::string parent;
                if (i > 0 && rng.uniform_real() < 0.8)
                    parent = th + "c" + std::to_string(rng.uniform_int(0, i - 1));
                // ~15% of bodies are dropped by cleaning
                const std::string body =
                    rng.uniform_real() < 0.15 ? "[deleted]" : "w" + std::to_string(i);
                comments.push_back(make(th + "c" + std::to_string(i), parent,
                                        "u" + std::to_string(rng.uniform_int(0, 2)), body,
                                        i, th));
            }
        }

        IngestStats stats;
        auto sessions = thread_sessions(comments, CleaningConfig{}, stats);

        // Independent count: rebuild the surviving forest per thread and count
        // non-root leaves reachable from roots.
        std::size_t expected = 0;
        std::map<std::string, std::vector<const RawComment*>> by_thread;
        CleaningConfig rules;
        for (const auto& c : comments)
            if (clean_comment(c, rules)) by_thread[c.thread_id].push_back(&c);
        for (auto& [th, list] : by_thread) {
            std::set<std::string> ids;
            for (auto* c : list) ids.insert(c->id);
            std::map<std::string, std::vector<std::string>> children;
            std::vector<std::string> roots;
            for (auto* c : list) {
                if (c->parent_id && ids.count(*c->parent_id) && *c->parent_id != c->id)
                    children[*c->parent_id].push_back(c->id);
                else
                    roots.push_back(c->id);
            }
            // count leaves at depth >= 2 via DFS
            std::function<void(const std::string&, std::size_t)> dfs =
                [&](const std::string& id, std::size_t depth) {
                    auto it = children.find(id);
                    if (it == children.end() || it->second.empty()) {
                        if (depth >= 2) ++expected;
                        return;
                    }
                    for (const auto& k : it->second) dfs(k, depth + 1);
                };
            for (const auto& r : roots) dfs(r, 1);
        }
        CHECK(sessions.size() == expected);
    }
}
