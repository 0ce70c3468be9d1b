#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace pkit {

struct RawComment {
    std::string id;
    std::optional<std::string> parent_id;
    std::string thread_id;
    std::string author;
    std::string body;
    std::int64_t created_at = 0;
};

struct Utterance {
    std::string speaker;
    std::string text;
};

struct DialogueSession {
    std::string session_id;
    std::vector<Utterance> utterances;
};

struct CleaningConfig {
    bool lowercase = true;
    std::size_t min_tokens = 1;
    std::size_t max_tokens = 128;
    double min_printable_ratio = 0.7;
};

struct IngestStats {
    std::uint64_t lines_skipped = 0;      // malformed dump lines
    std::uint64_t comments_parsed = 0;
    std::uint64_t comments_dropped = 0;   // failed a cleaning rule
    std::uint64_t orphaned = 0;           // parent not found -> treated as root
    std::uint64_t sessions = 0;

    IngestStats& operator+=(const IngestStats& o) {
        lines_skipped += o.lines_skipped;
        comments_parsed += o.comments_parsed;
        comments_dropped += o.comments_dropped;
        orphaned += o.orphaned;
        sessions += o.sessions;
        return *this;
    }
};

enum class DumpFormat { jsonl };

// Streams one RawComment per syntactically valid line. Field layout follows
// public Reddit comment dumps: id, parent_id, link_id (-> thread_id), author,
// body, created_utc. "tN_" prefixes on parent_id/link_id are stripped; a
// parent equal to the thread id means the comment is a root.
template <class Fn>
void parse_dump(std::istream& in, DumpFormat format, Fn&& fn, IngestStats& stats);

// Applies the drop/normalize rules; empty result means the comment was dropped.
// Deterministic; never fails.
std::optional<Utterance> clean_comment(const RawComment& c, const CleaningConfig& rules);

// Cleans, then threads each comment tree and emits every root-to-leaf path of
// surviving comments with length >= 2 as one session. Speakers are relabeled
// s0, s1, ... per session in order of first appearance. session_id is
// "<thread_id>#<leaf comment id>".
std::vector<DialogueSession> thread_sessions(const std::vector<RawComment>& comments,
                                             const CleaningConfig& rules,
                                             IngestStats& stats);

// parse_dump + thread_sessions over a stream.
std::vector<DialogueSession> ingest_stream(std::istream& in, const CleaningConfig& rules,
                                           IngestStats& stats);

namespace detail {
std::optional<RawComment> comment_from_json(const std::string& line);
}

template <class Fn>
void parse_dump(std::istream& in, DumpFormat, Fn&& fn, IngestStats& stats) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto c = detail::comment_from_json(line);
        if (!c) {
            ++stats.lines_skipped;
            continue;
        }
        ++stats.comments_parsed;
        fn(std::move(*c));
    }
}

}  // namespace pkit
