#pragma once

#include <string>
#include <unordered_set>
#include <vector>

namespace pkit {

// A (subject, attribute, object) fact about a speaker. Subject and object are
// lowercase whitespace tokens; the attribute is a registry symbol.
struct PersonaTriple {
    std::vector<std::string> subject;
    std::string attribute;
    std::vector<std::string> object;

    bool operator==(const PersonaTriple&) const = default;
};

// Stable key for dedup sets/maps.
std::string triple_key(const PersonaTriple& t);

enum class TripleStyle { sep_delimited, surface };

// sep_delimited: "e1 [SEP] r [SEP] e2"; surface: "e1 r e2".
std::string serialize_triple(const PersonaTriple& t, TripleStyle style);

// Attribute symbols loaded from a one-symbol-per-line file ('#' comments).
// Symbols are trimmed, whitespace-collapsed and lowercased once at load;
// lookups afterwards are case-sensitive.
class AttributeRegistry {
public:
    static AttributeRegistry load(const std::string& path);
    static AttributeRegistry from_symbols(const std::vector<std::string>& symbols);

    bool contains(const std::string& symbol) const { return set_.count(symbol) != 0; }
    const std::vector<std::string>& symbols() const { return symbols_; }
    std::size_t size() const { return symbols_.size(); }

private:
    std::vector<std::string> symbols_;
    std::unordered_set<std::string> set_;
};

// Raw extractor output: either "[None]" or "e1 [SEP] r [SEP] e2".
struct PersonaSummary {
    std::string raw;
};

inline const char* kNoneSummary = "[None]";
inline const char* kSepDelimiter = "[SEP]";

struct SummaryParse {
    enum class Kind { none, triple, error };
    enum class Error { wrong_part_count, empty_part };

    Kind kind = Kind::none;
    PersonaTriple triple;     // valid iff kind == triple
    Error error = Error::wrong_part_count;  // valid iff kind == error
    std::string offending;    // valid iff kind == error
};

// "[None]" (exact match after whitespace trim) -> none. A string that splits
// on the literal "[SEP]" delimiter into exactly three non-empty parts -> the
// triple, parts lowercased and whitespace-tokenized. Anything else -> error.
// Attribute membership is not checked here; that is a filter rule.
SummaryParse parse_summary(const PersonaSummary& s);

}  // namespace pkit
