#include "pkit/persona.hpp"

#include <fstream>

#include "pkit/jsonl.hpp"
#include "pkit/text.hpp"

namespace pkit {

std::string triple_key(const PersonaTriple& t) {
    // '\x1f' cannot appear in whitespace-split tokens
    return join_tokens(t.subject) + '\x1f' + t.attribute + '\x1f' + join_tokens(t.object);
}

std::string serialize_triple(const PersonaTriple& t, TripleStyle style) {
    const std::string sep =
        style == TripleStyle::sep_delimited ? std::string(" ") + kSepDelimiter + " " : " ";
    return join_tokens(t.subject) + sep + t.attribute + sep + join_tokens(t.object);
}

AttributeRegistry AttributeRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("attribute registry: cannot open " + path);
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string sym = lower_ascii(collapse_ws(line));
        if (!sym.empty()) symbols.push_back(std::move(sym));
    }
    if (symbols.empty()) throw ConfigError("attribute registry: no symbols in " + path);
    return from_symbols(symbols);
}

AttributeRegistry AttributeRegistry::from_symbols(const std::vector<std::string>& symbols) {
    AttributeRegistry reg;
    for (const auto& s : symbols) {
        if (reg.set_.insert(s).second) reg.symbols_.push_back(s);
    }
    if (reg.symbols_.empty()) throw ConfigError("attribute registry: empty symbol list");
    return reg;
}

SummaryParse parse_summary(const PersonaSummary& s) {
    SummaryParse out;
    const std::string trimmed = trim(s.raw);
    if (trimmed == kNoneSummary) {
        out.kind = SummaryParse::Kind::none;
        return out;
    }

    // Split on the literal delimiter before any lowercasing, so a stray
    // lowercase "[sep]" inside a part never splits.
    std::vector<std::string> parts;
    std::size_t pos = 0;
    const std::string delim = kSepDelimiter;
    while (true) {
        std::size_t hit = trimmed.find(delim, pos);
        if (hit == std::string::npos) {
            parts.push_back(trimmed.substr(pos));
            break;
        }
        parts.push_back(trimmed.substr(pos, hit - pos));
        pos = hit + delim.size();
    }

    if (parts.size() != 3) {
        out.kind = SummaryParse::Kind::error;
        out.error = SummaryParse::Error::wrong_part_count;
        out.offending = s.raw;
        return out;
    }

    std::vector<std::vector<std::string>> tokens;
    for (const auto& p : parts) {
        tokens.push_back(split_ws(lower_ascii(p)));
        if (tokens.back().empty()) {
            out.kind = SummaryParse::Kind::error;
            out.error = SummaryParse::Error::empty_part;
            out.offending = s.raw;
            return out;
        }
    }

    out.kind = SummaryParse::Kind::triple;
    out.triple.subject = std::move(tokens[0]);
    out.triple.attribute = join_tokens(tokens[1]);
    out.triple.object = std::move(tokens[2]);
    return out;
}

}  // namespace pkit
