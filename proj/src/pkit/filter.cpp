#include "pkit/filter.hpp"

#include <cmath>

#include "pkit/hash.hpp"
#include "pkit/parallel.hpp"
#include "pkit/text.hpp"

namespace pkit {

const char* filter_reason_name(FilterReason r) {
    switch (r) {
        case FilterReason::ok: return "ok";
        case FilterReason::none_summary: return "none_summary";
        case FilterReason::bad_format: return "bad_format";
        case FilterReason::unknown_attribute: return "unknown_attribute";
        case FilterReason::subject_too_long: return "subject_too_long";
        case FilterReason::low_similarity: return "low_similarity";
    }
    return "?";
}

DocFreq build_doc_freq(const std::vector<std::string>& docs) {
    DocFreq out;
    out.n_docs = docs.size();
    std::unordered_map<std::string, bool> seen;
    for (const auto& d : docs) {
        seen.clear();
        for (auto& t : split_ws(lower_ascii(d))) {
            if (!seen.emplace(t, true).second) continue;
            ++out.df[t];
        }
    }
    return out;
}

namespace {

// Sparse vector as sorted (bucket, weight) pairs; collisions within a text
// accumulate into one entry, exactly as a dense dims-wide vector would.
void hashed_vector(const std::string& text, std::size_t dims, const DocFreq* stats,
                   std::vector<std::pair<std::uint64_t, double>>& out) {
    out.clear();
    std::size_t i = 0;
    std::string tok;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) break;
        tok.assign(text, start, i - start);
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        double w = 1.0;
        if (stats) {
            std::uint64_t df = 0;
            auto it = stats->df.find(tok);
            if (it != stats->df.end()) df = it->second;
            w = std::log(static_cast<double>(stats->n_docs + 1) /
                         static_cast<double>(df + 1)) +
                1.0;
        }
        out.emplace_back(fnv1a64(tok) % dims, w);
    }
    std::sort(out.begin(), out.end());
    std::size_t keep = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (keep > 0 && out[keep - 1].first == out[k].first) out[keep - 1].second += out[k].second;
        else out[keep++] = out[k];
    }
    out.resize(keep);
}

}  // namespace

double tfidf_hash_similarity(const std::string& a, const std::string& b, std::size_t dims,
                             const DocFreq* stats) {
    std::vector<std::pair<std::uint64_t, double>> va, vb;
    hashed_vector(a, dims, stats, va);
    hashed_vector(b, dims, stats, vb);
    if (va.empty() || vb.empty()) return 0.0;

    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [_, w] : va) na += w * w;
    for (const auto& [_, w] : vb) nb += w * w;
    std::size_t i = 0, j = 0;
    while (i < va.size() && j < vb.size()) {
        if (va[i].first < vb[j].first) ++i;
        else if (vb[j].first < va[i].first) ++j;
        else dot += va[i++].second * vb[j++].second;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::pair<std::optional<PersonaTriple>, FilterVerdict> filter_one(const PersonaSummary& summary,
                                                                  const std::string& source,
                                                                  const FilterConfig& cfg) {
    auto reject = [](FilterReason r) {
        return std::make_pair(std::optional<PersonaTriple>{}, FilterVerdict{false, r});
    };

    auto parsed = parse_summary(summary);
    if (parsed.kind == SummaryParse::Kind::none) return reject(FilterReason::none_summary);
    if (parsed.kind == SummaryParse::Kind::error) return reject(FilterReason::bad_format);

    PersonaTriple& t = parsed.triple;
    if (!cfg.registry || !cfg.registry->contains(t.attribute))
        return reject(FilterReason::unknown_attribute);
    if (t.subject.size() > cfg.max_subject_tokens) return reject(FilterReason::subject_too_long);

    const double sim =
        cfg.similarity->similarity(source, serialize_triple(t, TripleStyle::surface));
    if (sim < cfg.min_similarity) return reject(FilterReason::low_similarity);

    return {std::move(t), FilterVerdict{true, FilterReason::ok}};
}

namespace {

FilteredSession filter_session(const AnnotatedSession& a, const FilterConfig& cfg,
                               FilterStats& stats, std::vector<RejectionRecord>* audit) {
    FilteredSession out;
    out.session = a.session;
    out.triples.resize(a.session.utterances.size());
    for (std::size_t i = 0; i < a.session.utterances.size(); ++i) {
        auto [triple, verdict] = filter_one(a.summaries[i], a.session.utterances[i].text, cfg);
        ++stats.by_reason[static_cast<std::size_t>(verdict.reason)];
        if (verdict.kept) {
            out.triples[i] = std::move(triple);
        } else if (audit && verdict.reason != FilterReason::none_summary) {
            audit->push_back(
                {a.session.session_id, i, verdict.reason, a.summaries[i].raw});
        }
    }
    return out;
}

}  // namespace

std::vector<FilteredSession> filter_stream_serial(const std::vector<AnnotatedSession>& annotated,
                                                  const FilterConfig& cfg, FilterStats& stats,
                                                  std::vector<RejectionRecord>* audit) {
    std::vector<FilteredSession> out;
    out.reserve(annotated.size());
    for (const auto& a : annotated) out.push_back(filter_session(a, cfg, stats, audit));
    return out;
}

std::vector<FilteredSession> filter_stream_parallel(const std::vector<AnnotatedSession>& annotated,
                                                    const FilterConfig& cfg, FilterStats& stats,
                                                    int threads,
                                                    std::vector<RejectionRecord>* audit) {
    std::vector<FilteredSession> out(annotated.size());
    std::vector<FilterStats> partial(annotated.size());
    std::vector<std::vector<RejectionRecord>> partial_audit(audit ? annotated.size() : 0);
    parallel_for(annotated.size(), threads, [&](std::size_t i) {
        out[i] = filter_session(annotated[i], cfg, partial[i],
                                audit ? &partial_audit[i] : nullptr);
    });
    for (std::size_t i = 0; i < annotated.size(); ++i) {
        stats += partial[i];
        if (audit)
            audit->insert(audit->end(), partial_audit[i].begin(), partial_audit[i].end());
    }
    return out;
}

}  // namespace pkit
