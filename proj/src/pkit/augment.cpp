#include "pkit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "pkit/parallel.hpp"
#include "pkit/rng.hpp"

namespace pkit {

void PersonaPool::add(const PersonaTriple& t) {
    if (!seen_.emplace(triple_key(t), true).second) return;
    by_attribute_[t.attribute].push_back(entries_.size());
    entries_.push_back(t);
}

const std::vector<std::size_t>& PersonaPool::with_attribute(const std::string& attribute) const {
    static const std::vector<std::size_t> empty;
    auto it = by_attribute_.find(attribute);
    return it == by_attribute_.end() ? empty : it->second;
}

PersonaPool build_pool(const std::vector<TrainingExample>& dataset) {
    PersonaPool pool;
    for (const auto& x : dataset)
        for (const auto& t : x.profile.triples) pool.add(t);
    return pool;
}

TrainingExample augment_example(const TrainingExample& x, const PersonaPool& pool,
                                const AugmentationConfig& cfg, std::uint64_t record_index) {
    TrainingExample out = x;
    out.augmented = true;
    out.added_count = 0;
    if (pool.empty()) return out;

    std::unordered_set<std::string> attrs;
    for (const auto& t : x.profile.triples) attrs.insert(t.attribute);

    Rng rng = Rng::derive(cfg.seed, record_index);
    const int k = rng.uniform_int(cfg.min_added, cfg.max_added);
    for (int j = 0; j < k; ++j) {
        const auto& cand = pool.entries()[rng.bounded(pool.size())];
        if (attrs.count(cand.attribute)) continue;  // same type as an existing one: removed
        attrs.insert(cand.attribute);
        out.profile.triples.push_back(cand);
        ++out.added_count;
    }
    return out;
}

std::vector<TrainingExample> augment_batch_serial(const std::vector<TrainingExample>& dataset,
                                                  const PersonaPool& pool,
                                                  const AugmentationConfig& cfg) {
    std::vector<TrainingExample> out;
    out.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        out.push_back(augment_example(dataset[i], pool, cfg, i));
    return out;
}

std::vector<TrainingExample> augment_batch_parallel(const std::vector<TrainingExample>& dataset,
                                                    const PersonaPool& pool,
                                                    const AugmentationConfig& cfg, int threads) {
    std::vector<TrainingExample> out(dataset.size());
    parallel_for(dataset.size(), threads,
                 [&](std::size_t i) { out[i] = augment_example(dataset[i], pool, cfg, i); });
    return out;
}

std::vector<TrainingExample> merge_datasets(const std::vector<TrainingExample>& raw,
                                            const std::vector<TrainingExample>& augmented,
                                            const AugmentationConfig& cfg) {
    const double ratio = cfg.mix_ratio;
    if (ratio <= 0.0) return raw;
    if (ratio >= 1.0) return augmented;

    // Largest (n_raw, n_aug) with n_aug/(n_raw+n_aug) = ratio that both inputs
    // can supply; the binding side is used in full.
    std::size_t n_raw = raw.size();
    std::size_t n_aug =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_raw) * ratio / (1.0 - ratio)));
    if (n_aug > augmented.size()) {
        n_aug = augmented.size();
        n_raw = std::min<std::size_t>(
            raw.size(),
            static_cast<std::size_t>(
                std::llround(static_cast<double>(n_aug) * (1.0 - ratio) / ratio)));
    }

    std::vector<std::uint8_t> slots(n_raw + n_aug, 0);
    std::fill(slots.begin() + static_cast<std::ptrdiff_t>(n_raw), slots.end(), 1);
    Rng rng = Rng::derive(cfg.seed, 0x6d657267);  // merge stream
    for (std::size_t i = slots.size(); i > 1; --i)
        std::swap(slots[i - 1], slots[rng.bounded(i)]);

    std::vector<TrainingExample> out;
    out.reserve(slots.size());
    std::size_t ir = 0, ia = 0;
    for (auto s : slots) out.push_back(s ? augmented[ia++] : raw[ir++]);
    return out;
}

}  // namespace pkit
