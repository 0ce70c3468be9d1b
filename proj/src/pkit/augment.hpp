#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pkit/profile.hpp"

namespace pkit {

// All distinct kept triples of a corpus, in first-appearance order, indexed by
// attribute for conflict checks.
class PersonaPool {
public:
    void add(const PersonaTriple& t);

    const std::vector<PersonaTriple>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    // Indices of pool entries carrying the given attribute.
    const std::vector<std::size_t>& with_attribute(const std::string& attribute) const;

private:
    std::vector<PersonaTriple> entries_;
    std::unordered_map<std::string, bool> seen_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_attribute_;
};

PersonaPool build_pool(const std::vector<TrainingExample>& dataset);

struct AugmentationConfig {
    int min_added = 1;
    int max_added = 3;
    std::uint64_t seed = 0;
    double mix_ratio = 0.5;  // fraction of augmented records in the merged output
};

// Draws k in [min_added, max_added] pool candidates from the (seed,
// record_index) stream; a candidate whose attribute matches any triple already
// in the profile is discarded, not resampled. Survivors append after the
// original triples; context and response are untouched.
TrainingExample augment_example(const TrainingExample& x, const PersonaPool& pool,
                                const AugmentationConfig& cfg, std::uint64_t record_index);

std::vector<TrainingExample> augment_batch_serial(const std::vector<TrainingExample>& dataset,
                                                  const PersonaPool& pool,
                                                  const AugmentationConfig& cfg);
std::vector<TrainingExample> augment_batch_parallel(const std::vector<TrainingExample>& dataset,
                                                    const PersonaPool& pool,
                                                    const AugmentationConfig& cfg, int threads);

// Deterministic merge at cfg.mix_ratio: ratio 0 -> raw only, 1 -> augmented
// only; otherwise the largest prefix pair matching the ratio, ordered by a
// seeded shuffle of slot labels. Selected records pass through unchanged.
std::vector<TrainingExample> merge_datasets(const std::vector<TrainingExample>& raw,
                                            const std::vector<TrainingExample>& augmented,
                                            const AugmentationConfig& cfg);

}  // namespace pkit
