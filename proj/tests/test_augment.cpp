#include <doctest.h>

#include <set>
#include <unordered_set>

#include "pkit/augment.hpp"
#include "pkit/eval.hpp"
#include "pkit/rng.hpp"
#include "pkit/synthetic.hpp"
#include "pkit/text.hpp"

using namespace pkit;

namespace {

PersonaTriple t(const std::string& s, const std::string& a, const std::string& o) {
    return PersonaTriple{split_ws(s), a, split_ws(o)};
}

TrainingExample example_with(std::vector<PersonaTriple> triples) {
    TrainingExample x;
    x.profile.owner = "b";
    x.profile.triples = std::move(triples);
    x.context = {{"a", "hi"}};
    x.response = {"b", "hello"};
    x.responder = "b";
    return x;
}

PersonaPool pool_of(const std::vector<PersonaTriple>& ts) {
    PersonaPool p;
    for (const auto& x : ts) p.add(x);
    return p;
}

std::string dataset_bytes(const std::vector<TrainingExample>& xs) {
    std::string out;
    for (const auto& x : xs) out += example_to_json(x).dump() + "\n";
    return out;
}

}  // namespace

TEST_CASE("build_pool deduplicates") {
    std::vector<TrainingExample> data = {
        example_with({t("i", "like", "tea"), t("i", "have", "a dog")}),
        example_with({t("i", "like", "tea"), t("i", "live_in", "paris")}),
    };
    const PersonaPool pool = build_pool(data);
    CHECK(pool.size() == 3);
    CHECK(build_pool({}).empty());
}

TEST_CASE("pool attribute index returns exactly the matching entries") {
    const PersonaPool pool = pool_of({t("i", "like", "tea"), t("i", "like", "chess"),
                                      t("i", "have", "a dog")});
    const auto& likes = pool.with_attribute("like");
    REQUIRE(likes.size() == 2);
    for (auto idx : likes) CHECK(pool.entries()[idx].attribute == "like");
    CHECK(pool.with_attribute("have").size() == 1);
    CHECK(pool.with_attribute("eat").empty());
}

TEST_CASE("augment_example: same-attribute candidate is discarded") {
    const PersonaPool pool = pool_of({t("i", "live_in", "london")});
    AugmentationConfig cfg;
    cfg.min_added = 1;
    cfg.max_added = 1;
    cfg.seed = 3;
    auto out = augment_example(example_with({t("i", "live_in", "paris")}), pool, cfg, 0);
    REQUIRE(out.profile.triples.size() == 1);  // unchanged
    CHECK(out.profile.triples[0].object == std::vector<std::string>{"paris"});
    CHECK(out.added_count == 0);
    CHECK(out.augmented);
}

TEST_CASE("augment_example: disjoint attribute appends after the originals") {
    const PersonaPool pool = pool_of({t("i", "like", "swimming")});
    AugmentationConfig cfg;
    cfg.min_added = 1;
    cfg.max_added = 1;
    cfg.seed = 3;
    auto out = augment_example(example_with({t("i", "live_in", "paris")}), pool, cfg, 0);
    REQUIRE(out.profile.triples.size() == 2);
    CHECK(out.profile.triples[0].attribute == "live_in");  // original first
    CHECK(out.profile.triples[1].attribute == "like");
    CHECK(out.added_count == 1);
}

TEST_CASE("augment_example: empty profile accepts any candidate") {
    const PersonaPool pool = pool_of({t("i", "eat", "pizza")});
    AugmentationConfig cfg;
    cfg.min_added = 1;
    cfg.max_added = 1;
    cfg.seed = 1;
    auto out = augment_example(example_with({}), pool, cfg, 0);
    REQUIRE(out.profile.triples.size() == 1);
    CHECK(out.profile.triples[0].attribute == "eat");
}

TEST_CASE("augmentation invariants over a seeded batch") {
    Rng rng(404);
    const std::vector<std::string> attrs = {"like", "have", "live_in", "play", "eat", "want"};
    std::vector<PersonaTriple> pool_triples;
    for (int i = 0; i < 40; ++i)
        pool_triples.push_back(
            t("i", attrs[rng.bounded(attrs.size())], "obj" + std::to_string(i)));
    const PersonaPool pool = pool_of(pool_triples);

    std::vector<TrainingExample> dataset;
    for (int i = 0; i < 500; ++i) {
        std::vector<PersonaTriple> triples;
        std::set<std::string> used;
        for (int k = rng.uniform_int(0, 3); k > 0; --k) {
            const auto& a = attrs[rng.bounded(attrs.size())];
            if (!used.insert(a).second) continue;
            triples.push_back(t("i", a, "own" + std::to_string(i) + std::to_string(k)));
        }
        dataset.push_back(example_with(std::move(triples)));
    }

    AugmentationConfig cfg;
    cfg.min_added = 1;
    cfg.max_added = 3;
    cfg.seed = 99;
    auto augmented = augment_batch_serial(dataset, pool, cfg);
    REQUIRE(augmented.size() == dataset.size());

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& orig = dataset[i].profile.triples;
        const auto& aug = augmented[i].profile.triples;
        REQUIRE(aug.size() >= orig.size());
        // originals preserved, in order, as a prefix
        for (std::size_t k = 0; k < orig.size(); ++k) CHECK(aug[k] == orig[k]);
        // appended triples never share an attribute with an original
        std::unordered_set<std::string> orig_attrs;
        for (const auto& o : orig) orig_attrs.insert(o.attribute);
        for (std::size_t k = orig.size(); k < aug.size(); ++k)
            CHECK(!orig_attrs.count(aug[k].attribute));
        // and never with each other
        std::unordered_set<std::string> appended;
        for (std::size_t k = orig.size(); k < aug.size(); ++k)
            CHECK(appended.insert(aug[k].attribute).second);
        // context and response untouched
        CHECK(augmented[i].context.size() == dataset[i].context.size());
        CHECK(augmented[i].response.text == dataset[i].response.text);
        CHECK(augmented[i].augmented);
        CHECK(augmented[i].added_count ==
              static_cast<int>(aug.size() - orig.size()));
    }

    // byte-identical rerun
    auto again = augment_batch_serial(dataset, pool, cfg);
    CHECK(dataset_bytes(augmented) == dataset_bytes(again));
}

TEST_CASE("merge_datasets ratio endpoints") {
    std::vector<TrainingExample> raw, aug;
    for (int i = 0; i < 10; ++i) {
        raw.push_back(example_with({t("i", "like", "r" + std::to_string(i))}));
        auto a = example_with({t("i", "have", "a" + std::to_string(i))});
        a.augmented = true;
        aug.push_back(a);
    }
    AugmentationConfig cfg;
    cfg.seed = 5;

    cfg.mix_ratio = 0.0;
    CHECK(dataset_bytes(merge_datasets(raw, aug, cfg)) == dataset_bytes(raw));
    cfg.mix_ratio = 1.0;
    CHECK(dataset_bytes(merge_datasets(raw, aug, cfg)) == dataset_bytes(aug));
}

TEST_CASE("merge_datasets at 0.5 uses all records and reruns identically") {
    std::vector<TrainingExample> raw, aug;
    for (int i = 0; i < 100; ++i) {
        raw.push_back(example_with({t("i", "like", "r" + std::to_string(i))}));
        auto a = example_with({t("i", "have", "a" + std::to_string(i))});
        a.augmented = true;
        aug.push_back(a);
    }
    AugmentationConfig cfg;
    cfg.seed = 5;
    cfg.mix_ratio = 0.5;
    auto merged = merge_datasets(raw, aug, cfg);
    CHECK(merged.size() == 200);

    std::size_t n_aug = 0;
    for (const auto& x : merged) n_aug += x.augmented ? 1u : 0u;
    CHECK(n_aug == 100);

    // record conservation: every selected record appears exactly once
    std::multiset<std::string> in_bytes, out_bytes;
    for (const auto& x : raw) in_bytes.insert(example_to_json(x).dump());
    for (const auto& x : aug) in_bytes.insert(example_to_json(x).dump());
    for (const auto& x : merged) out_bytes.insert(example_to_json(x).dump());
    CHECK(in_bytes == out_bytes);

    CHECK(dataset_bytes(merge_datasets(raw, aug, cfg)) == dataset_bytes(merged));
}

TEST_CASE("bias reduction is observable in the merged set") {
    // In the biased corpus a non-empty profile always accompanies a
    // persona-realizing response; merging in augmented records must push that
    // conditional frequency strictly below 1.
    const SyntheticWorld world = SyntheticWorld::default_world();
    SyntheticConfig sc;
    sc.n_sessions = 800;
    sc.persona_rate = 0.5;
    sc.biased = true;
    sc.seed = 77;
    std::vector<TrainingExample> raw;
    for (auto& r : generate_corpus(world, sc)) raw.push_back(std::move(r.example));

    AugmentationConfig cfg;
    cfg.seed = 8;
    cfg.mix_ratio = 0.5;
    const PersonaPool pool = build_pool(raw);
    const auto merged = merge_datasets(raw, augment_batch_parallel(raw, pool, cfg, 0), cfg);

    OracleNli nli(world);
    auto persona_related_given_profile = [&](const std::vector<TrainingExample>& set) {
        std::uint64_t bearing = 0, related = 0;
        for (const auto& x : set) {
            if (x.profile.triples.empty()) continue;
            ++bearing;
            for (const auto& t : x.profile.triples) {
                if (nli.classify(t, x.response.text) != NliLabel::neutral) {
                    ++related;
                    break;
                }
            }
        }
        REQUIRE(bearing > 0);
        return static_cast<double>(related) / static_cast<double>(bearing);
    };

    const double raw_rate = persona_related_given_profile(raw);
    const double merged_rate = persona_related_given_profile(merged);
    CHECK(raw_rate == doctest::Approx(1.0));
    CHECK(merged_rate < raw_rate);
}

TEST_CASE("merge_datasets partial ratio keeps the binding side whole") {
    std::vector<TrainingExample> raw, aug;
    for (int i = 0; i < 90; ++i)
        raw.push_back(example_with({t("i", "like", "r" + std::to_string(i))}));
    for (int i = 0; i < 10; ++i) {
        auto a = example_with({t("i", "have", "a" + std::to_string(i))});
        a.augmented = true;
        aug.push_back(a);
    }
    AugmentationConfig cfg;
    cfg.seed = 5;
    cfg.mix_ratio = 0.25;  // wants 30 augmented for 90 raw, only 10 exist
    auto merged = merge_datasets(raw, aug, cfg);
    std::size_t n_aug = 0;
    for (const auto& x : merged) n_aug += x.augmented ? 1u : 0u;
    CHECK(n_aug == 10);
    CHECK(merged.size() == 40);  // 30 raw keep the 1:3 ratio
}
