#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/meta.hpp"
#include "labelfuse/metrics.hpp"
#include "labelfuse/rng.hpp"
#include "labelfuse/simulate.hpp"
#include "labelfuse/synthetic.hpp"
#include "labelfuse/threshold.hpp"

using namespace labelfuse;

namespace {

// Dataset whose single feature equals the class, scaled to {0, 1}.
Dataset line_dataset(const std::vector<std::size_t>& labels) {
    Dataset d;
    d.features = Matrix(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        d.features(i, 0) = static_cast<double>(labels[i]);
    d.true_labels = labels;
    d.n_classes = 2;
    d.sample_ids.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) d.sample_ids[i] = std::to_string(i);
    d.label_names = {"0", "1"};
    return d;
}

std::vector<ExpertProfile> flat_profiles(std::size_t r, std::size_t k, double participation,
                                         double reliability) {
    std::vector<ExpertProfile> profiles(r);
    for (auto& p : profiles) {
        p.participation = participation;
        p.hidden_alpha.assign(k, reliability);
        p.hidden_beta.assign(k, reliability);
    }
    return profiles;
}

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double human_alpha_mae(const ConsensusOutput& out, const std::vector<ExpertProfile>& profiles,
                       std::size_t k) {
    double total = 0.0;
    for (std::size_t j = 0; j < profiles.size(); ++j)
        for (std::size_t c = 0; c < k; ++c)
            total += std::abs(out.reliability->alpha(j, c) - profiles[j].hidden_alpha[c]);
    return total / static_cast<double>(profiles.size() * k);
}

} // namespace

TEST_CASE("majority voting returns vote distributions") {
    std::vector<AnnotationEntry> entries{
        {0, 0, 0, 1.0}, {0, 1, 0, 1.0}, {0, 2, 0, 1.0}, // unanimous on class 0
        {1, 0, 0, 1.0}, {1, 1, 0, 1.0}, {1, 2, 0, 0.0}, // 2 of 3
    };
    AnnotationSet set = build_annotation_set(entries, 3, 3, 1);
    ConsensusOutput out = majority_voting(set);
    REQUIRE(out.posterior(0, 0) == 1.0);
    REQUIRE(out.posterior(1, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(out.posterior(2, 0) == 0.5); // nobody voted
    REQUIRE_FALSE(out.reliability.has_value());
    REQUIRE(out.per_class[0].iterations == 0);
    REQUIRE(out.per_class[0].converged);
}

TEST_CASE("majority voting rejects an empty set") {
    AnnotationSet set = build_annotation_set({}, 2, 1, 1);
    REQUIRE_THROWS_AS(majority_voting(set), EmptyAnnotations);
}

TEST_CASE("inferred consensus with one perfect dense expert recovers the labels") {
    std::vector<std::size_t> truth{0, 1, 0, 1, 1, 0, 0, 1, 1, 0};
    Dataset d = line_dataset(truth);
    std::vector<AnnotationEntry> entries;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        entries.push_back({i, 0, 0, truth[i] == 0 ? 1.0 : 0.0});
        entries.push_back({i, 0, 1, truth[i] == 1 ? 1.0 : 0.0});
    }
    AnnotationSet set = build_annotation_set(entries, truth.size(), 1, 2);
    ConsensusOutput out = inferred_consensus(d, set);
    std::vector<std::size_t> rounded =
        assign_single_label(out.posterior, default_thresholds(2, LabelRule::single_label));
    REQUIRE(rounded == truth);
}

TEST_CASE("inferred annotation set is dense over samples, experts, classes") {
    std::vector<std::size_t> truth{0, 1, 0, 1, 1, 0};
    Dataset d = line_dataset(truth);
    // Sparse input: expert 0 covers three samples, expert 1 covers one,
    // expert 2 covers nothing; sample 5 is never annotated.
    std::vector<AnnotationEntry> entries{
        {0, 0, 0, 1.0}, {0, 0, 1, 0.0}, {1, 0, 0, 0.0}, {1, 0, 1, 1.0},
        {2, 0, 0, 1.0}, {2, 0, 1, 0.0}, {3, 1, 0, 0.0}, {3, 1, 1, 1.0},
    };
    AnnotationSet sparse = build_annotation_set(entries, 6, 3, 2);
    AnnotationSet dense = inferred_annotation_set(d, sparse);

    REQUIRE(dense.n_experts() == 3);
    REQUIRE(dense.entries().size() == 6 * 3 * 2);
    for (std::size_t i = 0; i < 6; ++i)
        REQUIRE(dense.experts_of_sample(i).size() == 3);
    REQUIRE(dense.soft());
}

TEST_CASE("experts with no annotations become constant 0.5 annotators") {
    std::vector<std::size_t> truth{0, 1, 0, 1};
    Dataset d = line_dataset(truth);
    std::vector<AnnotationEntry> entries{{0, 0, 0, 1.0}, {1, 0, 0, 0.0}};
    AnnotationSet sparse = build_annotation_set(entries, 4, 2, 1);
    AnnotationSet dense = inferred_annotation_set(d, sparse);
    // Expert 1 annotated nothing: all its soft votes sit at one half.
    for (const auto& e : dense.entries())
        if (e.expert == 1) REQUIRE(e.value == 0.5);
}

TEST_CASE("simulated annotation set separates humans from twins") {
    std::vector<std::size_t> truth{0, 1, 0, 1, 1};
    Dataset d = line_dataset(truth);
    // Expert 0 covers samples {0, 1}; expert 1 covers {1, 2, 3}; sample 4 is
    // annotated by nobody.
    std::vector<AnnotationEntry> entries{
        {0, 0, 0, 1.0}, {1, 0, 0, 0.0},
        {1, 1, 0, 0.0}, {2, 1, 0, 1.0}, {3, 1, 0, 0.0},
    };
    AnnotationSet sparse = build_annotation_set(entries, 5, 2, 1);
    AnnotationSet merged = simulated_annotation_set(d, sparse);

    REQUIRE(merged.n_experts() == 4); // 2 humans + 2 twins

    // Human rows carry over verbatim.
    for (std::size_t j = 0; j < 2; ++j)
        REQUIRE(merged.samples_of_expert(j) == sparse.samples_of_expert(j));

    // Twin coverage is exactly the complement of the human's samples.
    for (std::size_t j = 0; j < 2; ++j) {
        const auto& seen = sparse.samples_of_expert(j);
        const auto& twin = merged.samples_of_expert(2 + j);
        for (std::size_t i = 0; i < 5; ++i) {
            bool human_has = std::find(seen.begin(), seen.end(), i) != seen.end();
            bool twin_has = std::find(twin.begin(), twin.end(), i) != twin.end();
            REQUIRE(human_has != twin_has);
        }
    }

    // Each expert appears exactly once per sample, as human or twin.
    for (std::size_t i = 0; i < 5; ++i)
        REQUIRE(merged.experts_of_sample(i).size() == 2);
}

TEST_CASE("an expert who annotated everything leaves a silent twin") {
    std::vector<std::size_t> truth{0, 1, 0, 1, 1, 0, 1, 0};
    Dataset d = line_dataset(truth);
    std::vector<AnnotationEntry> entries;
    for (std::size_t i = 0; i < truth.size(); ++i)
        entries.push_back({i, 0, 0, static_cast<double>(truth[i])});
    AnnotationSet sparse = build_annotation_set(entries, truth.size(), 1, 1);

    AnnotationSet merged = simulated_annotation_set(d, sparse);
    REQUIRE(merged.n_experts() == 2);
    REQUIRE(merged.samples_of_expert(1).empty());
    REQUIRE(merged.entries().size() == sparse.entries().size());

    // Human reliability matches plain EM on the original set.
    ConsensusOutput plain = run_em(sparse);
    ConsensusOutput sim = simulated_consensus(d, sparse);
    REQUIRE(sim.reliability->alpha(0, 0) ==
            Catch::Approx(plain.reliability->alpha(0, 0)).margin(1e-9));
    REQUIRE(sim.reliability->beta(0, 0) ==
            Catch::Approx(plain.reliability->beta(0, 0)).margin(1e-9));
    for (std::size_t i = 0; i < truth.size(); ++i)
        REQUIRE(sim.posterior(i, 0) == Catch::Approx(plain.posterior(i, 0)).margin(1e-9));
}

TEST_CASE("noiseless dense experts are a fixpoint for every method") {
    std::vector<std::size_t> truth{1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0};
    Dataset d = line_dataset(truth);
    Matrix one_hot = one_hot_expand(truth, 2);
    std::vector<ExpertProfile> profiles = flat_profiles(3, 2, 1.0, 1.0);
    AnnotationSet annotations = generate_annotations(one_hot, profiles, 5);

    ThresholdVector tv = default_thresholds(2, LabelRule::single_label);
    for (int method = 0; method < 4; ++method) {
        ConsensusOutput out;
        switch (method) {
            case 0: out = majority_voting(annotations); break;
            case 1: out = run_em(annotations); break;
            case 2: out = inferred_consensus(d, annotations); break;
            default: out = simulated_consensus(d, annotations); break;
        }
        std::vector<std::size_t> rounded = assign_single_label(out.posterior, tv);
        REQUIRE(rounded == truth);
    }
}

TEST_CASE("meta methods validate dataset dimensions") {
    std::vector<std::size_t> truth{0, 1};
    Dataset d = line_dataset(truth);
    AnnotationSet mismatched = build_annotation_set({{0, 0, 0, 1.0}}, 3, 1, 1);
    REQUIRE_THROWS_AS(inferred_consensus(d, mismatched), DimensionMismatch);
    REQUIRE_THROWS_AS(simulated_consensus(d, mismatched), DimensionMismatch);

    AnnotationSet empty = build_annotation_set({}, 2, 1, 1);
    REQUIRE_THROWS_AS(inferred_consensus(d, empty), EmptyAnnotations);
    REQUIRE_THROWS_AS(simulated_consensus(d, empty), EmptyAnnotations);
}

TEST_CASE("expert permutation permutes meta reliability rows") {
    std::vector<std::size_t> truth{0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0};
    Dataset d = line_dataset(truth);
    Matrix one_hot = one_hot_expand(truth, 2);
    std::vector<ExpertProfile> profiles = flat_profiles(3, 2, 0.6, 0.85);
    AnnotationSet base = generate_annotations(one_hot, profiles, 11);

    std::vector<std::size_t> perm{1, 2, 0};
    std::vector<AnnotationEntry> moved;
    for (const auto& e : base.entries()) moved.push_back({e.sample, perm[e.expert], e.class_id, e.value});
    AnnotationSet permuted = build_annotation_set(moved, truth.size(), 3, 2);

    ConsensusOutput oa = inferred_consensus(d, base);
    ConsensusOutput ob = inferred_consensus(d, permuted);
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t c = 0; c < 2; ++c)
            REQUIRE(oa.posterior(i, c) == Catch::Approx(ob.posterior(i, c)).margin(1e-12));
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t c = 0; c < 2; ++c)
            REQUIRE(oa.reliability->alpha(j, c) ==
                    Catch::Approx(ob.reliability->alpha(perm[j], c)).margin(1e-12));
}

TEST_CASE("blob benchmark: inferred consensus labels accurately") {
    BlobsConfig blobs;
    blobs.n_samples = 400;
    blobs.seed = 7;
    Dataset d = make_blobs(blobs);
    Matrix one_hot = one_hot_expand(*d.true_labels, 2);
    std::vector<ExpertProfile> profiles = flat_profiles(5, 2, 0.2, 0.9);
    AnnotationSet annotations = generate_annotations(one_hot, profiles, 7);

    ConsensusOutput inferred = inferred_consensus(d, annotations);
    std::vector<std::size_t> labels =
        assign_single_label(inferred.posterior, default_thresholds(2, LabelRule::single_label));
    REQUIRE(accuracy(labels, *d.true_labels) >= 0.9);

    // The simulated method keeps the real votes, so its human reliability
    // estimates beat the inferred method's model-based ones.
    ConsensusOutput simulated = simulated_consensus(d, annotations);
    REQUIRE(human_alpha_mae(simulated, profiles, 2) < human_alpha_mae(inferred, profiles, 2));
}
