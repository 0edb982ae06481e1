#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/simulate.hpp"

using namespace labelfuse;

TEST_CASE("sim config validation") {
    SimConfig c;
    REQUIRE_NOTHROW(validate_sim_config(c));
    c.n_experts = 0;
    REQUIRE_THROWS_AS(validate_sim_config(c), ValueOutOfRange);
    c = SimConfig{};
    c.participation_beta.a = 0.0;
    REQUIRE_THROWS_AS(validate_sim_config(c), ValueOutOfRange);
    c = SimConfig{};
    c.fixed_participation = 1.5;
    REQUIRE_THROWS_AS(validate_sim_config(c), ValueOutOfRange);
}

TEST_CASE("profiles are reproducible and prefix-stable") {
    SimConfig c;
    c.n_experts = 6;
    c.seed = 99;
    auto a = sample_expert_profiles(c, 3);
    auto b = sample_expert_profiles(c, 3);
    REQUIRE(a.size() == 6);
    for (std::size_t j = 0; j < 6; ++j) {
        REQUIRE(a[j].participation == b[j].participation);
        REQUIRE(a[j].hidden_alpha == b[j].hidden_alpha);
        REQUIRE(a[j].hidden_beta == b[j].hidden_beta);
    }

    // Each expert draws from its own derived stream, so a shorter panel is a
    // prefix of a longer one.
    c.n_experts = 3;
    auto shorter = sample_expert_profiles(c, 3);
    for (std::size_t j = 0; j < 3; ++j)
        REQUIRE(shorter[j].participation == a[j].participation);
}

TEST_CASE("profile values stay in the unit interval") {
    SimConfig c;
    c.n_experts = 200;
    c.seed = 5;
    auto profiles = sample_expert_profiles(c, 2);
    for (const auto& p : profiles) {
        REQUIRE(p.participation >= 0.0);
        REQUIRE(p.participation <= 1.0);
        for (double v : p.hidden_alpha) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("fixed overrides replace the Beta draws") {
    SimConfig c;
    c.n_experts = 4;
    c.seed = 1;
    c.fixed_participation = 1.0;
    c.fixed_reliability = 0.9;
    auto profiles = sample_expert_profiles(c, 2);
    for (const auto& p : profiles) {
        REQUIRE(p.participation == 1.0);
        for (double v : p.hidden_alpha) REQUIRE(v == 0.9);
        for (double v : p.hidden_beta) REQUIRE(v == 0.9);
    }
}

TEST_CASE("noiseless full-participation experts echo the truth") {
    std::vector<std::size_t> labels{0, 1, 1, 0, 1};
    Matrix one_hot = one_hot_expand(labels, 2);
    std::vector<ExpertProfile> profiles(2);
    for (auto& p : profiles) {
        p.participation = 1.0;
        p.hidden_alpha.assign(2, 1.0);
        p.hidden_beta.assign(2, 1.0);
    }
    AnnotationSet set = generate_annotations(one_hot, profiles, 3);
    REQUIRE(set.entries().size() == 5 * 2 * 2);
    for (const auto& e : set.entries())
        REQUIRE(e.value == one_hot(e.sample, e.class_id));
    REQUIRE_FALSE(set.soft());
}

TEST_CASE("zero sensitivity flips every positive label") {
    std::vector<std::size_t> labels{1, 1, 1, 1};
    Matrix one_hot = one_hot_expand(labels, 2);
    std::vector<ExpertProfile> profiles(1);
    profiles[0].participation = 1.0;
    profiles[0].hidden_alpha = {1.0, 0.0}; // class 1 positives always mislabeled
    profiles[0].hidden_beta = {1.0, 1.0};
    AnnotationSet set = generate_annotations(one_hot, profiles, 9);
    for (const auto& e : set.entries())
        if (e.class_id == 1) REQUIRE(e.value == 0.0);
}

TEST_CASE("participation concentrates at the configured rate") {
    const std::size_t n = 10000;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2;
    Matrix one_hot = one_hot_expand(labels, 2);
    std::vector<ExpertProfile> profiles(1);
    profiles[0].participation = 0.05;
    profiles[0].hidden_alpha.assign(2, 0.9);
    profiles[0].hidden_beta.assign(2, 0.9);
    AnnotationSet set = generate_annotations(one_hot, profiles, 21);
    double count = static_cast<double>(set.samples_of_expert(0).size());
    double expect = 0.05 * n;
    REQUIRE(std::abs(count - expect) <= 3.0 * std::sqrt(n * 0.05 * 0.95));
}

TEST_CASE("participation is shared across class views") {
    std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    Matrix one_hot = one_hot_expand(labels, 3);
    std::vector<ExpertProfile> profiles(3);
    for (auto& p : profiles) {
        p.participation = 0.5;
        p.hidden_alpha.assign(3, 0.8);
        p.hidden_beta.assign(3, 0.8);
    }
    AnnotationSet set = generate_annotations(one_hot, profiles, 13);
    // Every annotated (sample, expert) pair carries all three class slots:
    // per-class views cover the same sample set.
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& samples = set.samples_of_expert(j);
        for (std::size_t c = 0; c < 3; ++c) {
            BinaryTaskView view = restrict(set, c);
            REQUIRE(view.by_expert[j].size() == samples.size());
        }
    }
}

TEST_CASE("empirical sensitivity converges to the hidden rate") {
    const std::size_t n = 20000;
    std::vector<std::size_t> labels(n, 1); // all positives in class 1
    Matrix one_hot = one_hot_expand(labels, 2);
    std::vector<ExpertProfile> profiles(1);
    profiles[0].participation = 1.0;
    profiles[0].hidden_alpha = {0.9, 0.75};
    profiles[0].hidden_beta = {0.9, 0.9};
    AnnotationSet set = generate_annotations(one_hot, profiles, 17);
    double hits = 0.0, total = 0.0;
    for (const auto& e : set.entries()) {
        if (e.class_id != 1) continue;
        total += 1.0;
        hits += e.value;
    }
    REQUIRE(total == static_cast<double>(n));
    double rate = hits / total;
    REQUIRE(std::abs(rate - 0.75) <= 3.0 * std::sqrt(0.75 * 0.25 / total));
}

TEST_CASE("annotation generation is seed-deterministic") {
    std::vector<std::size_t> labels{0, 1, 0, 1, 1, 0};
    Matrix one_hot = one_hot_expand(labels, 2);
    std::vector<ExpertProfile> profiles(4);
    for (auto& p : profiles) {
        p.participation = 0.4;
        p.hidden_alpha.assign(2, 0.85);
        p.hidden_beta.assign(2, 0.8);
    }
    AnnotationSet a = generate_annotations(one_hot, profiles, 123);
    AnnotationSet b = generate_annotations(one_hot, profiles, 123);
    REQUIRE(a == b);
    AnnotationSet c = generate_annotations(one_hot, profiles, 124);
    REQUIRE_FALSE(a == c);
}

TEST_CASE("generation validates profile dimensions") {
    Matrix one_hot = one_hot_expand({0, 1}, 2);
    std::vector<ExpertProfile> profiles(1);
    profiles[0].participation = 1.0;
    profiles[0].hidden_alpha = {0.9}; // K mismatch
    profiles[0].hidden_beta = {0.9};
    REQUIRE_THROWS_AS(generate_annotations(one_hot, profiles, 1), DimensionMismatch);
    REQUIRE_THROWS_AS(generate_annotations(one_hot, {}, 1), EmptyInput);
}
