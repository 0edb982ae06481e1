#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"
#include "labelfuse/rng.hpp"

namespace labelfuse {

struct ExpertProfile {
    double participation = 0.0;       // r^j: chance of annotating any given sample
    std::vector<double> hidden_alpha; // per-class sensitivity of the simulated expert
    std::vector<double> hidden_beta;  // per-class specificity
};

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
};

struct SimConfig {
    std::size_t n_experts = 15;
    BetaParams participation_beta{1.0, 20.0}; // mean 1/21
    BetaParams reliability_beta{4.0, 1.0};    // mean 0.8
    std::uint64_t seed = 0;
    // Overrides for controlled regimes (dense or noiseless experts); when set,
    // the corresponding Beta draw is skipped.
    std::optional<double> fixed_participation;
    std::optional<double> fixed_reliability;
};

inline void validate_sim_config(const SimConfig& c) {
    if (c.n_experts < 1) throw ValueOutOfRange("sim: need at least one expert");
    if (!(c.participation_beta.a > 0.0 && c.participation_beta.b > 0.0) ||
        !(c.reliability_beta.a > 0.0 && c.reliability_beta.b > 0.0))
        throw ValueOutOfRange("sim: Beta shape parameters must be positive");
    if (c.fixed_participation && !(*c.fixed_participation >= 0.0 && *c.fixed_participation <= 1.0))
        throw ValueOutOfRange("sim: fixed participation outside [0,1]");
    if (c.fixed_reliability && !(*c.fixed_reliability >= 0.0 && *c.fixed_reliability <= 1.0))
        throw ValueOutOfRange("sim: fixed reliability outside [0,1]");
}

// Each expert gets its own derived RNG stream, so profiles are reproducible
// and independent of how many experts precede them.
inline std::vector<ExpertProfile> sample_expert_profiles(const SimConfig& config,
                                                         std::size_t n_classes) {
    validate_sim_config(config);
    std::vector<ExpertProfile> profiles(config.n_experts);
    for (std::size_t j = 0; j < config.n_experts; ++j) {
        Rng rng(derive_seed(config.seed, j));
        ExpertProfile& p = profiles[j];
        p.participation = config.fixed_participation
                              ? *config.fixed_participation
                              : rng.beta(config.participation_beta.a, config.participation_beta.b);
        p.hidden_alpha.resize(n_classes);
        p.hidden_beta.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            p.hidden_alpha[c] = config.fixed_reliability
                                    ? *config.fixed_reliability
                                    : rng.beta(config.reliability_beta.a, config.reliability_beta.b);
            p.hidden_beta[c] = config.fixed_reliability
                                   ? *config.fixed_reliability
                                   : rng.beta(config.reliability_beta.a, config.reliability_beta.b);
        }
    }
    return profiles;
}

// Noisy sparse annotations from ground truth. One participation draw per
// (expert, sample), shared by all classes: an expert who takes a sample emits
// its full one-hot row. Label noise is drawn per class: positives flip with
// rate 1 - alpha, negatives with rate 1 - beta.
inline AnnotationSet generate_annotations(const Matrix& true_labels_one_hot,
                                          const std::vector<ExpertProfile>& profiles,
                                          std::uint64_t seed) {
    const std::size_t n = true_labels_one_hot.rows();
    const std::size_t k = true_labels_one_hot.cols();
    if (profiles.empty()) throw EmptyInput("generate_annotations: no experts");
    for (const auto& p : profiles)
        if (p.hidden_alpha.size() != k || p.hidden_beta.size() != k)
            throw DimensionMismatch("generate_annotations: profile class count");

    std::vector<AnnotationEntry> entries;
    for (std::size_t j = 0; j < profiles.size(); ++j) {
        const ExpertProfile& p = profiles[j];
        const std::uint64_t expert_stream = derive_seed(seed, j);
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(expert_stream, i));
            if (!rng.bernoulli(p.participation)) continue;
            for (std::size_t c = 0; c < k; ++c) {
                double value;
                if (true_labels_one_hot(i, c) == 1.0) {
                    value = rng.bernoulli(p.hidden_alpha[c]) ? 1.0 : 0.0;
                } else {
                    value = rng.bernoulli(p.hidden_beta[c]) ? 0.0 : 1.0;
                }
                entries.push_back({i, j, c, value});
            }
        }
    }
    return build_annotation_set(std::move(entries), n, profiles.size(), k);
}

} // namespace labelfuse
