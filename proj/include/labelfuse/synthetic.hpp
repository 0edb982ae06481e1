#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"
#include "labelfuse/rng.hpp"

namespace labelfuse {

struct BlobsConfig {
    std::size_t n_samples = 100;
    std::size_t n_classes = 2;
    std::vector<double> weights;  // class proportions; empty means uniform
    double cluster_std = 1.0;
    double center_radius = 2.0;   // class centers sit on a circle of this radius
    std::uint64_t seed = 0;
};

// Deterministic 2-D Gaussian blobs, min-max scaled to [0,1], rows shuffled so
// class blocks are not contiguous. Class counts are round(w_c * N) with the
// remainder settled on the largest class.
inline Dataset make_blobs(const BlobsConfig& config) {
    if (config.n_samples < 1) throw EmptyInput("make_blobs: need samples");
    if (config.n_classes < 2) throw ValueOutOfRange("make_blobs: need K >= 2");
    if (!(config.cluster_std > 0.0)) throw ValueOutOfRange("make_blobs: cluster_std must be > 0");

    std::vector<double> weights = config.weights;
    if (weights.empty())
        weights.assign(config.n_classes, 1.0 / static_cast<double>(config.n_classes));
    if (weights.size() != config.n_classes) throw DimensionMismatch("make_blobs: weights size");
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(wsum > 0.0)) throw ValueOutOfRange("make_blobs: weights must sum to a positive value");

    std::vector<std::size_t> counts(config.n_classes);
    std::size_t assigned = 0;
    std::size_t largest = 0;
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        counts[c] = static_cast<std::size_t>(
            std::llround(weights[c] / wsum * static_cast<double>(config.n_samples)));
        assigned += counts[c];
        if (weights[c] > weights[largest]) largest = c;
    }
    while (assigned < config.n_samples) { ++counts[largest]; ++assigned; }
    while (assigned > config.n_samples) {
        if (counts[largest] == 0) throw ValueOutOfRange("make_blobs: degenerate weights");
        --counts[largest]; --assigned;
    }

    const double tau = 2.0 * 3.141592653589793238462643383279502884;
    std::vector<std::size_t> labels;
    labels.reserve(config.n_samples);
    std::vector<std::vector<double>> rows;
    rows.reserve(config.n_samples);
    Rng rng(derive_seed(config.seed, 0));
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        double angle = tau * static_cast<double>(c) / static_cast<double>(config.n_classes);
        double cx = config.center_radius * std::cos(angle);
        double cy = config.center_radius * std::sin(angle);
        for (std::size_t s = 0; s < counts[c]; ++s) {
            rows.push_back({cx + config.cluster_std * rng.normal(),
                            cy + config.cluster_std * rng.normal()});
            labels.push_back(c);
        }
    }

    std::vector<std::size_t> perm(config.n_samples);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, 1));
    shuffle_rng.shuffle(perm);

    Matrix features(config.n_samples, 2);
    std::vector<std::size_t> shuffled_labels(config.n_samples);
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        features(i, 0) = rows[perm[i]][0];
        features(i, 1) = rows[perm[i]][1];
        shuffled_labels[i] = labels[perm[i]];
    }

    for (std::size_t d = 0; d < 2; ++d) {
        double lo = features(0, d), hi = features(0, d);
        for (std::size_t i = 1; i < config.n_samples; ++i) {
            lo = std::min(lo, features(i, d));
            hi = std::max(hi, features(i, d));
        }
        double range = hi - lo;
        for (std::size_t i = 0; i < config.n_samples; ++i)
            features(i, d) = range > 0.0 ? (features(i, d) - lo) / range : 0.0;
    }

    Dataset out;
    out.features = std::move(features);
    out.true_labels = std::move(shuffled_labels);
    out.n_classes = config.n_classes;
    out.sample_ids.resize(config.n_samples);
    for (std::size_t i = 0; i < config.n_samples; ++i) out.sample_ids[i] = std::to_string(i);
    out.label_names.resize(config.n_classes);
    for (std::size_t c = 0; c < config.n_classes; ++c) out.label_names[c] = std::to_string(c);
    return out;
}

} // namespace labelfuse
