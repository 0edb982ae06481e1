#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "labelfuse/classifier.hpp"
#include "labelfuse/core.hpp"
#include "labelfuse/em.hpp"
#include "labelfuse/errors.hpp"

namespace labelfuse {

struct MetaConfig {
    ClassifierSpec classifier_spec;
    EmConfig em_config;
    std::size_t minimum_training_size = 5;
};

// Vote distribution per class; no reliability estimates.
inline ConsensusOutput majority_voting(const AnnotationSet& annotations) {
    if (annotations.entries().empty()) throw EmptyAnnotations("majority_voting: no annotations");
    const std::size_t n = annotations.n_samples();
    const std::size_t k = annotations.n_classes();
    ConsensusOutput out;
    out.posterior = Matrix(n, k);
    out.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        BinaryTaskView task = restrict(annotations, c);
        std::vector<double> mu = majority_init(task);
        for (std::size_t i = 0; i < n; ++i) out.posterior(i, c) = mu[i];
        out.per_class[c].iterations = 0;
        out.per_class[c].converged = true;
    }
    return out;
}

namespace detail {

// Fit the per-(expert, class) model on the samples this expert annotated in
// this class view; an expert with nothing to train on becomes a constant 0.5
// annotator.
inline TrainedClassifier fit_expert_class_model(const Dataset& dataset, const BinaryTaskView& task,
                                                std::size_t expert, const MetaConfig& config) {
    const auto& seen = task.by_expert[expert];
    if (seen.empty()) {
        TrainedClassifier constant;
        constant.kind = ClassifierKind::dummy_prior;
        constant.constant = 0.5;
        constant.n_features = dataset.features.cols();
        return constant;
    }
    std::vector<std::size_t> idx(seen.size());
    std::vector<double> labels(seen.size());
    for (std::size_t k = 0; k < seen.size(); ++k) {
        idx[k] = seen[k].first;
        labels[k] = seen[k].second;
    }
    Matrix x = dataset.features.take_rows(idx);
    return train_expert_model(x, labels, config.classifier_spec, config.minimum_training_size,
                              std::move(idx));
}

} // namespace detail

// Dense soft annotation set for the inferred method: every expert is replaced
// by a model of that expert, which predicts every sample. The original
// annotations only train the models; they do not survive into the result.
inline AnnotationSet inferred_annotation_set(const Dataset& dataset,
                                             const AnnotationSet& annotations,
                                             const MetaConfig& config = {}) {
    if (annotations.entries().empty())
        throw EmptyAnnotations("inferred_annotation_set: no annotations");
    if (dataset.features.rows() != annotations.n_samples())
        throw DimensionMismatch("inferred_annotation_set: dataset/annotation sample count");
    const std::size_t n = annotations.n_samples();
    const std::size_t r = annotations.n_experts();
    const std::size_t k = annotations.n_classes();

    std::vector<AnnotationEntry> dense;
    dense.reserve(n * r * k);
    for (std::size_t c = 0; c < k; ++c) {
        BinaryTaskView task = restrict(annotations, c);
        for (std::size_t j = 0; j < r; ++j) {
            TrainedClassifier model = detail::fit_expert_class_model(dataset, task, j, config);
            std::vector<double> pred = predict_proba(model, dataset.features);
            for (std::size_t i = 0; i < n; ++i) dense.push_back({i, j, c, pred[i]});
        }
    }
    return build_annotation_set(std::move(dense), n, r, k);
}

inline ConsensusOutput inferred_consensus(const Dataset& dataset, const AnnotationSet& annotations,
                                          const MetaConfig& config = {}) {
    return run_em(inferred_annotation_set(dataset, annotations, config), config.em_config);
}

// Combined annotation set for the simulated method: the original entries plus,
// per expert, a twin at slot R+j predicting exactly the samples the expert
// skipped (complement of S^j at the sample level).
inline AnnotationSet simulated_annotation_set(const Dataset& dataset,
                                              const AnnotationSet& annotations,
                                              const MetaConfig& config = {}) {
    if (annotations.entries().empty())
        throw EmptyAnnotations("simulated_annotation_set: no annotations");
    if (dataset.features.rows() != annotations.n_samples())
        throw DimensionMismatch("simulated_annotation_set: dataset/annotation sample count");
    const std::size_t n = annotations.n_samples();
    const std::size_t r = annotations.n_experts();
    const std::size_t k = annotations.n_classes();

    std::vector<AnnotationEntry> combined(annotations.entries());
    combined.reserve(combined.size() + n * r * k);
    for (std::size_t c = 0; c < k; ++c) {
        BinaryTaskView task = restrict(annotations, c);
        for (std::size_t j = 0; j < r; ++j) {
            const auto& seen = annotations.samples_of_expert(j);
            std::vector<std::size_t> unseen;
            unseen.reserve(n - seen.size());
            std::size_t cursor = 0;
            for (std::size_t i = 0; i < n; ++i) {
                while (cursor < seen.size() && seen[cursor] < i) ++cursor;
                if (cursor < seen.size() && seen[cursor] == i) continue;
                unseen.push_back(i);
            }
            if (unseen.empty()) continue; // expert annotated everything; twin stays silent
            TrainedClassifier model = detail::fit_expert_class_model(dataset, task, j, config);
            Matrix x = dataset.features.take_rows(unseen);
            std::vector<double> pred = predict_proba(model, x);
            for (std::size_t t = 0; t < unseen.size(); ++t)
                combined.push_back({unseen[t], r + j, c, pred[t]});
        }
    }
    return build_annotation_set(std::move(combined), n, 2 * r, k);
}

// EM over the 2R combined annotators. Reliability rows 0..R-1 are the human
// experts, rows R..2R-1 their twins.
inline ConsensusOutput simulated_consensus(const Dataset& dataset, const AnnotationSet& annotations,
                                           const MetaConfig& config = {}) {
    return run_em(simulated_annotation_set(dataset, annotations, config), config.em_config);
}

} // namespace labelfuse
