#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"

namespace labelfuse {

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
    Matrix features;                                    // N x D, min-max scaled
    std::optional<std::vector<std::size_t>> true_labels; // class indices, size N
    std::size_t n_classes = 0;                          // K
    std::vector<std::string> sample_ids;                // size N
    std::vector<std::string> label_names;               // index -> original label text
};

inline void validate_dataset(const Dataset& d) {
    const std::size_t n = d.features.rows();
    if (n < 1) throw EmptyInput("dataset: no samples");
    if (d.n_classes < 2) throw ValueOutOfRange("dataset: need at least 2 classes");
    if (d.sample_ids.size() != n) throw DimensionMismatch("dataset: sample_ids size");
    for (double v : d.features.flat()) {
        if (!std::isfinite(v)) throw ValueOutOfRange("dataset: non-finite feature");
        if (v < 0.0 || v > 1.0) throw ValueOutOfRange("dataset: feature outside [0,1]");
    }
    if (d.true_labels) {
        if (d.true_labels->size() != n) throw DimensionMismatch("dataset: labels size");
        for (std::size_t y : *d.true_labels)
            if (y >= d.n_classes) throw IndexOutOfBounds("dataset: label >= n_classes");
    }
}

// ---------------------------------------------------------------------------
// Annotations

struct AnnotationEntry {
    std::size_t sample = 0;
    std::size_t expert = 0;
    std::size_t class_id = 0;
    double value = 0.0; // in [0,1]; hard labels are exactly 0 or 1

    friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

// Sparse expert x sample x class assignments plus the index structures the
// algorithms consume: S^j (samples seen by expert j) and E_i (experts who
// saw sample i), both at the (sample, expert) pair level.
class AnnotationSet {
public:
    AnnotationSet() = default;

    std::size_t n_samples() const { return n_samples_; }
    std::size_t n_experts() const { return n_experts_; }
    std::size_t n_classes() const { return n_classes_; }
    bool soft() const { return soft_; }

    // Entries sorted by (sample, expert, class); unique per triple.
    const std::vector<AnnotationEntry>& entries() const { return entries_; }

    // S^j: sorted sample indices annotated by expert j (any class).
    const std::vector<std::size_t>& samples_of_expert(std::size_t j) const {
        if (j >= n_experts_) throw IndexOutOfBounds("samples_of_expert");
        return by_expert_[j];
    }
    // E_i: sorted expert indices that annotated sample i (any class).
    const std::vector<std::size_t>& experts_of_sample(std::size_t i) const {
        if (i >= n_samples_) throw IndexOutOfBounds("experts_of_sample");
        return by_sample_[i];
    }

    friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;

    friend AnnotationSet build_annotation_set(std::vector<AnnotationEntry> records,
                                              std::size_t n_samples, std::size_t n_experts,
                                              std::size_t n_classes);

private:
    std::vector<AnnotationEntry> entries_;
    std::size_t n_samples_ = 0;
    std::size_t n_experts_ = 0;
    std::size_t n_classes_ = 0;
    bool soft_ = false;
    std::vector<std::vector<std::size_t>> by_expert_; // S^j
    std::vector<std::vector<std::size_t>> by_sample_; // E_i
};

inline AnnotationSet build_annotation_set(std::vector<AnnotationEntry> records,
                                          std::size_t n_samples, std::size_t n_experts,
                                          std::size_t n_classes) {
    for (const auto& r : records) {
        if (r.sample >= n_samples) throw IndexOutOfBounds("annotation: sample index");
        if (r.expert >= n_experts) throw IndexOutOfBounds("annotation: expert index");
        if (r.class_id >= n_classes) throw IndexOutOfBounds("annotation: class index");
        if (!(r.value >= 0.0 && r.value <= 1.0))
            throw ValueOutOfRange("annotation: value outside [0,1]");
    }
    std::sort(records.begin(), records.end(), [](const AnnotationEntry& a, const AnnotationEntry& b) {
        if (a.sample != b.sample) return a.sample < b.sample;
        if (a.expert != b.expert) return a.expert < b.expert;
        return a.class_id < b.class_id;
    });
    for (std::size_t k = 1; k < records.size(); ++k) {
        const auto& p = records[k - 1];
        const auto& q = records[k];
        if (p.sample == q.sample && p.expert == q.expert && p.class_id == q.class_id)
            throw DuplicateEntry("annotation: repeated (sample, expert, class)");
    }

    AnnotationSet set;
    set.n_samples_ = n_samples;
    set.n_experts_ = n_experts;
    set.n_classes_ = n_classes;
    set.soft_ = false;
    for (const auto& r : records)
        if (r.value != 0.0 && r.value != 1.0) { set.soft_ = true; break; }

    set.by_expert_.assign(n_experts, {});
    set.by_sample_.assign(n_samples, {});
    std::size_t prev_sample = 0, prev_expert = 0;
    bool have_prev = false;
    for (const auto& r : records) {
        if (!have_prev || r.sample != prev_sample || r.expert != prev_expert) {
            set.by_expert_[r.expert].push_back(r.sample);
            set.by_sample_[r.sample].push_back(r.expert);
            prev_sample = r.sample;
            prev_expert = r.expert;
            have_prev = true;
        }
    }
    for (auto& v : set.by_expert_) std::sort(v.begin(), v.end());
    // by_sample_ lists are already sorted: entries are sorted by (sample, expert).

    set.entries_ = std::move(records);
    return set;
}

// ---------------------------------------------------------------------------
// Per-class binary view

// All entries of one class, indexed both ways for the EM inner loops.
struct BinaryTaskView {
    std::size_t n_samples = 0;
    std::size_t n_experts = 0;
    std::size_t class_id = 0;
    std::size_t entry_count = 0;
    // by_sample[i]: (expert, value) pairs for this class, expert-sorted.
    std::vector<std::vector<std::pair<std::size_t, double>>> by_sample;
    // by_expert[j]: (sample, value) pairs for this class, sample-sorted.
    std::vector<std::vector<std::pair<std::size_t, double>>> by_expert;
};

inline BinaryTaskView restrict(const AnnotationSet& annotations, std::size_t class_id) {
    if (class_id >= annotations.n_classes()) throw IndexOutOfBounds("restrict: class index");
    BinaryTaskView view;
    view.n_samples = annotations.n_samples();
    view.n_experts = annotations.n_experts();
    view.class_id = class_id;
    view.by_sample.assign(view.n_samples, {});
    view.by_expert.assign(view.n_experts, {});
    for (const auto& e : annotations.entries()) {
        if (e.class_id != class_id) continue;
        view.by_sample[e.sample].emplace_back(e.expert, e.value);
        view.by_expert[e.expert].emplace_back(e.sample, e.value);
        ++view.entry_count;
    }
    return view;
}

// ---------------------------------------------------------------------------
// One-hot expansion

inline Matrix one_hot_expand(const std::vector<std::size_t>& labels, std::size_t n_classes) {
    Matrix out(labels.size(), n_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_classes) throw IndexOutOfBounds("one_hot_expand: label >= K");
        out(i, labels[i]) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Consensus results

struct ExpertReliability {
    Matrix alpha; // R x K sensitivities
    Matrix beta;  // R x K specificities
};

struct ClassDiagnostics {
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> log_likelihood_trace;
};

struct ConsensusOutput {
    Matrix posterior;                           // N x K, mu_{i,c}
    std::optional<ExpertReliability> reliability; // absent for majority voting
    std::vector<ClassDiagnostics> per_class;     // size K
};

} // namespace labelfuse
