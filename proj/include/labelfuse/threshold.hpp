#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"

namespace labelfuse {

enum class ThresholdMethod { default_cutoff, gt_prior, model_posterior };

// Whether hard labels are assigned per class independently or as a single
// winning class per sample; fixes which default cut-off applies.
enum class LabelRule { multi_label, single_label };

struct ThresholdVector {
    std::vector<double> t;
    ThresholdMethod method = ThresholdMethod::default_cutoff;
};

// 0.5 per class for independent per-class decisions, 1/K when one class is
// chosen per sample.
inline ThresholdVector default_thresholds(std::size_t n_classes, LabelRule rule) {
    if (n_classes < 2) throw ValueOutOfRange("default_thresholds: need K >= 2");
    double t = rule == LabelRule::multi_label ? 0.5 : 1.0 / static_cast<double>(n_classes);
    return {std::vector<double>(n_classes, t), ThresholdMethod::default_cutoff};
}

// t_c = empirical class frequency in the pool's true labels.
inline ThresholdVector gt_prior_thresholds(const std::vector<std::size_t>& true_labels,
                                           std::size_t n_classes) {
    if (true_labels.empty()) throw EmptyInput("gt_prior_thresholds: no labels");
    std::vector<double> counts(n_classes, 0.0);
    for (std::size_t y : true_labels) {
        if (y >= n_classes) throw IndexOutOfBounds("gt_prior_thresholds: label >= K");
        counts[y] += 1.0;
    }
    for (double& c : counts) c /= static_cast<double>(true_labels.size());
    return {std::move(counts), ThresholdMethod::gt_prior};
}

// t_c = mean predicted probability of class c over the whole pool.
inline ThresholdVector model_posterior_thresholds(const Matrix& pool_predictions) {
    if (pool_predictions.rows() == 0) throw EmptyInput("model_posterior_thresholds: no rows");
    std::vector<double> t(pool_predictions.cols());
    for (std::size_t c = 0; c < pool_predictions.cols(); ++c)
        t[c] = pool_predictions.column_mean(c);
    return {std::move(t), ThresholdMethod::model_posterior};
}

// Entry (i, c) = 1 iff prediction >= t_c (boundary inclusive).
inline Matrix assign_multilabel(const Matrix& predictions, const ThresholdVector& thresholds) {
    if (predictions.cols() != thresholds.t.size())
        throw DimensionMismatch("assign_multilabel: threshold width");
    Matrix out(predictions.rows(), predictions.cols());
    for (std::size_t i = 0; i < predictions.rows(); ++i)
        for (std::size_t c = 0; c < predictions.cols(); ++c)
            out(i, c) = predictions(i, c) >= thresholds.t[c] ? 1.0 : 0.0;
    return out;
}

// argmax_c (prediction - t_c); ties break toward the lowest class index.
inline std::vector<std::size_t> assign_single_label(const Matrix& predictions,
                                                    const ThresholdVector& thresholds) {
    if (predictions.cols() != thresholds.t.size())
        throw DimensionMismatch("assign_single_label: threshold width");
    if (predictions.cols() == 0) throw EmptyInput("assign_single_label: no classes");
    std::vector<std::size_t> out(predictions.rows());
    for (std::size_t i = 0; i < predictions.rows(); ++i) {
        std::size_t best = 0;
        double best_gap = predictions(i, 0) - thresholds.t[0];
        for (std::size_t c = 1; c < predictions.cols(); ++c) {
            double gap = predictions(i, c) - thresholds.t[c];
            if (gap > best_gap) {
                best_gap = gap;
                best = c;
            }
        }
        out[i] = best;
    }
    return out;
}

inline std::string threshold_method_name(ThresholdMethod m) {
    switch (m) {
        case ThresholdMethod::default_cutoff: return "default";
        case ThresholdMethod::gt_prior: return "gt_prior";
        case ThresholdMethod::model_posterior: return "model_posterior";
    }
    throw ValueOutOfRange("threshold_method_name: unknown method");
}

} // namespace labelfuse
