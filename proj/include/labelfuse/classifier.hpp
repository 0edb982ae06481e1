#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"

namespace labelfuse {

enum class ClassifierKind { logistic_regression, dummy_prior };

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::logistic_regression;
    std::size_t max_iterations = 500;
    double learning_rate = 0.1;
    double l2_penalty = 1e-4;
    double convergence_tolerance = 1e-6;
};

inline void validate_classifier_spec(const ClassifierSpec& s) {
    if (s.max_iterations < 1) throw ValueOutOfRange("classifier: max_iterations must be >= 1");
    if (!(s.learning_rate > 0.0)) throw ValueOutOfRange("classifier: learning_rate must be > 0");
    if (s.l2_penalty < 0.0) throw ValueOutOfRange("classifier: l2_penalty must be >= 0");
}

// kind describes the fitted form: a degenerate logistic fit falls back to a
// constant predictor and is stored as dummy_prior.
struct TrainedClassifier {
    ClassifierKind kind = ClassifierKind::dummy_prior;
    std::vector<double> weights; // size D for logistic form
    double intercept = 0.0;
    double constant = 0.5;       // dummy form
    std::size_t n_features = 0;
    std::vector<std::size_t> trained_on; // sample indices of the training call
};

namespace detail {

// Numerically stable binary cross-entropy pieces.
// loss(z, y) = max(z, 0) - y*z + log1p(exp(-|z|)) equals -y log sig(z) - (1-y) log(1-sig(z)).
inline double bce_term(double z, double y) {
    double m = z > 0.0 ? z : 0.0;
    return m - y * z + std::log1p(std::exp(-(z > 0.0 ? z : -z)));
}

} // namespace detail

// Mean BCE plus 0.5 * l2 * |w|^2 (intercept unpenalized).
inline double logistic_loss(const Matrix& features, const std::vector<double>& labels,
                            const std::vector<double>& weights, double intercept,
                            double l2_penalty) {
    if (features.rows() != labels.size()) throw DimensionMismatch("logistic_loss: label count");
    if (features.cols() != weights.size()) throw DimensionMismatch("logistic_loss: weight size");
    const std::size_t n = features.rows();
    if (n == 0) throw EmptyInput("logistic_loss: no rows");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = intercept;
        auto row = features.row(i);
        for (std::size_t d = 0; d < weights.size(); ++d) z += weights[d] * row[d];
        total += detail::bce_term(z, labels[i]);
    }
    double penalty = 0.0;
    for (double w : weights) penalty += w * w;
    return total / static_cast<double>(n) + 0.5 * l2_penalty * penalty;
}

// Analytic gradient of logistic_loss: grad_w = X^T (sig(z) - y) / n + l2 * w,
// grad_b = mean(sig(z) - y). Written to out_w (size D) and out_b.
inline void logistic_gradient(const Matrix& features, const std::vector<double>& labels,
                              const std::vector<double>& weights, double intercept,
                              double l2_penalty, std::vector<double>& out_w, double& out_b) {
    if (features.rows() != labels.size()) throw DimensionMismatch("logistic_gradient: label count");
    if (features.cols() != weights.size()) throw DimensionMismatch("logistic_gradient: weight size");
    const std::size_t n = features.rows();
    if (n == 0) throw EmptyInput("logistic_gradient: no rows");
    out_w.assign(weights.size(), 0.0);
    out_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = intercept;
        auto row = features.row(i);
        for (std::size_t d = 0; d < weights.size(); ++d) z += weights[d] * row[d];
        double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        double g = p - labels[i];
        for (std::size_t d = 0; d < weights.size(); ++d) out_w[d] += g * row[d];
        out_b += g;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t d = 0; d < weights.size(); ++d)
        out_w[d] = out_w[d] * inv_n + l2_penalty * weights[d];
    out_b *= inv_n;
}

// Full-batch gradient descent from zero weights; deterministic. Training sets
// that are single-class or smaller than minimum_training_size get a constant
// predictor at the Laplace-smoothed label mean, (sum(y)+1)/(n+2).
inline TrainedClassifier train_expert_model(const Matrix& features, const std::vector<double>& labels,
                                            const ClassifierSpec& spec,
                                            std::size_t minimum_training_size = 5,
                                            std::vector<std::size_t> trained_on = {}) {
    validate_classifier_spec(spec);
    if (features.rows() != labels.size()) throw DimensionMismatch("train: label count");
    const std::size_t n = features.rows();
    if (n == 0) throw EmptyInput("train: no samples");

    TrainedClassifier model;
    model.n_features = features.cols();
    model.trained_on = std::move(trained_on);

    double label_sum = 0.0;
    bool single_class = true;
    for (std::size_t i = 0; i < n; ++i) {
        label_sum += labels[i];
        if (labels[i] != labels[0]) single_class = false;
    }

    if (spec.kind == ClassifierKind::dummy_prior) {
        model.kind = ClassifierKind::dummy_prior;
        model.constant = label_sum / static_cast<double>(n);
        return model;
    }

    if (single_class || n < minimum_training_size) {
        model.kind = ClassifierKind::dummy_prior;
        model.constant = (label_sum + 1.0) / (static_cast<double>(n) + 2.0);
        return model;
    }

    model.kind = ClassifierKind::logistic_regression;
    model.weights.assign(features.cols(), 0.0);
    model.intercept = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
    // Full-batch descent along -gradient with a doubling/halving step size:
    // a step is accepted only if the penalized loss does not increase, so the
    // loss sequence is non-increasing and the fit is deterministic.
    double rate = spec.learning_rate;
    double loss = logistic_loss(features, labels, model.weights, model.intercept, spec.l2_penalty);
    std::vector<double> cand_w(features.cols());
    for (std::size_t iter = 0; iter < spec.max_iterations; ++iter) {
        logistic_gradient(features, labels, model.weights, model.intercept, spec.l2_penalty,
                          grad_w, grad_b);
        bool accepted = false;
        double cand_b = 0.0, cand_loss = 0.0;
        for (int backoff = 0; backoff < 60; ++backoff) {
            for (std::size_t d = 0; d < cand_w.size(); ++d)
                cand_w[d] = model.weights[d] - rate * grad_w[d];
            cand_b = model.intercept - rate * grad_b;
            cand_loss = logistic_loss(features, labels, cand_w, cand_b, spec.l2_penalty);
            if (cand_loss <= loss) {
                accepted = true;
                break;
            }
            rate *= 0.5;
        }
        if (!accepted) break; // no descent direction step helps: local minimum
        double max_step = std::abs(rate * grad_b);
        for (std::size_t d = 0; d < cand_w.size(); ++d)
            max_step = std::max(max_step, std::abs(rate * grad_w[d]));
        model.weights.swap(cand_w);
        model.intercept = cand_b;
        loss = cand_loss;
        if (rate < 1e12) rate *= 2.0;
        if (max_step < spec.convergence_tolerance) break;
    }
    for (double w : model.weights)
        if (!std::isfinite(w)) throw NumericalError("train: non-finite weight");
    if (!std::isfinite(model.intercept)) throw NumericalError("train: non-finite intercept");
    return model;
}

// Positive-class probabilities, clamped away from exact 0 and 1.
inline std::vector<double> predict_proba(const TrainedClassifier& model, const Matrix& features) {
    static constexpr double lo = 1e-9, hi = 1.0 - 1e-9;
    std::vector<double> out(features.rows());
    if (model.kind == ClassifierKind::dummy_prior) {
        double p = model.constant;
        if (p < lo) p = lo;
        if (p > hi) p = hi;
        for (auto& v : out) v = p;
        return out;
    }
    if (features.cols() != model.weights.size()) throw DimensionMismatch("predict: feature width");
    for (std::size_t i = 0; i < features.rows(); ++i) {
        double z = model.intercept;
        auto row = features.row(i);
        for (std::size_t d = 0; d < model.weights.size(); ++d) z += model.weights[d] * row[d];
        double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        if (p < lo) p = lo;
        if (p > hi) p = hi;
        out[i] = p;
    }
    return out;
}

} // namespace labelfuse
