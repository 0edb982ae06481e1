#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/errors.hpp"

namespace labelfuse {

struct EmConfig {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;     // on mean absolute change of mu
    double epsilon_clamp = 1e-6; // reliability/prior clamp to [eps, 1-eps]
    // Prior mode: empty -> dummy prior re-estimated as mean(mu) each M-step;
    // set -> that fixed scalar prior.
    std::optional<double> fixed_prior;
};

inline void validate_em_config(const EmConfig& c) {
    if (c.max_iterations < 1) throw ValueOutOfRange("em: max_iterations must be >= 1");
    if (!(c.tolerance > 0.0)) throw ValueOutOfRange("em: tolerance must be > 0");
    if (!(c.epsilon_clamp > 0.0 && c.epsilon_clamp < 0.5))
        throw ValueOutOfRange("em: epsilon_clamp must be in (0, 0.5)");
    if (c.fixed_prior && !(*c.fixed_prior > 0.0 && *c.fixed_prior < 1.0))
        throw ValueOutOfRange("em: fixed prior must be in (0, 1)");
}

// Parameter set for one binary task; prior is stored per sample (constant
// under the dummy prior, but the representation admits per-sample priors).
struct EmState {
    std::vector<double> mu;    // size N
    std::vector<double> alpha; // size R
    std::vector<double> beta;  // size R
    std::vector<double> prior; // size N
};

inline double clamp_unit(double v, double eps) {
    if (v < eps) return eps;
    if (v > 1.0 - eps) return 1.0 - eps;
    return v;
}

// mu0_i = mean vote when annotated, 0.5 otherwise.
inline std::vector<double> majority_init(const BinaryTaskView& task) {
    std::vector<double> mu(task.n_samples, 0.5);
    for (std::size_t i = 0; i < task.n_samples; ++i) {
        const auto& votes = task.by_sample[i];
        if (votes.empty()) continue;
        double s = 0.0;
        for (const auto& [expert, value] : votes) s += value;
        mu[i] = s / static_cast<double>(votes.size());
    }
    return mu;
}

namespace detail {

// log a_i and log b_i: annotation likelihoods under y=1 and y=0.
// Soft values act as fractional exponents (log-linear pooling).
inline void log_evidence(const BinaryTaskView& task, const std::vector<double>& alpha,
                         const std::vector<double>& beta, std::size_t i,
                         double& log_a, double& log_b) {
    log_a = 0.0;
    log_b = 0.0;
    for (const auto& [j, y] : task.by_sample[i]) {
        log_a += y * std::log(alpha[j]) + (1.0 - y) * std::log1p(-alpha[j]);
        log_b += (1.0 - y) * std::log(beta[j]) + y * std::log1p(-beta[j]);
    }
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace detail

// Posterior of the positive class given annotations and a shared scalar prior.
inline std::vector<double> e_step(const BinaryTaskView& task, const std::vector<double>& alpha,
                                  const std::vector<double>& beta, double prior) {
    if (alpha.size() != task.n_experts || beta.size() != task.n_experts)
        throw DimensionMismatch("e_step: reliability vector size");
    if (!(prior > 0.0 && prior < 1.0)) throw ValueOutOfRange("e_step: prior outside (0,1)");
    std::vector<double> mu(task.n_samples);
    const double log_odds_prior = std::log(prior) - std::log1p(-prior);
    for (std::size_t i = 0; i < task.n_samples; ++i) {
        if (task.by_sample[i].empty()) {
            mu[i] = prior; // no evidence
            continue;
        }
        double log_a, log_b;
        detail::log_evidence(task, alpha, beta, i, log_a, log_b);
        double z = log_a - log_b + log_odds_prior;
        if (!std::isfinite(z)) throw NumericalError("e_step: non-finite log evidence");
        mu[i] = detail::sigmoid(z);
    }
    return mu;
}

struct MStepResult {
    std::vector<double> alpha;
    std::vector<double> beta;
    double prior = 0.5; // mean(mu), clamped
};

// Weighted agreement rates per expert; 0.5 fallback when an expert has no
// effective mass, then clamping.
inline MStepResult m_step(const BinaryTaskView& task, const std::vector<double>& mu,
                          double epsilon_clamp = 1e-6) {
    if (mu.size() != task.n_samples) throw DimensionMismatch("m_step: mu size");
    MStepResult out;
    out.alpha.resize(task.n_experts);
    out.beta.resize(task.n_experts);
    for (std::size_t j = 0; j < task.n_experts; ++j) {
        double num_a = 0.0, den_a = 0.0, num_b = 0.0, den_b = 0.0;
        for (const auto& [i, y] : task.by_expert[j]) {
            num_a += mu[i] * y;
            den_a += mu[i];
            num_b += (1.0 - mu[i]) * (1.0 - y);
            den_b += 1.0 - mu[i];
        }
        double a = den_a > 0.0 ? num_a / den_a : 0.5;
        double b = den_b > 0.0 ? num_b / den_b : 0.5;
        out.alpha[j] = clamp_unit(a, epsilon_clamp);
        out.beta[j] = clamp_unit(b, epsilon_clamp);
    }
    double s = 0.0;
    for (double v : mu) s += v;
    double prior = task.n_samples > 0 ? s / static_cast<double>(task.n_samples) : 0.5;
    out.prior = clamp_unit(prior, epsilon_clamp);
    return out;
}

// sum_i log(a_i p_i + b_i (1 - p_i)). Samples without annotations carry a
// constant evidence factor of 1/2 (an unseen coin), so each contributes
// log(1/2) regardless of the prior; this keeps the trace comparable across
// iterations and leaves the ascent property intact.
inline double observed_log_likelihood(const BinaryTaskView& task, const EmState& state) {
    if (state.prior.size() != task.n_samples) throw DimensionMismatch("log_likelihood: prior size");
    if (state.alpha.size() != task.n_experts || state.beta.size() != task.n_experts)
        throw DimensionMismatch("log_likelihood: reliability size");
    static const double log_half = std::log(0.5);
    double total = 0.0;
    for (std::size_t i = 0; i < task.n_samples; ++i) {
        if (task.by_sample[i].empty()) {
            total += log_half;
            continue;
        }
        double p = state.prior[i];
        double log_a, log_b;
        detail::log_evidence(task, state.alpha, state.beta, i, log_a, log_b);
        double u = log_a + std::log(p);
        double v = log_b + std::log1p(-p);
        double m = u > v ? u : v;
        total += m + std::log(std::exp(u - m) + std::exp(v - m));
    }
    if (!std::isfinite(total)) throw NumericalError("log_likelihood: non-finite result");
    return total;
}

struct BinaryEmResult {
    EmState state;
    ClassDiagnostics diagnostics;
};

// One binary task: majority init, then alternate M and E steps until the mean
// absolute change of mu drops below tolerance or the iteration cap is hit.
// The likelihood trace records the objective after each M-step.
inline BinaryEmResult run_em_binary(const BinaryTaskView& task, const EmConfig& config) {
    validate_em_config(config);
    BinaryEmResult res;
    EmState& st = res.state;
    st.mu = majority_init(task);
    st.alpha.assign(task.n_experts, 0.5);
    st.beta.assign(task.n_experts, 0.5);
    st.prior.assign(task.n_samples, config.fixed_prior ? *config.fixed_prior : 0.5);

    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        MStepResult m = m_step(task, st.mu, config.epsilon_clamp);
        st.alpha = std::move(m.alpha);
        st.beta = std::move(m.beta);
        double prior = config.fixed_prior ? *config.fixed_prior : m.prior;
        st.prior.assign(task.n_samples, prior);
        res.diagnostics.log_likelihood_trace.push_back(observed_log_likelihood(task, st));

        std::vector<double> mu_next = e_step(task, st.alpha, st.beta, prior);
        double delta = 0.0;
        for (std::size_t i = 0; i < task.n_samples; ++i) delta += std::abs(mu_next[i] - st.mu[i]);
        if (task.n_samples > 0) delta /= static_cast<double>(task.n_samples);
        st.mu = std::move(mu_next);
        res.diagnostics.iterations = iter + 1;
        if (delta < config.tolerance) {
            res.diagnostics.converged = true;
            break;
        }
    }
    return res;
}

// One-vs-rest EM over every class; posteriors are reported per class as-is,
// never renormalized across classes.
inline ConsensusOutput run_em(const AnnotationSet& annotations, const EmConfig& config = {}) {
    if (annotations.entries().empty()) throw EmptyAnnotations("run_em: no annotations");
    const std::size_t n = annotations.n_samples();
    const std::size_t r = annotations.n_experts();
    const std::size_t k = annotations.n_classes();
    ConsensusOutput out;
    out.posterior = Matrix(n, k);
    out.reliability = ExpertReliability{Matrix(r, k), Matrix(r, k)};
    out.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        BinaryTaskView task = restrict(annotations, c);
        BinaryEmResult res = run_em_binary(task, config);
        for (std::size_t i = 0; i < n; ++i) out.posterior(i, c) = res.state.mu[i];
        for (std::size_t j = 0; j < r; ++j) {
            out.reliability->alpha(j, c) = res.state.alpha[j];
            out.reliability->beta(j, c) = res.state.beta[j];
        }
        out.per_class[c] = std::move(res.diagnostics);
    }
    return out;
}

} // namespace labelfuse
