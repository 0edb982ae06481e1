#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "labelfuse/classifier.hpp"
#include "labelfuse/core.hpp"
#include "labelfuse/csv.hpp"
#include "labelfuse/em.hpp"
#include "labelfuse/errors.hpp"
#include "labelfuse/meta.hpp"
#include "labelfuse/metrics.hpp"
#include "labelfuse/rng.hpp"
#include "labelfuse/simulate.hpp"
#include "labelfuse/threshold.hpp"

namespace labelfuse {

// ---------------------------------------------------------------------------
// Configuration

enum class ConsensusMethod { majority_voting, em, inferred, simulated };

inline std::string method_name(ConsensusMethod m) {
    switch (m) {
        case ConsensusMethod::majority_voting: return "majority_voting";
        case ConsensusMethod::em: return "em";
        case ConsensusMethod::inferred: return "inferred";
        case ConsensusMethod::simulated: return "simulated";
    }
    throw ValueOutOfRange("method_name: unknown method");
}

inline ConsensusMethod parse_method(const std::string& name) {
    if (name == "majority_voting") return ConsensusMethod::majority_voting;
    if (name == "em") return ConsensusMethod::em;
    if (name == "inferred") return ConsensusMethod::inferred;
    if (name == "simulated") return ConsensusMethod::simulated;
    throw ConfigError("unknown consensus method: " + name);
}

inline ThresholdMethod parse_cutoff(const std::string& name) {
    if (name == "default") return ThresholdMethod::default_cutoff;
    if (name == "gt_prior") return ThresholdMethod::gt_prior;
    if (name == "model_posterior") return ThresholdMethod::model_posterior;
    throw ConfigError("unknown cutoff: " + name);
}

struct PresplitPaths {
    std::string train_path;
    std::string test_path;
};

struct ExperimentConfig {
    std::string dataset_path;
    std::string label_column_name = "label";
    double stratified_fraction = 0.4;          // test share, used unless presplit is set
    std::optional<PresplitPaths> presplit;
    SimConfig sim;
    std::vector<ConsensusMethod> methods{ConsensusMethod::majority_voting, ConsensusMethod::em,
                                         ConsensusMethod::inferred, ConsensusMethod::simulated};
    std::vector<ThresholdMethod> cutoffs{ThresholdMethod::default_cutoff, ThresholdMethod::gt_prior,
                                         ThresholdMethod::model_posterior};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    ClassifierSpec classifier_spec;
    EmConfig em_config;
    std::size_t minimum_training_size = 5;
    std::string output_dir = "out";
};

inline void validate_experiment_config(const ExperimentConfig& c) {
    if (c.methods.empty()) throw ConfigError("config: need at least one method");
    if (c.cutoffs.empty()) throw ConfigError("config: need at least one cutoff");
    if (c.seeds.empty()) throw ConfigError("config: need at least one seed");
    if (!c.presplit && !(c.stratified_fraction > 0.0 && c.stratified_fraction < 1.0))
        throw ConfigError("config: stratified fraction must be in (0, 1)");
    if (!c.presplit && c.dataset_path.empty()) throw ConfigError("config: dataset_path missing");
    try {
        validate_sim_config(c.sim);
        validate_classifier_spec(c.classifier_spec);
        validate_em_config(c.em_config);
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stratified split

// Per-class test counts are round(fraction * class count); assignment inside a
// class is a seeded shuffle; both halves keep the original row order.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction,
                                                    std::uint64_t seed) {
    if (!dataset.true_labels) throw EmptyInput("stratified_split: labels required");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValueOutOfRange("stratified_split: fraction outside (0,1)");
    const auto& labels = *dataset.true_labels;
    const std::size_t k = dataset.n_classes;
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (std::size_t c = 0; c < k; ++c)
        if (by_class[c].size() < 2)
            throw ClassTooSmall("stratified_split: class " + std::to_string(c) +
                                " has fewer than 2 samples");

    std::vector<bool> in_test(labels.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
        Rng rng(derive_seed(seed, c));
        std::vector<std::size_t> idx = by_class[c];
        rng.shuffle(idx);
        auto take = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(idx.size())));
        for (std::size_t t = 0; t < take; ++t) in_test[idx[t]] = true;
    }

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (in_test[i] ? test_rows : train_rows).push_back(i);

    auto subset = [&](const std::vector<std::size_t>& rows) {
        Dataset d;
        d.features = dataset.features.take_rows(rows);
        d.n_classes = dataset.n_classes;
        d.label_names = dataset.label_names;
        std::vector<std::size_t> y(rows.size());
        d.sample_ids.resize(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            y[t] = labels[rows[t]];
            d.sample_ids[t] = dataset.sample_ids[rows[t]];
        }
        d.true_labels = std::move(y);
        return d;
    };
    return {subset(train_rows), subset(test_rows)};
}

// ---------------------------------------------------------------------------
// Report structures

struct MetricCell {
    std::optional<double> value;
    std::string error; // non-empty when the cell failed

    friend bool operator==(const MetricCell&, const MetricCell&) = default;
};

struct MethodRunReport {
    std::string error; // non-empty when the whole method failed for this seed
    std::map<std::string, MetricCell> metrics;
    std::map<std::string, std::vector<double>> thresholds_train;
    std::map<std::string, std::vector<double>> thresholds_test;
    std::vector<std::size_t> iterations; // per class; empty when not applicable
    std::vector<bool> converged;

    friend bool operator==(const MethodRunReport&, const MethodRunReport&) = default;
};

struct SeedRunReport {
    std::uint64_t seed = 0;
    std::map<std::string, MethodRunReport> methods;

    friend bool operator==(const SeedRunReport&, const SeedRunReport&) = default;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct DatasetSummary {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_classes = 0;
    std::vector<std::string> label_names;

    friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

// Per-(seed, method) outputs that land in their own CSV files.
struct MethodArtifacts {
    std::uint64_t seed = 0;
    std::string method;
    Matrix posterior;                     // consensus posterior over the train pool
    std::vector<std::string> sample_ids;  // train pool ids
    // cutoff name -> (row indices, hard labels for those rows)
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> labels;
};

struct ExperimentReport {
    DatasetSummary dataset;
    std::vector<SeedRunReport> runs;
    std::map<std::string, std::map<std::string, Aggregate>> aggregates; // method -> key -> agg
    std::map<std::string, std::map<std::string, MetricCell>> wilcoxon;  // key -> "A>B" -> p
    std::vector<std::string> failures; // flat human-readable list
    std::vector<MethodArtifacts> artifacts; // not serialized into report.json

    bool any_failures() const { return !failures.empty(); }
};

// ---------------------------------------------------------------------------
// Experiment pipeline

namespace detail {

inline std::vector<std::size_t> annotated_rows(const AnnotationSet& annotations) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < annotations.n_samples(); ++i)
        if (!annotations.experts_of_sample(i).empty()) rows.push_back(i);
    return rows;
}

inline ConsensusOutput run_method(ConsensusMethod method, const Dataset& train,
                                  const AnnotationSet& annotations, const MetaConfig& meta) {
    switch (method) {
        case ConsensusMethod::majority_voting: return majority_voting(annotations);
        case ConsensusMethod::em: return run_em(annotations, meta.em_config);
        case ConsensusMethod::inferred: return inferred_consensus(train, annotations, meta);
        case ConsensusMethod::simulated: return simulated_consensus(train, annotations, meta);
    }
    throw ValueOutOfRange("run_method: unknown method");
}

inline ThresholdVector train_pool_thresholds(ThresholdMethod cutoff, const Dataset& train,
                                             const Matrix& pool_predictions) {
    switch (cutoff) {
        case ThresholdMethod::default_cutoff:
            return default_thresholds(train.n_classes, LabelRule::single_label);
        case ThresholdMethod::gt_prior:
            return gt_prior_thresholds(*train.true_labels, train.n_classes);
        case ThresholdMethod::model_posterior:
            return model_posterior_thresholds(pool_predictions);
    }
    throw ValueOutOfRange("train_pool_thresholds: unknown cutoff");
}

template <typename F>
inline void guarded_cell(MethodRunReport& run, std::vector<std::string>& failures,
                         const std::string& context, const std::string& key, F&& compute) {
    MetricCell cell;
    try {
        cell.value = compute();
    } catch (const std::exception& e) {
        cell.error = e.what();
        failures.push_back(context + " " + key + ": " + e.what());
    }
    run.metrics[key] = std::move(cell);
}

// Hidden sensitivities/specificities as R x K matrices.
inline void profile_matrices(const std::vector<ExpertProfile>& profiles, std::size_t n_classes,
                             Matrix& alpha, Matrix& beta) {
    alpha = Matrix(profiles.size(), n_classes);
    beta = Matrix(profiles.size(), n_classes);
    for (std::size_t j = 0; j < profiles.size(); ++j)
        for (std::size_t c = 0; c < n_classes; ++c) {
            alpha(j, c) = profiles[j].hidden_alpha[c];
            beta(j, c) = profiles[j].hidden_beta[c];
        }
}

inline Matrix take_matrix_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    return m.take_rows(rows);
}

} // namespace detail

// One seed, one method: consensus, thresholds, hard labels, downstream models,
// and the three metric groups.
inline void run_seed_method(const ExperimentConfig& config, const Dataset& train,
                            const Dataset& test, const AnnotationSet& annotations,
                            const std::vector<ExpertProfile>& profiles,
                            const std::vector<std::size_t>& annotated, ConsensusMethod method,
                            std::uint64_t seed, MethodRunReport& run, MethodArtifacts& artifacts,
                            std::vector<std::string>& failures) {
    const std::string context = "seed " + std::to_string(seed) + " method " + method_name(method);
    const std::size_t k = train.n_classes;
    MetaConfig meta{config.classifier_spec, config.em_config, config.minimum_training_size};

    ConsensusOutput consensus;
    try {
        consensus = detail::run_method(method, train, annotations, meta);
    } catch (const std::exception& e) {
        run.error = e.what();
        failures.push_back(context + ": " + e.what());
        return;
    }
    artifacts.posterior = consensus.posterior;
    artifacts.sample_ids = train.sample_ids;
    for (const auto& d : consensus.per_class) {
        run.iterations.push_back(d.iterations);
        run.converged.push_back(d.converged);
    }

    const auto& true_train = *train.true_labels;
    std::vector<std::size_t> true_annotated(annotated.size());
    for (std::size_t t = 0; t < annotated.size(); ++t) true_annotated[t] = true_train[annotated[t]];

    // Group 1: annotation quality on samples with at least one annotation.
    detail::guarded_cell(run, failures, context, "annotation_quality.auc_macro", [&] {
        Matrix sub = detail::take_matrix_rows(consensus.posterior, annotated);
        return roc_auc_macro(sub, true_annotated);
    });

    for (ThresholdMethod cutoff : config.cutoffs) {
        const std::string cname = threshold_method_name(cutoff);
        ThresholdVector tv;
        try {
            tv = detail::train_pool_thresholds(cutoff, train, consensus.posterior);
        } catch (const std::exception& e) {
            run.metrics["annotation_quality.bac." + cname] = {std::nullopt, e.what()};
            failures.push_back(context + " thresholds " + cname + ": " + e.what());
            continue;
        }
        run.thresholds_train[cname] = tv.t;
        std::vector<std::size_t> hard = assign_single_label(consensus.posterior, tv);

        std::vector<std::size_t> rows =
            method == ConsensusMethod::majority_voting
                ? annotated
                : [&] {
                      std::vector<std::size_t> all(train.features.rows());
                      std::iota(all.begin(), all.end(), std::size_t{0});
                      return all;
                  }();
        std::vector<std::size_t> row_labels(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) row_labels[t] = hard[rows[t]];
        artifacts.labels[cname] = {rows, row_labels};

        detail::guarded_cell(run, failures, context, "annotation_quality.bac." + cname, [&] {
            std::vector<std::size_t> pred(annotated.size());
            for (std::size_t t = 0; t < annotated.size(); ++t) pred[t] = hard[annotated[t]];
            return balanced_accuracy(pred, true_annotated, k);
        });
    }

    // Group 2: expert reliability estimation (human rows only).
    if (consensus.reliability) {
        Matrix hidden_alpha, hidden_beta;
        detail::profile_matrices(profiles, k, hidden_alpha, hidden_beta);
        const std::size_t r = profiles.size();
        std::vector<std::size_t> human_rows(r);
        std::iota(human_rows.begin(), human_rows.end(), std::size_t{0});
        Matrix est_alpha = consensus.reliability->alpha.take_rows(human_rows);
        Matrix est_beta = consensus.reliability->beta.take_rows(human_rows);

        detail::guarded_cell(run, failures, context, "expert_estimation.reliability_mae",
                             [&] { return reliability_mae(est_alpha, hidden_alpha); });
        detail::guarded_cell(run, failures, context, "expert_estimation.specificity_mae",
                             [&] { return reliability_mae(est_beta, hidden_beta); });
        detail::guarded_cell(run, failures, context, "expert_estimation.pearson",
                             [&] { return pearson(est_alpha.flat(), hidden_alpha.flat()); });
        detail::guarded_cell(run, failures, context, "expert_estimation.spearman",
                             [&] { return spearman(est_alpha.flat(), hidden_alpha.flat()); });
    }

    // Group 3: downstream model trained on cut-off labels, evaluated on test.
    for (ThresholdMethod cutoff : config.cutoffs) {
        const std::string cname = threshold_method_name(cutoff);
        auto labels_it = artifacts.labels.find(cname);
        if (labels_it == artifacts.labels.end()) continue; // threshold stage already failed
        const auto& [rows, row_labels] = labels_it->second;

        detail::guarded_cell(run, failures, context, "downstream.bac." + cname, [&] {
            Matrix x_train = detail::take_matrix_rows(train.features, rows);
            Matrix test_pred(test.features.rows(), k);
            Matrix pool_pred(train.features.rows(), k);
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<double> binary(rows.size());
                for (std::size_t t = 0; t < rows.size(); ++t)
                    binary[t] = row_labels[t] == c ? 1.0 : 0.0;
                TrainedClassifier model = train_expert_model(
                    x_train, binary, config.classifier_spec, config.minimum_training_size);
                std::vector<double> pt = predict_proba(model, test.features);
                std::vector<double> pp = predict_proba(model, train.features);
                for (std::size_t i = 0; i < pt.size(); ++i) test_pred(i, c) = pt[i];
                for (std::size_t i = 0; i < pp.size(); ++i) pool_pred(i, c) = pp[i];
            }
            ThresholdVector tv_test;
            switch (cutoff) {
                case ThresholdMethod::default_cutoff:
                    tv_test = default_thresholds(k, LabelRule::single_label);
                    break;
                case ThresholdMethod::gt_prior:
                    tv_test = gt_prior_thresholds(*train.true_labels, k);
                    break;
                case ThresholdMethod::model_posterior:
                    // Frozen before test time: column means of the downstream
                    // model's predictions over the whole train pool.
                    tv_test = model_posterior_thresholds(pool_pred);
                    break;
            }
            run.thresholds_test[cname] = tv_test.t;
            std::vector<std::size_t> pred = assign_single_label(test_pred, tv_test);
            double auc = roc_auc_macro(test_pred, *test.true_labels);
            run.metrics["downstream.auc_macro." + cname] = {auc, ""};
            return balanced_accuracy(pred, *test.true_labels, k);
        });
    }
}

inline ExperimentReport run_experiment_on(const ExperimentConfig& config, const Dataset& full,
                                          const std::optional<Dataset>& pretest) {
    validate_experiment_config(config);
    ExperimentReport report;

    for (std::uint64_t seed : config.seeds) {
        Dataset train, test;
        if (pretest) {
            train = full;
            test = *pretest;
        } else {
            auto [tr, te] = stratified_split(full, config.stratified_fraction, derive_seed(seed, 0));
            train = std::move(tr);
            test = std::move(te);
        }
        if (report.runs.empty())
            report.dataset = {train.features.rows(), test.features.rows(), train.n_classes,
                              train.label_names};

        SimConfig sim = config.sim;
        sim.seed = derive_seed(seed, 1);
        std::vector<ExpertProfile> profiles = sample_expert_profiles(sim, train.n_classes);
        Matrix one_hot = one_hot_expand(*train.true_labels, train.n_classes);
        AnnotationSet annotations = generate_annotations(one_hot, profiles, derive_seed(seed, 2));
        std::vector<std::size_t> annotated = detail::annotated_rows(annotations);

        SeedRunReport seed_run;
        seed_run.seed = seed;
        for (ConsensusMethod method : config.methods) {
            MethodRunReport run;
            MethodArtifacts artifacts;
            artifacts.seed = seed;
            artifacts.method = method_name(method);
            run_seed_method(config, train, test, annotations, profiles, annotated, method, seed,
                            run, artifacts, report.failures);
            seed_run.methods[method_name(method)] = std::move(run);
            report.artifacts.push_back(std::move(artifacts));
        }
        report.runs.push_back(std::move(seed_run));
    }

    // Aggregates: mean and sample standard deviation per (method, metric key).
    std::vector<std::string> keys;
    for (const auto& sr : report.runs)
        for (const auto& [m, mr] : sr.methods)
            for (const auto& [key, cell] : mr.metrics)
                if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    for (ConsensusMethod method : config.methods) {
        const std::string m = method_name(method);
        for (const std::string& key : keys) {
            std::vector<double> values;
            for (const auto& sr : report.runs) {
                auto it = sr.methods.find(m);
                if (it == sr.methods.end()) continue;
                auto cit = it->second.metrics.find(key);
                if (cit != it->second.metrics.end() && cit->second.value)
                    values.push_back(*cit->second.value);
            }
            if (values.empty()) continue;
            double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                          static_cast<double>(values.size());
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            double stddev =
                values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
            report.aggregates[m][key] = {mean, stddev, values.size()};
        }
    }

    // Pairwise one-sided Wilcoxon tests between methods, per metric key, over
    // the seeds where both methods produced a value.
    for (const std::string& key : keys) {
        for (ConsensusMethod ma : config.methods) {
            for (ConsensusMethod mb : config.methods) {
                if (ma == mb) continue;
                const std::string a = method_name(ma), b = method_name(mb);
                std::vector<double> va, vb;
                for (const auto& sr : report.runs) {
                    auto ia = sr.methods.find(a);
                    auto ib = sr.methods.find(b);
                    if (ia == sr.methods.end() || ib == sr.methods.end()) continue;
                    auto ca = ia->second.metrics.find(key);
                    auto cb = ib->second.metrics.find(key);
                    if (ca == ia->second.metrics.end() || cb == ib->second.metrics.end()) continue;
                    if (!ca->second.value || !cb->second.value) continue;
                    va.push_back(*ca->second.value);
                    vb.push_back(*cb->second.value);
                }
                if (va.empty()) continue;
                MetricCell cell;
                try {
                    cell.value = wilcoxon_one_sided(va, vb);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                report.wilcoxon[key][a + ">" + b] = std::move(cell);
            }
        }
    }
    return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
    validate_experiment_config(config);
    Dataset train;
    std::optional<Dataset> test;
    if (config.presplit) {
        train = load_dataset_csv(config.presplit->train_path, config.label_column_name);
        Dataset te = load_dataset_csv(config.presplit->test_path, config.label_column_name);
        // Remap test labels through the train mapping.
        std::vector<std::size_t> remapped(te.true_labels->size());
        for (std::size_t i = 0; i < remapped.size(); ++i) {
            const std::string& name = te.label_names[(*te.true_labels)[i]];
            auto it = std::find(train.label_names.begin(), train.label_names.end(), name);
            if (it == train.label_names.end())
                throw ConfigError("test split has label absent from train split: " + name);
            remapped[i] = static_cast<std::size_t>(it - train.label_names.begin());
        }
        te.true_labels = std::move(remapped);
        te.label_names = train.label_names;
        te.n_classes = train.n_classes;
        test = std::move(te);
    } else {
        train = load_dataset_csv(config.dataset_path, config.label_column_name);
        if (!train.true_labels) throw ConfigError("dataset has no label column");
    }
    validate_dataset(train);
    if (test) validate_dataset(*test);
    return run_experiment_on(config, train, test);
}

} // namespace labelfuse
