#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelfuse/csv.hpp"
#include "labelfuse/errors.hpp"
#include "labelfuse/experiment.hpp"

// JSON config parsing, report serialization, and the report/tables writers.
// nlohmann objects keep keys sorted, so identical reports serialize to
// identical bytes.

namespace labelfuse {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config <-> JSON

inline json sim_config_to_json(const SimConfig& s) {
    json j;
    j["n_experts"] = s.n_experts;
    j["participation_beta"] = {s.participation_beta.a, s.participation_beta.b};
    j["reliability_beta"] = {s.reliability_beta.a, s.reliability_beta.b};
    j["seed"] = s.seed;
    if (s.fixed_participation) j["fixed_participation"] = *s.fixed_participation;
    if (s.fixed_reliability) j["fixed_reliability"] = *s.fixed_reliability;
    return j;
}

inline json classifier_spec_to_json(const ClassifierSpec& s) {
    json j;
    j["kind"] = s.kind == ClassifierKind::logistic_regression ? "logistic_regression" : "dummy_prior";
    j["max_iterations"] = s.max_iterations;
    j["learning_rate"] = s.learning_rate;
    j["l2_penalty"] = s.l2_penalty;
    j["convergence_tolerance"] = s.convergence_tolerance;
    return j;
}

inline json em_config_to_json(const EmConfig& c) {
    json j;
    j["max_iterations"] = c.max_iterations;
    j["tolerance"] = c.tolerance;
    j["epsilon_clamp"] = c.epsilon_clamp;
    if (c.fixed_prior)
        j["prior_mode"] = json{{"fixed", *c.fixed_prior}};
    else
        j["prior_mode"] = "dummy_prior";
    return j;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset_path"] = c.dataset_path;
    j["label_column_name"] = c.label_column_name;
    if (c.presplit)
        j["test_split"] = json{{"presplit_paths", {{"train", c.presplit->train_path},
                                                   {"test", c.presplit->test_path}}}};
    else
        j["test_split"] = json{{"stratified_fraction", c.stratified_fraction}};
    j["sim"] = sim_config_to_json(c.sim);
    j["methods"] = json::array();
    for (auto m : c.methods) j["methods"].push_back(method_name(m));
    j["cutoffs"] = json::array();
    for (auto t : c.cutoffs) j["cutoffs"].push_back(threshold_method_name(t));
    j["seeds"] = c.seeds;
    j["classifier_spec"] = classifier_spec_to_json(c.classifier_spec);
    j["em_config"] = em_config_to_json(c.em_config);
    j["minimum_training_size"] = c.minimum_training_size;
    j["output_dir"] = c.output_dir;
    return j;
}

namespace detail {

inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
inline T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

} // namespace detail

inline SimConfig sim_config_from_json(const json& j) {
    detail::require_keys(j, {"n_experts", "participation_beta", "reliability_beta", "seed",
                             "fixed_participation", "fixed_reliability"},
                         "sim");
    SimConfig s;
    s.n_experts = detail::get_or<std::size_t>(j, "n_experts", s.n_experts);
    auto beta_pair = [](const json& node, const std::string& key) -> BetaParams {
        if (!node.is_array() || node.size() != 2 || !node[0].is_number() || !node[1].is_number())
            throw ConfigError(key + " must be a [shape_a, shape_b] pair");
        return {node[0].get<double>(), node[1].get<double>()};
    };
    if (j.contains("participation_beta"))
        s.participation_beta = beta_pair(j.at("participation_beta"), "participation_beta");
    if (j.contains("reliability_beta"))
        s.reliability_beta = beta_pair(j.at("reliability_beta"), "reliability_beta");
    s.seed = detail::get_or<std::uint64_t>(j, "seed", s.seed);
    if (j.contains("fixed_participation"))
        s.fixed_participation = j.at("fixed_participation").get<double>();
    if (j.contains("fixed_reliability"))
        s.fixed_reliability = j.at("fixed_reliability").get<double>();
    return s;
}

inline ClassifierSpec classifier_spec_from_json(const json& j) {
    detail::require_keys(j, {"kind", "max_iterations", "learning_rate", "l2_penalty",
                             "convergence_tolerance"},
                         "classifier_spec");
    ClassifierSpec s;
    std::string kind = detail::get_or<std::string>(j, "kind", "logistic_regression");
    if (kind == "logistic_regression") s.kind = ClassifierKind::logistic_regression;
    else if (kind == "dummy_prior") s.kind = ClassifierKind::dummy_prior;
    else throw ConfigError("unknown classifier kind: " + kind);
    s.max_iterations = detail::get_or<std::size_t>(j, "max_iterations", s.max_iterations);
    s.learning_rate = detail::get_or<double>(j, "learning_rate", s.learning_rate);
    s.l2_penalty = detail::get_or<double>(j, "l2_penalty", s.l2_penalty);
    s.convergence_tolerance =
        detail::get_or<double>(j, "convergence_tolerance", s.convergence_tolerance);
    return s;
}

inline EmConfig em_config_from_json(const json& j) {
    detail::require_keys(j, {"max_iterations", "tolerance", "epsilon_clamp", "prior_mode"},
                         "em_config");
    EmConfig c;
    c.max_iterations = detail::get_or<std::size_t>(j, "max_iterations", c.max_iterations);
    c.tolerance = detail::get_or<double>(j, "tolerance", c.tolerance);
    c.epsilon_clamp = detail::get_or<double>(j, "epsilon_clamp", c.epsilon_clamp);
    if (j.contains("prior_mode")) {
        const json& p = j.at("prior_mode");
        if (p.is_string() && p.get<std::string>() == "dummy_prior") {
            c.fixed_prior.reset();
        } else if (p.is_object() && p.contains("fixed")) {
            c.fixed_prior = p.at("fixed").get<double>();
        } else {
            throw ConfigError("prior_mode must be \"dummy_prior\" or {\"fixed\": value}");
        }
    }
    return c;
}

inline ExperimentConfig config_from_json(const json& j) {
    detail::require_keys(j, {"dataset_path", "label_column_name", "test_split", "sim", "methods",
                             "cutoffs", "seeds", "classifier_spec", "em_config",
                             "minimum_training_size", "output_dir"},
                         "config");
    ExperimentConfig c;
    c.dataset_path = detail::get_or<std::string>(j, "dataset_path", "");
    c.label_column_name = detail::get_or<std::string>(j, "label_column_name", c.label_column_name);
    if (j.contains("test_split")) {
        const json& t = j.at("test_split");
        detail::require_keys(t, {"stratified_fraction", "presplit_paths"}, "test_split");
        if (t.contains("stratified_fraction") && t.contains("presplit_paths"))
            throw ConfigError("test_split: give either a fraction or presplit paths, not both");
        if (t.contains("stratified_fraction"))
            c.stratified_fraction = t.at("stratified_fraction").get<double>();
        else if (t.contains("presplit_paths")) {
            const json& p = t.at("presplit_paths");
            detail::require_keys(p, {"train", "test"}, "presplit_paths");
            c.presplit = PresplitPaths{p.at("train").get<std::string>(),
                                       p.at("test").get<std::string>()};
        } else {
            throw ConfigError("test_split: empty specification");
        }
    }
    if (j.contains("sim")) c.sim = sim_config_from_json(j.at("sim"));
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("cutoffs")) {
        c.cutoffs.clear();
        for (const auto& t : j.at("cutoffs")) c.cutoffs.push_back(parse_cutoff(t.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("classifier_spec"))
        c.classifier_spec = classifier_spec_from_json(j.at("classifier_spec"));
    if (j.contains("em_config")) c.em_config = em_config_from_json(j.at("em_config"));
    c.minimum_training_size =
        detail::get_or<std::size_t>(j, "minimum_training_size", c.minimum_training_size);
    c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report <-> JSON

inline json cell_to_json(const MetricCell& c) {
    json j;
    if (c.value) j["value"] = *c.value;
    if (!c.error.empty()) j["error"] = c.error;
    return j;
}

inline MetricCell cell_from_json(const json& j) {
    MetricCell c;
    if (j.contains("value")) c.value = j.at("value").get<double>();
    if (j.contains("error")) c.error = j.at("error").get<std::string>();
    return c;
}

inline json report_to_json(const ExperimentReport& report, const ExperimentConfig& config) {
    json j;
    j["config"] = config_to_json(config);
    j["dataset"] = {{"n_train", report.dataset.n_train},
                    {"n_test", report.dataset.n_test},
                    {"n_classes", report.dataset.n_classes},
                    {"label_names", report.dataset.label_names}};
    j["runs"] = json::array();
    for (const auto& sr : report.runs) {
        json run;
        run["seed"] = sr.seed;
        run["methods"] = json::object();
        for (const auto& [m, mr] : sr.methods) {
            json method;
            if (!mr.error.empty()) method["error"] = mr.error;
            method["metrics"] = json::object();
            for (const auto& [key, cell] : mr.metrics) method["metrics"][key] = cell_to_json(cell);
            method["thresholds_train"] = mr.thresholds_train;
            method["thresholds_test"] = mr.thresholds_test;
            method["iterations"] = mr.iterations;
            method["converged"] = mr.converged;
            run["methods"][m] = std::move(method);
        }
        j["runs"].push_back(std::move(run));
    }
    j["aggregates"] = json::object();
    for (const auto& [m, keys] : report.aggregates) {
        json jm = json::object();
        for (const auto& [key, agg] : keys)
            jm[key] = {{"mean", agg.mean}, {"std", agg.stddev}, {"n", agg.n}};
        j["aggregates"][m] = std::move(jm);
    }
    j["wilcoxon"] = json::object();
    for (const auto& [key, pairs] : report.wilcoxon) {
        json jp = json::object();
        for (const auto& [pair, cell] : pairs) jp[pair] = cell_to_json(cell);
        j["wilcoxon"][key] = std::move(jp);
    }
    j["failures"] = report.failures;
    return j;
}

inline ExperimentReport report_from_json(const json& j, ExperimentConfig* config_out = nullptr) {
    ExperimentReport report;
    if (config_out && j.contains("config")) *config_out = config_from_json(j.at("config"));
    const json& d = j.at("dataset");
    report.dataset = {d.at("n_train").get<std::size_t>(), d.at("n_test").get<std::size_t>(),
                      d.at("n_classes").get<std::size_t>(),
                      d.at("label_names").get<std::vector<std::string>>()};
    for (const auto& run : j.at("runs")) {
        SeedRunReport sr;
        sr.seed = run.at("seed").get<std::uint64_t>();
        for (const auto& [m, method] : run.at("methods").items()) {
            MethodRunReport mr;
            if (method.contains("error")) mr.error = method.at("error").get<std::string>();
            for (const auto& [key, cell] : method.at("metrics").items())
                mr.metrics[key] = cell_from_json(cell);
            mr.thresholds_train =
                method.at("thresholds_train").get<std::map<std::string, std::vector<double>>>();
            mr.thresholds_test =
                method.at("thresholds_test").get<std::map<std::string, std::vector<double>>>();
            mr.iterations = method.at("iterations").get<std::vector<std::size_t>>();
            mr.converged = method.at("converged").get<std::vector<bool>>();
            sr.methods[m] = std::move(mr);
        }
        report.runs.push_back(std::move(sr));
    }
    for (const auto& [m, keys] : j.at("aggregates").items())
        for (const auto& [key, agg] : keys.items())
            report.aggregates[m][key] = {agg.at("mean").get<double>(), agg.at("std").get<double>(),
                                         agg.at("n").get<std::size_t>()};
    for (const auto& [key, pairs] : j.at("wilcoxon").items())
        for (const auto& [pair, cell] : pairs.items())
            report.wilcoxon[key][pair] = cell_from_json(cell);
    report.failures = j.at("failures").get<std::vector<std::string>>();
    return report;
}

// Equality on the serialized portion (artifacts are separate files).
inline bool report_equals(const ExperimentReport& a, const ExperimentReport& b) {
    return a.dataset == b.dataset && a.runs == b.runs && a.aggregates == b.aggregates &&
           a.wilcoxon == b.wilcoxon && a.failures == b.failures;
}

// ---------------------------------------------------------------------------
// tables.md

inline std::string format_fixed(double v, int precision = 3) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return {buf, res.ptr};
}

namespace detail {

// Lower is better only for error metrics.
inline bool lower_is_better(const std::string& key) {
    return key.find("mae") != std::string::npos;
}

inline std::string render_metric_table(const ExperimentReport& report,
                                       const std::vector<std::string>& methods,
                                       const std::vector<std::pair<std::string, std::string>>& cols) {
    std::ostringstream out;
    out << "| method |";
    for (const auto& [key, title] : cols) out << " " << title << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
    out << "\n";

    // Best mean per column among methods that produced a value.
    std::vector<std::optional<double>> best(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (const auto& m : methods) {
            auto mit = report.aggregates.find(m);
            if (mit == report.aggregates.end()) continue;
            auto kit = mit->second.find(cols[c].first);
            if (kit == mit->second.end()) continue;
            double v = kit->second.mean;
            if (!best[c] || (lower_is_better(cols[c].first) ? v < *best[c] : v > *best[c]))
                best[c] = v;
        }
    }

    for (const auto& m : methods) {
        out << "| " << m << " |";
        for (std::size_t c = 0; c < cols.size(); ++c) {
            auto mit = report.aggregates.find(m);
            const Aggregate* agg = nullptr;
            if (mit != report.aggregates.end()) {
                auto kit = mit->second.find(cols[c].first);
                if (kit != mit->second.end()) agg = &kit->second;
            }
            if (!agg) {
                out << " n/a |";
                continue;
            }
            std::string cell = format_fixed(agg->mean) + " (± " + format_fixed(agg->stddev) + ")";
            if (best[c] && agg->mean == *best[c]) cell = "**" + cell + "**";
            out << " " << cell << " |";
        }
        out << "\n";
    }
    return out.str();
}

} // namespace detail

inline std::string render_tables(const ExperimentReport& report, const ExperimentConfig& config) {
    std::vector<std::string> methods;
    for (auto m : config.methods) methods.push_back(method_name(m));
    std::vector<std::string> cutoffs;
    for (auto t : config.cutoffs) cutoffs.push_back(threshold_method_name(t));

    std::ostringstream out;
    out << "# Experiment results\n\n";
    out << "Train pool: " << report.dataset.n_train << " samples; test split: "
        << report.dataset.n_test << " samples; " << report.dataset.n_classes << " classes; "
        << report.runs.size() << " seeds. Cells are mean (± std) across seeds; the best value in "
        << "each column is bold.\n\n";

    std::vector<std::pair<std::string, std::string>> cols;
    out << "## Annotation quality (annotated train samples)\n\n";
    cols = {{"annotation_quality.auc_macro", "AUC (macro)"}};
    for (const auto& c : cutoffs) cols.push_back({"annotation_quality.bac." + c, "BAC " + c});
    out << detail::render_metric_table(report, methods, cols) << "\n";

    out << "## Expert reliability estimation\n\n";
    cols = {{"expert_estimation.reliability_mae", "sensitivity MAE"},
            {"expert_estimation.specificity_mae", "specificity MAE"},
            {"expert_estimation.pearson", "Pearson"},
            {"expert_estimation.spearman", "Spearman"}};
    out << detail::render_metric_table(report, methods, cols) << "\n";

    out << "## Downstream model (test split)\n\n";
    cols.clear();
    for (const auto& c : cutoffs) cols.push_back({"downstream.auc_macro." + c, "AUC " + c});
    for (const auto& c : cutoffs) cols.push_back({"downstream.bac." + c, "BAC " + c});
    out << detail::render_metric_table(report, methods, cols) << "\n";

    auto wit = report.wilcoxon.find("annotation_quality.auc_macro");
    if (wit != report.wilcoxon.end()) {
        out << "## One-sided Wilcoxon p-values on annotation AUC\n\n";
        for (const auto& [pair, cell] : wit->second) {
            out << "- " << pair << ": ";
            if (cell.value)
                out << format_fixed(*cell.value, 5);
            else
                out << "not computable (" << cell.error << ")";
            out << "\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// File emission

inline void write_report(const ExperimentReport& report, const ExperimentConfig& config,
                         const std::string& output_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(output_dir) / "posteriors", ec);
    if (ec) throw IoError("cannot create output directory: " + output_dir);
    fs::create_directories(fs::path(output_dir) / "labels", ec);
    if (ec) throw IoError("cannot create output directory: " + output_dir);

    json j = report_to_json(report, config);
    detail::write_text((fs::path(output_dir) / "report.json").string(), j.dump(2) + "\n");
    detail::write_text((fs::path(output_dir) / "tables.md").string(),
                       render_tables(report, config));

    for (const auto& art : report.artifacts) {
        if (art.posterior.rows() == 0) continue; // method failed before producing output
        std::string stem = std::to_string(art.seed) + "_" + art.method;
        write_posteriors_csv(art.posterior, art.sample_ids,
                             (fs::path(output_dir) / "posteriors" / (stem + ".csv")).string());
        for (const auto& [cutoff, rows_labels] : art.labels) {
            const auto& [rows, labels] = rows_labels;
            std::vector<std::string> ids(rows.size());
            for (std::size_t t = 0; t < rows.size(); ++t) ids[t] = art.sample_ids[rows[t]];
            write_labels_csv(labels, ids,
                             (fs::path(output_dir) / "labels" / (stem + "_" + cutoff + ".csv"))
                                 .string());
        }
    }
}

} // namespace labelfuse
