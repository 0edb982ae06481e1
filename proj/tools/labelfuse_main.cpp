// Command-line front end: each pipeline stage is independently scriptable.
//
// Exit codes: 0 success, 1 configuration/usage errors, 2 partial cell
// failures in an experiment run.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "labelfuse/labelfuse.hpp"

namespace {

using namespace labelfuse;

std::optional<std::string> optional_name(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return s;
}

void write_profiles_csv(const std::vector<ExpertProfile>& profiles, const std::string& path) {
    std::ostringstream out;
    out << "expert_id,class_id,participation,alpha,beta\n";
    for (std::size_t j = 0; j < profiles.size(); ++j)
        for (std::size_t c = 0; c < profiles[j].hidden_alpha.size(); ++c)
            out << j << "," << c << "," << format_double(profiles[j].participation) << ","
                << format_double(profiles[j].hidden_alpha[c]) << ","
                << format_double(profiles[j].hidden_beta[c]) << "\n";
    labelfuse::detail::write_text(path, out.str());
}

void write_reliability_csv(const ExpertReliability& rel, const std::string& path) {
    std::ostringstream out;
    out << "expert_id,class_id,alpha,beta\n";
    for (std::size_t j = 0; j < rel.alpha.rows(); ++j)
        for (std::size_t c = 0; c < rel.alpha.cols(); ++c)
            out << j << "," << c << "," << format_double(rel.alpha(j, c)) << ","
                << format_double(rel.beta(j, c)) << "\n";
    labelfuse::detail::write_text(path, out.str());
}

// Reads expert_id,class_id,...,alpha,beta shaped files (reliability estimates
// and simulator profiles share the tail columns).
void read_alpha_matrix(const std::string& path, Matrix& alpha, Matrix& beta) {
    std::vector<std::string> lines = labelfuse::detail::read_lines(path);
    if (lines.empty()) throw EmptyFile("reliability file is empty: " + path);
    std::vector<std::string> header = labelfuse::detail::split_csv_line(lines[0]);
    if (header.size() < 4 || header[0] != "expert_id" || header[1] != "class_id")
        throw IoError("unexpected reliability header in " + path);
    std::size_t n_experts = 0, n_classes = 0;
    struct Row { std::size_t j, c; double a, b; };
    std::vector<Row> rows;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        std::vector<std::string> f = labelfuse::detail::split_csv_line(lines[l]);
        if (f.size() != header.size()) throw IoError("malformed reliability row " + std::to_string(l));
        Row r;
        if (!try_parse_size(f[0], r.j) || !try_parse_size(f[1], r.c))
            throw IoError("bad reliability indices in row " + std::to_string(l));
        if (!try_parse_double(f[f.size() - 2], r.a) || !try_parse_double(f[f.size() - 1], r.b))
            throw IoError("bad reliability values in row " + std::to_string(l));
        n_experts = std::max(n_experts, r.j + 1);
        n_classes = std::max(n_classes, r.c + 1);
        rows.push_back(r);
    }
    alpha = Matrix(n_experts, n_classes);
    beta = Matrix(n_experts, n_classes);
    for (const Row& r : rows) {
        alpha(r.j, r.c) = r.a;
        beta(r.j, r.c) = r.b;
    }
}

// Posterior rows aligned to dataset rows by sample_id.
std::vector<std::size_t> align_to_dataset(const PosteriorTable& table, const Dataset& dataset) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.sample_ids.size(); ++i) index[dataset.sample_ids[i]] = i;
    std::vector<std::size_t> rows(table.sample_ids.size());
    for (std::size_t i = 0; i < table.sample_ids.size(); ++i) {
        auto it = index.find(table.sample_ids[i]);
        if (it == index.end())
            throw IndexOutOfBounds("posterior sample_id not in dataset: " + table.sample_ids[i]);
        rows[i] = it->second;
    }
    return rows;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"labelfuse: noisy-annotation consensus, reliability estimation, and "
                 "threshold-based label assignment"};
    app.require_subcommand(1);

    // ---- make-blobs ----
    auto* blobs_cmd = app.add_subcommand("make-blobs", "Generate a 2-D Gaussian blob dataset CSV");
    BlobsConfig blobs;
    std::string blobs_out = "blobs.csv";
    std::string blobs_label = "label";
    blobs_cmd->add_option("--samples", blobs.n_samples, "Number of samples")->required();
    blobs_cmd->add_option("--classes", blobs.n_classes, "Number of classes (default 2)");
    blobs_cmd->add_option("--weights", blobs.weights, "Class proportions (default uniform)");
    blobs_cmd->add_option("--cluster-std", blobs.cluster_std, "Per-axis standard deviation");
    blobs_cmd->add_option("--radius", blobs.center_radius, "Circle radius for class centers");
    blobs_cmd->add_option("--seed", blobs.seed, "Generator seed")->required();
    blobs_cmd->add_option("--label-column", blobs_label, "Label column name in the output");
    blobs_cmd->add_option("--out", blobs_out, "Output CSV path");

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "Sample expert profiles and noisy annotations");
    std::string sim_dataset, sim_label = "label", sim_out = "annotations.csv", sim_profiles_out;
    SimConfig sim;
    double part_a = 1.0, part_b = 20.0, rel_a = 4.0, rel_b = 1.0;
    double fixed_part = -1.0, fixed_rel = -1.0;
    sim_cmd->add_option("--dataset", sim_dataset, "Dataset CSV with true labels")->required();
    sim_cmd->add_option("--label-column", sim_label, "Label column name");
    sim_cmd->add_option("--experts", sim.n_experts, "Number of experts (default 15)");
    sim_cmd->add_option("--seed", sim.seed, "Generator seed")->required();
    sim_cmd->add_option("--participation-a", part_a, "Participation Beta shape a (default 1)");
    sim_cmd->add_option("--participation-b", part_b, "Participation Beta shape b (default 20)");
    sim_cmd->add_option("--reliability-a", rel_a, "Reliability Beta shape a (default 4)");
    sim_cmd->add_option("--reliability-b", rel_b, "Reliability Beta shape b (default 1)");
    sim_cmd->add_option("--fixed-participation", fixed_part,
                        "Force this participation rate for every expert");
    sim_cmd->add_option("--fixed-reliability", fixed_rel,
                        "Force this sensitivity/specificity for every expert");
    sim_cmd->add_option("--out", sim_out, "Output annotations CSV");
    sim_cmd->add_option("--profiles-out", sim_profiles_out, "Also write hidden expert profiles");

    // ---- consensus ----
    auto* cons_cmd = app.add_subcommand("consensus", "Fuse annotations into per-class posteriors");
    std::string cons_dataset, cons_label, cons_annotations, cons_method = "em";
    std::string cons_out = "posteriors.csv", cons_rel_out;
    std::size_t cons_experts = 0, cons_classes = 0;
    EmConfig em_config;
    double cons_fixed_prior = -1.0;
    ClassifierSpec classifier_spec;
    std::string classifier_kind = "logistic_regression";
    std::size_t min_training = 5;
    cons_cmd->add_option("--dataset", cons_dataset, "Dataset CSV (features)")->required();
    cons_cmd->add_option("--label-column", cons_label,
                         "Label column to exclude from the features, if present");
    cons_cmd->add_option("--annotations", cons_annotations, "Annotations CSV")->required();
    cons_cmd->add_option("--method", cons_method,
                         "majority_voting | em | inferred | simulated");
    cons_cmd->add_option("--experts", cons_experts, "Expert count (default: inferred from file)");
    cons_cmd->add_option("--classes", cons_classes, "Class count (default: inferred from file)");
    cons_cmd->add_option("--em-max-iterations", em_config.max_iterations, "EM iteration cap");
    cons_cmd->add_option("--em-tolerance", em_config.tolerance, "EM convergence tolerance");
    cons_cmd->add_option("--epsilon-clamp", em_config.epsilon_clamp, "Reliability clamp epsilon");
    cons_cmd->add_option("--fixed-prior", cons_fixed_prior,
                         "Fixed class prior (default: dummy prior re-estimated each step)");
    cons_cmd->add_option("--classifier", classifier_kind, "logistic_regression | dummy_prior");
    cons_cmd->add_option("--max-iterations", classifier_spec.max_iterations,
                         "Classifier iteration cap");
    cons_cmd->add_option("--learning-rate", classifier_spec.learning_rate, "Gradient step size");
    cons_cmd->add_option("--l2-penalty", classifier_spec.l2_penalty, "L2 penalty strength");
    cons_cmd->add_option("--convergence-tolerance", classifier_spec.convergence_tolerance,
                         "Classifier convergence tolerance");
    cons_cmd->add_option("--min-training-size", min_training,
                         "Smallest training set fitted with the full model");
    cons_cmd->add_option("--out", cons_out, "Output posteriors CSV");
    cons_cmd->add_option("--reliability-out", cons_rel_out, "Output reliability CSV");

    // ---- labels ----
    auto* labels_cmd = app.add_subcommand("labels", "Turn posteriors into hard labels");
    std::string lab_posteriors, lab_cutoff = "default", lab_rule = "single", lab_out = "labels.csv";
    std::string lab_dataset, lab_label = "label";
    labels_cmd->add_option("--posteriors", lab_posteriors, "Posteriors CSV")->required();
    labels_cmd->add_option("--cutoff", lab_cutoff, "default | gt_prior | model_posterior");
    labels_cmd->add_option("--rule", lab_rule, "single | multi: one class per sample or per-class");
    labels_cmd->add_option("--dataset", lab_dataset, "Dataset CSV (required for gt_prior)");
    labels_cmd->add_option("--label-column", lab_label, "Label column name");
    labels_cmd->add_option("--out", lab_out, "Output labels CSV");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "Score posteriors/labels against true labels");
    std::string ev_dataset, ev_label = "label", ev_posteriors, ev_labels, ev_annotations;
    std::string ev_reliability, ev_profiles;
    eval_cmd->add_option("--dataset", ev_dataset, "Dataset CSV with true labels")->required();
    eval_cmd->add_option("--label-column", ev_label, "Label column name");
    eval_cmd->add_option("--posteriors", ev_posteriors, "Posteriors CSV (AUC macro)");
    eval_cmd->add_option("--labels", ev_labels, "Hard labels CSV (balanced accuracy)");
    eval_cmd->add_option("--annotations", ev_annotations,
                         "Annotations CSV; restricts metrics to annotated samples");
    eval_cmd->add_option("--reliability", ev_reliability, "Estimated reliability CSV");
    eval_cmd->add_option("--profiles", ev_profiles, "Hidden profiles CSV (with --reliability)");

    // ---- experiment ----
    auto* exp_cmd = app.add_subcommand("experiment", "Run the full multi-seed experiment pipeline");
    std::string exp_config;
    exp_cmd->add_option("--config", exp_config, "Experiment config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    if (blobs_cmd->parsed()) {
        Dataset ds = make_blobs(blobs);
        write_dataset_csv(ds, blobs_out, blobs_label);
        std::cout << "wrote " << blobs_out << " (" << ds.features.rows() << " samples, "
                  << ds.n_classes << " classes)\n";
        return 0;
    }

    if (sim_cmd->parsed()) {
        Dataset ds = load_dataset_csv(sim_dataset, sim_label);
        if (!ds.true_labels) throw ConfigError("simulate: dataset has no labels");
        validate_dataset(ds);
        sim.participation_beta = {part_a, part_b};
        sim.reliability_beta = {rel_a, rel_b};
        if (fixed_part >= 0.0) sim.fixed_participation = fixed_part;
        if (fixed_rel >= 0.0) sim.fixed_reliability = fixed_rel;
        std::vector<ExpertProfile> profiles = sample_expert_profiles(sim, ds.n_classes);
        Matrix one_hot = one_hot_expand(*ds.true_labels, ds.n_classes);
        AnnotationSet annotations = generate_annotations(one_hot, profiles, sim.seed);
        write_annotations_csv(annotations, ds.sample_ids, sim_out);
        if (!sim_profiles_out.empty()) write_profiles_csv(profiles, sim_profiles_out);
        std::cout << "wrote " << sim_out << " (" << annotations.entries().size() << " entries from "
                  << sim.n_experts << " experts)\n";
        return 0;
    }

    if (cons_cmd->parsed()) {
        Dataset ds = load_dataset_csv(cons_dataset, optional_name(cons_label));
        auto [file_experts, file_classes] = annotation_csv_dims(cons_annotations);
        std::size_t r = cons_experts > 0 ? cons_experts : file_experts;
        std::size_t k = cons_classes > 0 ? cons_classes : file_classes;
        AnnotationSet annotations = read_annotations_csv(cons_annotations, ds.sample_ids, r, k);
        if (cons_fixed_prior >= 0.0) em_config.fixed_prior = cons_fixed_prior;
        classifier_spec.kind = classifier_kind == "dummy_prior" ? ClassifierKind::dummy_prior
                                                                : ClassifierKind::logistic_regression;
        if (classifier_kind != "dummy_prior" && classifier_kind != "logistic_regression")
            throw ConfigError("unknown classifier kind: " + classifier_kind);
        MetaConfig meta{classifier_spec, em_config, min_training};
        ConsensusOutput out;
        switch (parse_method(cons_method)) {
            case ConsensusMethod::majority_voting: out = majority_voting(annotations); break;
            case ConsensusMethod::em: out = run_em(annotations, em_config); break;
            case ConsensusMethod::inferred: out = inferred_consensus(ds, annotations, meta); break;
            case ConsensusMethod::simulated: out = simulated_consensus(ds, annotations, meta); break;
        }
        write_posteriors_csv(out.posterior, ds.sample_ids, cons_out);
        if (!cons_rel_out.empty()) {
            if (!out.reliability)
                throw ConfigError("method " + cons_method + " estimates no reliability");
            write_reliability_csv(*out.reliability, cons_rel_out);
        }
        std::cout << "wrote " << cons_out << "\n";
        return 0;
    }

    if (labels_cmd->parsed()) {
        PosteriorTable table = read_posteriors_csv(lab_posteriors);
        const std::size_t k = table.values.cols();
        LabelRule rule;
        if (lab_rule == "single") rule = LabelRule::single_label;
        else if (lab_rule == "multi") rule = LabelRule::multi_label;
        else throw ConfigError("unknown rule: " + lab_rule);
        ThresholdVector tv;
        switch (parse_cutoff(lab_cutoff)) {
            case ThresholdMethod::default_cutoff:
                tv = default_thresholds(k, rule);
                break;
            case ThresholdMethod::gt_prior: {
                if (lab_dataset.empty())
                    throw ConfigError("gt_prior cutoff needs --dataset with true labels");
                Dataset ds = load_dataset_csv(lab_dataset, lab_label);
                if (!ds.true_labels) throw ConfigError("gt_prior cutoff: dataset has no labels");
                tv = gt_prior_thresholds(*ds.true_labels, k);
                break;
            }
            case ThresholdMethod::model_posterior:
                tv = model_posterior_thresholds(table.values);
                break;
        }
        if (rule == LabelRule::single_label) {
            std::vector<std::size_t> hard = assign_single_label(table.values, tv);
            write_labels_csv(hard, table.sample_ids, lab_out);
        } else {
            Matrix assigned = assign_multilabel(table.values, tv);
            write_posteriors_csv(assigned, table.sample_ids, lab_out);
        }
        std::cout << "wrote " << lab_out << " (thresholds:";
        for (double t : tv.t) std::cout << " " << format_double(t);
        std::cout << ")\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        Dataset ds = load_dataset_csv(ev_dataset, ev_label);
        if (!ds.true_labels) throw ConfigError("evaluate: dataset has no labels");
        json out = json::object();
        std::vector<bool> keep(ds.features.rows(), true);
        if (!ev_annotations.empty()) {
            auto [r, k] = annotation_csv_dims(ev_annotations);
            AnnotationSet ann = read_annotations_csv(ev_annotations, ds.sample_ids, r, k);
            for (std::size_t i = 0; i < keep.size(); ++i)
                keep[i] = !ann.experts_of_sample(i).empty();
        }
        if (!ev_posteriors.empty()) {
            PosteriorTable table = read_posteriors_csv(ev_posteriors);
            std::vector<std::size_t> rows = align_to_dataset(table, ds);
            std::vector<std::size_t> use;
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (keep[rows[i]]) use.push_back(i);
            Matrix probs(use.size(), table.values.cols());
            std::vector<std::size_t> truth(use.size());
            for (std::size_t t = 0; t < use.size(); ++t) {
                for (std::size_t c = 0; c < table.values.cols(); ++c)
                    probs(t, c) = table.values(use[t], c);
                truth[t] = (*ds.true_labels)[rows[use[t]]];
            }
            out["auc_macro"] = roc_auc_macro(probs, truth);
            out["n_scored"] = use.size();
        }
        if (!ev_labels.empty()) {
            std::vector<std::string> lines = labelfuse::detail::read_lines(ev_labels);
            if (lines.empty()) throw EmptyFile("labels file is empty: " + ev_labels);
            std::unordered_map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < ds.sample_ids.size(); ++i) index[ds.sample_ids[i]] = i;
            std::vector<std::size_t> pred, truth;
            for (std::size_t l = 1; l < lines.size(); ++l) {
                std::vector<std::string> f = labelfuse::detail::split_csv_line(lines[l]);
                if (f.size() != 2) throw IoError("labels row " + std::to_string(l) + " malformed");
                auto it = index.find(f[0]);
                if (it == index.end()) throw IndexOutOfBounds("unknown sample_id: " + f[0]);
                if (!keep[it->second]) continue;
                std::size_t y;
                if (!try_parse_size(f[1], y)) throw IoError("bad label: " + f[1]);
                pred.push_back(y);
                truth.push_back((*ds.true_labels)[it->second]);
            }
            out["balanced_accuracy"] = balanced_accuracy(pred, truth, ds.n_classes);
        }
        if (!ev_reliability.empty()) {
            if (ev_profiles.empty())
                throw ConfigError("evaluate: --reliability needs --profiles for the hidden values");
            Matrix est_a, est_b, hid_a, hid_b;
            read_alpha_matrix(ev_reliability, est_a, est_b);
            read_alpha_matrix(ev_profiles, hid_a, hid_b);
            // Estimates may include extra simulated annotator rows; compare
            // the human prefix.
            if (est_a.rows() > hid_a.rows()) {
                std::vector<std::size_t> prefix(hid_a.rows());
                std::iota(prefix.begin(), prefix.end(), std::size_t{0});
                est_a = est_a.take_rows(prefix);
                est_b = est_b.take_rows(prefix);
            }
            out["reliability_mae"] = reliability_mae(est_a, hid_a);
            out["specificity_mae"] = reliability_mae(est_b, hid_b);
            out["pearson"] = pearson(est_a.flat(), hid_a.flat());
            out["spearman"] = spearman(est_a.flat(), hid_a.flat());
        }
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    if (exp_cmd->parsed()) {
        ExperimentConfig config = load_experiment_config(exp_config);
        // The destination can be overridden without touching the config that
        // is echoed into report.json, so identical configs stay byte-identical.
        std::string out_dir = config.output_dir;
        if (const char* env = std::getenv("LABELFUSE_OUTPUT_DIR"); env && *env) out_dir = env;
        ExperimentReport report = run_experiment(config);
        write_report(report, config, out_dir);
        std::cout << "wrote " << out_dir << "/report.json";
        if (report.any_failures())
            std::cout << " (" << report.failures.size() << " cell failures)";
        std::cout << "\n";
        return report.any_failures() ? 2 : 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const labelfuse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const labelfuse::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
