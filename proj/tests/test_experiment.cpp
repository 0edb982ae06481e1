#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "labelfuse/csv.hpp"
#include "labelfuse/experiment.hpp"
#include "labelfuse/report.hpp"
#include "labelfuse/synthetic.hpp"

using namespace labelfuse;

namespace {

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "labelfuse_experiment_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string blob_csv(std::size_t n, std::uint64_t seed, const std::string& name) {
    BlobsConfig config;
    config.n_samples = n;
    config.seed = seed;
    Dataset d = make_blobs(config);
    auto path = scratch_dir() / name;
    write_dataset_csv(d, path.string());
    return path.string();
}

ExperimentConfig small_config(const std::string& dataset_path) {
    ExperimentConfig c;
    c.dataset_path = dataset_path;
    c.seeds = {1};
    c.sim.n_experts = 3;
    c.sim.fixed_participation = 0.5;
    c.sim.fixed_reliability = 0.9;
    c.classifier_spec.max_iterations = 200;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("stratified split keeps per-class proportions") {
    BlobsConfig blobs;
    blobs.n_samples = 100;
    blobs.seed = 3;
    Dataset d = make_blobs(blobs); // 50/50 binary
    auto [train, test] = stratified_split(d, 0.4, 17);

    REQUIRE(test.features.rows() == 40);
    REQUIRE(train.features.rows() == 60);
    std::vector<std::size_t> test_counts(2, 0), train_counts(2, 0);
    for (std::size_t y : *test.true_labels) ++test_counts[y];
    for (std::size_t y : *train.true_labels) ++train_counts[y];
    REQUIRE(test_counts == std::vector<std::size_t>{20, 20});
    REQUIRE(train_counts == std::vector<std::size_t>{30, 30});

    // Disjoint and exhaustive by id.
    std::vector<std::string> ids = train.sample_ids;
    ids.insert(ids.end(), test.sample_ids.begin(), test.sample_ids.end());
    std::sort(ids.begin(), ids.end());
    std::vector<std::string> all = d.sample_ids;
    std::sort(all.begin(), all.end());
    REQUIRE(ids == all);
}

TEST_CASE("stratified split is deterministic and sensitive to the seed") {
    BlobsConfig blobs;
    blobs.n_samples = 60;
    blobs.seed = 8;
    Dataset d = make_blobs(blobs);
    auto [a_train, a_test] = stratified_split(d, 0.4, 5);
    auto [b_train, b_test] = stratified_split(d, 0.4, 5);
    REQUIRE(a_train.sample_ids == b_train.sample_ids);
    REQUIRE(a_test.sample_ids == b_test.sample_ids);

    auto [c_train, c_test] = stratified_split(d, 0.4, 6);
    REQUIRE_FALSE(a_test.sample_ids == c_test.sample_ids);
}

TEST_CASE("stratified split rejects tiny classes and bad fractions") {
    Dataset d;
    d.features = Matrix(3, 1, 0.5);
    d.true_labels = std::vector<std::size_t>{0, 0, 1}; // class 1 has one sample
    d.n_classes = 2;
    d.sample_ids = {"0", "1", "2"};
    d.label_names = {"0", "1"};
    REQUIRE_THROWS_AS(stratified_split(d, 0.4, 1), ClassTooSmall);

    BlobsConfig blobs;
    blobs.n_samples = 20;
    blobs.seed = 2;
    Dataset ok = make_blobs(blobs);
    REQUIRE_THROWS_AS(stratified_split(ok, 0.0, 1), ValueOutOfRange);
    REQUIRE_THROWS_AS(stratified_split(ok, 1.0, 1), ValueOutOfRange);
}

TEST_CASE("proportions stay within one sample of the fraction") {
    BlobsConfig blobs;
    blobs.n_samples = 90;
    blobs.n_classes = 3;
    blobs.weights = {0.5, 0.3, 0.2};
    blobs.seed = 12;
    Dataset d = make_blobs(blobs);
    auto [train, test] = stratified_split(d, 0.3, 4);
    std::vector<double> full(3, 0.0), sub(3, 0.0);
    for (std::size_t y : *d.true_labels) full[y] += 1.0;
    for (std::size_t y : *test.true_labels) sub[y] += 1.0;
    for (std::size_t c = 0; c < 3; ++c)
        REQUIRE(std::abs(sub[c] - 0.3 * full[c]) <= 1.0);
}

TEST_CASE("experiment config validation") {
    ExperimentConfig c = small_config("x.csv");
    REQUIRE_NOTHROW(validate_experiment_config(c));
    c.methods.clear();
    REQUIRE_THROWS_AS(validate_experiment_config(c), ConfigError);
    c = small_config("x.csv");
    c.cutoffs.clear();
    REQUIRE_THROWS_AS(validate_experiment_config(c), ConfigError);
    c = small_config("x.csv");
    c.seeds.clear();
    REQUIRE_THROWS_AS(validate_experiment_config(c), ConfigError);
    c = small_config("x.csv");
    c.stratified_fraction = 1.0;
    REQUIRE_THROWS_AS(validate_experiment_config(c), ConfigError);
    c = small_config("x.csv");
    c.dataset_path.clear();
    REQUIRE_THROWS_AS(validate_experiment_config(c), ConfigError);
}

TEST_CASE("single method single seed produces the contracted cells") {
    std::string path = blob_csv(60, 21, "shape.csv");
    ExperimentConfig c = small_config(path);
    c.methods = {ConsensusMethod::majority_voting};

    ExperimentReport report = run_experiment(c);
    REQUIRE(report.runs.size() == 1);
    REQUIRE(report.runs[0].methods.size() == 1);
    const MethodRunReport& run = report.runs[0].methods.at("majority_voting");
    REQUIRE(run.error.empty());

    // One AUC cell plus one BAC cell per cut-off.
    REQUIRE(run.metrics.count("annotation_quality.auc_macro") == 1);
    for (const std::string& cutoff : {"default", "gt_prior", "model_posterior"}) {
        REQUIRE(run.metrics.count("annotation_quality.bac." + std::string(cutoff)) == 1);
        REQUIRE(run.metrics.count("downstream.bac." + std::string(cutoff)) == 1);
    }
    // Majority voting estimates no reliabilities.
    REQUIRE(run.metrics.count("expert_estimation.reliability_mae") == 0);
}

TEST_CASE("noiseless dense experts give perfect annotation quality") {
    std::string path = blob_csv(40, 31, "noiseless.csv");
    ExperimentConfig c = small_config(path);
    c.sim.fixed_participation = 1.0;
    c.sim.fixed_reliability = 1.0;
    c.methods = {ConsensusMethod::majority_voting, ConsensusMethod::em};

    ExperimentReport report = run_experiment(c);
    // Constant hidden reliabilities make correlation cells degenerate; those
    // are the only recorded failures allowed here.
    for (const std::string& f : report.failures)
        REQUIRE(f.find("expert_estimation") != std::string::npos);
    for (const auto& [name, run] : report.runs[0].methods) {
        for (const std::string& cutoff : {"default", "gt_prior", "model_posterior"}) {
            const MetricCell& cell = run.metrics.at("annotation_quality.bac." + std::string(cutoff));
            REQUIRE(cell.value.has_value());
            REQUIRE(*cell.value == 1.0);
        }
    }
}

TEST_CASE("reported group-1 metrics are restricted to annotated samples") {
    std::string path = blob_csv(80, 41, "restricted.csv");
    ExperimentConfig c = small_config(path);
    c.sim.fixed_participation = 0.25; // leaves some train samples unannotated
    c.methods = {ConsensusMethod::em};
    c.seeds = {9};

    ExperimentReport report = run_experiment(c);
    const MethodRunReport& run = report.runs[0].methods.at("em");

    // Rebuild the same pipeline stages from the documented seed derivations.
    Dataset full = load_dataset_csv(path, std::string("label"));
    auto [train, test] = stratified_split(full, c.stratified_fraction, derive_seed(9, 0));
    SimConfig sim = c.sim;
    sim.seed = derive_seed(9, 1);
    auto profiles = sample_expert_profiles(sim, train.n_classes);
    AnnotationSet annotations =
        generate_annotations(one_hot_expand(*train.true_labels, train.n_classes), profiles,
                             derive_seed(9, 2));

    std::vector<std::size_t> annotated;
    for (std::size_t i = 0; i < annotations.n_samples(); ++i)
        if (!annotations.experts_of_sample(i).empty()) annotated.push_back(i);
    REQUIRE(annotated.size() < train.features.rows()); // the regime really is sparse

    ConsensusOutput consensus = run_em(annotations, c.em_config);
    std::vector<std::size_t> truth;
    for (std::size_t i : annotated) truth.push_back((*train.true_labels)[i]);
    double expect = roc_auc_macro(consensus.posterior.take_rows(annotated), truth);
    REQUIRE(run.metrics.at("annotation_quality.auc_macro").value ==
            Catch::Approx(expect).margin(0.0));
}

TEST_CASE("model posterior thresholds come from the stored train posterior") {
    std::string path = blob_csv(60, 51, "provenance.csv");
    ExperimentConfig c = small_config(path);
    c.methods = {ConsensusMethod::em};
    c.cutoffs = {ThresholdMethod::model_posterior};

    ExperimentReport report = run_experiment(c);
    const MethodRunReport& run = report.runs[0].methods.at("em");
    const MethodArtifacts& art = report.artifacts.front();

    ThresholdVector recomputed = model_posterior_thresholds(art.posterior);
    REQUIRE(run.thresholds_train.at("model_posterior") == recomputed.t);

    // The same holds after the posterior file round-trips through disk.
    auto dir = scratch_dir() / "provenance_out";
    std::filesystem::remove_all(dir);
    write_report(report, c, dir.string());
    PosteriorTable table =
        read_posteriors_csv((dir / "posteriors" / "1_em.csv").string());
    ThresholdVector from_disk = model_posterior_thresholds(table.values);
    REQUIRE(run.thresholds_train.at("model_posterior") == from_disk.t);
}

TEST_CASE("majority voting labels cover only annotated samples") {
    std::string path = blob_csv(70, 61, "mvrows.csv");
    ExperimentConfig c = small_config(path);
    c.sim.fixed_participation = 0.3;
    c.methods = {ConsensusMethod::majority_voting, ConsensusMethod::em};
    c.cutoffs = {ThresholdMethod::default_cutoff};

    ExperimentReport report = run_experiment(c);
    const MethodArtifacts* mv = nullptr;
    const MethodArtifacts* em = nullptr;
    for (const auto& art : report.artifacts) {
        if (art.method == "majority_voting") mv = &art;
        if (art.method == "em") em = &art;
    }
    REQUIRE(mv != nullptr);
    REQUIRE(em != nullptr);
    REQUIRE(mv->labels.at("default").first.size() < em->labels.at("default").first.size());
    REQUIRE(em->labels.at("default").first.size() == report.dataset.n_train);
}

TEST_CASE("experiment reports are deterministic") {
    std::string path = blob_csv(50, 71, "determinism.csv");
    ExperimentConfig c = small_config(path);
    c.seeds = {4, 5};

    ExperimentReport a = run_experiment(c);
    ExperimentReport b = run_experiment(c);
    REQUIRE(report_to_json(a, c).dump(2) == report_to_json(b, c).dump(2));
}

TEST_CASE("reports round-trip through JSON") {
    std::string path = blob_csv(50, 81, "roundtrip.csv");
    ExperimentConfig c = small_config(path);
    c.seeds = {2, 3};

    ExperimentReport report = run_experiment(c);
    json j = report_to_json(report, c);
    ExperimentConfig config_back;
    ExperimentReport back = report_from_json(j, &config_back);
    REQUIRE(report_equals(report, back));
    REQUIRE(config_to_json(c).dump() == config_to_json(config_back).dump());
}

TEST_CASE("tables bold the best value per column") {
    std::string path = blob_csv(60, 91, "tables.csv");
    ExperimentConfig c = small_config(path);
    c.seeds = {1, 2, 3};
    c.methods = {ConsensusMethod::em, ConsensusMethod::simulated};

    ExperimentReport report = run_experiment(c);
    std::string tables = render_tables(report, c);

    double best = -1.0;
    std::string best_method;
    for (const auto& [m, keys] : report.aggregates) {
        auto it = keys.find("annotation_quality.auc_macro");
        if (it == keys.end()) continue;
        if (it->second.mean > best) {
            best = it->second.mean;
            best_method = m;
        }
    }
    REQUIRE_FALSE(best_method.empty());
    std::string bolded = "**" + format_fixed(best) + " (±";
    REQUIRE(tables.find(bolded) != std::string::npos);

    // MAE columns prefer the smaller mean.
    double best_mae = 2.0;
    for (const auto& [m, keys] : report.aggregates) {
        auto it = keys.find("expert_estimation.reliability_mae");
        if (it == keys.end()) continue;
        best_mae = std::min(best_mae, it->second.mean);
    }
    REQUIRE(tables.find("**" + format_fixed(best_mae) + " (±") != std::string::npos);
}

TEST_CASE("write_report emits the full file set") {
    std::string path = blob_csv(40, 101, "files.csv");
    ExperimentConfig c = small_config(path);
    c.methods = {ConsensusMethod::em};
    c.cutoffs = {ThresholdMethod::default_cutoff};

    ExperimentReport report = run_experiment(c);
    auto dir = scratch_dir() / "files_out";
    std::filesystem::remove_all(dir);
    write_report(report, c, dir.string());

    REQUIRE(std::filesystem::exists(dir / "report.json"));
    REQUIRE(std::filesystem::exists(dir / "tables.md"));
    REQUIRE(std::filesystem::exists(dir / "posteriors" / "1_em.csv"));
    REQUIRE(std::filesystem::exists(dir / "labels" / "1_em_default.csv"));

    std::string text = slurp((dir / "report.json").string());
    json j = json::parse(text);
    REQUIRE(j.contains("config"));
    REQUIRE(j.contains("runs"));
    REQUIRE(j.contains("aggregates"));
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
    ExperimentConfig c = small_config("data.csv");
    c.em_config.fixed_prior = 0.3;
    c.presplit = PresplitPaths{"train.csv", "test.csv"};
    json j = config_to_json(c);
    ExperimentConfig back = config_from_json(j);
    REQUIRE(config_to_json(back).dump() == j.dump());

    json bad = config_to_json(small_config("data.csv"));
    bad["surprise"] = 1;
    REQUIRE_THROWS_AS(config_from_json(bad), ConfigError);

    json bad_sim = config_to_json(small_config("data.csv"));
    bad_sim["sim"]["typo"] = 2;
    REQUIRE_THROWS_AS(config_from_json(bad_sim), ConfigError);
}

TEST_CASE("presplit datasets are loaded and label-aligned") {
    auto dir = scratch_dir();
    // Train defines the mapping a -> 0, b -> 1; the test file lists b first.
    std::string train_path = (dir / "presplit_train.csv").string();
    std::string test_path = (dir / "presplit_test.csv").string();
    {
        std::ofstream out(train_path);
        out << "f0,label\n0,a\n1,b\n0.1,a\n0.9,b\n0.2,a\n0.8,b\n0.15,a\n0.85,b\n";
    }
    {
        std::ofstream out(test_path);
        out << "f0,label\n0.95,b\n0.05,a\n0.9,b\n0.1,a\n";
    }

    ExperimentConfig c = small_config(train_path);
    c.dataset_path = train_path;
    c.presplit = PresplitPaths{train_path, test_path};
    c.methods = {ConsensusMethod::em};
    c.cutoffs = {ThresholdMethod::default_cutoff};
    c.sim.fixed_participation = 1.0;
    c.sim.fixed_reliability = 1.0;

    ExperimentReport report = run_experiment(c);
    REQUIRE(report.dataset.n_train == 8);
    REQUIRE(report.dataset.n_test == 4);
    REQUIRE(report.dataset.label_names == std::vector<std::string>{"a", "b"});
    // Noiseless experts + a separable feature: the downstream model must score
    // the relabeled test set perfectly, proving the mapping was aligned.
    const MetricCell& bac = report.runs[0].methods.at("em").metrics.at("downstream.bac.default");
    REQUIRE(bac.value.has_value());
    REQUIRE(*bac.value == 1.0);

    // A test label missing from the train mapping is a config error.
    {
        std::ofstream out(test_path);
        out << "f0,label\n0.95,mystery\n0.05,a\n";
    }
    REQUIRE_THROWS_AS(run_experiment(c), ConfigError);
}
