#ifndef PRIORSSL_PIPELINE_HPP
#define PRIORSSL_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "priorssl/active.hpp"
#include "priorssl/config.hpp"
#include "priorssl/datasets.hpp"
#include "priorssl/io.hpp"
#include "priorssl/kmeans.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/mlp.hpp"
#include "priorssl/ppl.hpp"
#include "priorssl/train.hpp"

namespace priorssl {

// ---------------------------------------------------------------------------
// Run manifest.

struct StageInfo {
    std::string name;
    std::string path;  // artifact file name inside the run directory
    long long millis = 0;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string status;  // "ok" or "failed"
    std::string failed_stage;
    std::vector<StageInfo> stages;
};

inline const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names{"features", "finetune", "select",
                                                "cluster",  "propagate", "train"};
    return names;
}

inline void save_manifest(const std::string& path, const RunManifest& m) {
    std::ostringstream out;
    out << "config_hash = \"" << m.config_hash << "\"\n";
    out << "seed = " << m.seed << "\n";
    out << "status = \"" << m.status << "\"\n";
    out << "failed_stage = \"" << m.failed_stage << "\"\n";
    for (const auto& s : m.stages) {
        out << "\n[stage." << s.name << "]\n";
        out << "path = \"" << s.path << "\"\n";
        out << "millis = " << s.millis << "\n";
    }
    write_text_file(path, out.str());
}

inline RunManifest load_manifest(const std::string& path) {
    const ConfigTable t = ConfigTable::parse_file(path);
    RunManifest m;
    m.config_hash = t.get_text("config_hash", "");
    m.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));
    m.status = t.get_text("status", "");
    m.failed_stage = t.get_text("failed_stage", "");
    for (const auto& name : pipeline_stage_names()) {
        const std::string key = "stage." + name;
        if (!t.has(key + ".path")) continue;
        StageInfo s;
        s.name = name;
        s.path = t.get_text(key + ".path", "");
        s.millis = t.get_int(key + ".millis", 0);
        m.stages.push_back(std::move(s));
    }
    return m;
}

class StageError : public std::runtime_error {
public:
    StageError(std::string stage_name, const std::string& message)
        : std::runtime_error("stage " + stage_name + " failed: " + message),
          stage(std::move(stage_name)) {}
    std::string stage;
};

// ---------------------------------------------------------------------------
// Seed derivation: every stage works from its own stream so inserting or
// replaying a stage never shifts another stage's draws.

namespace detail {
constexpr std::uint64_t kSeedTagData = 0x64617461;
constexpr std::uint64_t kSeedTagTest = 0x74657374;
constexpr std::uint64_t kSeedTagFinetune = 0x66696e65;
constexpr std::uint64_t kSeedTagSelect = 0x73656c65;
constexpr std::uint64_t kSeedTagCluster = 0x636c7573;
constexpr std::uint64_t kSeedTagTrain = 0x74726169;
}  // namespace detail

// ---------------------------------------------------------------------------
// In-memory stage computations, shared by the file pipeline and the sweeps.

struct PipelineData {
    Matrix x;
    LabelVector y;
    Matrix x_test;       // rows == 0 when no test split exists
    LabelVector y_test;
};

inline PipelineData make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    const std::uint64_t data_seed = hash_combine(seed, detail::kSeedTagData);
    const std::uint64_t test_seed = hash_combine(seed, detail::kSeedTagTest);
    PipelineData out;
    if (cfg.dataset.kind == "moons") {
        auto [x, y] = gen_two_moons(cfg.dataset.n, cfg.dataset.noise, data_seed);
        out.x = std::move(x);
        out.y = std::move(y);
        if (cfg.dataset.test_fraction > 0.0) {
            std::size_t tn = static_cast<std::size_t>(
                std::llround(static_cast<double>(cfg.dataset.n) * cfg.dataset.test_fraction));
            tn += tn % 2;  // the generator needs an even count
            tn = std::max<std::size_t>(tn, 2);
            auto [xt, yt] = gen_two_moons(tn, cfg.dataset.noise, test_seed);
            out.x_test = std::move(xt);
            out.y_test = std::move(yt);
        }
    } else if (cfg.dataset.kind == "blobs") {
        auto [x, y] = gen_blobs(cfg.dataset.n, cfg.dataset.classes, cfg.dataset.spread, data_seed);
        out.x = std::move(x);
        out.y = std::move(y);
        if (cfg.dataset.test_fraction > 0.0) {
            std::size_t tn = static_cast<std::size_t>(
                std::llround(static_cast<double>(cfg.dataset.n) * cfg.dataset.test_fraction));
            tn = std::max(tn, cfg.dataset.classes);
            auto [xt, yt] = gen_blobs(tn, cfg.dataset.classes, cfg.dataset.spread, test_seed);
            out.x_test = std::move(xt);
            out.y_test = std::move(yt);
        }
    } else {  // embedding
        if (cfg.dataset.embedding_path.empty())
            throw std::invalid_argument("dataset.embedding_path is required for kind = embedding");
        if (cfg.dataset.labels_path.empty())
            throw std::invalid_argument("dataset.labels_path is required for kind = embedding");
        out.x = load_embedding(cfg.dataset.embedding_path);
        out.y = load_label_file(cfg.dataset.labels_path);
        if (out.y.labels.size() != out.x.rows)
            throw std::invalid_argument("embedding has " + std::to_string(out.x.rows) +
                                        " rows but label file has " +
                                        std::to_string(out.y.labels.size()));
    }
    return out;
}

inline Matrix compute_finetuned(const ExperimentConfig& cfg, const Matrix& x,
                                std::uint64_t seed) {
    if (!cfg.finetune.enabled) return x;
    FineTuneConfig ft;
    ft.C = cfg.finetune.C;
    ft.K = std::min(cfg.finetune.K, x.rows);
    ft.epochs = cfg.finetune.epochs;
    ft.learning_rate = cfg.finetune.learning_rate;
    ft.rng_seed = hash_combine(seed, detail::kSeedTagFinetune);
    return finetune_features(x, ft);
}

// truth-stratified uniform pick: per_class samples from every class
inline std::vector<std::size_t> stratified_random_indices(const LabelVector& y,
                                                          std::size_t per_class,
                                                          std::uint64_t rng_seed) {
    check_labels(y, "stratified_random_indices");
    Rng rng(rng_seed);
    std::vector<std::size_t> picks;
    for (int c = 0; c < y.num_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.labels.size(); ++i)
            if (y.labels[i] == c) members.push_back(i);
        if (members.size() < per_class)
            throw std::invalid_argument("stratified_random_indices: class " + std::to_string(c) +
                                        " has only " + std::to_string(members.size()) +
                                        " samples, need " + std::to_string(per_class));
        for (std::size_t j : rng.sample_without_replacement(members.size(), per_class))
            picks.push_back(members[j]);
    }
    return picks;
}

struct SelectionOutcome {
    std::vector<std::size_t> picks;
    std::vector<SelectionRow> rows;
};

inline SelectionOutcome compute_selection(const ExperimentConfig& cfg, const Matrix& f_fine,
                                          const LabelVector& y, std::uint64_t seed) {
    const std::uint64_t sel_seed = hash_combine(seed, detail::kSeedTagSelect);
    SelectionOutcome out;
    if (cfg.selection.method == SelectionMethod::active) {
        const std::vector<std::size_t> K_list(cfg.finetune.C,
                                              std::min(cfg.selection.m, f_fine.rows));
        const MultiClusterRun mc = multi_cluster(f_fine, K_list, sel_seed);
        const auto groups = stable_groups(f_fine, mc);
        out.picks = select_active(f_fine, groups, cfg.selection.m);
        out.rows = selection_table(out.picks, &groups);
        return out;
    }
    if (cfg.selection.method == SelectionMethod::random && cfg.selection.stratified) {
        const auto classes = static_cast<std::size_t>(y.num_classes);
        if (cfg.selection.m % classes != 0)
            throw std::invalid_argument("stratified selection needs m divisible by class count");
        out.picks = stratified_random_indices(y, cfg.selection.m / classes, sel_seed);
    } else {
        out.picks = baseline_select(cfg.selection.method, f_fine, cfg.selection.m, sel_seed);
    }
    out.rows = selection_table(out.picks, nullptr);
    return out;
}

inline MultiClusterRun compute_clusters(const ExperimentConfig& cfg, const Matrix& f_fine,
                                        const std::vector<std::size_t>& selection,
                                        const LabelVector& y, std::uint64_t seed) {
    const std::uint64_t cl_seed = hash_combine(seed, detail::kSeedTagCluster);
    if (cfg.propagation.constrained == "none")
        return multi_cluster(f_fine, cfg.propagation.K_list, cl_seed);
    SeedConstraints constraints;
    constraints.mode = cfg.propagation.constrained == "pinned" ? ConstraintMode::pinned
                                                               : ConstraintMode::seed_only;
    for (std::size_t i : selection) constraints.pinned.emplace_back(i, y.labels[i]);
    return multi_cluster(f_fine, cfg.propagation.K_list, &constraints, cl_seed);
}

// prior with no propagation at all: labeled one-hots, everything else uncovered
inline PriorPseudoLabels make_empty_ppl(const DatasetSplit& split) {
    const std::size_t n = split.total();
    const auto classes = static_cast<std::size_t>(split.labeled_labels.num_classes);
    PriorPseudoLabels ppl;
    ppl.num_classes = split.labeled_labels.num_classes;
    ppl.probs = Matrix(n, classes);
    ppl.covered.assign(n, 0);
    ppl.labeled.assign(n, 0);
    for (std::size_t li = 0; li < split.labeled.size(); ++li) {
        const std::size_t i = split.labeled[li];
        ppl.probs.at(i, static_cast<std::size_t>(split.labeled_labels.labels[li])) = 1.0;
        ppl.covered[i] = 1;
        ppl.labeled[i] = 1;
    }
    return ppl;
}

// ground-truth one-hot prior for every sample; the upper-bound arm in
// injection experiments
inline PriorPseudoLabels make_oracle_ppl(const DatasetSplit& split, const LabelVector& y) {
    PriorPseudoLabels ppl = make_empty_ppl(split);
    for (std::size_t i = 0; i < ppl.probs.rows; ++i) {
        if (ppl.labeled[i]) continue;
        ppl.probs.at(i, static_cast<std::size_t>(y.labels[i])) = 1.0;
        ppl.covered[i] = 1;
    }
    return ppl;
}

inline PriorPseudoLabels compute_ppl(const ExperimentConfig& cfg,
                                     const std::vector<std::vector<int>>& run_assignments,
                                     const DatasetSplit& split, const Matrix& f_fine,
                                     const LabelVector& y) {
    if (cfg.propagation.mode == "cluster") return propagate_from_assignments(run_assignments, split);
    if (cfg.propagation.mode == "llgc") {
        const std::size_t k_nn = std::min(cfg.propagation.k_nn, f_fine.rows - 1);
        const double sigma = cfg.propagation.sigma > 0.0 ? cfg.propagation.sigma
                                                         : mean_knn_distance(f_fine, k_nn);
        return llgc_propagate(f_fine, split, cfg.propagation.alpha, sigma, k_nn);
    }
    if (cfg.propagation.mode == "oracle") return make_oracle_ppl(split, y);
    return make_empty_ppl(split);
}

inline TrainResult run_training(const ExperimentConfig& cfg, const PipelineData& data,
                                const DatasetSplit& split, const PriorPseudoLabels& ppl,
                                std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.rng_seed = hash_combine(seed, detail::kSeedTagTrain);
    return train(data.x, data.y, split, ppl, tc, data.x_test, data.y_test);
}

// ---------------------------------------------------------------------------
// File-based stages. Each one reads only the config and prior artifacts, so
// any stage can be replayed in isolation and reproduces its outputs exactly.

namespace detail {

inline std::string joined(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

inline void stage_features(const ExperimentConfig& cfg, const std::string& dir,
                           std::uint64_t seed) {
    const PipelineData data = make_dataset(cfg, seed);
    save_dataset_csv(detail::joined(dir, "features.csv"), data.x, data.y);
    if (data.x_test.rows > 0)
        save_dataset_csv(detail::joined(dir, "test.csv"), data.x_test, data.y_test);
}

inline void stage_finetune(const ExperimentConfig& cfg, const std::string& dir,
                           std::uint64_t seed) {
    const auto [x, y] = load_dataset_csv(detail::joined(dir, "features.csv"));
    save_embedding(detail::joined(dir, "f_fine.txt"), compute_finetuned(cfg, x, seed));
}

inline void stage_select(const ExperimentConfig& cfg, const std::string& dir,
                         std::uint64_t seed) {
    const auto [x, y] = load_dataset_csv(detail::joined(dir, "features.csv"));
    const Matrix f_fine = load_embedding(detail::joined(dir, "f_fine.txt"));
    const SelectionOutcome sel = compute_selection(cfg, f_fine, y, seed);
    save_selection_csv(detail::joined(dir, "selection.csv"), sel.rows);
}

inline void stage_cluster(const ExperimentConfig& cfg, const std::string& dir,
                          std::uint64_t seed) {
    const auto [x, y] = load_dataset_csv(detail::joined(dir, "features.csv"));
    const Matrix f_fine = load_embedding(detail::joined(dir, "f_fine.txt"));
    const auto rows = load_selection_csv(detail::joined(dir, "selection.csv"));
    std::vector<std::size_t> selection;
    for (const auto& r : rows) selection.push_back(r.sample_index);
    save_assignments_csv(detail::joined(dir, "clusters.csv"),
                         compute_clusters(cfg, f_fine, selection, y, seed));
}

inline void stage_propagate(const ExperimentConfig& cfg, const std::string& dir,
                            std::uint64_t /*seed*/) {
    const auto [x, y] = load_dataset_csv(detail::joined(dir, "features.csv"));
    const Matrix f_fine = load_embedding(detail::joined(dir, "f_fine.txt"));
    const auto rows = load_selection_csv(detail::joined(dir, "selection.csv"));
    std::vector<std::size_t> selection;
    for (const auto& r : rows) selection.push_back(r.sample_index);
    const DatasetSplit split = make_split(y, selection);
    const auto assignments = load_assignments_csv(detail::joined(dir, "clusters.csv"));
    save_ppl_csv(detail::joined(dir, "ppl.csv"), compute_ppl(cfg, assignments, split, f_fine, y));
}

inline void stage_train(const ExperimentConfig& cfg, const std::string& dir, std::uint64_t seed) {
    PipelineData data;
    {
        auto [x, y] = load_dataset_csv(detail::joined(dir, "features.csv"));
        data.x = std::move(x);
        data.y = std::move(y);
    }
    if (file_exists(detail::joined(dir, "test.csv"))) {
        auto [xt, yt] = load_dataset_csv(detail::joined(dir, "test.csv"));
        data.x_test = std::move(xt);
        data.y_test = std::move(yt);
        // the train pool fixes the label universe; a small test draw may
        // miss classes, so align the class counts
        data.y_test.num_classes = std::max(data.y_test.num_classes, data.y.num_classes);
    }
    const auto rows = load_selection_csv(detail::joined(dir, "selection.csv"));
    std::vector<std::size_t> selection;
    for (const auto& r : rows) selection.push_back(r.sample_index);
    const DatasetSplit split = make_split(data.y, selection);

    PriorPseudoLabels ppl = load_ppl_csv(detail::joined(dir, "ppl.csv"));
    for (std::size_t i : selection) ppl.labeled[i] = 1;

    const TrainResult result = run_training(cfg, data, split, ppl, seed);
    save_train_csv(detail::joined(dir, "train.csv"), result.record);
    save_checkpoint(detail::joined(dir, "checkpoint.txt"), result.model);

    std::ostringstream metrics;
    const auto& accs = result.record.checkpoint_accuracies;
    metrics << "test_acc_final = " << fmt_double(accs.back()) << "\n";
    if (accs.size() >= 20)
        metrics << "test_acc_median_last20 = " << fmt_double(median_last_k(accs, 20)) << "\n";
    const auto pacc = ppl_accuracy(ppl, data.y);
    if (pacc) metrics << "ppl_accuracy = " << fmt_double(*pacc) << "\n";
    metrics << "ppl_coverage = " << fmt_double(ppl_coverage(ppl)) << "\n";
    bool any_covered = false;
    for (char c : ppl.covered) any_covered |= (c != 0);
    if (any_covered) metrics << "ece_ppl = " << fmt_double(ece(ppl, data.y, 15)) << "\n";
    metrics << "mask_rate_final = " << fmt_double(result.record.entries.back().mask_rate) << "\n";
    metrics << "pl_acc_final = " << fmt_double(result.record.entries.back().pl_acc) << "\n";
    write_text_file(detail::joined(dir, "metrics.txt"), metrics.str());
}

// ---------------------------------------------------------------------------
// Full pipeline.

inline RunManifest run_pipeline(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const std::string dir = cfg.out_dir;
    fs::create_directories(dir);

    RunManifest manifest;
    manifest.config_hash = cfg.config_hash;
    manifest.seed = cfg.seed;
    manifest.status = "ok";

    struct Stage {
        const char* name;
        const char* artifact;
        void (*fn)(const ExperimentConfig&, const std::string&, std::uint64_t);
    };
    const Stage stages[] = {
        {"features", "features.csv", stage_features}, {"finetune", "f_fine.txt", stage_finetune},
        {"select", "selection.csv", stage_select},    {"cluster", "clusters.csv", stage_cluster},
        {"propagate", "ppl.csv", stage_propagate},    {"train", "train.csv", stage_train},
    };
    for (const Stage& s : stages) {
        const auto start = std::chrono::steady_clock::now();
        try {
            s.fn(cfg, dir, cfg.seed);
        } catch (const std::exception& e) {
            manifest.status = "failed";
            manifest.failed_stage = s.name;
            save_manifest(detail::joined(dir, "manifest.txt"), manifest);
            throw StageError(s.name, e.what());
        }
        const auto end = std::chrono::steady_clock::now();
        StageInfo info;
        info.name = s.name;
        info.path = s.artifact;
        info.millis = std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
        manifest.stages.push_back(std::move(info));
    }
    save_manifest(detail::joined(dir, "manifest.txt"), manifest);
    return manifest;
}

// ---------------------------------------------------------------------------
// Sweeps. Both run the data/selection/propagation stages once per seed in
// memory, then train every arm from that shared state.

struct ArmSummary {
    std::string arm;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t runs = 0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

// Trains one arm per injection start plus a never-inject arm, every arm over
// the same per-seed data/selection/prior state, and reports final test
// accuracy per arm.
inline std::vector<ArmSummary> run_injection_sweep(const ExperimentConfig& cfg,
                                                   const std::vector<std::size_t>& starts,
                                                   std::size_t duration) {
    if (cfg.train.T > 0)
        throw std::invalid_argument(
            "injection sweep: switching-point fusion (train.T > 0) is active; the two fusion "
            "schedules are mutually exclusive");
    for (std::size_t s : starts)
        if (s + duration > cfg.train.total_iters)
            throw std::invalid_argument("injection sweep: window [" + std::to_string(s) + ", " +
                                        std::to_string(s + duration) + ") exceeds total_iters");
    if (cfg.sweep.seeds < 1) throw std::invalid_argument("injection sweep: needs at least 1 seed");

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    std::vector<std::pair<std::string, std::size_t>> arms;  // (name, start)
    arms.emplace_back("never", 0);
    for (std::size_t s : starts) arms.emplace_back("start-" + std::to_string(s), s);

    std::map<std::string, std::vector<double>> finals;
    std::ostringstream runs_csv;
    runs_csv << "arm,start,duration,seed,final_test_acc\n";

    for (std::size_t si = 0; si < cfg.sweep.seeds; ++si) {
        const std::uint64_t seed = cfg.seed + si;
        const PipelineData data = make_dataset(cfg, seed);
        const Matrix f_fine = compute_finetuned(cfg, data.x, seed);
        const SelectionOutcome sel = compute_selection(cfg, f_fine, data.y, seed);
        const DatasetSplit split = make_split(data.y, sel.picks);
        std::vector<std::vector<int>> assignments;
        if (cfg.propagation.mode == "cluster") {
            const MultiClusterRun mc = compute_clusters(cfg, f_fine, sel.picks, data.y, seed);
            for (const auto& run : mc.runs) assignments.push_back(run.assignment);
        }
        const PriorPseudoLabels ppl = compute_ppl(cfg, assignments, split, f_fine, data.y);

        for (const auto& [name, start] : arms) {
            ExperimentConfig arm_cfg = cfg;
            arm_cfg.train.injection_start = start;
            arm_cfg.train.injection_duration = name == "never" ? 0 : duration;
            const TrainResult result = run_training(arm_cfg, data, split, ppl, seed);
            const double final_acc = result.record.entries.back().test_acc;
            finals[name].push_back(final_acc);
            runs_csv << name << ',' << start << ','
                     << (name == "never" ? 0 : duration) << ',' << seed << ','
                     << fmt_double(final_acc) << "\n";
        }
    }

    std::vector<ArmSummary> summaries;
    std::ostringstream summary_csv;
    summary_csv << "arm,start,duration,runs,mean_final_acc,std_final_acc\n";
    for (const auto& [name, start] : arms) {
        const auto [mean, sd] = mean_std(finals[name]);
        summaries.push_back({name, mean, sd, finals[name].size()});
        summary_csv << name << ',' << start << ',' << (name == "never" ? 0 : duration) << ','
                    << finals[name].size() << ',' << fmt_double(mean) << ',' << fmt_double(sd)
                    << "\n";
    }
    write_text_file(detail::joined(cfg.out_dir, "sweep_injection_runs.csv"), runs_csv.str());
    write_text_file(detail::joined(cfg.out_dir, "sweep_injection_summary.csv"), summary_csv.str());
    return summaries;
}

struct LabelArmSummary {
    std::size_t labels_per_class = 0;
    double mean_pl_acc = 0.0;
    double std_pl_acc = 0.0;
    double mean_test_acc = 0.0;
    double std_test_acc = 0.0;
    std::size_t runs = 0;
};

// Per labels-per-class arm: truth-stratified random labeled sets, shared
// training config; reports converged pseudo-label accuracy (median of the
// last up-to-20 logged values) and final test accuracy.
inline std::vector<LabelArmSummary> run_label_sweep(const ExperimentConfig& cfg) {
    if (cfg.sweep.labels_per_class.empty())
        throw std::invalid_argument("label sweep: sweep.labels_per_class is empty");
    if (cfg.sweep.seeds < 1) throw std::invalid_argument("label sweep: needs at least 1 seed");

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    std::ostringstream runs_csv;
    runs_csv << "labels_per_class,seed,converged_pl_acc,final_test_acc\n";
    std::vector<LabelArmSummary> summaries;

    for (std::size_t per_class : cfg.sweep.labels_per_class) {
        std::vector<double> pl_accs, test_accs;
        for (std::size_t si = 0; si < cfg.sweep.seeds; ++si) {
            const std::uint64_t seed = cfg.seed + si;
            const PipelineData data = make_dataset(cfg, seed);
            const Matrix f_fine = compute_finetuned(cfg, data.x, seed);
            const auto picks = stratified_random_indices(
                data.y, per_class, hash_combine(seed, detail::kSeedTagSelect));
            const DatasetSplit split = make_split(data.y, picks);
            std::vector<std::vector<int>> assignments;
            if (cfg.propagation.mode == "cluster") {
                const MultiClusterRun mc = compute_clusters(cfg, f_fine, picks, data.y, seed);
                for (const auto& run : mc.runs) assignments.push_back(run.assignment);
            }
            const PriorPseudoLabels ppl = compute_ppl(cfg, assignments, split, f_fine, data.y);
            const TrainResult result = run_training(cfg, data, split, ppl, seed);

            std::vector<double> pl_curve;
            for (const auto& e : result.record.entries) pl_curve.push_back(e.pl_acc);
            const std::size_t k = std::min<std::size_t>(20, pl_curve.size());
            const double converged_pl = median_last_k(pl_curve, k);
            const double final_acc = result.record.entries.back().test_acc;
            pl_accs.push_back(converged_pl);
            test_accs.push_back(final_acc);
            runs_csv << per_class << ',' << seed << ',' << fmt_double(converged_pl) << ','
                     << fmt_double(final_acc) << "\n";
        }
        const auto [pm, ps] = mean_std(pl_accs);
        const auto [tm, ts] = mean_std(test_accs);
        summaries.push_back({per_class, pm, ps, tm, ts, pl_accs.size()});
    }

    std::ostringstream summary_csv;
    summary_csv << "labels_per_class,runs,mean_pl_acc,std_pl_acc,mean_test_acc,std_test_acc\n";
    for (const auto& s : summaries)
        summary_csv << s.labels_per_class << ',' << s.runs << ',' << fmt_double(s.mean_pl_acc)
                    << ',' << fmt_double(s.std_pl_acc) << ',' << fmt_double(s.mean_test_acc) << ','
                    << fmt_double(s.std_test_acc) << "\n";
    write_text_file(detail::joined(cfg.out_dir, "sweep_labels_runs.csv"), runs_csv.str());
    write_text_file(detail::joined(cfg.out_dir, "sweep_labels_summary.csv"), summary_csv.str());
    return summaries;
}

// ---------------------------------------------------------------------------
// Report: aggregate metrics across run directories, grouped by config hash.

struct ReportResult {
    std::size_t runs_used = 0;
    std::vector<std::string> skipped;  // directories without a readable manifest
};

inline ReportResult report_runs(std::vector<std::string> run_dirs, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::sort(run_dirs.begin(), run_dirs.end());

    struct RunMetrics {
        std::uint64_t seed;
        std::map<std::string, double> values;
    };
    std::map<std::string, std::vector<RunMetrics>> by_hash;
    std::ostringstream plot_csv;
    plot_csv << "config_hash,seed,curve,iter,value\n";
    ReportResult result;

    for (const auto& dir : run_dirs) {
        const std::string manifest_path = detail::joined(dir, "manifest.txt");
        if (!file_exists(manifest_path)) {
            result.skipped.push_back(dir);
            continue;
        }
        RunManifest manifest;
        try {
            manifest = load_manifest(manifest_path);
        } catch (const std::exception&) {
            result.skipped.push_back(dir);
            continue;
        }
        RunMetrics rm;
        rm.seed = manifest.seed;
        const std::string metrics_path = detail::joined(dir, "metrics.txt");
        if (file_exists(metrics_path)) {
            const ConfigTable t = ConfigTable::parse_file(metrics_path);
            for (const char* key : {"test_acc_final", "test_acc_median_last20", "ppl_accuracy",
                                    "ppl_coverage", "ece_ppl", "mask_rate_final", "pl_acc_final"})
                if (t.has(key)) rm.values[key] = t.get_real(key, 0.0);
        }
        by_hash[manifest.config_hash].push_back(std::move(rm));
        ++result.runs_used;

        const std::string train_path = detail::joined(dir, "train.csv");
        if (file_exists(train_path)) {
            const TrainRecord record = load_train_csv(train_path);
            for (const auto& e : record.entries) {
                const auto emit = [&](const char* curve, double v) {
                    plot_csv << manifest.config_hash << ',' << manifest.seed << ',' << curve << ','
                             << e.iter << ',' << fmt_double(v) << "\n";
                };
                emit("loss_l", e.loss_l);
                emit("loss_un", e.loss_un);
                emit("mask_rate", e.mask_rate);
                emit("pl_acc", e.pl_acc);
                emit("test_acc", e.test_acc);
            }
        }
    }

    const char* metric_keys[] = {"test_acc_final", "test_acc_median_last20", "ppl_accuracy",
                                 "ppl_coverage",   "ece_ppl",                "mask_rate_final",
                                 "pl_acc_final"};
    std::ostringstream summary_csv;
    summary_csv << "config_hash,runs";
    for (const char* key : metric_keys) summary_csv << ",mean_" << key << ",std_" << key;
    summary_csv << "\n";
    for (const auto& [hash, runs] : by_hash) {
        summary_csv << hash << ',' << runs.size();
        for (const char* key : metric_keys) {
            std::vector<double> vals;
            for (const auto& rm : runs) {
                const auto it = rm.values.find(key);
                if (it != rm.values.end() && std::isfinite(it->second)) vals.push_back(it->second);
            }
            if (vals.empty()) {
                summary_csv << ",,";
            } else {
                const auto [mean, sd] = mean_std(vals);
                summary_csv << ',' << fmt_double(mean) << ',' << fmt_double(sd);
            }
        }
        summary_csv << "\n";
    }
    write_text_file(detail::joined(out_dir, "summary.csv"), summary_csv.str());
    write_text_file(detail::joined(out_dir, "plot_data.csv"), plot_csv.str());
    return result;
}

}  // namespace priorssl

#endif
