// Command-line driver for dataset generation, the selection/propagation
// pipeline, training, sweeps, and report aggregation.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "priorssl/priorssl.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;  // < 0: use the config's seed
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config file");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides [output] dir)");
    cmd->add_option("--seed", args.seed, "run seed (overrides the config's seed)");
}

priorssl::ExperimentConfig load_config(const CommonArgs& args) {
    priorssl::ExperimentConfig cfg = priorssl::ExperimentConfig::from_file(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

using StageFn = void (*)(const priorssl::ExperimentConfig&, const std::string&, std::uint64_t);

int run_stage(const CommonArgs& args, const char* name, StageFn fn) {
    try {
        const priorssl::ExperimentConfig cfg = load_config(args);
        std::filesystem::create_directories(cfg.out_dir);
        fn(cfg, cfg.out_dir, cfg.seed);
        std::printf("%s: ok (%s)\n", name, cfg.out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stage %s failed: %s\n", name, e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active self-semi-supervised learning toolkit"};
    app.require_subcommand(1);

    CommonArgs gen_args, finetune_args, select_args, propagate_args, train_args, pipeline_args,
        sweep_inj_args, sweep_lab_args;

    auto* gen_cmd = app.add_subcommand("gen-data", "generate or ingest the dataset artifact");
    add_common(gen_cmd, gen_args);

    auto* finetune_cmd =
        app.add_subcommand("finetune", "fine-tune features toward their cluster centers");
    add_common(finetune_cmd, finetune_args);

    auto* select_cmd = app.add_subcommand("select", "pick the labeled set");
    add_common(select_cmd, select_args);

    auto* propagate_cmd =
        app.add_subcommand("propagate", "cluster and propagate labels into a prior");
    add_common(propagate_cmd, propagate_args);

    auto* train_cmd = app.add_subcommand("train", "train the semi-supervised model");
    add_common(train_cmd, train_args);

    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage end to end");
    add_common(pipeline_cmd, pipeline_args);

    auto* sweep_inj_cmd =
        app.add_subcommand("sweep-injection", "compare prior-injection windows across seeds");
    add_common(sweep_inj_cmd, sweep_inj_args);

    auto* sweep_lab_cmd =
        app.add_subcommand("sweep-labels", "compare labeled-set sizes across seeds");
    add_common(sweep_lab_cmd, sweep_lab_args);

    CommonArgs report_args;
    std::vector<std::string> report_dirs;
    auto* report_cmd = app.add_subcommand("report", "aggregate run directories into summaries");
    add_common(report_cmd, report_args, /*config_required=*/false);
    report_cmd->add_option("dirs", report_dirs, "run directories to aggregate")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen_cmd->parsed()) return run_stage(gen_args, "features", priorssl::stage_features);
    if (finetune_cmd->parsed())
        return run_stage(finetune_args, "finetune", priorssl::stage_finetune);
    if (select_cmd->parsed()) return run_stage(select_args, "select", priorssl::stage_select);
    if (propagate_cmd->parsed()) {
        const int rc = run_stage(propagate_args, "cluster", priorssl::stage_cluster);
        if (rc != 0) return rc;
        return run_stage(propagate_args, "propagate", priorssl::stage_propagate);
    }
    if (train_cmd->parsed()) return run_stage(train_args, "train", priorssl::stage_train);

    if (pipeline_cmd->parsed()) {
        try {
            const priorssl::ExperimentConfig cfg = load_config(pipeline_args);
            const priorssl::RunManifest manifest = priorssl::run_pipeline(cfg);
            std::printf("pipeline: ok, %zu stages, config %s, seed %llu (%s)\n",
                        manifest.stages.size(), manifest.config_hash.c_str(),
                        static_cast<unsigned long long>(manifest.seed), cfg.out_dir.c_str());
            return 0;
        } catch (const priorssl::StageError& e) {
            std::fprintf(stderr, "%s\n", e.what());
            return 1;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "pipeline failed: %s\n", e.what());
            return 1;
        }
    }

    if (sweep_inj_cmd->parsed()) {
        try {
            const priorssl::ExperimentConfig cfg = load_config(sweep_inj_args);
            const auto summaries = priorssl::run_injection_sweep(cfg, cfg.sweep.injection_starts,
                                                                 cfg.sweep.injection_duration);
            for (const auto& s : summaries)
                std::printf("%-12s mean %.4f  std %.4f  (%zu runs)\n", s.arm.c_str(), s.mean,
                            s.stddev, s.runs);
            return 0;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "sweep-injection failed: %s\n", e.what());
            return 1;
        }
    }

    if (sweep_lab_cmd->parsed()) {
        try {
            const priorssl::ExperimentConfig cfg = load_config(sweep_lab_args);
            const auto summaries = priorssl::run_label_sweep(cfg);
            for (const auto& s : summaries)
                std::printf("%zu labels/class: pl_acc %.4f±%.4f  test_acc %.4f±%.4f  (%zu runs)\n",
                            s.labels_per_class, s.mean_pl_acc, s.std_pl_acc, s.mean_test_acc,
                            s.std_test_acc, s.runs);
            return 0;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "sweep-labels failed: %s\n", e.what());
            return 1;
        }
    }

    if (report_cmd->parsed()) {
        try {
            const std::string out = report_args.out_dir.empty() ? "report" : report_args.out_dir;
            const priorssl::ReportResult result = priorssl::report_runs(report_dirs, out);
            for (const auto& dir : result.skipped)
                std::fprintf(stderr, "warning: no readable manifest in %s, skipped\n", dir.c_str());
            std::printf("report: %zu runs aggregated, %zu skipped (%s)\n", result.runs_used,
                        result.skipped.size(), out.c_str());
            return 0;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "report failed: %s\n", e.what());
            return 1;
        }
    }
    return 0;
}
