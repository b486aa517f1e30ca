#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "packgen/pipeline.hpp"
#include <CLI11.hpp>

using namespace packgen;

int main(int argc, char** argv) {
    CLI::App app{"battery-cell layout generation, thermal labeling, and cooling-guided "
                 "diffusion sampling"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    int jobs = -1;
    app.add_option("-c,--config", config_path, "TOML configuration file");
    app.add_option("--set", overrides, "override config values, section.key=value");
    app.add_option("-o,--out", out_dir, "output root (overrides config and env)");
    app.add_option("-j,--jobs", jobs, "worker thread cap");

    auto* cmd_gen = app.add_subcommand("gen-data", "generate feasible layouts and augment them");
    auto* cmd_select = app.add_subcommand("select", "reduce each category to k medoid layouts");
    auto* cmd_sim = app.add_subcommand("simulate", "thermally label the selected layouts");
    auto* cmd_smogn = app.add_subcommand("smogn", "rebalance the labeled dataset");
    auto* cmd_clf = app.add_subcommand("train-classifier", "train the feasibility classifier");
    auto* cmd_sur = app.add_subcommand("train-surrogate", "train the temperature surrogate");
    auto* cmd_ddpm = app.add_subcommand("train-ddpm", "train the denoiser");
    auto* cmd_sample = app.add_subcommand("sample", "sample layouts from the trained model");
    auto* cmd_eval = app.add_subcommand("evaluate", "compute metrics for a sample file");
    auto* cmd_sweep = app.add_subcommand("sweep", "run the (gamma, lambda) grid");
    auto* cmd_report = app.add_subcommand("report", "assemble figures and the run ledger");

    double gamma = 0.0, lambda = 0.0;
    int count = 200;
    std::string tag;
    cmd_sample->add_option("--gamma", gamma, "classifier guidance weight");
    cmd_sample->add_option("--lambda", lambda, "cooling guidance weight");
    cmd_sample->add_option("--count", count, "number of samples");
    cmd_sample->add_option("--tag", tag, "artifact tag (default guided/unguided)");

    std::string samples_path, eval_label = "eval";
    cmd_eval->add_option("--samples", samples_path, "samples JSONL to score")->required();
    cmd_eval->add_option("--label", eval_label, "label for the metrics artifacts");

    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig cfg;
        try {
            cfg = load_config(config_path, overrides);
            if (const char* env = std::getenv("PACKGEN_OUT_DIR"); env && *env)
                cfg.out_dir = env;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (jobs >= 0) cfg.jobs = jobs;
            cfg.validate();
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        }
#ifdef _OPENMP
        if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
#endif
        Pipeline pipeline(cfg);

        if (cmd_gen->parsed()) pipeline.gen_data();
        if (cmd_select->parsed()) pipeline.select();
        if (cmd_sim->parsed()) pipeline.simulate();
        if (cmd_smogn->parsed()) pipeline.smogn_stage();
        if (cmd_clf->parsed()) pipeline.train_classifier();
        if (cmd_sur->parsed()) pipeline.train_surrogate();
        if (cmd_ddpm->parsed()) pipeline.train_ddpm();
        if (cmd_sample->parsed()) {
            if (tag.empty()) tag = (gamma != 0.0 || lambda != 0.0) ? "guided" : "unguided";
            const SampleBatch batch = pipeline.sample(gamma, lambda, count, tag);
            std::size_t feasible = 0;
            for (const SampleItem& item : batch.items) feasible += item.feasible ? 1 : 0;
            std::cout << "sampled " << batch.items.size() << " layouts, " << feasible
                      << " feasible -> " << pipeline.samples_path(tag) << "\n";
        }
        if (cmd_eval->parsed()) {
            const MetricsReport report = pipeline.evaluate(samples_path, eval_label);
            std::cout << "f_r=" << report.f_r << " d_s=" << report.d_s
                      << " t_norm=" << report.t_norm_mean << " cqi=" << report.cqi << "\n";
        }
        if (cmd_sweep->parsed()) {
            const SweepResult sweep = pipeline.sweep();
            const SweepCell* best = nullptr;
            for (const SweepCell& cell : sweep.cells)
                if (!cell.failed && (!best || cell.metrics.cqi > best->metrics.cqi)) best = &cell;
            if (best)
                std::cout << "best cell gamma=" << best->gamma << " lambda=" << best->lambda
                          << " cqi=" << best->metrics.cqi << "\n";
        }
        if (cmd_report->parsed()) pipeline.report();
    } catch (const MissingInputError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
