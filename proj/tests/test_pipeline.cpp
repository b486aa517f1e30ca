#include <doctest.h>

#include <stdexcept>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "packgen/pipeline.hpp"

using namespace packgen;
namespace fs = std::filesystem;

namespace {

PipelineConfig tiny_config(const std::string& out_dir) {
    TomlTable table = parse_toml(
        "[global]\n"
        "seed = 4242\n"
        "[relax]\n"
        "per_category = 6\n"
        "categories = [1.0, 1.5]\n"
        "augment_variants = 2\n"
        "[selection]\n"
        "k_per_category = 3\n"
        "resolution = 125\n"
        "[thermal]\n"
        "grid_n = 50\n"
        "[neural]\n"
        "classifier_epochs = 4\n"
        "surrogate_epochs = 6\n"
        "batch = 16\n"
        "folds = 3\n"
        "infeasible_count = 12\n"
        "[diffusion]\n"
        "timesteps = 20\n"
        "epochs = 5\n"
        "hidden = 32\n"
        "hidden_layers = 1\n"
        "embed_dim = 16\n"
        "[sweep]\n"
        "gamma_values = [0.0, 0.5]\n"
        "lambda_values = [0.0, 2.0]\n"
        "samples_per_cell = 4\n");
    PipelineConfig cfg = config_from_table(table);
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("stages require their inputs") {
    const std::string dir = "pipeline_missing";
    fs::remove_all(dir);
    Pipeline pipeline(tiny_config(dir));
    CHECK_THROWS_AS(pipeline.select(), MissingInputError);
    CHECK_THROWS_AS(pipeline.simulate(), MissingInputError);
    CHECK_THROWS_AS(pipeline.sample(0.0, 0.0, 2, "x"), MissingInputError);
    CHECK_THROWS_AS(pipeline.sweep(), MissingInputError);
    fs::remove_all(dir);
}

TEST_CASE("the desk pipeline runs end to end at toy scale") {
    const std::string dir = "pipeline_e2e";
    fs::remove_all(dir);
    Pipeline pipeline(tiny_config(dir));

    pipeline.gen_data();
    CHECK(fs::exists(pipeline.feasible_path()));
    CHECK(fs::exists(pipeline.augmented_path()));
    CHECK(read_layouts_jsonl(pipeline.feasible_path()).size() == 12);
    CHECK(read_layouts_jsonl(pipeline.augmented_path()).size() == 24);

    pipeline.select();
    CHECK(read_layouts_jsonl(pipeline.representatives_path()).size() == 6);

    pipeline.simulate();
    CHECK(fs::exists(pipeline.labels_path()));
    LayoutDataset labeled = read_layouts_jsonl(pipeline.labeled_path());
    CHECK(labeled.size() == 12);
    read_labels_csv(labeled, pipeline.labeled_labels_path());
    for (const LayoutRecord& rec : labeled.records) CHECK(rec.max_temp_c.has_value());

    pipeline.smogn_stage();
    CHECK(fs::exists(pipeline.smogn_path()));

    pipeline.train_surrogate();
    CHECK(fs::exists(pipeline.surrogate_checkpoint()));

    pipeline.train_ddpm();
    CHECK(fs::exists(pipeline.denoiser_checkpoint()));

    pipeline.train_classifier();
    CHECK(fs::exists(pipeline.classifier_checkpoint()));
    CHECK(read_layouts_jsonl(pipeline.infeasible_path()).size() == 12);

    const SampleBatch unguided = pipeline.sample(0.0, 0.0, 4, "unguided");
    CHECK(unguided.items.size() == 4);
    CHECK(fs::exists(pipeline.samples_path("unguided")));
    CHECK(fs::exists(pipeline.samples_sidecar_path("unguided")));

    pipeline.sample(0.5, 2.0, 4, "guided");

    const MetricsReport metrics = pipeline.evaluate(pipeline.samples_path("unguided"), "unguided");
    CHECK(metrics.n_total == 4);
    CHECK(fs::exists(dir + "/metrics_unguided.json"));
    CHECK(fs::exists(dir + "/runs.csv"));

    const SweepResult sweep = pipeline.sweep();
    CHECK(sweep.cells.size() == 4);
    CHECK(fs::exists(pipeline.sweep_metrics_path()));
    CHECK(fs::exists(dir + "/heatmap_fr.csv"));
    CHECK(fs::exists(dir + "/heatmap_cqi.csv"));
    for (const SweepCell& cell : sweep.cells) CHECK_FALSE(cell.failed);

    // the (0,0) cell is the unguided baseline for the same derived seed
    CHECK(sweep.at(0, 0).gamma == 0.0);
    CHECK(sweep.at(0, 0).lambda == 0.0);

    pipeline.report();
    CHECK(fs::exists(dir + "/config.toml"));
    CHECK(fs::exists(dir + "/pca.csv"));
    CHECK(fs::exists(dir + "/hist.csv"));
    CHECK(fs::exists(dir + "/figures/heatmap_cqi.svg"));
    CHECK(fs::exists(dir + "/figures/pca.svg"));
    CHECK(fs::exists(dir + "/figures/hist.svg"));
    CHECK(fs::exists(dir + "/ablation.json"));
    CHECK(fs::exists(dir + "/ledger.json"));

    // the ledger recorded fingerprints for every stage
    const std::string ledger = slurp(dir + "/ledger.json");
    for (const char* stage : {"gen-data", "select", "simulate", "smogn", "train-surrogate",
                              "train-ddpm", "train-classifier", "sweep", "report"})
        CHECK(ledger.find(stage) != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("stages rerun byte-identically") {
    const std::string dir = "pipeline_rerun";
    fs::remove_all(dir);
    {
        Pipeline pipeline(tiny_config(dir));
        pipeline.gen_data();
    }
    const std::string first = slurp(dir + "/feasible.jsonl");
    const std::string first_aug = slurp(dir + "/augmented.jsonl");
    {
        Pipeline pipeline(tiny_config(dir));
        pipeline.gen_data();
    }
    CHECK(slurp(dir + "/feasible.jsonl") == first);
    CHECK(slurp(dir + "/augmented.jsonl") == first_aug);
    fs::remove_all(dir);
}

#ifdef PACKGEN_CLI_PATH
namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PACKGEN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli exit codes") {
    // 1: configuration errors
    CHECK(run_cli("--config does_not_exist.toml gen-data") == 1);
    CHECK(run_cli("--set relax.per_category=0 --out cli_test_dir gen-data") == 1);
    // 2: missing stage inputs
    CHECK(run_cli("--out cli_test_dir_empty sample --count 2") == 2);
    fs::remove_all("cli_test_dir_empty");

    // 0: a tiny gen-data run, and its artifacts land in --out
    CHECK(run_cli("--set relax.per_category=2 --set relax.categories=[1.0] "
                  "--out cli_test_dir gen-data") == 0);
    CHECK(fs::exists("cli_test_dir/feasible.jsonl"));
    fs::remove_all("cli_test_dir");
}
#endif

TEST_SUITE_END();
