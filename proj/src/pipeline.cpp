#include "packgen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "packgen/rng.hpp"
#include <json.hpp>

namespace fs = std::filesystem;

namespace packgen {

Pipeline::Pipeline(PipelineConfig config) : cfg_(std::move(config)) { cfg_.validate(); }

std::string Pipeline::feasible_path() const { return cfg_.out_dir + "/feasible.jsonl"; }
std::string Pipeline::augmented_path() const { return cfg_.out_dir + "/augmented.jsonl"; }
std::string Pipeline::representatives_path() const { return cfg_.out_dir + "/representatives.jsonl"; }
std::string Pipeline::labels_path() const { return cfg_.out_dir + "/labels.csv"; }
std::string Pipeline::labeled_path() const { return cfg_.out_dir + "/labeled.jsonl"; }
std::string Pipeline::labeled_labels_path() const { return cfg_.out_dir + "/labeled_labels.csv"; }
std::string Pipeline::smogn_path() const { return cfg_.out_dir + "/smogn.jsonl"; }
std::string Pipeline::smogn_labels_path() const { return cfg_.out_dir + "/smogn_labels.csv"; }
std::string Pipeline::infeasible_path() const { return cfg_.out_dir + "/infeasible.jsonl"; }
std::string Pipeline::surrogate_checkpoint() const { return cfg_.out_dir + "/surrogate.json"; }
std::string Pipeline::denoiser_checkpoint() const { return cfg_.out_dir + "/denoiser.json"; }
std::string Pipeline::classifier_checkpoint() const { return cfg_.out_dir + "/classifier.json"; }
std::string Pipeline::samples_path(const std::string& tag) const {
    return cfg_.out_dir + "/samples_" + tag + ".jsonl";
}
std::string Pipeline::samples_sidecar_path(const std::string& tag) const {
    return cfg_.out_dir + "/samples_" + tag + ".csv";
}
std::string Pipeline::sweep_metrics_path() const { return cfg_.out_dir + "/metrics.csv"; }

void Pipeline::ensure_out_dir() const {
    fs::create_directories(cfg_.out_dir);
    fs::create_directories(cfg_.out_dir + "/figures");
}

void Pipeline::require_input(const std::string& path) const {
    if (!fs::exists(path)) throw MissingInputError(path);
}

namespace {

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::vector<CellLayout> layouts_of(const LayoutDataset& dataset) {
    std::vector<CellLayout> out;
    out.reserve(dataset.size());
    for (const LayoutRecord& rec : dataset.records) out.push_back(rec.layout);
    return out;
}

std::vector<std::vector<double>> canonical_normalized(const LayoutDataset& dataset,
                                                      const PackSpec& spec) {
    std::vector<std::vector<double>> out;
    out.reserve(dataset.size());
    for (const LayoutRecord& rec : dataset.records)
        out.push_back(normalize(canonical_order(rec.layout, spec.cell_radius), spec).values);
    return out;
}

void write_train_report_json(const TrainReport& report, const std::string& path) {
    nlohmann::json j;
    j["seed"] = report.seed;
    j["dataset_fingerprint"] = report.dataset_fingerprint;
    j["epoch_losses"] = report.epoch_losses;
    if (report.f1 > 0.0) j["f1"] = report.f1;
    if (!report.fold_test_r2.empty()) {
        j["fold_train_r2"] = report.fold_train_r2;
        j["fold_test_r2"] = report.fold_test_r2;
        j["mean_test_r2"] = report.mean_test_r2;
    }
    j["r2_undefined"] = report.r2_undefined;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace

void Pipeline::record_stage(const std::string& stage, uint64_t seed,
                            const std::vector<std::string>& inputs,
                            const std::vector<std::string>& outputs,
                            double duration_s) const {
    const std::string path = cfg_.out_dir + "/ledger.json";
    nlohmann::json ledger;
    {
        std::ifstream in(path, std::ios::binary);
        if (in) {
            ledger = nlohmann::json::parse(in, nullptr, false);
            if (ledger.is_discarded()) ledger = nlohmann::json::object();
        }
    }
    nlohmann::json entry;
    entry["seed"] = seed;
    entry["finished_at"] = timestamp_now();
    entry["duration_s"] = duration_s;
    nlohmann::json in_fp = nlohmann::json::object();
    for (const std::string& input : inputs) {
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fingerprint_file(input)));
        in_fp[input] = hex;
    }
    entry["inputs"] = std::move(in_fp);
    entry["outputs"] = outputs;
    ledger[stage] = std::move(entry);

    std::ofstream out(path, std::ios::binary);
    out << ledger.dump(2) << "\n";
}

void Pipeline::gen_data() {
    ensure_out_dir();
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/gen-data");
    LayoutDataset feasible = generate_feasible_dataset(cfg_.pack, cfg_.per_category,
                                                       cfg_.categories, seed, cfg_.relax);
    write_layouts_jsonl(feasible, feasible_path());
    LayoutDataset augmented = augment_dataset(feasible, cfg_.augment_variants);
    write_layouts_jsonl(augmented, augmented_path());
    record_stage("gen-data", seed, {}, {feasible_path(), augmented_path()}, timer.seconds());
}

void Pipeline::select() {
    ensure_out_dir();
    require_input(feasible_path());
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/select");
    const LayoutDataset feasible = read_layouts_jsonl(feasible_path());
    const LayoutDataset reps =
        select_representatives(feasible, cfg_.k_per_category, cfg_.pack, cfg_.selection, seed);
    write_layouts_jsonl(reps, representatives_path());
    record_stage("select", seed, {feasible_path()}, {representatives_path()}, timer.seconds());
}

void Pipeline::simulate() {
    ensure_out_dir();
    require_input(representatives_path());
    StageTimer timer;
    LayoutDataset reps = read_layouts_jsonl(representatives_path());
    label_dataset(reps, cfg_.pack, cfg_.heat, cfg_.thermal, cfg_.jobs);
    write_labels_csv(reps, labels_path());
    // mirror doubling preserves labels, so the surrogate trains on both chiralities
    LayoutDataset doubled = augment_dataset(reps, 2);
    write_layouts_jsonl(doubled, labeled_path());
    write_labels_csv(doubled, labeled_labels_path());
    record_stage("simulate", 0, {representatives_path()},
                 {labels_path(), labeled_path(), labeled_labels_path()}, timer.seconds());
}

void Pipeline::smogn_stage() {
    ensure_out_dir();
    require_input(labeled_path());
    require_input(labeled_labels_path());
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/smogn");
    LayoutDataset labeled = read_layouts_jsonl(labeled_path());
    read_labels_csv(labeled, labeled_labels_path());

    auto [features, labels] = featurize_surrogate(labeled, cfg_.pack);
    LabeledVectors vectors{std::move(features), std::move(labels)};
    const SmognResult result =
        smogn_resample(vectors, cfg_.relevance_spec, cfg_.smogn_k_neighbors,
                       cfg_.smogn_noise_sigma, seed, cfg_.smogn_undersample);

    LayoutDataset out;
    if (!cfg_.smogn_undersample) {
        out = labeled;
        for (std::size_t i = labeled.size(); i < result.data.labels.size(); ++i) {
            LayoutRecord rec;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "syn-%06zu", i - labeled.size());
            rec.id = buf;
            rec.layout = denormalize({result.data.features[i]}, cfg_.pack);
            rec.max_temp_c = result.data.labels[i];
            out.records.push_back(std::move(rec));
        }
    } else {
        for (std::size_t i = 0; i < result.data.labels.size(); ++i) {
            LayoutRecord rec;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "rs-%06zu", i);
            rec.id = buf;
            rec.layout = denormalize({result.data.features[i]}, cfg_.pack);
            rec.max_temp_c = result.data.labels[i];
            out.records.push_back(std::move(rec));
        }
    }
    write_layouts_jsonl(out, smogn_path());
    write_labels_csv(out, smogn_labels_path());

    nlohmann::json j;
    j["synthetic_count"] = result.synthetic_count;
    j["rare_before"] = result.rare_before;
    j["rare_after"] = result.rare_after;
    j["passthrough"] = result.passthrough;
    std::ofstream report(cfg_.out_dir + "/smogn_report.json", std::ios::binary);
    report << j.dump(2) << "\n";

    record_stage("smogn", seed, {labeled_path(), labeled_labels_path()},
                 {smogn_path(), smogn_labels_path()}, timer.seconds());
}

void Pipeline::train_surrogate() {
    ensure_out_dir();
    const bool use_smogn = cfg_.smogn_enabled && fs::exists(smogn_path());
    const std::string data_path = use_smogn ? smogn_path() : labeled_path();
    const std::string label_path = use_smogn ? smogn_labels_path() : labeled_labels_path();
    require_input(data_path);
    require_input(label_path);
    StageTimer timer;

    LayoutDataset labeled = read_layouts_jsonl(data_path);
    read_labels_csv(labeled, label_path);
    auto [features, labels] = featurize_surrogate(labeled, cfg_.pack);
    auto [model, report] =
        train_surrogate_kfold(features, labels, cfg_.surrogate_folds, cfg_.surrogate_hyper);
    save_checkpoint(model, surrogate_checkpoint());
    write_train_report_json(report, cfg_.out_dir + "/surrogate_report.json");
    record_stage("train-surrogate", cfg_.surrogate_hyper.seed, {data_path, label_path},
                 {surrogate_checkpoint()}, timer.seconds());
}

void Pipeline::train_ddpm() {
    ensure_out_dir();
    const std::string data_path =
        fs::exists(augmented_path()) ? augmented_path() : feasible_path();
    require_input(data_path);
    StageTimer timer;
    const LayoutDataset dataset = read_layouts_jsonl(data_path);
    const std::vector<std::vector<double>> train = canonical_normalized(dataset, cfg_.pack);

    const NoiseSchedule schedule = build_schedule(cfg_.timesteps, cfg_.beta_start, cfg_.beta_end);
    MlpModel denoiser = make_denoiser(cfg_.denoiser_arch, derive_seed(cfg_.seed, "stage/ddpm"));
    auto [model, report] = train_denoiser(train, schedule, std::move(denoiser), cfg_.denoiser_hyper);
    save_checkpoint(model, denoiser_checkpoint());
    write_train_report_json(report, cfg_.out_dir + "/denoiser_report.json");
    record_stage("train-ddpm", cfg_.denoiser_hyper.seed, {data_path}, {denoiser_checkpoint()},
                 timer.seconds());
}

void Pipeline::train_classifier() {
    ensure_out_dir();
    const std::string feasible_src =
        fs::exists(augmented_path()) ? augmented_path() : feasible_path();
    require_input(feasible_src);
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/classifier");
    const LayoutDataset feasible = read_layouts_jsonl(feasible_src);
    const std::size_t target =
        cfg_.infeasible_count > 0 ? std::size_t(cfg_.infeasible_count) : feasible.size();

    // Negatives come from the unguided DDPM when a checkpoint exists; otherwise
    // uniform-random layouts (virtually always infeasible at this density).
    // The sampler budget deliberately leaves half the target to the jitter
    // fallback: barely-infeasible perturbations of feasible layouts are the
    // hard examples that teach the classifier the actual overlap boundary.
    LayoutSampler sampler;
    const std::size_t emission_cap = (target + 1) / 2;
    auto emitted = std::make_shared<std::size_t>(0);
    if (fs::exists(denoiser_checkpoint())) {
        auto denoiser = std::make_shared<MlpModel>(load_checkpoint(denoiser_checkpoint()));
        auto schedule = std::make_shared<NoiseSchedule>(
            build_schedule(cfg_.timesteps, cfg_.beta_start, cfg_.beta_end));
        auto buffer = std::make_shared<std::vector<CellLayout>>();
        auto chunk_index = std::make_shared<std::size_t>(0);
        const PackSpec pack = cfg_.pack;
        sampler = [=]() -> std::optional<CellLayout> {
            if (*emitted >= emission_cap) return std::nullopt;
            if (buffer->empty()) {
                const int chunk = 512;
                const SampleBatch batch =
                    sample_unguided(*denoiser, *schedule, pack, chunk,
                                    derive_seed(seed, "harvest/ddpm", (*chunk_index)++));
                for (const SampleItem& item : batch.items) buffer->push_back(item.layout);
            }
            CellLayout layout = std::move(buffer->back());
            buffer->pop_back();
            ++*emitted;
            return layout;
        };
    } else {
        auto rng = std::make_shared<Rng>(derive_seed(seed, "harvest/uniform"));
        const PackSpec pack = cfg_.pack;
        sampler = [=]() -> std::optional<CellLayout> {
            if (*emitted >= emission_cap) return std::nullopt;
            ++*emitted;
            CellLayout layout;
            const double lo = pack.cell_radius;
            const double hi = pack.frame_side - pack.cell_radius;
            for (int i = 0; i < pack.n_cells; ++i)
                layout.centers.push_back({rng->uniform(lo, hi), rng->uniform(lo, hi)});
            return layout;
        };
    }

    const HarvestResult harvest =
        harvest_infeasible(sampler, cfg_.pack, target, feasible, seed);
    write_layouts_jsonl(harvest.dataset, infeasible_path());

    auto [model, report] =
        packgen::train_classifier(feasible, harvest.dataset, cfg_.pack, cfg_.classifier_hyper);
    save_checkpoint(model, classifier_checkpoint());
    write_train_report_json(report, cfg_.out_dir + "/classifier_report.json");

    nlohmann::json j;
    j["from_sampler"] = harvest.from_sampler;
    j["fallback_used"] = harvest.fallback_used;
    j["f1"] = report.f1;
    std::ofstream extra(cfg_.out_dir + "/classifier_harvest.json", std::ios::binary);
    extra << j.dump(2) << "\n";

    record_stage("train-classifier", seed, {feasible_src},
                 {infeasible_path(), classifier_checkpoint()}, timer.seconds());
}

SampleBatch Pipeline::sample(double gamma, double lambda, int count, const std::string& tag) {
    ensure_out_dir();
    require_input(denoiser_checkpoint());
    const bool guided = gamma != 0.0 || lambda != 0.0;
    if (guided) {
        require_input(classifier_checkpoint());
        require_input(surrogate_checkpoint());
    }
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/sample/" + tag);
    const MlpModel denoiser = load_checkpoint(denoiser_checkpoint());
    const NoiseSchedule schedule = build_schedule(cfg_.timesteps, cfg_.beta_start, cfg_.beta_end);

    SampleBatch batch;
    std::vector<std::string> inputs{denoiser_checkpoint()};
    if (guided) {
        const MlpModel classifier = load_checkpoint(classifier_checkpoint());
        const MlpModel surrogate = load_checkpoint(surrogate_checkpoint());
        GuidanceConfig g;
        g.gamma = gamma;
        g.lambda = lambda;
        g.gradient_mode = cfg_.gradient_mode;
        batch = sample_guided(denoiser, classifier, surrogate, schedule, g, cfg_.pack, count, seed);
        inputs.push_back(classifier_checkpoint());
        inputs.push_back(surrogate_checkpoint());
    } else if (fs::exists(surrogate_checkpoint())) {
        const MlpModel surrogate = load_checkpoint(surrogate_checkpoint());
        batch = sample_unguided(denoiser, schedule, cfg_.pack, count, seed, &surrogate);
        inputs.push_back(surrogate_checkpoint());
    } else {
        batch = sample_unguided(denoiser, schedule, cfg_.pack, count, seed);
    }

    LayoutDataset dataset;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        LayoutRecord rec;
        char buf[48];
        std::snprintf(buf, sizeof(buf), "smp-%s-%05zu", tag.c_str(), i);
        rec.id = buf;
        rec.layout = batch.items[i].layout;
        rec.feasible = batch.items[i].feasible;
        dataset.records.push_back(std::move(rec));
    }
    write_layouts_jsonl(dataset, samples_path(tag));

    std::ofstream sidecar(samples_sidecar_path(tag), std::ios::binary);
    sidecar << "id,feasible,theta_hat,gamma,lambda,seed\n";
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        sidecar << dataset.records[i].id << "," << (batch.items[i].feasible ? 1 : 0) << ","
                << format_double(batch.items[i].theta_hat) << "," << format_double(gamma) << ","
                << format_double(lambda) << "," << seed << "\n";
    }
    record_stage("sample/" + tag, seed, inputs,
                 {samples_path(tag), samples_sidecar_path(tag)}, timer.seconds());
    return batch;
}

MetricsReport Pipeline::evaluate(const std::string& samples_jsonl, const std::string& label) {
    ensure_out_dir();
    require_input(samples_jsonl);
    require_input(surrogate_checkpoint());
    StageTimer timer;
    const LayoutDataset samples = read_layouts_jsonl(samples_jsonl);
    const MlpModel surrogate = load_checkpoint(surrogate_checkpoint());
    const MetricsReport report =
        evaluate_batch(layouts_of(samples), surrogate, cfg_.pack, cfg_.selection.resolution);
    write_metrics_json(report, cfg_.out_dir + "/metrics_" + label + ".json");
    append_run_ledger_csv(report, label, cfg_.out_dir + "/runs.csv");
    record_stage("evaluate/" + label, 0, {samples_jsonl, surrogate_checkpoint()},
                 {cfg_.out_dir + "/metrics_" + label + ".json"}, timer.seconds());
    return report;
}

SweepResult Pipeline::sweep() {
    ensure_out_dir();
    require_input(denoiser_checkpoint());
    require_input(classifier_checkpoint());
    require_input(surrogate_checkpoint());
    StageTimer timer;
    const uint64_t seed = derive_seed(cfg_.seed, "stage/sweep");
    const MlpModel denoiser = load_checkpoint(denoiser_checkpoint());
    const MlpModel classifier = load_checkpoint(classifier_checkpoint());
    const MlpModel surrogate = load_checkpoint(surrogate_checkpoint());
    const NoiseSchedule schedule = build_schedule(cfg_.timesteps, cfg_.beta_start, cfg_.beta_end);

    const SweepGrid grid = cfg_.effective_sweep_grid();
    const SweepResult result = hyperparameter_sweep(denoiser, classifier, surrogate, schedule,
                                                    grid, cfg_.pack,
                                                    cfg_.selection.resolution, seed);
    write_sweep_metrics_csv(result, sweep_metrics_path());
    write_heatmap_csv(result.matrix(&MetricsReport::f_r), grid, cfg_.out_dir + "/heatmap_fr.csv");
    write_heatmap_csv(result.matrix(&MetricsReport::d_s), grid, cfg_.out_dir + "/heatmap_ds.csv");
    write_heatmap_csv(result.matrix(&MetricsReport::t_norm_mean), grid,
                      cfg_.out_dir + "/heatmap_tnorm.csv");
    write_heatmap_csv(result.matrix(&MetricsReport::cqi), grid, cfg_.out_dir + "/heatmap_cqi.csv");
    record_stage("sweep", seed,
                 {denoiser_checkpoint(), classifier_checkpoint(), surrogate_checkpoint()},
                 {sweep_metrics_path(), cfg_.out_dir + "/heatmap_fr.csv",
                  cfg_.out_dir + "/heatmap_ds.csv", cfg_.out_dir + "/heatmap_tnorm.csv",
                  cfg_.out_dir + "/heatmap_cqi.csv"},
                 timer.seconds());
    return result;
}

void Pipeline::report() {
    ensure_out_dir();
    StageTimer timer;
    std::vector<std::string> inputs, outputs;

    // configuration snapshot
    {
        std::ofstream out(cfg_.out_dir + "/config.toml", std::ios::binary);
        out << render_config_toml(cfg_);
        outputs.push_back(cfg_.out_dir + "/config.toml");
    }

    // heatmap figures from the sweep table
    if (fs::exists(sweep_metrics_path())) {
        inputs.push_back(sweep_metrics_path());
        const SweepResult sweep_result = read_sweep_metrics_csv(sweep_metrics_path());
        const SweepGrid& grid = sweep_result.grid;
        struct Item { const char* name; double MetricsReport::* field; const char* title; };
        const Item items[] = {
            {"fr", &MetricsReport::f_r, "feasibility rate"},
            {"ds", &MetricsReport::d_s, "diversity score"},
            {"tnorm", &MetricsReport::t_norm_mean, "mean normalized temperature"},
            {"cqi", &MetricsReport::cqi, "composite quality index"},
        };
        for (const Item& item : items) {
            const std::string path =
                cfg_.out_dir + "/figures/heatmap_" + item.name + ".svg";
            write_heatmap_svg(sweep_result.matrix(item.field), grid, item.title, path);
            outputs.push_back(path);
        }
    }

    // PCA of training data against generated sets
    const std::string train_src =
        fs::exists(augmented_path()) ? augmented_path() : feasible_path();
    if (fs::exists(train_src)) {
        inputs.push_back(train_src);
        LayoutDataset train = read_layouts_jsonl(train_src);
        if (train.size() > 2000) train.records.resize(2000);
        std::vector<std::vector<double>> train_vecs = canonical_normalized(train, cfg_.pack);

        std::vector<std::pair<std::string, std::vector<std::vector<double>>>> sets;
        for (const char* tag : {"guided", "unguided"}) {
            if (!fs::exists(samples_path(tag))) continue;
            inputs.push_back(samples_path(tag));
            const LayoutDataset samples = read_layouts_jsonl(samples_path(tag));
            sets.emplace_back(tag, canonical_normalized(samples, cfg_.pack));
        }
        const PcaResult pca = pca_project(train_vecs, sets);
        write_pca_csv(pca, cfg_.out_dir + "/pca.csv");
        write_scatter_svg(pca, "2d pca of training and generated layouts",
                          cfg_.out_dir + "/figures/pca.svg");
        outputs.push_back(cfg_.out_dir + "/pca.csv");
        outputs.push_back(cfg_.out_dir + "/figures/pca.svg");
    }

    // predicted-temperature distributions
    {
        std::vector<std::pair<std::string, std::vector<double>>> sets;
        if (fs::exists(labeled_labels_path()) && fs::exists(surrogate_checkpoint())) {
            const MlpModel surrogate = load_checkpoint(surrogate_checkpoint());
            LayoutDataset labeled = read_layouts_jsonl(labeled_path());
            read_labels_csv(labeled, labeled_labels_path());
            std::vector<double> train_theta;
            for (const LayoutRecord& rec : labeled.records)
                if (rec.max_temp_c && surrogate.t_max > surrogate.t_min)
                    train_theta.push_back((*rec.max_temp_c - surrogate.t_min) /
                                          (surrogate.t_max - surrogate.t_min));
            if (!train_theta.empty()) sets.emplace_back("train", std::move(train_theta));
        }
        for (const char* tag : {"guided", "unguided"}) {
            const std::string sidecar = samples_sidecar_path(tag);
            if (!fs::exists(sidecar)) continue;
            std::ifstream in(sidecar, std::ios::binary);
            std::string line;
            std::getline(in, line);
            std::vector<double> thetas;
            while (std::getline(in, line)) {
                std::stringstream ss(line);
                std::string id, feasible, theta;
                std::getline(ss, id, ',');
                std::getline(ss, feasible, ',');
                std::getline(ss, theta, ',');
                if (feasible == "1") thetas.push_back(std::stod(theta));
            }
            if (!thetas.empty()) sets.emplace_back(tag, std::move(thetas));
        }
        if (!sets.empty()) {
            const HistogramResult hist = temperature_histogram(sets, 24);
            write_hist_csv(hist, cfg_.out_dir + "/hist.csv");
            write_histogram_svg(hist, "normalized max temperature",
                                cfg_.out_dir + "/figures/hist.svg");
            outputs.push_back(cfg_.out_dir + "/hist.csv");
            outputs.push_back(cfg_.out_dir + "/figures/hist.svg");
        }
    }

    // guided-vs-unguided verdict from the sweep table
    if (fs::exists(sweep_metrics_path())) {
        const SweepResult sweep_result = read_sweep_metrics_csv(sweep_metrics_path());
        const SweepCell* best = nullptr;
        for (const SweepCell& cell : sweep_result.cells)
            if (!cell.failed && (!best || cell.metrics.cqi > best->metrics.cqi)) best = &cell;
        const SweepCell& baseline = sweep_result.at(0, 0);
        if (best && !baseline.failed) {
            const AblationVerdict verdict = ablation_compare(best->metrics, baseline.metrics);
            nlohmann::json j;
            j["best_gamma"] = best->gamma;
            j["best_lambda"] = best->lambda;
            j["guided_wins"] = verdict.guided_wins;
            j["cqi_ratio"] = verdict.cqi_ratio;
            j["fr_ratio"] = verdict.fr_ratio;
            j["ds_ratio"] = verdict.ds_ratio;
            j["tnorm_ratio"] = verdict.tnorm_ratio;
            std::ofstream out(cfg_.out_dir + "/ablation.json", std::ios::binary);
            out << j.dump(2) << "\n";
            outputs.push_back(cfg_.out_dir + "/ablation.json");
        }
    }

    record_stage("report", 0, inputs, outputs, timer.seconds());
}

SweepResult read_sweep_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    SweepResult result;
    std::string line;
    std::getline(in, line);  // header
    std::vector<SweepCell> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        SweepCell cell;
        std::getline(ss, field, ',');
        cell.gamma = std::stod(field);
        std::getline(ss, field, ',');
        cell.lambda = std::stod(field);
        std::getline(ss, field, ',');
        cell.metrics.f_r = std::stod(field);
        std::getline(ss, field, ',');
        cell.metrics.d_s = std::stod(field);
        std::getline(ss, field, ',');
        cell.metrics.t_norm_mean = std::stod(field);
        std::getline(ss, field, ',');
        cell.metrics.cqi = std::stod(field);
        std::getline(ss, field, ',');
        cell.metrics.n_feasible = std::stoul(field);
        std::getline(ss, field, ',');
        cell.metrics.n_total = std::stoul(field);
        std::getline(ss, field, ',');
        cell.guidance_incidents = std::stoi(field);
        std::getline(ss, field);
        cell.failed = !field.empty();
        cell.error = field;
        cells.push_back(std::move(cell));
    }
    std::vector<double> gammas, lambdas;
    for (const SweepCell& cell : cells) {
        if (gammas.empty() || cell.gamma > gammas.back()) gammas.push_back(cell.gamma);
        if (lambdas.empty() ||
            std::find(lambdas.begin(), lambdas.end(), cell.lambda) == lambdas.end())
            lambdas.push_back(cell.lambda);
    }
    std::sort(gammas.begin(), gammas.end());
    gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
    std::sort(lambdas.begin(), lambdas.end());
    result.grid.gamma_values = gammas;
    result.grid.lambda_values = lambdas;
    result.grid.samples_per_cell = cells.empty() ? 1 : int(cells[0].metrics.n_total);
    result.cells = std::move(cells);
    return result;
}

}  // namespace packgen
