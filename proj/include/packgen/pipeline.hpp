#pragma once

#include <string>
#include <vector>

#include "packgen/config.hpp"

namespace packgen {

struct MissingInputError : std::runtime_error {
    explicit MissingInputError(const std::string& path)
        : std::runtime_error("missing input: " + path), path(path) {}
    std::string path;
};

// Stage driver over a run directory. Every stage writes its primary artifacts
// deterministically (reruns are byte-identical) and records seeds, input
// fingerprints and timings in ledger.json.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);

    const PipelineConfig& config() const { return cfg_; }
    const std::string& out_dir() const { return cfg_.out_dir; }

    // artifact locations
    std::string feasible_path() const;
    std::string augmented_path() const;
    std::string representatives_path() const;
    std::string labels_path() const;
    std::string labeled_path() const;
    std::string labeled_labels_path() const;
    std::string smogn_path() const;
    std::string smogn_labels_path() const;
    std::string infeasible_path() const;
    std::string surrogate_checkpoint() const;
    std::string denoiser_checkpoint() const;
    std::string classifier_checkpoint() const;
    std::string samples_path(const std::string& tag) const;
    std::string samples_sidecar_path(const std::string& tag) const;
    std::string sweep_metrics_path() const;

    void gen_data();
    void select();
    void simulate();
    void smogn_stage();
    void train_surrogate();
    void train_ddpm();
    void train_classifier();
    SampleBatch sample(double gamma, double lambda, int count, const std::string& tag);
    MetricsReport evaluate(const std::string& samples_jsonl, const std::string& label);
    SweepResult sweep();
    void report();

private:
    PipelineConfig cfg_;

    void ensure_out_dir() const;
    void require_input(const std::string& path) const;
    void record_stage(const std::string& stage, uint64_t seed,
                      const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs, double duration_s) const;
};

// Rebuilds a sweep table from its metrics.csv (used by the report stage).
SweepResult read_sweep_metrics_csv(const std::string& path);

}  // namespace packgen
