#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "packgen/diffusion.hpp"
#include "packgen/metrics.hpp"

namespace packgen {

struct SweepGrid {
    std::vector<double> gamma_values{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> lambda_values{0.0, 3.0, 6.0, 10.0};
    int samples_per_cell = 200;

    void validate() const;
};

struct SweepCell {
    double gamma = 0.0;
    double lambda = 0.0;
    MetricsReport metrics;
    int guidance_incidents = 0;
    bool failed = false;
    std::string error;
};

struct SweepResult {
    SweepGrid grid;
    std::vector<SweepCell> cells;  // row-major: gamma index * |lambda| + lambda index

    const SweepCell& at(std::size_t gi, std::size_t li) const {
        return cells[gi * grid.lambda_values.size() + li];
    }
    // row-major matrix of one metric, shape |gamma| x |lambda|
    std::vector<double> matrix(double MetricsReport::* field) const;
};

// One metrics report per (gamma, lambda) cell with per-cell derived seeds;
// cell errors are recorded and the sweep continues.
SweepResult hyperparameter_sweep(const MlpModel& denoiser, const MlpModel& classifier,
                                 const MlpModel& surrogate, const NoiseSchedule& schedule,
                                 const SweepGrid& grid, const PackSpec& spec,
                                 int iou_resolution, uint64_t seed);

// --- PCA over normalized canonical layout vectors ---

struct PcaResult {
    std::vector<double> mean;
    std::vector<double> component1, component2;
    double explained1 = 0.0, explained2 = 0.0;  // eigenvalues, descending
    // per named set, projected (pc1, pc2) pairs; "train" is always present
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> projections;
};

PcaResult pca_project(
    const std::vector<std::vector<double>>& train_vectors,
    const std::vector<std::pair<std::string, std::vector<std::vector<double>>>>& named_sets);

// --- shared-bin histograms with a Gaussian-smoothed overlay ---

struct HistogramSet {
    std::string name;
    std::vector<double> density;  // normalized, one per bin
    std::vector<double> smooth;   // Silverman-bandwidth KDE at bin centers
    double mean = 0.0;
    double p5 = 0.0;
};

struct HistogramResult {
    std::vector<double> edges;  // bins + 1
    std::vector<HistogramSet> sets;
};

HistogramResult temperature_histogram(
    const std::vector<std::pair<std::string, std::vector<double>>>& named_values, int bins);

// --- guided vs unguided ablation ---

struct AblationVerdict {
    bool guided_wins = false;
    double cqi_ratio = 0.0;
    double fr_ratio = 0.0;
    double ds_ratio = 0.0;
    double tnorm_ratio = 0.0;
};

AblationVerdict ablation_compare(const MetricsReport& guided, const MetricsReport& unguided);

// --- artifact writers ---

void write_heatmap_csv(const std::vector<double>& matrix, const SweepGrid& grid,
                       const std::string& path);
void write_sweep_metrics_csv(const SweepResult& sweep, const std::string& path);
void write_pca_csv(const PcaResult& pca, const std::string& path);
void write_hist_csv(const HistogramResult& hist, const std::string& path);

void write_heatmap_svg(const std::vector<double>& matrix, const SweepGrid& grid,
                       const std::string& title, const std::string& path);
void write_scatter_svg(const PcaResult& pca, const std::string& title,
                       const std::string& path);
void write_histogram_svg(const HistogramResult& hist, const std::string& title,
                         const std::string& path);

}  // namespace packgen
