#pragma once

#include <string>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/neural.hpp"

namespace packgen {

struct MetricsReport {
    double f_r = 0.0;
    double d_s = 0.0;
    double t_norm_mean = 0.0;
    double cqi = 0.0;
    std::size_t n_total = 0;
    std::size_t n_feasible = 0;
    double t_min = 0.0;
    double t_max = 0.0;
    bool d_s_defined = true;      // needs >= 2 feasible layouts
    bool t_norm_defined = true;   // needs >= 1 feasible layout
};

double feasibility_rate(const std::vector<CellLayout>& layouts, const PackSpec& spec);

// 1 - mean pairwise IoU over unique pairs of feasible layouts.
double diversity_score(const std::vector<CellLayout>& feasible_layouts,
                       const PackSpec& spec, int resolution);

// mean over feasible layouts of (T_max - P_k) / (T_max - T_min) where P_k is
// the surrogate prediction denormalized with the training constants.
double mean_normalized_temperature(const std::vector<CellLayout>& feasible_layouts,
                                   const MlpModel& surrogate, double t_min, double t_max,
                                   const PackSpec& spec);

double composite_quality_index(double f_r, double d_s, double t_norm);

// Full report over a generated batch; undefined factors are flagged and enter
// the product as zero.
MetricsReport evaluate_batch(const std::vector<CellLayout>& layouts,
                             const MlpModel& surrogate, const PackSpec& spec,
                             int resolution);

void write_metrics_json(const MetricsReport& report, const std::string& path);
void append_run_ledger_csv(const MetricsReport& report, const std::string& label,
                           const std::string& path);

}  // namespace packgen
