#include "packgen/metrics.hpp"

#include <fstream>
#include <stdexcept>

#include "packgen/layout_io.hpp"
#include "packgen/raster.hpp"
#include <json.hpp>

namespace packgen {

double feasibility_rate(const std::vector<CellLayout>& layouts, const PackSpec& spec) {
    if (layouts.empty()) throw std::invalid_argument("feasibility_rate: empty batch");
    std::size_t feasible = 0;
    for (const CellLayout& layout : layouts)
        if (layout.size() == std::size_t(spec.n_cells) && check_feasibility(layout, spec, 0.0))
            ++feasible;
    return double(feasible) / double(layouts.size());
}

double diversity_score(const std::vector<CellLayout>& feasible_layouts,
                       const PackSpec& spec, int resolution) {
    const std::size_t n = feasible_layouts.size();
    if (n < 2) throw std::invalid_argument("diversity_score: need at least 2 layouts");

    std::vector<DiskMask> masks(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i)
        masks[i] = rasterize_disks(feasible_layouts[i], spec, resolution);

    double iou_sum = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(+ : iou_sum)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i)
        for (std::size_t j = std::size_t(i) + 1; j < n; ++j)
            iou_sum += mask_iou(masks[i], masks[j]);

    const double pairs = double(n) * double(n - 1) / 2.0;
    return 1.0 - iou_sum / pairs;
}

double mean_normalized_temperature(const std::vector<CellLayout>& feasible_layouts,
                                   const MlpModel& surrogate, double t_min, double t_max,
                                   const PackSpec& spec) {
    if (t_max <= t_min)
        throw std::invalid_argument("mean_normalized_temperature: t_max must exceed t_min");
    if (feasible_layouts.empty())
        throw std::invalid_argument("mean_normalized_temperature: empty batch");
    double sum = 0.0;
    for (const CellLayout& layout : feasible_layouts) {
        const CellLayout canon = canonical_order(layout, spec.cell_radius);
        const double theta = surrogate_predict(surrogate, normalize(canon, spec).values);
        const double predicted = t_min + theta * (t_max - t_min);
        sum += (t_max - predicted) / (t_max - t_min);
    }
    return sum / double(feasible_layouts.size());
}

double composite_quality_index(double f_r, double d_s, double t_norm) {
    return f_r * d_s * t_norm;
}

MetricsReport evaluate_batch(const std::vector<CellLayout>& layouts,
                             const MlpModel& surrogate, const PackSpec& spec,
                             int resolution) {
    MetricsReport report;
    report.n_total = layouts.size();
    report.t_min = surrogate.t_min;
    report.t_max = surrogate.t_max;

    std::vector<CellLayout> feasible;
    for (const CellLayout& layout : layouts)
        if (layout.size() == std::size_t(spec.n_cells) && check_feasibility(layout, spec, 0.0))
            feasible.push_back(layout);
    report.n_feasible = feasible.size();
    report.f_r = feasibility_rate(layouts, spec);

    if (feasible.size() >= 2) {
        report.d_s = diversity_score(feasible, spec, resolution);
    } else {
        report.d_s = 0.0;
        report.d_s_defined = false;
    }
    if (!feasible.empty()) {
        report.t_norm_mean =
            mean_normalized_temperature(feasible, surrogate, surrogate.t_min, surrogate.t_max, spec);
    } else {
        report.t_norm_mean = 0.0;
        report.t_norm_defined = false;
    }
    report.cqi = composite_quality_index(report.f_r, report.d_s, report.t_norm_mean);
    return report;
}

static nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["f_r"] = report.f_r;
    j["d_s"] = report.d_s;
    j["t_norm_mean"] = report.t_norm_mean;
    j["cqi"] = report.cqi;
    j["n_total"] = report.n_total;
    j["n_feasible"] = report.n_feasible;
    j["t_min"] = report.t_min;
    j["t_max"] = report.t_max;
    j["d_s_defined"] = report.d_s_defined;
    j["t_norm_defined"] = report.t_norm_defined;
    return j;
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << metrics_to_json(report).dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void append_run_ledger_csv(const MetricsReport& report, const std::string& label,
                           const std::string& path) {
    const bool fresh = !std::ifstream(path).good();
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot open for append: " + path);
    if (fresh) out << "label,n_total,n_feasible,f_r,d_s,t_norm_mean,cqi,t_min,t_max\n";
    out << label << "," << report.n_total << "," << report.n_feasible << ","
        << format_double(report.f_r) << "," << format_double(report.d_s) << ","
        << format_double(report.t_norm_mean) << "," << format_double(report.cqi) << ","
        << format_double(report.t_min) << "," << format_double(report.t_max) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace packgen
