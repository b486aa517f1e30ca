#pragma once

#include <optional>
#include <string>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/layout_io.hpp"

namespace packgen {

struct HeatSourceProfile {
    double c_rate = 2.0;
    double soc_start = 1.0;
    double soc_end = 0.75;
    double q0 = 80000.0;  // W/m^3, calibrated so a representative layout peaks
                          // 10..15 degC above the inlet
    double ramp = 0.5;

    void validate() const;
};

struct Material {
    double k = 0.0;   // W/(m K)
    double cp = 0.0;  // J/(kg K)
    double rho = 0.0; // kg/m^3
};

enum class ThermalKernel { Serial, OpenMp };

struct ThermalConfig {
    int grid_n = 125;
    double dt_safety = 0.4;
    double t_init = 25.0;   // degC
    double t_inlet = 25.0;  // degC
    Material coolant{0.063, 880.0, 1660.0};
    Material cell{0.5, 1000.0, 2500.0};  // effective jelly-roll solid
    double inlet_speed = 0.01;           // m/s
    double film_h = 300.0;  // W/(m^2 K) cell-coolant interfacial coefficient;
                            // grid-independent unlike a one-pixel coolant film
    std::optional<double> snapshot_every;  // seconds
    ThermalKernel kernel = ThermalKernel::OpenMp;

    void validate() const;
};

struct ThermalResult {
    double max_cell_temp = 0.0;          // degC
    std::vector<double> per_cell_max;    // degC, one per cell
    double energy_residual = 0.0;        // |stored + advected - injected| / injected
    std::vector<std::vector<float>> snapshots;
    double dt = 0.0;
    long steps = 0;
};

// t_end of the discharge window in seconds.
double discharge_duration(const HeatSourceProfile& profile);

// Volumetric heat source at time t, applied uniformly inside every cell disk.
double heat_source(const HeatSourceProfile& profile, double t);

// Cell-centered grid over the frame: solid where a pixel center falls inside a
// disk, upward plug flow elsewhere with per-row speed rescaled for mass
// conservation past the blocked width.
struct ThermalScene {
    int grid_n = 0;
    double dx = 0.0;  // metres
    std::vector<uint8_t> solid;       // grid_n*grid_n
    std::vector<int> cell_index;      // -1 for fluid
    std::vector<double> row_speed;    // m/s per row
    std::size_t solid_count = 0;
};

ThermalScene build_scene(const CellLayout& layout, const PackSpec& spec,
                         const ThermalConfig& config);

ThermalResult simulate_discharge(const CellLayout& layout, const PackSpec& spec,
                                 const HeatSourceProfile& profile,
                                 const ThermalConfig& config);

struct LabelReport {
    std::vector<std::string> failed_ids;
};

// Labels every record with the simulated maximum cell temperature. Records
// that already carry a label (e.g. mirror copies) are left untouched.
// Individual failures are recorded, not fatal, unless they exceed 10%.
LabelReport label_dataset(LayoutDataset& dataset, const PackSpec& spec,
                          const HeatSourceProfile& profile, const ThermalConfig& config,
                          int jobs = 0);

// Flat binary snapshots: uint32 grid_n, uint32 count, then row-major float32.
void write_snapshots(const ThermalResult& result, int grid_n, const std::string& path);

}  // namespace packgen
