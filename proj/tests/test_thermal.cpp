#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "packgen/datagen.hpp"
#include "packgen/thermal.hpp"

using namespace packgen;

namespace {

CellLayout random_feasible(uint64_t seed, const PackSpec& spec) {
    RelaxConfig cfg;
    cfg.min_distance = 1.0;
    cfg.rng_seed = seed;
    const RelaxResult r = relax_layout(cfg, spec);
    REQUIRE(r.success);
    return r.layout;
}

ThermalConfig fast_config() {
    ThermalConfig config;
    config.grid_n = 75;  // keeps the unit suite quick; the acceptance suite
                         // runs the full default grid
    return config;
}

}  // namespace

TEST_SUITE_BEGIN("thermal");

TEST_CASE("discharge duration") {
    HeatSourceProfile profile;
    CHECK(discharge_duration(profile) == doctest::Approx(450.0));

    profile.c_rate = 1.0;
    profile.soc_end = 0.0;
    CHECK(discharge_duration(profile) == doctest::Approx(3600.0));

    profile.c_rate = 2.0;
    profile.soc_start = 1.0;
    profile.soc_end = 1.0;
    CHECK_THROWS_AS(discharge_duration(profile), std::invalid_argument);
}

TEST_CASE("heat source ramp") {
    HeatSourceProfile profile;
    profile.q0 = 1000.0;
    const double t_end = discharge_duration(profile);
    CHECK(heat_source(profile, 0.0) == doctest::Approx(1000.0));
    CHECK(heat_source(profile, t_end) == doctest::Approx(1500.0));
    profile.ramp = 0.0;
    CHECK(heat_source(profile, t_end / 3.0) == doctest::Approx(1000.0));
    CHECK_THROWS_AS(heat_source(profile, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(heat_source(profile, t_end + 1.0), std::invalid_argument);
}

TEST_CASE("an empty layout builds an all-fluid scene") {
    PackSpec spec;
    ThermalConfig config;
    CellLayout empty;
    const ThermalScene scene = build_scene(empty, spec, config);
    CHECK(scene.solid_count == 0);
    for (double v : scene.row_speed) CHECK(v == doctest::Approx(config.inlet_speed));
}

TEST_CASE("a centered cell rasterizes to the lattice disk count") {
    PackSpec spec;
    ThermalConfig config;  // grid_n 125 -> 1 mm pixels, centers on integer offsets
    CellLayout layout;
    layout.centers.push_back({62.5, 62.5});
    const ThermalScene scene = build_scene(layout, spec, config);

    // independent count over the integer offset lattice
    std::size_t expected = 0;
    for (int u = -11; u <= 11; ++u)
        for (int v = -11; v <= 11; ++v)
            if (double(u) * u + double(v) * v <= 10.5 * 10.5) ++expected;
    CHECK(scene.solid_count == expected);
    CHECK(double(expected) == doctest::Approx(3.14159265 * 10.5 * 10.5).epsilon(0.01));
}

TEST_CASE("mirrored layouts produce mirrored solid masks") {
    PackSpec spec;
    ThermalConfig config = fast_config();
    const CellLayout layout = random_feasible(42, spec);
    const CellLayout mirrored = dihedral_transform(layout, spec, 1);
    const ThermalScene a = build_scene(layout, spec, config);
    const ThermalScene b = build_scene(mirrored, spec, config);
    const int n = config.grid_n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            CHECK(a.solid[std::size_t(j) * n + i] == b.solid[std::size_t(j) * n + (n - 1 - i)]);
}

TEST_CASE("a fully blocked row is rejected") {
    PackSpec spec;
    spec.n_cells = 7;
    ThermalConfig config = fast_config();
    CellLayout wall;
    for (int i = 0; i < 7; ++i) wall.centers.push_back({10.5 + i * (104.0 / 6.0), 62.5});
    CHECK_THROWS_AS(build_scene(wall, spec, config), std::runtime_error);
}

TEST_CASE("zero heat leaves the field at the initial temperature") {
    PackSpec spec;
    const CellLayout layout = random_feasible(7, spec);
    HeatSourceProfile profile;
    profile.q0 = 0.0;
    ThermalConfig config = fast_config();
    const ThermalResult r = simulate_discharge(layout, spec, profile, config);
    CHECK(r.max_cell_temp == config.t_init);
    for (double v : r.per_cell_max) CHECK(v == config.t_init);
    CHECK(r.energy_residual == 0.0);
}

TEST_CASE("serial and openmp kernels agree bitwise") {
    PackSpec spec;
    const CellLayout layout = random_feasible(11, spec);
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();

    config.kernel = ThermalKernel::Serial;
    const ThermalResult serial = simulate_discharge(layout, spec, profile, config);
    config.kernel = ThermalKernel::OpenMp;
    const ThermalResult parallel = simulate_discharge(layout, spec, profile, config);

    CHECK(serial.max_cell_temp == parallel.max_cell_temp);
    CHECK(serial.energy_residual == parallel.energy_residual);
    REQUIRE(serial.per_cell_max.size() == parallel.per_cell_max.size());
    for (std::size_t i = 0; i < serial.per_cell_max.size(); ++i)
        CHECK(serial.per_cell_max[i] == parallel.per_cell_max[i]);
}

TEST_CASE("mirror symmetry of the simulated maxima") {
    PackSpec spec;
    const CellLayout layout = random_feasible(23, spec);
    const CellLayout mirrored = dihedral_transform(layout, spec, 1);
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();
    const ThermalResult a = simulate_discharge(layout, spec, profile, config);
    const ThermalResult b = simulate_discharge(mirrored, spec, profile, config);
    CHECK(std::abs(a.max_cell_temp - b.max_cell_temp) < 1e-9);
    for (std::size_t i = 0; i < a.per_cell_max.size(); ++i)
        CHECK(std::abs(a.per_cell_max[i] - b.per_cell_max[i]) < 1e-9);
}

TEST_CASE("energy balance closes") {
    PackSpec spec;
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();
    for (uint64_t seed : {3u, 4u}) {
        const CellLayout layout = random_feasible(seed, spec);
        const ThermalResult r = simulate_discharge(layout, spec, profile, config);
        CHECK(r.energy_residual <= 0.01);
        CHECK(r.max_cell_temp > config.t_init);
    }
}

TEST_CASE("a shadowed cell runs hotter than a side-by-side one") {
    PackSpec spec;
    spec.n_cells = 2;
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();

    CellLayout stacked;
    stacked.centers = {{62.5, 40.0}, {62.5, 70.0}};
    CellLayout side_by_side;
    side_by_side.centers = {{47.5, 40.0}, {77.5, 40.0}};

    const ThermalResult vertical = simulate_discharge(stacked, spec, profile, config);
    const ThermalResult horizontal = simulate_discharge(side_by_side, spec, profile, config);
    CHECK(vertical.max_cell_temp > horizontal.max_cell_temp);
}

TEST_CASE("labeling is deterministic and copies nothing it should not") {
    PackSpec spec;
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();

    LayoutDataset dataset;
    const CellLayout layout = random_feasible(5, spec);
    for (int i = 0; i < 2; ++i) {
        LayoutRecord rec;
        rec.id = "dup-" + std::to_string(i);
        rec.layout = layout;
        dataset.records.push_back(rec);
    }
    const LabelReport report = label_dataset(dataset, spec, profile, config, 1);
    CHECK(report.failed_ids.empty());
    CHECK(*dataset.records[0].max_temp_c == *dataset.records[1].max_temp_c);

    // mirror doubling copies labels instead of resimulating
    LayoutDataset doubled = augment_dataset(dataset, 2);
    REQUIRE(doubled.size() == 4);
    CHECK(*doubled.records[1].max_temp_c == *doubled.records[0].max_temp_c);
}

TEST_CASE("snapshots are recorded when requested") {
    PackSpec spec;
    spec.n_cells = 1;
    CellLayout layout;
    layout.centers.push_back({62.5, 62.5});
    HeatSourceProfile profile;
    ThermalConfig config = fast_config();
    config.snapshot_every = 200.0;
    const ThermalResult r = simulate_discharge(layout, spec, profile, config);
    CHECK(r.snapshots.size() == 2);
    write_snapshots(r, config.grid_n, "thermal_snaps.bin");
    std::remove("thermal_snaps.bin");
}

TEST_SUITE_END();
