// Times the serial reference kernels against their OpenMP counterparts and
// checks that both produce identical results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "packgen/datagen.hpp"
#include "packgen/raster.hpp"
#include "packgen/selection.hpp"
#include "packgen/thermal.hpp"

using namespace packgen;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

CellLayout make_layout(uint64_t seed, const PackSpec& spec) {
    RelaxConfig cfg;
    cfg.min_distance = 1.0;
    cfg.rng_seed = seed;
    const RelaxResult r = relax_layout(cfg, spec);
    return r.layout;
}

}  // namespace

int main() {
    PackSpec spec;
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not available, serial only\n");
#endif

    // thermal step kernel
    {
        const CellLayout layout = make_layout(7, spec);
        HeatSourceProfile heat;
        ThermalConfig config;

        config.kernel = ThermalKernel::Serial;
        double t0 = now_s();
        const ThermalResult serial = simulate_discharge(layout, spec, heat, config);
        const double serial_s = now_s() - t0;

        config.kernel = ThermalKernel::OpenMp;
        t0 = now_s();
        const ThermalResult parallel = simulate_discharge(layout, spec, heat, config);
        const double parallel_s = now_s() - t0;

        const bool match = serial.max_cell_temp == parallel.max_cell_temp;
        std::printf("thermal step   serial %7.2fs  openmp %7.2fs  speedup %4.2fx  %s\n",
                    serial_s, parallel_s, serial_s / parallel_s,
                    match ? "bitwise match" : "MISMATCH");
    }

    // pairwise IoU distance matrix
    {
        std::vector<CellLayout> layouts;
        for (int i = 0; i < 160; ++i) layouts.push_back(make_layout(100 + uint64_t(i), spec));

        const double t0 = now_s();
        DistanceMatrix parallel = iou_distance_matrix(layouts, spec, 250);
        const double parallel_s = now_s() - t0;

        const double t1 = now_s();
        std::vector<DiskMask> masks(layouts.size());
        for (std::size_t i = 0; i < layouts.size(); ++i)
            masks[i] = rasterize_disks(layouts[i], spec, 250);
        DistanceMatrix serial;
        serial.n = layouts.size();
        serial.entries.assign(serial.n * serial.n, 0.0);
        for (std::size_t i = 0; i < layouts.size(); ++i)
            for (std::size_t j = i + 1; j < layouts.size(); ++j)
                serial.set(i, j, 1.0 - mask_iou(masks[i], masks[j]));
        const double serial_s = now_s() - t1;

        bool match = true;
        for (std::size_t k = 0; k < serial.entries.size(); ++k)
            match = match && serial.entries[k] == parallel.entries[k];
        std::printf("iou matrix     serial %7.2fs  openmp %7.2fs  speedup %4.2fx  %s\n",
                    serial_s, parallel_s, serial_s / parallel_s,
                    match ? "bitwise match" : "MISMATCH");
    }

    // batch thermal labeling (parallel across layouts, serial kernels inside)
    {
        LayoutDataset dataset;
        for (int i = 0; i < 8; ++i) {
            LayoutRecord rec;
            rec.id = "bench-" + std::to_string(i);
            rec.layout = make_layout(400 + uint64_t(i), spec);
            dataset.records.push_back(std::move(rec));
        }
        HeatSourceProfile heat;
        ThermalConfig config;

        LayoutDataset serial_set = dataset;
        const double t0 = now_s();
        label_dataset(serial_set, spec, heat, config, 1);
        const double serial_s = now_s() - t0;

        LayoutDataset parallel_set = dataset;
        const double t1 = now_s();
        label_dataset(parallel_set, spec, heat, config, 0);
        const double parallel_s = now_s() - t1;

        bool match = true;
        for (std::size_t i = 0; i < dataset.records.size(); ++i)
            match = match && *serial_set.records[i].max_temp_c ==
                                 *parallel_set.records[i].max_temp_c;
        std::printf("batch labeling serial %7.2fs  openmp %7.2fs  speedup %4.2fx  %s\n",
                    serial_s, parallel_s, serial_s / parallel_s,
                    match ? "bitwise match" : "MISMATCH");
    }
    return 0;
}
