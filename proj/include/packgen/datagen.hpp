#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/layout_io.hpp"

namespace packgen {

struct RelaxConfig {
    double min_distance = 1.0;
    int max_iterations = 2000;
    double force_gain = 0.5;
    uint64_t rng_seed = 0;

    void validate() const;
};

struct RelaxResult {
    bool success = false;
    CellLayout layout;
    int iterations = 0;
};

// Repulsive-force relaxation: random centers in the in-bounds band, then
// overlapping pairs are pushed apart along their center line until no pair
// violates 2*(radius + min_distance) or the iteration budget runs out.
RelaxResult relax_layout(const RelaxConfig& config, const PackSpec& spec);

// Same dynamics from a caller-provided starting placement.
RelaxResult relax_from(CellLayout initial, const RelaxConfig& config, const PackSpec& spec);

// per_category successful layouts for each clearance category, deterministic
// per-item seeds, duplicates (identical after canonical ordering within
// 1e-6 mm) regenerated. Throws if the aggregate failure rate exceeds 50%.
LayoutDataset generate_feasible_dataset(const PackSpec& spec, int per_category,
                                        const std::vector<double>& categories,
                                        uint64_t seed,
                                        const RelaxConfig& base = RelaxConfig{});

// Emits the first variants_per_layout elements of each record's dihedral
// orbit (identity first, order fixed by dihedral_transform), de-duplicated
// per orbit. Max-temperature labels survive only the transforms that preserve
// the vertical flow direction (identity and mirror-V).
LayoutDataset augment_dataset(const LayoutDataset& dataset, int variants_per_layout);

using LayoutSampler = std::function<std::optional<CellLayout>()>;

struct HarvestResult {
    LayoutDataset dataset;
    std::size_t from_sampler = 0;
    bool fallback_used = false;
};

// Keeps sampler candidates that fail the feasibility check until target_count
// is reached; when the sampler is exhausted first, the remainder is produced
// by jittering layouts from feasible_pool with growing Gaussian displacement
// until infeasible.
HarvestResult harvest_infeasible(const LayoutSampler& sampler, const PackSpec& spec,
                                 std::size_t target_count,
                                 const LayoutDataset& feasible_pool, uint64_t seed);

}  // namespace packgen
