#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/layout_io.hpp"

namespace packgen {

// Symmetric dissimilarity matrix with zero diagonal, entries in [0,1].
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> entries;  // row-major n*n

    double at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
};

DistanceMatrix iou_distance_matrix(const std::vector<CellLayout>& layouts,
                                   const PackSpec& spec, int resolution);

struct KMedoidsResult {
    std::vector<std::size_t> medoids;     // dataset indices, ascending
    std::vector<std::size_t> assignment;  // per point, index into medoids
    double total_cost = 0.0;
    int swaps = 0;
};

// PAM: greedy BUILD initialization followed by best-improvement SWAP until no
// swap reduces the total within-cluster distance or max_swaps is reached.
KMedoidsResult k_medoids(const DistanceMatrix& d, std::size_t k, uint64_t seed,
                         int max_swaps = 1000);

// Same algorithm over an implicit distance source; when candidate_sample > 0
// the SWAP phase scans only that many sampled non-medoids per round (used for
// categories too large to materialize the full matrix).
using DistanceFn = std::function<double(std::size_t, std::size_t)>;
KMedoidsResult k_medoids_fn(const DistanceFn& d, std::size_t n, std::size_t k,
                            uint64_t seed, int max_swaps, std::size_t candidate_sample);

struct SelectionConfig {
    int resolution = 250;
    std::size_t matrix_memory_threshold = 4000;  // category size above which the
                                                 // sampled SWAP path is used
    std::size_t candidate_sample = 256;
    int max_swaps = 1000;
};

// Reduces each min-distance category independently to its k medoid layouts.
LayoutDataset select_representatives(const LayoutDataset& dataset,
                                     std::size_t k_per_category, const PackSpec& spec,
                                     const SelectionConfig& config, uint64_t seed);

// Binary persistence: uint32 n, then row-major 32-bit floats.
void write_distance_matrix(const DistanceMatrix& m, const std::string& path);
DistanceMatrix read_distance_matrix(const std::string& path);

}  // namespace packgen
