#pragma once

#include <cstdint>
#include <vector>

namespace packgen {

// Boxplot-extremes relevance: 0 at the label median, rising monotonically to 1
// at the whisker on each side, 1 beyond.
struct RelevanceSpec {
    double threshold = 0.8;  // labels with relevance above this are "rare"
};

std::vector<double> relevance(const RelevanceSpec& spec, const std::vector<double>& labels);

struct LabeledVectors {
    std::vector<std::vector<double>> features;
    std::vector<double> labels;
};

struct SmognResult {
    LabeledVectors data;          // originals followed by synthetics
    std::size_t synthetic_count = 0;
    std::size_t rare_before = 0;
    std::size_t rare_after = 0;  // rare-region count including synthetics
    bool passthrough = false;    // too few rare samples, nothing generated
};

// Synthetic over-sampling toward rare label regions: interpolation with a near
// neighbor, Gaussian jitter (clamped to 3 sigma) otherwise; synthesis sized so
// rare-region mass approaches parity with the common region.
SmognResult smogn_resample(const LabeledVectors& dataset, const RelevanceSpec& spec,
                           int k_neighbors, double noise_sigma, uint64_t seed,
                           bool undersample_common = false);

}  // namespace packgen
