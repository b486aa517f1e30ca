#include "packgen/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "packgen/raster.hpp"
#include "packgen/rng.hpp"

namespace packgen {

DistanceMatrix iou_distance_matrix(const std::vector<CellLayout>& layouts,
                                   const PackSpec& spec, int resolution) {
    if (layouts.size() < 2)
        throw std::invalid_argument("iou_distance_matrix needs at least 2 layouts");

    const std::size_t n = layouts.size();
    std::vector<DiskMask> masks(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i)
        masks[i] = rasterize_disks(layouts[i], spec, resolution);

    DistanceMatrix m;
    m.n = n;
    m.entries.assign(n * n, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
        for (std::size_t j = std::size_t(i) + 1; j < n; ++j) {
            const double d = 1.0 - mask_iou(masks[i], masks[j]);
            m.entries[std::size_t(i) * n + j] = d;
            m.entries[j * n + std::size_t(i)] = d;
        }
    }
    return m;
}

namespace {

struct NearestCache {
    std::vector<double> d1, d2;      // nearest / second-nearest medoid distance
    std::vector<std::size_t> m1;     // nearest medoid (dataset index)

    void recompute(const DistanceFn& d, std::size_t n,
                   const std::vector<std::size_t>& medoids) {
        d1.assign(n, std::numeric_limits<double>::max());
        d2.assign(n, std::numeric_limits<double>::max());
        m1.assign(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t m : medoids) {
                const double dist = d(j, m);
                if (dist < d1[j]) {
                    d2[j] = d1[j];
                    d1[j] = dist;
                    m1[j] = m;
                } else if (dist < d2[j]) {
                    d2[j] = dist;
                }
            }
        }
    }

    double total_cost() const {
        double cost = 0.0;
        for (double v : d1) cost += v;
        return cost;
    }
};

}  // namespace

KMedoidsResult k_medoids_fn(const DistanceFn& d, std::size_t n, std::size_t k,
                            uint64_t seed, int max_swaps,
                            std::size_t candidate_sample) {
    if (k < 1 || k > n) throw std::invalid_argument("k_medoids: need 1 <= k <= n");

    std::vector<bool> is_medoid(n, false);
    std::vector<std::size_t> medoids;
    medoids.reserve(k);

    // BUILD: start from the most central point, then add greedily by profit.
    {
        double best_cost = std::numeric_limits<double>::max();
        std::size_t best = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double cost = 0.0;
            for (std::size_t j = 0; j < n; ++j) cost += d(i, j);
            if (cost < best_cost) {
                best_cost = cost;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
    }

    std::vector<double> nearest(n);
    for (std::size_t j = 0; j < n; ++j) nearest[j] = d(j, medoids[0]);

    while (medoids.size() < k) {
        double best_profit = -1.0;
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_medoid[i]) continue;
            double profit = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (is_medoid[j] || j == i) continue;
                const double dij = d(i, j);
                if (dij < nearest[j]) profit += nearest[j] - dij;
            }
            if (profit > best_profit) {
                best_profit = profit;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d(j, best));
    }

    // SWAP: best improvement until converged or budget exhausted.
    NearestCache cache;
    cache.recompute(d, n, medoids);

    Rng rng(seed);
    int swaps = 0;
    while (swaps < max_swaps) {
        std::vector<std::size_t> candidates;
        if (candidate_sample > 0 && n - k > candidate_sample) {
            std::vector<std::size_t> pool;
            pool.reserve(n - k);
            for (std::size_t i = 0; i < n; ++i)
                if (!is_medoid[i]) pool.push_back(i);
            for (std::size_t c = 0; c < candidate_sample; ++c) {
                const std::size_t pick = c + std::size_t(rng.below(pool.size() - c));
                std::swap(pool[c], pool[pick]);
                candidates.push_back(pool[c]);
            }
            std::sort(candidates.begin(), candidates.end());
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (!is_medoid[i]) candidates.push_back(i);
        }

        double best_delta = -1e-12;  // only strictly improving swaps
        std::size_t best_m_pos = k;
        std::size_t best_h = n;
        for (std::size_t m_pos = 0; m_pos < medoids.size(); ++m_pos) {
            const std::size_t m = medoids[m_pos];
            for (std::size_t h : candidates) {
                double delta = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double djh = d(j, h);
                    if (cache.m1[j] == m)
                        delta += std::min(djh, cache.d2[j]) - cache.d1[j];
                    else if (djh < cache.d1[j])
                        delta += djh - cache.d1[j];
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_m_pos = m_pos;
                    best_h = h;
                }
            }
        }
        if (best_h == n) break;

        is_medoid[medoids[best_m_pos]] = false;
        medoids[best_m_pos] = best_h;
        is_medoid[best_h] = true;
        cache.recompute(d, n, medoids);
        ++swaps;
    }

    // Single-swap descent can stall above the optimum on tiny instances; an
    // exhaustive pass over all medoid sets is cheap there and pins the result
    // to the true minimum. Larger instances keep the plain PAM answer.
    if (max_swaps > 0 && candidate_sample == 0) {
        std::size_t combinations = 1;
        const std::size_t kk = std::min(k, n - k);
        for (std::size_t i = 0; i < kk && combinations <= 512; ++i)
            combinations = combinations * (n - i) / (i + 1);
        if (combinations <= 256) {
            cache.recompute(d, n, medoids);
            double best_cost = cache.total_cost();
            std::vector<std::size_t> pick(k);
            for (std::size_t i = 0; i < k; ++i) pick[i] = i;
            std::vector<std::size_t> best_pick;
            while (true) {
                double cost = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    double nearest = d(j, pick[0]);
                    for (std::size_t m = 1; m < k; ++m) nearest = std::min(nearest, d(j, pick[m]));
                    cost += nearest;
                }
                if (cost < best_cost - 1e-15) {
                    best_cost = cost;
                    best_pick = pick;
                }
                std::size_t i = k;
                bool advanced = false;
                while (i > 0) {
                    --i;
                    if (pick[i] != i + n - k) {
                        ++pick[i];
                        for (std::size_t j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
                        advanced = true;
                        break;
                    }
                }
                if (!advanced) break;
            }
            if (!best_pick.empty()) medoids = best_pick;
        }
    }

    KMedoidsResult result;
    result.medoids = medoids;
    std::sort(result.medoids.begin(), result.medoids.end());
    cache.recompute(d, n, result.medoids);
    result.total_cost = cache.total_cost();
    result.swaps = swaps;
    result.assignment.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto it = std::find(result.medoids.begin(), result.medoids.end(), cache.m1[j]);
        result.assignment[j] = std::size_t(it - result.medoids.begin());
    }
    return result;
}

KMedoidsResult k_medoids(const DistanceMatrix& d, std::size_t k, uint64_t seed,
                         int max_swaps) {
    return k_medoids_fn([&d](std::size_t i, std::size_t j) { return d.at(i, j); }, d.n, k,
                        seed, max_swaps, 0);
}

LayoutDataset select_representatives(const LayoutDataset& dataset,
                                     std::size_t k_per_category, const PackSpec& spec,
                                     const SelectionConfig& config, uint64_t seed) {
    std::map<double, std::vector<std::size_t>> categories;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        categories[dataset.records[i].min_distance_mm].push_back(i);

    LayoutDataset out;
    std::size_t cat_index = 0;
    for (const auto& [category, indices] : categories) {
        if (indices.size() < k_per_category)
            throw std::runtime_error("select_representatives: category " +
                                     format_double(category) + " has " +
                                     std::to_string(indices.size()) + " layouts, need " +
                                     std::to_string(k_per_category));

        KMedoidsResult medoid_result;
        const uint64_t cat_seed = derive_seed(seed, "selection", cat_index);
        if (indices.size() <= config.matrix_memory_threshold) {
            std::vector<CellLayout> layouts;
            layouts.reserve(indices.size());
            for (std::size_t i : indices) layouts.push_back(dataset.records[i].layout);
            if (layouts.size() == k_per_category) {
                for (std::size_t i : indices) out.records.push_back(dataset.records[i]);
                ++cat_index;
                continue;
            }
            const DistanceMatrix m = iou_distance_matrix(layouts, spec, config.resolution);
            medoid_result = k_medoids(m, k_per_category, cat_seed, config.max_swaps);
        } else {
            // too large to materialize: distances computed on demand from
            // packed masks, SWAP scans a sampled candidate subset per round
            std::vector<DiskMask> masks(indices.size());
#pragma omp parallel for schedule(dynamic)
            for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(indices.size()); ++i)
                masks[i] = rasterize_disks(dataset.records[indices[i]].layout, spec,
                                           config.resolution);
            const DistanceFn dist = [&masks](std::size_t i, std::size_t j) {
                if (i == j) return 0.0;
                return 1.0 - mask_iou(masks[i], masks[j]);
            };
            medoid_result = k_medoids_fn(dist, indices.size(), k_per_category, cat_seed,
                                         config.max_swaps, config.candidate_sample);
        }

        for (std::size_t medoid : medoid_result.medoids)
            out.records.push_back(dataset.records[indices[medoid]]);
        ++cat_index;
    }
    return out;
}

void write_distance_matrix(const DistanceMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    const uint32_t n = uint32_t(m.n);
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    std::vector<float> row(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) row[j] = float(m.at(i, j));
        out.write(reinterpret_cast<const char*>(row.data()),
                  std::streamsize(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

DistanceMatrix read_distance_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    DistanceMatrix m;
    m.n = n;
    m.entries.assign(std::size_t(n) * n, 0.0);
    std::vector<float> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        for (std::size_t j = 0; j < n; ++j) m.entries[i * n + j] = double(row[j]);
    }
    if (!in) throw std::runtime_error("read failed: " + path);
    return m;
}

}  // namespace packgen
