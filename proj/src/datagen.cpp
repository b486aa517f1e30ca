#include "packgen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "packgen/rng.hpp"

namespace packgen {

void RelaxConfig::validate() const {
    if (min_distance < 0.0) throw std::invalid_argument("RelaxConfig: min_distance must be >= 0");
    if (max_iterations < 1) throw std::invalid_argument("RelaxConfig: max_iterations must be >= 1");
    if (force_gain <= 0.0 || force_gain > 1.0)
        throw std::invalid_argument("RelaxConfig: force_gain must be in (0,1]");
}

RelaxResult relax_layout(const RelaxConfig& config, const PackSpec& spec) {
    config.validate();
    spec.validate();
    Rng rng(config.rng_seed);

    const double lo = spec.cell_radius;
    const double hi = spec.frame_side - spec.cell_radius;
    const std::size_t n = std::size_t(spec.n_cells);

    CellLayout layout;
    layout.centers.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        layout.centers.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return relax_from(std::move(layout), config, spec);
}

RelaxResult relax_from(CellLayout layout, const RelaxConfig& config, const PackSpec& spec) {
    config.validate();
    spec.validate();

    const double lo = spec.cell_radius;
    const double hi = spec.frame_side - spec.cell_radius;
    const std::size_t n = layout.centers.size();
    for (Point& p : layout.centers) {
        p.x = std::clamp(p.x, lo, hi);
        p.y = std::clamp(p.y, lo, hi);
    }

    const double target = 2.0 * (spec.cell_radius + config.min_distance);
    std::vector<Point> displacement(n);

    RelaxResult result;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        bool any_overlap = false;
        std::fill(displacement.begin(), displacement.end(), Point{0.0, 0.0});

        std::size_t pair_index = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j, ++pair_index) {
                const double dx = layout.centers[j].x - layout.centers[i].x;
                const double dy = layout.centers[j].y - layout.centers[i].y;
                const double d = std::sqrt(dx * dx + dy * dy);
                const double overlap = target - d;
                if (overlap <= kFeasibilityTolerance) continue;
                any_overlap = true;

                double ux, uy;
                if (d > 0.0) {
                    ux = dx / d;
                    uy = dy / d;
                } else {
                    // coincident centers: center line undefined, use a
                    // deterministic direction derived from the pair index
                    uint64_t h = config.rng_seed ^ (0x9e3779b97f4a7c15ull * (pair_index + 1));
                    const double angle = 6.283185307179586 * double(splitmix64(h) >> 11) * 0x1.0p-53;
                    ux = std::cos(angle);
                    uy = std::sin(angle);
                }
                const double step = config.force_gain * overlap / 2.0;
                displacement[i].x -= step * ux;
                displacement[i].y -= step * uy;
                displacement[j].x += step * ux;
                displacement[j].y += step * uy;
            }
        }

        if (!any_overlap) {
            result.success = true;
            result.layout = layout;
            result.iterations = iter;
            return result;
        }

        for (std::size_t i = 0; i < n; ++i) {
            layout.centers[i].x = std::clamp(layout.centers[i].x + displacement[i].x, lo, hi);
            layout.centers[i].y = std::clamp(layout.centers[i].y + displacement[i].y, lo, hi);
        }
    }

    result.success = check_feasibility(layout, spec, config.min_distance);
    result.layout = layout;
    result.iterations = config.max_iterations;
    return result;
}

static bool layouts_equal_within(const CellLayout& a, const CellLayout& b, double tol) {
    if (a.centers.size() != b.centers.size()) return false;
    for (std::size_t i = 0; i < a.centers.size(); ++i) {
        if (std::abs(a.centers[i].x - b.centers[i].x) > tol) return false;
        if (std::abs(a.centers[i].y - b.centers[i].y) > tol) return false;
    }
    return true;
}

static std::string category_tag(double category) {
    std::string s = format_double(category);
    return s;
}

LayoutDataset generate_feasible_dataset(const PackSpec& spec, int per_category,
                                        const std::vector<double>& categories,
                                        uint64_t seed, const RelaxConfig& base) {
    if (per_category < 1) throw std::invalid_argument("per_category must be >= 1");
    if (categories.empty()) throw std::invalid_argument("categories must be nonempty");

    constexpr double kDuplicateTol = 1e-6;
    LayoutDataset dataset;
    std::size_t attempts = 0;
    std::size_t failures = 0;

    for (std::size_t cat_idx = 0; cat_idx < categories.size(); ++cat_idx) {
        const double category = categories[cat_idx];
        std::vector<CellLayout> canonical_accepted;
        canonical_accepted.reserve(per_category);

        for (int index = 0; index < per_category; ++index) {
            bool accepted = false;
            for (uint64_t attempt = 0; attempt < 64 && !accepted; ++attempt) {
                ++attempts;
                RelaxConfig config = base;
                config.min_distance = category;
                config.rng_seed = derive_seed(
                    seed, "datagen/relax",
                    (uint64_t(cat_idx) << 40) | (uint64_t(index) << 8) | attempt);
                RelaxResult r = relax_layout(config, spec);
                if (!r.success) {
                    ++failures;
                    continue;
                }
                CellLayout canon = canonical_order(r.layout, spec.cell_radius);
                bool duplicate = false;
                for (const CellLayout& prev : canonical_accepted)
                    if (layouts_equal_within(prev, canon, kDuplicateTol)) {
                        duplicate = true;
                        break;
                    }
                if (duplicate) {
                    ++failures;
                    continue;
                }
                canonical_accepted.push_back(canon);

                LayoutRecord rec;
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%05d", index);
                rec.id = "md" + category_tag(category) + "-" + buf;
                rec.min_distance_mm = category;
                rec.layout = std::move(r.layout);
                dataset.records.push_back(std::move(rec));
                accepted = true;
            }
            if (!accepted)
                throw std::runtime_error("generate_feasible_dataset: could not produce layout " +
                                         std::to_string(index) + " for category " +
                                         category_tag(category));
            if (attempts >= 20 && double(failures) > 0.5 * double(attempts))
                throw std::runtime_error(
                    "generate_feasible_dataset: aggregate failure rate above 50% (" +
                    std::to_string(failures) + "/" + std::to_string(attempts) + " attempts)");
        }
    }
    return dataset;
}

LayoutDataset augment_dataset(const LayoutDataset& dataset, int variants_per_layout) {
    if (variants_per_layout < 1 || variants_per_layout > 8)
        throw std::invalid_argument("variants_per_layout must be in 1..8");

    constexpr double kOrbitTol = 1e-6;
    PackSpec spec;  // dihedral transforms only need the frame side
    LayoutDataset out;
    out.records.reserve(dataset.records.size() * std::size_t(variants_per_layout));

    for (const LayoutRecord& rec : dataset.records) {
        std::vector<CellLayout> orbit_canonical;
        int emitted = 0;
        for (int element = 0; element < 8 && emitted < variants_per_layout; ++element) {
            CellLayout variant = dihedral_transform(rec.layout, spec, element);
            CellLayout canon = canonical_order(variant, spec.cell_radius);
            bool duplicate = false;
            for (const CellLayout& prev : orbit_canonical)
                if (layouts_equal_within(prev, canon, kOrbitTol)) {
                    duplicate = true;
                    break;
                }
            if (duplicate) continue;
            orbit_canonical.push_back(std::move(canon));

            LayoutRecord variant_rec;
            variant_rec.id = element == 0 ? rec.id : rec.id + "-d" + std::to_string(element);
            variant_rec.min_distance_mm = rec.min_distance_mm;
            variant_rec.layout = std::move(variant);
            variant_rec.feasible = rec.feasible;
            // vertical flow direction survives identity and mirror-V only
            if (element == 0 || element == 1) {
                variant_rec.max_temp_c = rec.max_temp_c;
                variant_rec.energy_residual = rec.energy_residual;
            }
            out.records.push_back(std::move(variant_rec));
            ++emitted;
        }
    }
    return out;
}

HarvestResult harvest_infeasible(const LayoutSampler& sampler, const PackSpec& spec,
                                 std::size_t target_count,
                                 const LayoutDataset& feasible_pool, uint64_t seed) {
    if (target_count < 1) throw std::invalid_argument("target_count must be >= 1");

    HarvestResult result;
    std::size_t sampled = 0;
    while (result.dataset.size() < target_count) {
        std::optional<CellLayout> candidate = sampler();
        if (!candidate) break;
        ++sampled;
        if (check_feasibility(*candidate, spec, 0.0)) continue;
        LayoutRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "inf-%06zu", result.dataset.size());
        rec.id = buf;
        rec.layout = std::move(*candidate);
        rec.feasible = false;
        result.dataset.records.push_back(std::move(rec));
        ++result.from_sampler;
    }

    if (sampled == 0 && result.dataset.empty() && feasible_pool.empty())
        throw std::runtime_error("harvest_infeasible: sampler yielded nothing");

    while (result.dataset.size() < target_count) {
        if (feasible_pool.empty())
            throw std::runtime_error(
                "harvest_infeasible: sampler exhausted and no feasible pool for fallback");
        result.fallback_used = true;
        const std::size_t item = result.dataset.size();
        Rng rng(derive_seed(seed, "harvest/jitter", item));
        const CellLayout& source =
            feasible_pool.records[item % feasible_pool.records.size()].layout;

        // displacement scale spans barely-infeasible to strongly scrambled so
        // the negatives cover the states guided sampling actually visits; the
        // violation must be an overlap, since a bounds-only violation is
        // invisible to the pairwise-distance features and only adds label noise
        auto has_overlap = [&](const CellLayout& layout) {
            const std::vector<double> d = pairwise_edge_distances(layout, spec);
            for (double v : d)
                if (v < 0.0) return true;
            return false;
        };
        double sigma = 0.5 * std::pow(16.0, rng.uniform());
        CellLayout jittered = source;
        for (int attempt = 0; attempt < 64; ++attempt) {
            jittered = source;
            for (Point& p : jittered.centers) {
                p.x += sigma * rng.gaussian();
                p.y += sigma * rng.gaussian();
            }
            if (has_overlap(jittered)) break;
            sigma *= 1.5;
        }
        if (!has_overlap(jittered))
            throw std::runtime_error("harvest_infeasible: jitter fallback failed to break feasibility");

        LayoutRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "inf-%06zu", item);
        rec.id = buf;
        rec.layout = std::move(jittered);
        rec.feasible = false;
        result.dataset.records.push_back(std::move(rec));
    }
    return result;
}

}  // namespace packgen
