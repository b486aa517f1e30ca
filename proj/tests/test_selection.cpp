#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "packgen/datagen.hpp"
#include "packgen/rng.hpp"
#include "packgen/selection.hpp"

using namespace packgen;

namespace {

DistanceMatrix matrix_from_1d(const std::vector<double>& points) {
    double span = 0.0;
    for (double a : points)
        for (double b : points) span = std::max(span, std::abs(a - b));
    DistanceMatrix m;
    m.n = points.size();
    m.entries.assign(m.n * m.n, 0.0);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            m.entries[i * m.n + j] = std::abs(points[i] - points[j]) / span;
    return m;
}

// exhaustive optimum over all C(n, k) medoid sets
double brute_force_cost(const DistanceMatrix& m, std::size_t k,
                        std::vector<std::size_t>* best_out = nullptr) {
    std::vector<std::size_t> pick(k);
    std::vector<std::size_t> best;
    double best_cost = 1e300;
    const std::size_t n = m.n;

    auto cost_of = [&](const std::vector<std::size_t>& medoids) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double nearest = 1e300;
            for (std::size_t med : medoids) nearest = std::min(nearest, m.at(j, med));
            total += nearest;
        }
        return total;
    };

    // iterate combinations
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
        const double c = cost_of(pick);
        if (c < best_cost) {
            best_cost = c;
            best = pick;
        }
        std::size_t i = k;
        while (i > 0) {
            --i;
            if (pick[i] != i + n - k) {
                ++pick[i];
                for (std::size_t j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
                break;
            }
            if (i == 0) {
                if (best_out) *best_out = best;
                return best_cost;
            }
        }
    }
}

}  // namespace

TEST_SUITE_BEGIN("selection");

TEST_CASE("iou distance matrix basics") {
    PackSpec spec;
    spec.n_cells = 1;
    CellLayout a, b, c, d;
    a.centers.push_back({40.0, 40.0});
    b.centers.push_back({40.0, 40.0});
    c.centers.push_back({90.0, 90.0});
    d.centers.push_back({45.0, 40.0});
    const DistanceMatrix m = iou_distance_matrix({a, b, c, d}, spec, 250);
    CHECK(m.n == 4);
    CHECK(m.at(0, 1) == 0.0);   // duplicates
    CHECK(m.at(0, 2) == 1.0);   // disjoint
    CHECK(m.at(0, 3) > 0.0);
    CHECK(m.at(0, 3) < 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 4; ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
}

TEST_CASE("k-medoids separates two tight 1d pairs") {
    const DistanceMatrix m = matrix_from_1d({0.0, 0.1, 10.0, 10.1});
    const KMedoidsResult r = k_medoids(m, 2, 5);
    REQUIRE(r.medoids.size() == 2);
    const bool low = r.medoids[0] == 0 || r.medoids[0] == 1;
    const bool high = r.medoids[1] == 2 || r.medoids[1] == 3;
    CHECK(low);
    CHECK(high);
    CHECK(r.total_cost == doctest::Approx(brute_force_cost(m, 2)));
}

TEST_CASE("k equal to n gives zero cost") {
    const DistanceMatrix m = matrix_from_1d({0.0, 1.0, 2.0, 5.0});
    const KMedoidsResult r = k_medoids(m, 4, 1);
    CHECK(r.total_cost == 0.0);
    CHECK(r.medoids == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("k = 1 on a symmetric triple picks the middle point") {
    const DistanceMatrix m = matrix_from_1d({-1.0, 0.0, 1.0});
    const KMedoidsResult r = k_medoids(m, 1, 1);
    CHECK(r.medoids == std::vector<std::size_t>{1});
    CHECK(r.total_cost == doctest::Approx(brute_force_cost(m, 1)));
}

TEST_CASE("pam matches the exhaustive optimum on small planar instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 4 + rng.below(5);  // 4..8
        const std::size_t k = 1 + rng.below(3);  // 1..3
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.uniform();
            ys[i] = rng.uniform();
        }
        DistanceMatrix m;
        m.n = n;
        m.entries.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                m.entries[i * n + j] =
                    std::hypot(xs[i] - xs[j], ys[i] - ys[j]) / std::sqrt(2.0);
        const KMedoidsResult r = k_medoids(m, k, trial);
        const double optimum = brute_force_cost(m, k);
        CHECK(r.total_cost == doctest::Approx(optimum).epsilon(1e-12));
    }
}

TEST_CASE("the swap phase never worsens the build cost") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 12 + rng.below(8);
        std::vector<double> xs(n);
        for (double& x : xs) x = rng.uniform();
        const DistanceMatrix m = matrix_from_1d(xs);
        const KMedoidsResult no_swaps = k_medoids(m, 3, 1, 0);
        const KMedoidsResult with_swaps = k_medoids(m, 3, 1, 1000);
        CHECK(with_swaps.total_cost <= no_swaps.total_cost + 1e-12);
    }
}

TEST_CASE("select_representatives reduces each category independently") {
    PackSpec spec;
    LayoutDataset dataset = generate_feasible_dataset(spec, 8, {1.0, 1.5}, 31);
    SelectionConfig cfg;
    cfg.resolution = 125;
    const LayoutDataset reps = select_representatives(dataset, 3, spec, cfg, 5);
    CHECK(reps.size() == 6);
    std::size_t low = 0, high = 0;
    for (const LayoutRecord& rec : reps.records) {
        if (rec.min_distance_mm == 1.0) ++low;
        if (rec.min_distance_mm == 1.5) ++high;
        // provenance ids are preserved
        CHECK(rec.id.substr(0, 2) == "md");
    }
    CHECK(low == 3);
    CHECK(high == 3);

    const LayoutDataset identity = select_representatives(dataset, 8, spec, cfg, 5);
    CHECK(identity.size() == dataset.size());

    CHECK_THROWS_WITH_AS(select_representatives(dataset, 9, spec, cfg, 5),
                         doctest::Contains("category"), std::runtime_error);
}

TEST_CASE("selection is deterministic") {
    PackSpec spec;
    LayoutDataset dataset = generate_feasible_dataset(spec, 10, {1.2}, 8);
    SelectionConfig cfg;
    cfg.resolution = 125;
    const LayoutDataset a = select_representatives(dataset, 4, spec, cfg, 17);
    const LayoutDataset b = select_representatives(dataset, 4, spec, cfg, 17);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records[i].id == b.records[i].id);
}

TEST_CASE("sampled swap path agrees with the exact path on easy instances") {
    Rng rng(3);
    const std::size_t n = 40;
    std::vector<double> xs(n);
    for (double& x : xs) x = rng.uniform();
    const DistanceMatrix m = matrix_from_1d(xs);
    const DistanceFn fn = [&m](std::size_t i, std::size_t j) { return m.at(i, j); };
    const KMedoidsResult exact = k_medoids_fn(fn, n, 3, 9, 1000, 0);
    const KMedoidsResult sampled = k_medoids_fn(fn, n, 3, 9, 1000, 20);
    CHECK(sampled.total_cost <= exact.total_cost * 1.25 + 1e-9);
}

TEST_CASE("distance matrix binary round trip") {
    const DistanceMatrix m = matrix_from_1d({0.0, 0.4, 0.9, 2.0, 3.5});
    write_distance_matrix(m, "selection_matrix.bin");
    const DistanceMatrix back = read_distance_matrix("selection_matrix.bin");
    REQUIRE(back.n == m.n);
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        CHECK(back.entries[i] == doctest::Approx(m.entries[i]).epsilon(1e-6));
    std::remove("selection_matrix.bin");
}

TEST_SUITE_END();
