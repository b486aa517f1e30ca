#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "packgen/datagen.hpp"
#include "packgen/geometry.hpp"
#include "packgen/rng.hpp"

using namespace packgen;

namespace {

CellLayout grid_5x4() {
    CellLayout layout;
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 5; ++col)
            layout.centers.push_back({12.5 + 25.0 * col, 12.5 + 25.0 * row});
    return layout;
}

// two-disk intersection-over-union from the lens-area formula
double analytic_two_disk_iou(double r, double d) {
    const double pi = 3.14159265358979323846;
    if (d >= 2.0 * r) return 0.0;
    const double lens =
        2.0 * r * r * std::acos(d / (2.0 * r)) - (d / 2.0) * std::sqrt(4.0 * r * r - d * d);
    const double union_area = 2.0 * pi * r * r - lens;
    return lens / union_area;
}

CellLayout random_feasible(uint64_t seed, const PackSpec& spec) {
    RelaxConfig cfg;
    cfg.min_distance = 1.0;
    cfg.rng_seed = seed;
    const RelaxResult r = relax_layout(cfg, spec);
    REQUIRE(r.success);
    return r.layout;
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("feasibility of the regular 5x4 grid") {
    PackSpec spec;
    CHECK(check_feasibility(grid_5x4(), spec, 0.0));
}

TEST_CASE("feasibility rejects boundary violation") {
    PackSpec spec;
    CellLayout layout = grid_5x4();
    layout.centers[0] = {5.0, 5.0};
    CHECK_FALSE(check_feasibility(layout, spec, 0.0));
}

TEST_CASE("feasibility rejects overlap") {
    PackSpec spec;
    CellLayout layout = grid_5x4();
    layout.centers[1] = {layout.centers[0].x + 20.0, layout.centers[0].y};
    CHECK_FALSE(check_feasibility(layout, spec, 0.0));
}

TEST_CASE("feasibility validates the cell count") {
    PackSpec spec;
    CellLayout layout;
    layout.centers.push_back({62.5, 62.5});
    CHECK_THROWS_AS(check_feasibility(layout, spec, 0.0), std::invalid_argument);
}

TEST_CASE("pairwise edge distances") {
    PackSpec spec;
    CHECK(pairwise_edge_distances(grid_5x4(), spec).size() == 190);

    PackSpec two;
    two.n_cells = 2;
    CellLayout pair;
    pair.centers = {{30.0, 62.5}, {60.0, 62.5}};
    CHECK(pairwise_edge_distances(pair, two)[0] == doctest::Approx(9.0));

    pair.centers = {{40.0, 40.0}, {40.0, 40.0}};
    CHECK(pairwise_edge_distances(pair, two)[0] == doctest::Approx(-21.0));
}

TEST_CASE("canonical order sorts a reversed grid bottom-left row-major") {
    CellLayout grid = grid_5x4();
    CellLayout reversed = grid;
    std::reverse(reversed.centers.begin(), reversed.centers.end());
    const CellLayout sorted = canonical_order(reversed);
    for (std::size_t i = 0; i < grid.centers.size(); ++i) {
        CHECK(sorted.centers[i].x == grid.centers[i].x);
        CHECK(sorted.centers[i].y == grid.centers[i].y);
    }
}

TEST_CASE("canonical order is idempotent and permutation invariant") {
    PackSpec spec;
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        CellLayout layout = random_feasible(100 + uint64_t(trial), spec);
        const CellLayout canon = canonical_order(layout);
        const CellLayout twice = canonical_order(canon);
        for (std::size_t i = 0; i < canon.centers.size(); ++i) {
            CHECK(twice.centers[i].x == canon.centers[i].x);
            CHECK(twice.centers[i].y == canon.centers[i].y);
        }
        CellLayout shuffled = layout;
        for (std::size_t i = shuffled.centers.size(); i > 1; --i)
            std::swap(shuffled.centers[i - 1], shuffled.centers[rng.below(i)]);
        const CellLayout canon2 = canonical_order(shuffled);
        for (std::size_t i = 0; i < canon.centers.size(); ++i) {
            CHECK(canon2.centers[i].x == canon.centers[i].x);
            CHECK(canon2.centers[i].y == canon.centers[i].y);
        }
    }
}

TEST_CASE("single cell is unchanged by canonical order") {
    CellLayout layout;
    layout.centers.push_back({33.0, 44.0});
    const CellLayout sorted = canonical_order(layout);
    CHECK(sorted.centers[0].x == 33.0);
    CHECK(sorted.centers[0].y == 44.0);
}

TEST_CASE("normalization maps the frame onto the unit square") {
    PackSpec spec;
    CellLayout layout = grid_5x4();
    layout.centers[0] = {62.5, 0.0};
    layout.centers[1] = {125.0, 12.5};
    const NormalizedLayout norm = normalize(layout, spec);
    CHECK(norm.values[0] == doctest::Approx(0.5));
    CHECK(norm.values[1] == 0.0);
    CHECK(norm.values[2] == 1.0);

    const CellLayout back = denormalize(norm, spec);
    for (std::size_t i = 0; i < layout.centers.size(); ++i) {
        CHECK(back.centers[i].x == doctest::Approx(layout.centers[i].x).epsilon(1e-12));
        CHECK(back.centers[i].y == doctest::Approx(layout.centers[i].y).epsilon(1e-12));
    }
}

TEST_CASE("dihedral transforms") {
    PackSpec spec;
    CellLayout layout;
    layout.centers.push_back({30.0, 40.0});

    const CellLayout identity = dihedral_transform(layout, spec, 0);
    CHECK(identity.centers[0].x == 30.0);
    CHECK(identity.centers[0].y == 40.0);

    const CellLayout mirrored = dihedral_transform(layout, spec, 1);
    CHECK(mirrored.centers[0].x == 95.0);
    CHECK(mirrored.centers[0].y == 40.0);

    CellLayout four = layout;
    for (int k = 0; k < 4; ++k) four = dihedral_transform(four, spec, 2);
    CHECK(four.centers[0].x == doctest::Approx(30.0));
    CHECK(four.centers[0].y == doctest::Approx(40.0));

    CHECK_THROWS_AS(dihedral_transform(layout, spec, 8), std::invalid_argument);
    CHECK_THROWS_AS(dihedral_transform(layout, spec, -1), std::invalid_argument);
}

TEST_CASE("feasibility is invariant under all dihedral transforms") {
    PackSpec spec;
    for (int trial = 0; trial < 5; ++trial) {
        const CellLayout layout = random_feasible(500 + uint64_t(trial), spec);
        for (int element = 0; element < 8; ++element)
            CHECK(check_feasibility(dihedral_transform(layout, spec, element), spec, 0.0));
    }
}

TEST_CASE("iou of identical and disjoint layouts") {
    PackSpec spec;
    spec.n_cells = 1;
    CellLayout a, b;
    a.centers.push_back({40.0, 40.0});
    b.centers.push_back({90.0, 90.0});
    CHECK(layout_iou(a, a, spec, 250) == 1.0);
    CHECK(layout_iou(a, b, spec, 250) == 0.0);
}

TEST_CASE("raster iou matches the analytic lens value") {
    PackSpec spec;
    spec.n_cells = 1;
    CellLayout a, b;
    a.centers.push_back({57.0, 62.5});
    b.centers.push_back({67.5, 62.5});
    const double raster = layout_iou(a, b, spec, 500);
    const double analytic = analytic_two_disk_iou(10.5, 10.5);
    CHECK(analytic == doctest::Approx(135.428 / 557.293).epsilon(1e-4));
    CHECK(std::abs(raster - analytic) < 0.01);
}

TEST_CASE("raster iou tracks the lens formula over random separations") {
    PackSpec spec;
    spec.n_cells = 1;
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double d = rng.uniform(0.0, 25.0);
        const double cx = 55.0;
        CellLayout a, b;
        a.centers.push_back({cx, 62.5});
        b.centers.push_back({cx + d, 62.5});
        const double raster = layout_iou(a, b, spec, 500);
        CHECK(std::abs(raster - analytic_two_disk_iou(10.5, d)) < 0.01);
    }
}

TEST_CASE("iou is symmetric and bounded") {
    PackSpec spec;
    for (int trial = 0; trial < 4; ++trial) {
        const CellLayout a = random_feasible(900 + uint64_t(trial), spec);
        const CellLayout b = random_feasible(950 + uint64_t(trial), spec);
        const double ab = layout_iou(a, b, spec, 250);
        const double ba = layout_iou(b, a, spec, 250);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(layout_iou(a, a, spec, 250) == 1.0);
    }
}

TEST_CASE("feasible layouts respect the clearance in their edge distances") {
    PackSpec spec;
    for (int trial = 0; trial < 5; ++trial) {
        RelaxConfig cfg;
        cfg.min_distance = 1.5;
        cfg.rng_seed = 1200 + uint64_t(trial);
        const RelaxResult r = relax_layout(cfg, spec);
        REQUIRE(r.success);
        const std::vector<double> distances = pairwise_edge_distances(r.layout, spec);
        const double lowest = *std::min_element(distances.begin(), distances.end());
        CHECK(lowest >= 1.5 - 1e-9);
    }
}

TEST_SUITE_END();
