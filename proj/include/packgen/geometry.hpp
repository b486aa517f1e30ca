#pragma once

#include <cstddef>
#include <vector>

namespace packgen {

// Geometric constants of the pack. Lengths are millimetres.
struct PackSpec {
    double frame_side = 125.0;
    double cell_radius = 10.5;
    int n_cells = 20;
    int inlet_count = 5;
    double port_width = 2.0;

    void validate() const;  // throws std::invalid_argument on bad values
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Ordered list of cell centers; the universal design object.
struct CellLayout {
    std::vector<Point> centers;

    std::size_t size() const { return centers.size(); }
};

// Flat vector of 2*n_cells coordinates rescaled to [0,1].
struct NormalizedLayout {
    std::vector<double> values;
};

// Boundary/overlap comparisons use >= with this slack to avoid flakiness for
// layouts sitting exactly on a limit.
inline constexpr double kFeasibilityTolerance = 1e-9;

bool check_feasibility(const CellLayout& layout, const PackSpec& spec,
                       double min_clearance = 0.0);

// Edge-to-edge distances for pairs (i,j), i<j, in lexicographic pair order.
// Negative entries mean overlap.
std::vector<double> pairwise_edge_distances(const CellLayout& layout,
                                            const PackSpec& spec);

// Bottom-left row-major ordering: ascending y groups rows (a new row starts
// when the y-gap between consecutive y-sorted cells exceeds row_tolerance),
// each row sorted by ascending x.
CellLayout canonical_order(const CellLayout& layout, double row_tolerance = 10.5);

NormalizedLayout normalize(const CellLayout& layout, const PackSpec& spec);
CellLayout denormalize(const NormalizedLayout& normalized, const PackSpec& spec);

// The 8 symmetries of the square frame, in the fixed order:
//   0 identity, 1 mirror about the vertical axis, 2..4 rotations 90/180/270,
//   5..7 the mirrored rotations.
CellLayout dihedral_transform(const CellLayout& layout, const PackSpec& spec,
                              int element);

// Rasterized intersection-over-union of the two layouts' union-of-disks
// regions. Both empty unions count as identical (returns 1).
double layout_iou(const CellLayout& a, const CellLayout& b, const PackSpec& spec,
                  int resolution = 250);

}  // namespace packgen
