#include "packgen/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "packgen/raster.hpp"

namespace packgen {

void PackSpec::validate() const {
    if (frame_side <= 0.0) throw std::invalid_argument("PackSpec: frame_side must be > 0");
    if (cell_radius <= 0.0) throw std::invalid_argument("PackSpec: cell_radius must be > 0");
    if (n_cells < 1) throw std::invalid_argument("PackSpec: n_cells must be >= 1");
    const double pi = 3.14159265358979323846;
    if (double(n_cells) * pi * cell_radius * cell_radius >= frame_side * frame_side)
        throw std::invalid_argument("PackSpec: cells cannot physically fit in frame");
}

static void require_cell_count(const CellLayout& layout, const PackSpec& spec) {
    if (layout.centers.size() != static_cast<std::size_t>(spec.n_cells))
        throw std::invalid_argument("layout has wrong cell count");
    for (const Point& p : layout.centers)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::invalid_argument("layout has non-finite coordinates");
}

bool check_feasibility(const CellLayout& layout, const PackSpec& spec,
                       double min_clearance) {
    require_cell_count(layout, spec);
    if (min_clearance < 0.0) throw std::invalid_argument("min_clearance must be >= 0");

    const double lo = spec.cell_radius - kFeasibilityTolerance;
    const double hi = spec.frame_side - spec.cell_radius + kFeasibilityTolerance;
    for (const Point& p : layout.centers) {
        if (p.x < lo || p.x > hi || p.y < lo || p.y > hi) return false;
    }

    const double min_dist = 2.0 * spec.cell_radius + min_clearance - kFeasibilityTolerance;
    const double min_dist_sq = min_dist * min_dist;
    const std::size_t n = layout.centers.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = layout.centers[i].x - layout.centers[j].x;
            const double dy = layout.centers[i].y - layout.centers[j].y;
            if (dx * dx + dy * dy < min_dist_sq) return false;
        }
    }
    return true;
}

std::vector<double> pairwise_edge_distances(const CellLayout& layout,
                                            const PackSpec& spec) {
    require_cell_count(layout, spec);
    const std::size_t n = layout.centers.size();
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = layout.centers[i].x - layout.centers[j].x;
            const double dy = layout.centers[i].y - layout.centers[j].y;
            out.push_back(std::sqrt(dx * dx + dy * dy) - 2.0 * spec.cell_radius);
        }
    }
    return out;
}

CellLayout canonical_order(const CellLayout& layout, double row_tolerance) {
    CellLayout sorted = layout;
    std::sort(sorted.centers.begin(), sorted.centers.end(),
              [](const Point& a, const Point& b) {
                  if (a.y != b.y) return a.y < b.y;
                  return a.x < b.x;
              });

    CellLayout out;
    out.centers.reserve(sorted.centers.size());
    std::size_t row_begin = 0;
    for (std::size_t i = 0; i <= sorted.centers.size(); ++i) {
        const bool row_ends =
            i == sorted.centers.size() ||
            (i > row_begin && sorted.centers[i].y - sorted.centers[i - 1].y > row_tolerance);
        if (!row_ends) continue;
        std::sort(sorted.centers.begin() + row_begin, sorted.centers.begin() + i,
                  [](const Point& a, const Point& b) {
                      if (a.x != b.x) return a.x < b.x;
                      return a.y < b.y;
                  });
        for (std::size_t k = row_begin; k < i; ++k) out.centers.push_back(sorted.centers[k]);
        row_begin = i;
    }
    return out;
}

NormalizedLayout normalize(const CellLayout& layout, const PackSpec& spec) {
    NormalizedLayout out;
    out.values.reserve(layout.centers.size() * 2);
    for (const Point& p : layout.centers) {
        out.values.push_back(p.x / spec.frame_side);
        out.values.push_back(p.y / spec.frame_side);
    }
    return out;
}

CellLayout denormalize(const NormalizedLayout& normalized, const PackSpec& spec) {
    if (normalized.values.size() % 2 != 0)
        throw std::invalid_argument("normalized layout must have even length");
    CellLayout out;
    out.centers.reserve(normalized.values.size() / 2);
    for (std::size_t i = 0; i < normalized.values.size(); i += 2)
        out.centers.push_back({normalized.values[i] * spec.frame_side,
                               normalized.values[i + 1] * spec.frame_side});
    return out;
}

CellLayout dihedral_transform(const CellLayout& layout, const PackSpec& spec,
                              int element) {
    if (element < 0 || element > 7)
        throw std::invalid_argument("dihedral element must be in 0..7");
    const double L = spec.frame_side;

    auto rotate = [L](Point p, int quarter_turns) {
        for (int k = 0; k < quarter_turns; ++k) p = Point{p.y, L - p.x};
        return p;
    };
    auto mirror_v = [L](Point p) { return Point{L - p.x, p.y}; };

    // element order: identity, mirror-V, rot 90/180/270, mirrored rotations
    static constexpr int kRotations[8] = {0, 0, 1, 2, 3, 1, 2, 3};
    static constexpr bool kMirrored[8] = {false, true, false, false, false, true, true, true};

    CellLayout out;
    out.centers.reserve(layout.centers.size());
    for (Point p : layout.centers) {
        p = rotate(p, kRotations[element]);
        if (kMirrored[element]) p = mirror_v(p);
        out.centers.push_back(p);
    }
    return out;
}

double layout_iou(const CellLayout& a, const CellLayout& b, const PackSpec& spec,
                  int resolution) {
    if (resolution < 64) throw std::invalid_argument("iou resolution must be >= 64");
    const DiskMask ma = rasterize_disks(a, spec, resolution);
    const DiskMask mb = rasterize_disks(b, spec, resolution);
    return mask_iou(ma, mb);
}

}  // namespace packgen
