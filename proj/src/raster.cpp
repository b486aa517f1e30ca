#include "packgen/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace packgen {

std::size_t DiskMask::popcount() const {
    std::size_t total = 0;
    for (uint64_t w : words) total += std::size_t(std::popcount(w));
    return total;
}

DiskMask rasterize_disks(const CellLayout& layout, const PackSpec& spec,
                         int resolution) {
    if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
    DiskMask mask;
    mask.resolution = resolution;
    const std::size_t nbits = std::size_t(resolution) * std::size_t(resolution);
    mask.words.assign((nbits + 63) / 64, 0);

    const double px = spec.frame_side / double(resolution);
    const double r2 = spec.cell_radius * spec.cell_radius;

    for (const Point& c : layout.centers) {
        // pixel rows/cols that can possibly intersect the disk
        const int j_lo = std::max(0, int(std::floor((c.y - spec.cell_radius) / px)) - 1);
        const int j_hi = std::min(resolution - 1, int(std::ceil((c.y + spec.cell_radius) / px)) + 1);
        const int i_lo = std::max(0, int(std::floor((c.x - spec.cell_radius) / px)) - 1);
        const int i_hi = std::min(resolution - 1, int(std::ceil((c.x + spec.cell_radius) / px)) + 1);
        for (int j = j_lo; j <= j_hi; ++j) {
            const double dy = (double(j) + 0.5) * px - c.y;
            const double dy2 = dy * dy;
            if (dy2 > r2) continue;
            for (int i = i_lo; i <= i_hi; ++i) {
                const double dx = (double(i) + 0.5) * px - c.x;
                if (dx * dx + dy2 <= r2) {
                    const std::size_t bit = std::size_t(j) * resolution + std::size_t(i);
                    mask.words[bit >> 6] |= (uint64_t(1) << (bit & 63));
                }
            }
        }
    }
    return mask;
}

double mask_iou(const DiskMask& a, const DiskMask& b) {
    if (a.resolution != b.resolution || a.words.size() != b.words.size())
        throw std::invalid_argument("mask_iou: resolution mismatch");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t k = 0; k < a.words.size(); ++k) {
        inter += std::size_t(std::popcount(a.words[k] & b.words[k]));
        uni += std::size_t(std::popcount(a.words[k] | b.words[k]));
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

}  // namespace packgen
