#pragma once

#include <cstdint>
#include <vector>

#include "packgen/geometry.hpp"

namespace packgen {

// Packed occupancy raster of a layout's union of disks; one bit per pixel,
// pixel counted if its center lies inside any disk.
struct DiskMask {
    int resolution = 0;
    std::vector<uint64_t> words;

    std::size_t popcount() const;
};

DiskMask rasterize_disks(const CellLayout& layout, const PackSpec& spec,
                         int resolution);

// |A and B| / |A or B|; 1.0 when both masks are empty.
double mask_iou(const DiskMask& a, const DiskMask& b);

}  // namespace packgen
