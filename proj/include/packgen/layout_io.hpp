#pragma once

#include <optional>
#include <string>
#include <vector>

#include "packgen/geometry.hpp"

namespace packgen {

struct LayoutRecord {
    std::string id;
    double min_distance_mm = 0.0;
    CellLayout layout;
    std::optional<double> max_temp_c;
    std::optional<double> energy_residual;
    bool feasible = true;
};

struct LayoutDataset {
    std::vector<LayoutRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

// JSON Lines, one object per layout:
//   {"id": ..., "min_distance_mm": ..., "cells": [[x,y], ...]}
void write_layouts_jsonl(const LayoutDataset& dataset, const std::string& path);
LayoutDataset read_layouts_jsonl(const std::string& path);

// Labels CSV: id,max_temp_c,energy_residual
void write_labels_csv(const LayoutDataset& dataset, const std::string& path);
// Merges labels into an existing dataset by id; throws on unknown ids.
void read_labels_csv(LayoutDataset& dataset, const std::string& path);

// Shortest round-trip decimal rendering, used everywhere a float lands in a
// text artifact so reruns are byte-identical.
std::string format_double(double v);

uint64_t fingerprint_file(const std::string& path);
uint64_t fingerprint_bytes(const std::string& bytes);

}  // namespace packgen
