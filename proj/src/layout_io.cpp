#include "packgen/layout_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "packgen/rng.hpp"
#include <json.hpp>

namespace packgen {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_layouts_jsonl(const LayoutDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    for (const LayoutRecord& rec : dataset.records) {
        nlohmann::json cells = nlohmann::json::array();
        for (const Point& p : rec.layout.centers)
            cells.push_back(nlohmann::json::array({p.x, p.y}));
        nlohmann::json obj;
        obj["id"] = rec.id;
        obj["min_distance_mm"] = rec.min_distance_mm;
        obj["cells"] = std::move(cells);
        out << obj.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

LayoutDataset read_layouts_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    LayoutDataset dataset;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded())
            throw std::runtime_error(path + ": bad JSON at line " + std::to_string(lineno));
        LayoutRecord rec;
        rec.id = obj.at("id").get<std::string>();
        rec.min_distance_mm = obj.at("min_distance_mm").get<double>();
        for (const auto& pair : obj.at("cells"))
            rec.layout.centers.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

void write_labels_csv(const LayoutDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "id,max_temp_c,energy_residual\n";
    for (const LayoutRecord& rec : dataset.records) {
        if (!rec.max_temp_c) continue;
        out << rec.id << "," << format_double(*rec.max_temp_c) << ","
            << format_double(rec.energy_residual.value_or(0.0)) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void read_labels_csv(LayoutDataset& dataset, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        index[dataset.records[i].id] = i;

    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, temp, residual;
        std::getline(ss, id, ',');
        std::getline(ss, temp, ',');
        std::getline(ss, residual, ',');
        auto it = index.find(id);
        if (it == index.end())
            throw std::runtime_error(path + ": label for unknown id " + id);
        dataset.records[it->second].max_temp_c = std::stod(temp);
        dataset.records[it->second].energy_residual = std::stod(residual);
    }
}

uint64_t fingerprint_bytes(const std::string& bytes) { return fnv1a64(bytes); }

uint64_t fingerprint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for fingerprint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

}  // namespace packgen
