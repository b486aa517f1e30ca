#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "packgen/datagen.hpp"
#include "packgen/diffusion.hpp"
#include "packgen/experiments.hpp"
#include "packgen/geometry.hpp"
#include "packgen/neural.hpp"
#include "packgen/selection.hpp"
#include "packgen/smogn.hpp"
#include "packgen/thermal.hpp"

namespace packgen {

// Minimal TOML subset: [tables], key = value with strings, booleans, numbers
// and flat arrays, # comments.
using TomlValue = std::variant<bool, double, std::string, std::vector<double>,
                               std::vector<std::string>>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

// Applies "section.key=value" to a parsed table; the value is parsed with the
// same scalar/array grammar.
void apply_override(TomlTable& table, const std::string& assignment);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    // [global]
    uint64_t seed = 20240001;
    std::string out_dir = "runs/desk";
    int jobs = 0;  // 0 = library default

    // [pack]
    PackSpec pack;

    // [relax]  (dataset generation)
    RelaxConfig relax;
    int per_category = 500;
    std::vector<double> categories{1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9};
    int augment_variants = 2;  // identity + mirror, the label-preserving pair

    // [selection]
    std::size_t k_per_category = 50;
    SelectionConfig selection;

    // [thermal]
    HeatSourceProfile heat;
    ThermalConfig thermal;

    // [smogn]
    bool smogn_enabled = true;
    RelevanceSpec relevance_spec;
    int smogn_k_neighbors = 5;
    double smogn_noise_sigma = 0.02;
    bool smogn_undersample = false;

    // [neural]
    TrainHyper classifier_hyper;
    TrainHyper surrogate_hyper;
    int surrogate_folds = 5;
    int infeasible_count = 0;  // 0 = match feasible count

    // [diffusion]
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    DenoiserArch denoiser_arch;
    TrainHyper denoiser_hyper;
    GradientMode gradient_mode = GradientMode::LogProbability;

    // [sweep]
    SweepGrid sweep;
    bool paper_grid = false;  // full 21 x 11 grid, 1000 samples per cell

    void validate() const;  // throws ConfigError naming the field
    SweepGrid effective_sweep_grid() const;
};

PipelineConfig config_from_table(const TomlTable& table);
PipelineConfig load_config(const std::string& path,
                           const std::vector<std::string>& overrides = {});

// Renders the configuration back to TOML (the run directory keeps a copy).
std::string render_config_toml(const PipelineConfig& config);

}  // namespace packgen
