#include "packgen/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "packgen/layout_io.hpp"
#include "packgen/rng.hpp"

namespace packgen {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// removes a trailing comment that is not inside a string
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlValue parse_scalar(const std::string& raw, const std::string& where) {
    const std::string s = strip(raw);
    if (s.empty()) throw ConfigError(where + ": empty value");
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError(where + ": unterminated string");
        return s.substr(1, s.size() - 2);
    }
    if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(where + ": unterminated array");
        std::vector<double> numbers;
        std::vector<std::string> strings;
        bool is_string = false;
        std::string inner = s.substr(1, s.size() - 2);
        std::stringstream ss(inner);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = strip(item);
            if (item.empty()) continue;
            if (item.front() == '"') {
                if (item.back() != '"') throw ConfigError(where + ": bad array string");
                strings.push_back(item.substr(1, item.size() - 2));
                is_string = true;
            } else {
                double v = 0.0;
                auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
                if (ec != std::errc{} || p != item.data() + item.size())
                    throw ConfigError(where + ": bad number '" + item + "'");
                numbers.push_back(v);
            }
        }
        if (is_string && !numbers.empty())
            throw ConfigError(where + ": mixed array types");
        if (is_string) return strings;
        return numbers;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError(where + ": bad value '" + s + "'");
    return v;
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": bad table header");
            section = strip(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty table name");
            table[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        table[section][key] = parse_scalar(line.substr(eq + 1), where + " (" + key + ")");
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

void apply_override(TomlTable& table, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be section.key=value: " + assignment);
    const std::string path = strip(assignment.substr(0, eq));
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos)
        throw ConfigError("override key must be section.key: " + path);
    table[path.substr(0, dot)][path.substr(dot + 1)] =
        parse_scalar(assignment.substr(eq + 1), "override " + path);
}

namespace {

class SectionReader {
public:
    SectionReader(const TomlTable& table, const std::string& section)
        : section_(section) {
        auto it = table.find(section);
        if (it != table.end()) entries_ = &it->second;
    }

    double number(const std::string& key, double fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (const double* d = std::get_if<double>(v)) return *d;
        throw ConfigError(section_ + "." + key + ": expected a number");
    }
    int integer(const std::string& key, int fallback) {
        const double v = number(key, double(fallback));
        const int i = int(v);
        if (double(i) != v) throw ConfigError(section_ + "." + key + ": expected an integer");
        return i;
    }
    bool boolean(const std::string& key, bool fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (const bool* b = std::get_if<bool>(v)) return *b;
        throw ConfigError(section_ + "." + key + ": expected a boolean");
    }
    std::string text(const std::string& key, const std::string& fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (const std::string* s = std::get_if<std::string>(v)) return *s;
        throw ConfigError(section_ + "." + key + ": expected a string");
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
        throw ConfigError(section_ + "." + key + ": expected a number array");
    }

    void reject_unknown() const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_)
            if (!seen_.count(key))
                throw ConfigError("unknown key " + section_ + "." + key);
    }

private:
    const TomlValue* fetch(const std::string& key) {
        seen_.insert(key);
        if (!entries_) return nullptr;
        auto it = entries_->find(key);
        return it == entries_->end() ? nullptr : &it->second;
    }

    std::string section_;
    const std::map<std::string, TomlValue>* entries_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

PipelineConfig config_from_table(const TomlTable& table) {
    static const std::set<std::string> known_sections = {
        "global", "pack", "relax", "selection", "thermal", "smogn", "neural",
        "diffusion", "sweep"};
    for (const auto& [section, entries] : table)
        if (!known_sections.count(section))
            throw ConfigError("unknown section [" + section + "]");

    PipelineConfig cfg;

    SectionReader global(table, "global");
    cfg.seed = uint64_t(global.number("seed", double(cfg.seed)));
    cfg.out_dir = global.text("out_dir", cfg.out_dir);
    cfg.jobs = global.integer("jobs", cfg.jobs);
    global.reject_unknown();

    SectionReader pack(table, "pack");
    cfg.pack.frame_side = pack.number("frame_side", cfg.pack.frame_side);
    cfg.pack.cell_radius = pack.number("cell_radius", cfg.pack.cell_radius);
    cfg.pack.n_cells = pack.integer("n_cells", cfg.pack.n_cells);
    cfg.pack.inlet_count = pack.integer("inlet_count", cfg.pack.inlet_count);
    cfg.pack.port_width = pack.number("port_width", cfg.pack.port_width);
    pack.reject_unknown();

    SectionReader relax(table, "relax");
    cfg.relax.max_iterations = relax.integer("max_iterations", cfg.relax.max_iterations);
    cfg.relax.force_gain = relax.number("force_gain", cfg.relax.force_gain);
    cfg.per_category = relax.integer("per_category", cfg.per_category);
    cfg.categories = relax.numbers("categories", cfg.categories);
    cfg.augment_variants = relax.integer("augment_variants", cfg.augment_variants);
    relax.reject_unknown();

    SectionReader selection(table, "selection");
    cfg.k_per_category = std::size_t(selection.integer("k_per_category", int(cfg.k_per_category)));
    cfg.selection.resolution = selection.integer("resolution", cfg.selection.resolution);
    cfg.selection.matrix_memory_threshold = std::size_t(
        selection.integer("matrix_memory_threshold", int(cfg.selection.matrix_memory_threshold)));
    cfg.selection.candidate_sample =
        std::size_t(selection.integer("candidate_sample", int(cfg.selection.candidate_sample)));
    cfg.selection.max_swaps = selection.integer("max_swaps", cfg.selection.max_swaps);
    selection.reject_unknown();

    SectionReader thermal(table, "thermal");
    cfg.thermal.grid_n = thermal.integer("grid_n", cfg.thermal.grid_n);
    cfg.thermal.dt_safety = thermal.number("dt_safety", cfg.thermal.dt_safety);
    cfg.thermal.t_init = thermal.number("t_init", cfg.thermal.t_init);
    cfg.thermal.t_inlet = thermal.number("t_inlet", cfg.thermal.t_inlet);
    cfg.thermal.inlet_speed = thermal.number("inlet_speed", cfg.thermal.inlet_speed);
    cfg.thermal.coolant.k = thermal.number("coolant_k", cfg.thermal.coolant.k);
    cfg.thermal.coolant.cp = thermal.number("coolant_cp", cfg.thermal.coolant.cp);
    cfg.thermal.coolant.rho = thermal.number("coolant_rho", cfg.thermal.coolant.rho);
    cfg.thermal.cell.k = thermal.number("cell_k", cfg.thermal.cell.k);
    cfg.thermal.cell.cp = thermal.number("cell_cp", cfg.thermal.cell.cp);
    cfg.thermal.cell.rho = thermal.number("cell_rho", cfg.thermal.cell.rho);
    const double snapshot = thermal.number("snapshot_every", 0.0);
    cfg.thermal.snapshot_every =
        snapshot > 0.0 ? std::optional<double>(snapshot) : std::nullopt;
    cfg.heat.q0 = thermal.number("q0", cfg.heat.q0);
    cfg.heat.ramp = thermal.number("ramp", cfg.heat.ramp);
    cfg.heat.c_rate = thermal.number("c_rate", cfg.heat.c_rate);
    cfg.heat.soc_start = thermal.number("soc_start", cfg.heat.soc_start);
    cfg.heat.soc_end = thermal.number("soc_end", cfg.heat.soc_end);
    thermal.reject_unknown();

    SectionReader smogn(table, "smogn");
    cfg.smogn_enabled = smogn.boolean("enabled", cfg.smogn_enabled);
    cfg.relevance_spec.threshold = smogn.number("threshold", cfg.relevance_spec.threshold);
    cfg.smogn_k_neighbors = smogn.integer("k_neighbors", cfg.smogn_k_neighbors);
    cfg.smogn_noise_sigma = smogn.number("noise_sigma", cfg.smogn_noise_sigma);
    cfg.smogn_undersample = smogn.boolean("undersample_common", cfg.smogn_undersample);
    smogn.reject_unknown();

    SectionReader neural(table, "neural");
    const double lr = neural.number("lr", 1e-3);
    const double beta1 = neural.number("beta1", 0.9);
    const double beta2 = neural.number("beta2", 0.999);
    const int batch = neural.integer("batch", 256);
    for (TrainHyper* h : {&cfg.classifier_hyper, &cfg.surrogate_hyper, &cfg.denoiser_hyper}) {
        h->lr = lr;
        h->beta1 = beta1;
        h->beta2 = beta2;
        h->batch = batch;
    }
    // the classifier and surrogate train on far smaller datasets than the
    // denoiser, so they default to smaller minibatches
    cfg.classifier_hyper.batch = neural.integer("classifier_batch", 128);
    cfg.classifier_hyper.epochs = neural.integer("classifier_epochs", 30);
    cfg.classifier_hyper.classifier_hidden = neural.integer("classifier_hidden", 256);
    cfg.classifier_hyper.label_smoothing =
        neural.number("label_smoothing", cfg.classifier_hyper.label_smoothing);
    cfg.surrogate_hyper.batch = neural.integer("surrogate_batch", 32);
    cfg.surrogate_hyper.epochs = neural.integer("surrogate_epochs", 300);
    cfg.surrogate_folds = neural.integer("folds", cfg.surrogate_folds);
    cfg.infeasible_count = neural.integer("infeasible_count", cfg.infeasible_count);
    neural.reject_unknown();

    SectionReader diffusion(table, "diffusion");
    cfg.timesteps = diffusion.integer("timesteps", cfg.timesteps);
    cfg.beta_start = diffusion.number("beta_start", cfg.beta_start);
    cfg.beta_end = diffusion.number("beta_end", cfg.beta_end);
    cfg.denoiser_arch.embed_dim = diffusion.integer("embed_dim", cfg.denoiser_arch.embed_dim);
    cfg.denoiser_arch.hidden = diffusion.integer("hidden", cfg.denoiser_arch.hidden);
    cfg.denoiser_arch.hidden_layers =
        diffusion.integer("hidden_layers", cfg.denoiser_arch.hidden_layers);
    cfg.denoiser_hyper.epochs = diffusion.integer("epochs", 200);
    const std::string mode = diffusion.text("gradient_mode", "log-probability");
    if (mode == "log-probability") cfg.gradient_mode = GradientMode::LogProbability;
    else if (mode == "raw-probability") cfg.gradient_mode = GradientMode::RawProbability;
    else throw ConfigError("diffusion.gradient_mode: expected log-probability or raw-probability");
    diffusion.reject_unknown();

    SectionReader sweep(table, "sweep");
    cfg.sweep.gamma_values = sweep.numbers("gamma_values", cfg.sweep.gamma_values);
    cfg.sweep.lambda_values = sweep.numbers("lambda_values", cfg.sweep.lambda_values);
    cfg.sweep.samples_per_cell = sweep.integer("samples_per_cell", cfg.sweep.samples_per_cell);
    cfg.paper_grid = sweep.boolean("paper_grid", cfg.paper_grid);
    sweep.reject_unknown();

    cfg.denoiser_arch.data_dim = 2 * cfg.pack.n_cells;
    cfg.classifier_hyper.seed = derive_seed(cfg.seed, "hyper/classifier");
    cfg.surrogate_hyper.seed = derive_seed(cfg.seed, "hyper/surrogate");
    cfg.denoiser_hyper.seed = derive_seed(cfg.seed, "hyper/denoiser");

    cfg.validate();
    return cfg;
}

void PipelineConfig::validate() const {
    try {
        pack.validate();
        relax.validate();
        thermal.validate();
        heat.validate();
        sweep.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (per_category < 1) throw ConfigError("relax.per_category must be >= 1");
    if (categories.empty()) throw ConfigError("relax.categories must be nonempty");
    if (augment_variants < 1 || augment_variants > 8)
        throw ConfigError("relax.augment_variants must be in 1..8");
    if (k_per_category < 1) throw ConfigError("selection.k_per_category must be >= 1");
    if (selection.resolution < 64) throw ConfigError("selection.resolution must be >= 64");
    if (timesteps < 1) throw ConfigError("diffusion.timesteps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("diffusion: need 0 < beta_start <= beta_end < 1");
    if (surrogate_folds < 2) throw ConfigError("neural.folds must be >= 2");
    if (relevance_spec.threshold <= 0.0 || relevance_spec.threshold >= 1.0)
        throw ConfigError("smogn.threshold must be in (0,1)");
}

SweepGrid PipelineConfig::effective_sweep_grid() const {
    if (!paper_grid) return sweep;
    SweepGrid grid;
    grid.gamma_values.clear();
    for (int i = 0; i <= 20; ++i) grid.gamma_values.push_back(double(i) * 0.05);
    grid.lambda_values.clear();
    for (int i = 0; i <= 10; ++i) grid.lambda_values.push_back(double(i));
    grid.samples_per_cell = 1000;
    return grid;
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    TomlTable table = path.empty() ? TomlTable{} : parse_toml_file(path);
    for (const std::string& assignment : overrides) apply_override(table, assignment);
    return config_from_table(table);
}

std::string render_config_toml(const PipelineConfig& c) {
    std::ostringstream out;
    auto num = [](double v) { return format_double(v); };
    out << "[global]\n";
    out << "seed = " << c.seed << "\n";
    out << "out_dir = \"" << c.out_dir << "\"\n";
    out << "jobs = " << c.jobs << "\n\n";
    out << "[pack]\n";
    out << "frame_side = " << num(c.pack.frame_side) << "\n";
    out << "cell_radius = " << num(c.pack.cell_radius) << "\n";
    out << "n_cells = " << c.pack.n_cells << "\n";
    out << "inlet_count = " << c.pack.inlet_count << "\n";
    out << "port_width = " << num(c.pack.port_width) << "\n\n";
    out << "[relax]\n";
    out << "max_iterations = " << c.relax.max_iterations << "\n";
    out << "force_gain = " << num(c.relax.force_gain) << "\n";
    out << "per_category = " << c.per_category << "\n";
    out << "categories = [";
    for (std::size_t i = 0; i < c.categories.size(); ++i)
        out << (i ? ", " : "") << num(c.categories[i]);
    out << "]\n";
    out << "augment_variants = " << c.augment_variants << "\n\n";
    out << "[selection]\n";
    out << "k_per_category = " << c.k_per_category << "\n";
    out << "resolution = " << c.selection.resolution << "\n";
    out << "matrix_memory_threshold = " << c.selection.matrix_memory_threshold << "\n";
    out << "candidate_sample = " << c.selection.candidate_sample << "\n";
    out << "max_swaps = " << c.selection.max_swaps << "\n\n";
    out << "[thermal]\n";
    out << "grid_n = " << c.thermal.grid_n << "\n";
    out << "dt_safety = " << num(c.thermal.dt_safety) << "\n";
    out << "t_init = " << num(c.thermal.t_init) << "\n";
    out << "t_inlet = " << num(c.thermal.t_inlet) << "\n";
    out << "inlet_speed = " << num(c.thermal.inlet_speed) << "\n";
    out << "coolant_k = " << num(c.thermal.coolant.k) << "\n";
    out << "coolant_cp = " << num(c.thermal.coolant.cp) << "\n";
    out << "coolant_rho = " << num(c.thermal.coolant.rho) << "\n";
    out << "cell_k = " << num(c.thermal.cell.k) << "\n";
    out << "cell_cp = " << num(c.thermal.cell.cp) << "\n";
    out << "cell_rho = " << num(c.thermal.cell.rho) << "\n";
    out << "snapshot_every = " << num(c.thermal.snapshot_every.value_or(0.0)) << "\n";
    out << "q0 = " << num(c.heat.q0) << "\n";
    out << "ramp = " << num(c.heat.ramp) << "\n";
    out << "c_rate = " << num(c.heat.c_rate) << "\n";
    out << "soc_start = " << num(c.heat.soc_start) << "\n";
    out << "soc_end = " << num(c.heat.soc_end) << "\n\n";
    out << "[smogn]\n";
    out << "enabled = " << (c.smogn_enabled ? "true" : "false") << "\n";
    out << "threshold = " << num(c.relevance_spec.threshold) << "\n";
    out << "k_neighbors = " << c.smogn_k_neighbors << "\n";
    out << "noise_sigma = " << num(c.smogn_noise_sigma) << "\n";
    out << "undersample_common = " << (c.smogn_undersample ? "true" : "false") << "\n\n";
    out << "[neural]\n";
    out << "lr = " << num(c.surrogate_hyper.lr) << "\n";
    out << "beta1 = " << num(c.surrogate_hyper.beta1) << "\n";
    out << "beta2 = " << num(c.surrogate_hyper.beta2) << "\n";
    out << "batch = " << c.denoiser_hyper.batch << "\n";
    out << "classifier_batch = " << c.classifier_hyper.batch << "\n";
    out << "classifier_epochs = " << c.classifier_hyper.epochs << "\n";
    out << "classifier_hidden = " << c.classifier_hyper.classifier_hidden << "\n";
    out << "label_smoothing = " << num(c.classifier_hyper.label_smoothing) << "\n";
    out << "surrogate_batch = " << c.surrogate_hyper.batch << "\n";
    out << "surrogate_epochs = " << c.surrogate_hyper.epochs << "\n";
    out << "folds = " << c.surrogate_folds << "\n";
    out << "infeasible_count = " << c.infeasible_count << "\n\n";
    out << "[diffusion]\n";
    out << "timesteps = " << c.timesteps << "\n";
    out << "beta_start = " << num(c.beta_start) << "\n";
    out << "beta_end = " << num(c.beta_end) << "\n";
    out << "embed_dim = " << c.denoiser_arch.embed_dim << "\n";
    out << "hidden = " << c.denoiser_arch.hidden << "\n";
    out << "hidden_layers = " << c.denoiser_arch.hidden_layers << "\n";
    out << "epochs = " << c.denoiser_hyper.epochs << "\n";
    out << "gradient_mode = \""
        << (c.gradient_mode == GradientMode::LogProbability ? "log-probability"
                                                            : "raw-probability")
        << "\"\n\n";
    out << "[sweep]\n";
    out << "gamma_values = [";
    for (std::size_t i = 0; i < c.sweep.gamma_values.size(); ++i)
        out << (i ? ", " : "") << num(c.sweep.gamma_values[i]);
    out << "]\n";
    out << "lambda_values = [";
    for (std::size_t i = 0; i < c.sweep.lambda_values.size(); ++i)
        out << (i ? ", " : "") << num(c.sweep.lambda_values[i]);
    out << "]\n";
    out << "samples_per_cell = " << c.sweep.samples_per_cell << "\n";
    out << "paper_grid = " << (c.paper_grid ? "true" : "false") << "\n";
    return out.str();
}

}  // namespace packgen
