#include "packgen/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "packgen/layout_io.hpp"
#include "packgen/rng.hpp"

namespace packgen {

void SweepGrid::validate() const {
    if (gamma_values.empty() || lambda_values.empty())
        throw std::invalid_argument("SweepGrid: grids must be nonempty");
    if (!std::is_sorted(gamma_values.begin(), gamma_values.end()) ||
        !std::is_sorted(lambda_values.begin(), lambda_values.end()))
        throw std::invalid_argument("SweepGrid: grids must be sorted ascending");
    if (samples_per_cell < 1)
        throw std::invalid_argument("SweepGrid: samples_per_cell must be >= 1");
}

std::vector<double> SweepResult::matrix(double MetricsReport::* field) const {
    std::vector<double> out;
    out.reserve(cells.size());
    for (const SweepCell& cell : cells) out.push_back(cell.metrics.*field);
    return out;
}

SweepResult hyperparameter_sweep(const MlpModel& denoiser, const MlpModel& classifier,
                                 const MlpModel& surrogate, const NoiseSchedule& schedule,
                                 const SweepGrid& grid, const PackSpec& spec,
                                 int iou_resolution, uint64_t seed) {
    grid.validate();
    SweepResult result;
    result.grid = grid;
    result.cells.resize(grid.gamma_values.size() * grid.lambda_values.size());

    for (std::size_t gi = 0; gi < grid.gamma_values.size(); ++gi) {
        for (std::size_t li = 0; li < grid.lambda_values.size(); ++li) {
            const std::size_t cell_index = gi * grid.lambda_values.size() + li;
            SweepCell& cell = result.cells[cell_index];
            cell.gamma = grid.gamma_values[gi];
            cell.lambda = grid.lambda_values[li];
            try {
                GuidanceConfig g;
                g.gamma = cell.gamma;
                g.lambda = cell.lambda;
                const uint64_t cell_seed = derive_seed(seed, "sweep/cell", cell_index);
                const SampleBatch batch = sample_guided(denoiser, classifier, surrogate,
                                                        schedule, g, spec,
                                                        grid.samples_per_cell, cell_seed);
                cell.guidance_incidents = batch.guidance_incidents;
                std::vector<CellLayout> layouts;
                layouts.reserve(batch.items.size());
                for (const SampleItem& item : batch.items) layouts.push_back(item.layout);
                cell.metrics = evaluate_batch(layouts, surrogate, spec, iou_resolution);
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

// cyclic Jacobi eigendecomposition of a symmetric matrix
void jacobi_eigen(std::vector<double>& a, std::size_t n, std::vector<double>& eigvals,
                  std::vector<double>& eigvecs) {
    eigvecs.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eigvecs[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = eigvecs[k * n + p];
                    const double vkq = eigvecs[k * n + q];
                    eigvecs[k * n + p] = c * vkp - s * vkq;
                    eigvecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigvals[i] = a[i * n + i];
}

}  // namespace

PcaResult pca_project(
    const std::vector<std::vector<double>>& train_vectors,
    const std::vector<std::pair<std::string, std::vector<std::vector<double>>>>& named_sets) {
    if (train_vectors.size() < 3)
        throw std::invalid_argument("pca_project: need at least 3 training vectors");
    const std::size_t dim = train_vectors[0].size();
    const std::size_t n = train_vectors.size();

    PcaResult result;
    result.mean.assign(dim, 0.0);
    for (const auto& row : train_vectors)
        for (std::size_t f = 0; f < dim; ++f) result.mean[f] += row[f];
    for (double& m : result.mean) m /= double(n);

    std::vector<double> cov(dim * dim, 0.0);
    for (const auto& row : train_vectors) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double di = row[i] - result.mean[i];
            for (std::size_t j = i; j < dim; ++j)
                cov[i * dim + j] += di * (row[j] - result.mean[j]);
        }
    }
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) {
            cov[i * dim + j] /= double(n - 1);
            cov[j * dim + i] = cov[i * dim + j];
        }

    std::vector<double> eigvals, eigvecs;
    jacobi_eigen(cov, dim, eigvals, eigvecs);

    std::vector<std::size_t> order(dim);
    for (std::size_t i = 0; i < dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return eigvals[a] > eigvals[b]; });
    if (eigvals[order[0]] <= 1e-300)
        throw std::invalid_argument("pca_project: zero-variance training data");

    auto extract = [&](std::size_t col) {
        std::vector<double> v(dim);
        for (std::size_t k = 0; k < dim; ++k) v[k] = eigvecs[k * dim + col];
        // sign convention: first loading of nonzero magnitude is positive
        for (std::size_t k = 0; k < dim; ++k) {
            if (std::abs(v[k]) > 1e-12) {
                if (v[k] < 0.0)
                    for (double& x : v) x = -x;
                break;
            }
        }
        return v;
    };
    result.component1 = extract(order[0]);
    result.component2 = extract(order[1]);
    result.explained1 = eigvals[order[0]];
    result.explained2 = eigvals[order[1]];

    auto project_set = [&](const std::vector<std::vector<double>>& rows) {
        std::vector<std::pair<double, double>> out;
        out.reserve(rows.size());
        for (const auto& row : rows) {
            double p1 = 0.0, p2 = 0.0;
            for (std::size_t f = 0; f < dim; ++f) {
                const double centered = row[f] - result.mean[f];
                p1 += centered * result.component1[f];
                p2 += centered * result.component2[f];
            }
            out.emplace_back(p1, p2);
        }
        return out;
    };
    result.projections.emplace_back("train", project_set(train_vectors));
    for (const auto& [name, rows] : named_sets)
        result.projections.emplace_back(name, project_set(rows));
    return result;
}

// ---------------------------------------------------------------------------
// histograms

HistogramResult temperature_histogram(
    const std::vector<std::pair<std::string, std::vector<double>>>& named_values, int bins) {
    if (named_values.empty()) throw std::invalid_argument("temperature_histogram: no sets");
    if (bins < 1) throw std::invalid_argument("temperature_histogram: bins must be >= 1");

    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    for (const auto& [name, values] : named_values) {
        if (values.empty())
            throw std::invalid_argument("temperature_histogram: empty set " + name);
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi == lo) hi = lo + 1.0;  // constant data: all mass in one bin

    HistogramResult result;
    result.edges.resize(std::size_t(bins) + 1);
    const double width = (hi - lo) / double(bins);
    for (int b = 0; b <= bins; ++b) result.edges[b] = lo + width * double(b);

    for (const auto& [name, values] : named_values) {
        HistogramSet set;
        set.name = name;
        set.density.assign(std::size_t(bins), 0.0);
        for (double v : values) {
            int b = int((v - lo) / width);
            b = std::clamp(b, 0, bins - 1);
            set.density[std::size_t(b)] += 1.0;
        }
        const double norm = 1.0 / (double(values.size()) * width);
        for (double& d : set.density) d *= norm;

        double mean = 0.0;
        for (double v : values) mean += v;
        set.mean = mean / double(values.size());
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        const double pos = 0.05 * double(sorted.size() - 1);
        const std::size_t lo_idx = std::size_t(pos);
        const std::size_t hi_idx = std::min(lo_idx + 1, sorted.size() - 1);
        set.p5 = sorted[lo_idx] + (pos - double(lo_idx)) * (sorted[hi_idx] - sorted[lo_idx]);

        // Gaussian overlay, Silverman's rule of thumb
        double sd = 0.0;
        for (double v : values) sd += (v - set.mean) * (v - set.mean);
        sd = std::sqrt(sd / double(values.size()));
        const double q1 = sorted[std::size_t(0.25 * double(sorted.size() - 1))];
        const double q3 = sorted[std::size_t(0.75 * double(sorted.size() - 1))];
        double spread = std::min(sd, (q3 - q1) / 1.34);
        if (spread <= 0.0) spread = sd > 0.0 ? sd : width;
        const double h = std::max(0.9 * spread * std::pow(double(values.size()), -0.2), 1e-12);

        set.smooth.assign(std::size_t(bins), 0.0);
        const double kde_norm = 1.0 / (double(values.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
        for (int b = 0; b < bins; ++b) {
            const double center = lo + width * (double(b) + 0.5);
            double acc = 0.0;
            for (double v : values) {
                const double u = (center - v) / h;
                acc += std::exp(-0.5 * u * u);
            }
            set.smooth[std::size_t(b)] = acc * kde_norm;
        }
        result.sets.push_back(std::move(set));
    }
    return result;
}

AblationVerdict ablation_compare(const MetricsReport& guided, const MetricsReport& unguided) {
    if (guided.t_min != unguided.t_min || guided.t_max != unguided.t_max)
        throw std::invalid_argument("ablation_compare: mismatched normalization constants");
    auto ratio = [](double g, double u) {
        if (u > 0.0) return g / u;
        return g > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    };
    AblationVerdict verdict;
    verdict.cqi_ratio = ratio(guided.cqi, unguided.cqi);
    verdict.fr_ratio = ratio(guided.f_r, unguided.f_r);
    verdict.ds_ratio = ratio(guided.d_s, unguided.d_s);
    verdict.tnorm_ratio = ratio(guided.t_norm_mean, unguided.t_norm_mean);
    verdict.guided_wins = guided.cqi > unguided.cqi;
    return verdict;
}

// ---------------------------------------------------------------------------
// artifact writers

void write_heatmap_csv(const std::vector<double>& matrix, const SweepGrid& grid,
                       const std::string& path) {
    const std::size_t rows = grid.gamma_values.size();
    const std::size_t cols = grid.lambda_values.size();
    if (matrix.size() != rows * cols)
        throw std::invalid_argument("write_heatmap_csv: matrix shape mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "gamma\\lambda";
    for (double l : grid.lambda_values) out << "," << format_double(l);
    out << "\n";
    for (std::size_t gi = 0; gi < rows; ++gi) {
        out << format_double(grid.gamma_values[gi]);
        for (std::size_t li = 0; li < cols; ++li)
            out << "," << format_double(matrix[gi * cols + li]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_sweep_metrics_csv(const SweepResult& sweep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "gamma,lambda,f_r,d_s,t_norm_mean,cqi,n_feasible,n_total,guidance_incidents,error\n";
    for (const SweepCell& cell : sweep.cells) {
        std::string error = cell.failed ? cell.error : "";
        std::replace(error.begin(), error.end(), ',', ';');
        out << format_double(cell.gamma) << "," << format_double(cell.lambda) << ","
            << format_double(cell.metrics.f_r) << "," << format_double(cell.metrics.d_s) << ","
            << format_double(cell.metrics.t_norm_mean) << "," << format_double(cell.metrics.cqi)
            << "," << cell.metrics.n_feasible << "," << cell.metrics.n_total << ","
            << cell.guidance_incidents << "," << error << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_pca_csv(const PcaResult& pca, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "set,pc1,pc2\n";
    for (const auto& [name, points] : pca.projections)
        for (const auto& [p1, p2] : points)
            out << name << "," << format_double(p1) << "," << format_double(p2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_hist_csv(const HistogramResult& hist, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "bin_lo,bin_hi";
    for (const HistogramSet& set : hist.sets)
        out << "," << set.name << "_density," << set.name << "_smooth";
    out << "\n";
    const std::size_t bins = hist.edges.size() - 1;
    for (std::size_t b = 0; b < bins; ++b) {
        out << format_double(hist.edges[b]) << "," << format_double(hist.edges[b + 1]);
        for (const HistogramSet& set : hist.sets)
            out << "," << format_double(set.density[b]) << "," << format_double(set.smooth[b]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string color_lerp(double t) {
    // compact viridis-like ramp
    struct Stop { double t; int r, g, b; };
    static const Stop stops[] = {{0.0, 68, 1, 84},
                                 {0.25, 59, 82, 139},
                                 {0.5, 33, 145, 140},
                                 {0.75, 94, 201, 98},
                                 {1.0, 253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0);
    for (int i = 0; i < 4; ++i) {
        if (t <= stops[i + 1].t) {
            const double f = (t - stops[i].t) / (stops[i + 1].t - stops[i].t);
            char buf[16];
            std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                          int(stops[i].r + f * (stops[i + 1].r - stops[i].r)),
                          int(stops[i].g + f * (stops[i + 1].g - stops[i].g)),
                          int(stops[i].b + f * (stops[i + 1].b - stops[i].b)));
            return buf;
        }
    }
    return "#fde725";
}

const char* set_color(std::size_t i) {
    static const char* colors[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                   "#66ccee", "#aa3377", "#bbbbbb"};
    return colors[i % 7];
}

}  // namespace

void write_heatmap_svg(const std::vector<double>& matrix, const SweepGrid& grid,
                       const std::string& title, const std::string& path) {
    const std::size_t rows = grid.gamma_values.size();
    const std::size_t cols = grid.lambda_values.size();
    double lo = matrix[0], hi = matrix[0];
    for (double v : matrix) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) hi = lo + 1.0;

    const int cell = 48, margin = 70;
    const int width = margin + int(cols) * cell + 20;
    const int height = margin + int(rows) * cell + 40;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' font-family='sans-serif' font-size='11'>\n";
    out << "<text x='" << margin << "' y='20' font-size='14'>" << title << "</text>\n";
    for (std::size_t gi = 0; gi < rows; ++gi) {
        for (std::size_t li = 0; li < cols; ++li) {
            const double v = matrix[gi * cols + li];
            const int x = margin + int(li) * cell;
            const int y = margin + int(rows - 1 - gi) * cell;  // gamma grows upward
            out << "<rect x='" << x << "' y='" << y << "' width='" << cell << "' height='" << cell
                << "' fill='" << color_lerp((v - lo) / (hi - lo)) << "'/>\n";
            char label[32];
            std::snprintf(label, sizeof(label), "%.3f", v);
            out << "<text x='" << x + cell / 2 << "' y='" << y + cell / 2 + 4
                << "' text-anchor='middle' fill='white'>" << label << "</text>\n";
        }
    }
    for (std::size_t li = 0; li < cols; ++li)
        out << "<text x='" << margin + int(li) * cell + cell / 2 << "' y='"
            << margin + int(rows) * cell + 16 << "' text-anchor='middle'>"
            << format_double(grid.lambda_values[li]) << "</text>\n";
    for (std::size_t gi = 0; gi < rows; ++gi)
        out << "<text x='" << margin - 8 << "' y='"
            << margin + int(rows - 1 - gi) * cell + cell / 2 + 4
            << "' text-anchor='end'>" << format_double(grid.gamma_values[gi]) << "</text>\n";
    out << "<text x='" << margin + int(cols) * cell / 2 << "' y='" << height - 6
        << "' text-anchor='middle'>lambda</text>\n";
    out << "<text x='14' y='" << margin + int(rows) * cell / 2
        << "' text-anchor='middle' transform='rotate(-90 14 " << margin + int(rows) * cell / 2
        << ")'>gamma</text>\n";
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_scatter_svg(const PcaResult& pca, const std::string& title, const std::string& path) {
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const auto& [name, points] : pca.projections)
        for (const auto& [x, y] : points) {
            lo_x = std::min(lo_x, x);
            hi_x = std::max(hi_x, x);
            lo_y = std::min(lo_y, y);
            hi_y = std::max(hi_y, y);
        }
    if (hi_x == lo_x) hi_x = lo_x + 1.0;
    if (hi_y == lo_y) hi_y = lo_y + 1.0;

    const int size = 480, margin = 50;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size + 180 << "' height='"
        << size + 2 * margin << "' font-family='sans-serif' font-size='11'>\n";
    out << "<text x='" << margin << "' y='20' font-size='14'>" << title << "</text>\n";
    out << "<rect x='" << margin << "' y='" << margin << "' width='" << size << "' height='"
        << size << "' fill='none' stroke='#888'/>\n";
    std::size_t set_idx = 0;
    for (const auto& [name, points] : pca.projections) {
        const char* color = set_color(set_idx);
        for (const auto& [x, y] : points) {
            const double px = margin + (x - lo_x) / (hi_x - lo_x) * size;
            const double py = margin + size - (y - lo_y) / (hi_y - lo_y) * size;
            out << "<circle cx='" << px << "' cy='" << py << "' r='2.2' fill='" << color
                << "' fill-opacity='0.55'/>\n";
        }
        out << "<circle cx='" << size + margin + 16 << "' cy='" << margin + 14 * set_idx + 6
            << "' r='4' fill='" << color << "'/>\n";
        out << "<text x='" << size + margin + 26 << "' y='" << margin + 14 * set_idx + 10 << "'>"
            << name << "</text>\n";
        ++set_idx;
    }
    out << "<text x='" << margin + size / 2 << "' y='" << size + 2 * margin - 10
        << "' text-anchor='middle'>pc1</text>\n";
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_histogram_svg(const HistogramResult& hist, const std::string& title,
                         const std::string& path) {
    const std::size_t bins = hist.edges.size() - 1;
    double peak = 0.0;
    for (const HistogramSet& set : hist.sets) {
        for (double d : set.density) peak = std::max(peak, d);
        for (double d : set.smooth) peak = std::max(peak, d);
    }
    if (peak <= 0.0) peak = 1.0;

    const int width = 560, height = 360, margin = 50;
    const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width + 140 << "' height='"
        << height << "' font-family='sans-serif' font-size='11'>\n";
    out << "<text x='" << margin << "' y='20' font-size='14'>" << title << "</text>\n";
    out << "<rect x='" << margin << "' y='" << margin << "' width='" << plot_w << "' height='"
        << plot_h << "' fill='none' stroke='#888'/>\n";

    std::size_t set_idx = 0;
    for (const HistogramSet& set : hist.sets) {
        const char* color = set_color(set_idx);
        const double bw = plot_w / double(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const double h = set.density[b] / peak * plot_h;
            out << "<rect x='" << margin + bw * double(b) << "' y='" << margin + plot_h - h
                << "' width='" << bw << "' height='" << h << "' fill='" << color
                << "' fill-opacity='0.25'/>\n";
        }
        out << "<path d='";
        for (std::size_t b = 0; b < bins; ++b) {
            const double x = margin + bw * (double(b) + 0.5);
            const double y = margin + plot_h - set.smooth[b] / peak * plot_h;
            out << (b == 0 ? "M" : "L") << x << " " << y << " ";
        }
        out << "' fill='none' stroke='" << color << "' stroke-width='1.6'/>\n";
        out << "<circle cx='" << width - margin + 16 << "' cy='" << margin + 14 * set_idx + 6
            << "' r='4' fill='" << color << "'/>\n";
        out << "<text x='" << width - margin + 26 << "' y='" << margin + 14 * set_idx + 10 << "'>"
            << set.name << "</text>\n";
        ++set_idx;
    }
    char lo_label[32], hi_label[32];
    std::snprintf(lo_label, sizeof(lo_label), "%.3g", hist.edges.front());
    std::snprintf(hi_label, sizeof(hi_label), "%.3g", hist.edges.back());
    out << "<text x='" << margin << "' y='" << height - margin + 16 << "'>" << lo_label
        << "</text>\n";
    out << "<text x='" << margin + plot_w << "' y='" << height - margin + 16
        << "' text-anchor='end'>" << hi_label << "</text>\n";
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace packgen
