#include "packgen/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace packgen {

void HeatSourceProfile::validate() const {
    if (!(soc_end >= 0.0 && soc_end < soc_start && soc_start <= 1.0))
        throw std::invalid_argument("HeatSourceProfile: need 0 <= soc_end < soc_start <= 1");
    if (c_rate <= 0.0) throw std::invalid_argument("HeatSourceProfile: c_rate must be > 0");
    if (q0 < 0.0) throw std::invalid_argument("HeatSourceProfile: q0 must be >= 0");
}

void ThermalConfig::validate() const {
    if (grid_n < 25) throw std::invalid_argument("ThermalConfig: grid_n must be >= 25");
    if (!(dt_safety > 0.0 && dt_safety < 1.0))
        throw std::invalid_argument("ThermalConfig: dt_safety must be in (0,1)");
    for (const Material& m : {coolant, cell})
        if (m.k <= 0.0 || m.cp <= 0.0 || m.rho <= 0.0)
            throw std::invalid_argument("ThermalConfig: material properties must be > 0");
    if (inlet_speed <= 0.0)
        throw std::invalid_argument("ThermalConfig: inlet_speed must be > 0");
}

double discharge_duration(const HeatSourceProfile& profile) {
    profile.validate();
    return (profile.soc_start - profile.soc_end) * 3600.0 / profile.c_rate;
}

double heat_source(const HeatSourceProfile& profile, double t) {
    const double t_end = discharge_duration(profile);
    if (t < 0.0 || t > t_end)
        throw std::invalid_argument("heat_source: t outside discharge window");
    if (t_end == 0.0) return profile.q0;
    return profile.q0 * (1.0 + profile.ramp * t / t_end);
}

ThermalScene build_scene(const CellLayout& layout, const PackSpec& spec,
                         const ThermalConfig& config) {
    config.validate();
    const int n = config.grid_n;
    ThermalScene scene;
    scene.grid_n = n;
    scene.dx = spec.frame_side * 1e-3 / double(n);
    scene.solid.assign(std::size_t(n) * n, 0);
    scene.cell_index.assign(std::size_t(n) * n, -1);

    const double px_mm = spec.frame_side / double(n);
    const double r2 = spec.cell_radius * spec.cell_radius;
    for (std::size_t c = 0; c < layout.centers.size(); ++c) {
        const Point& center = layout.centers[c];
        const int j_lo = std::max(0, int((center.y - spec.cell_radius) / px_mm) - 1);
        const int j_hi = std::min(n - 1, int((center.y + spec.cell_radius) / px_mm) + 1);
        const int i_lo = std::max(0, int((center.x - spec.cell_radius) / px_mm) - 1);
        const int i_hi = std::min(n - 1, int((center.x + spec.cell_radius) / px_mm) + 1);
        for (int j = j_lo; j <= j_hi; ++j) {
            const double dy = (double(j) + 0.5) * px_mm - center.y;
            for (int i = i_lo; i <= i_hi; ++i) {
                const double dx = (double(i) + 0.5) * px_mm - center.x;
                if (dx * dx + dy * dy <= r2) {
                    scene.solid[std::size_t(j) * n + i] = 1;
                    scene.cell_index[std::size_t(j) * n + i] = int(c);
                }
            }
        }
    }
    for (uint8_t s : scene.solid) scene.solid_count += s;

    scene.row_speed.assign(n, config.inlet_speed);
    for (int j = 0; j < n; ++j) {
        int fluid = 0;
        for (int i = 0; i < n; ++i) fluid += scene.solid[std::size_t(j) * n + i] ? 0 : 1;
        if (fluid == 0)
            throw std::runtime_error("build_scene: grid row " + std::to_string(j) +
                                     " fully blocked by solid");
        scene.row_speed[j] = config.inlet_speed * double(n) / double(fluid);
    }
    return scene;
}

namespace {

// Precomputed 5-point stencil on excess temperature (T - t_inlet). Held inlet
// cells carry all-zero coefficients so they stay pinned without branching.
struct Stencil {
    int n = 0;
    std::vector<double> cC, cE, cW, cN, cS, src;
    // advective flux leaving the audited domain (outlet faces, faces into the
    // pinned inlet cells): cell index and energy-per-excess-degree coefficient
    std::vector<std::pair<std::size_t, double>> exits;
    std::vector<int> row_solid_lo, row_solid_hi;  // per-row solid span, lo > hi if none
    double dt = 0.0;
};

// The coolant threads upward around the disks. The flux network comes from a
// unit-conductance potential flow on the fluid cells (injection across the
// inlet row, sink above the outlet row, solids and walls impermeable), so
// discrete continuity holds cell by cell and no spurious flux crosses a
// solid. A prescribed per-row plug flow instead leaves dead-end columns under
// the disks that accumulate advected energy without bound.
struct FlowField {
    std::vector<double> vert;  // (n+1) x n interfaces, m^2/s per depth, + up
    std::vector<double> horiz; // n x (n-1) faces, + rightward

    double up(int i, int j_interface, int n) const {
        return vert[std::size_t(j_interface) * n + i];
    }
    double right(int i, int j, int n) const {
        return horiz[std::size_t(j) * (n - 1) + i];
    }
};

FlowField build_flow(const ThermalScene& scene, const ThermalConfig& config) {
    const int n = scene.grid_n;
    const double total_flux = config.inlet_speed * scene.dx * double(n);

    auto fluid = [&](int i, int j) { return !scene.solid[std::size_t(j) * n + i]; };

    // a fully blocked interface leaves nowhere for the coolant to go
    for (int jf = 0; jf <= n; ++jf) {
        int open = 0;
        for (int i = 0; i < n; ++i) {
            const bool below_ok = jf == 0 || fluid(i, jf - 1);
            const bool above_ok = jf == n || fluid(i, jf);
            if (below_ok && above_ok) ++open;
        }
        if (open == 0)
            throw std::runtime_error("build_scene: flow interface " + std::to_string(jf) +
                                     " fully blocked, continuity undefined");
    }

    int inlet_open = 0;
    for (int i = 0; i < n; ++i) inlet_open += fluid(i, 0) ? 1 : 0;
    const double injection = total_flux / double(inlet_open);

    // SOR on the potential; top-row fluid cells couple to a zero-potential
    // ghost so the flow exits there
    const std::size_t cells = std::size_t(n) * n;
    std::vector<double> phi(cells, 0.0);
    std::vector<double> diag(cells, 0.0);
    std::vector<double> rhs(cells, 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = std::size_t(j) * n + i;
            if (!fluid(i, j)) continue;
            double d = 0.0;
            if (i > 0 && fluid(i - 1, j)) d += 1.0;
            if (i + 1 < n && fluid(i + 1, j)) d += 1.0;
            if (j > 0 && fluid(i, j - 1)) d += 1.0;
            if (j + 1 < n && fluid(i, j + 1)) d += 1.0;
            if (j + 1 == n) d += 1.0;  // outlet ghost
            diag[c] = d;
            if (j == 0) rhs[c] = injection;
        }

    const double omega = 2.0 / (1.0 + std::sin(3.14159265358979323846 / double(n)));
    const double tol = 1e-13 * injection;
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double worst = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const std::size_t c = std::size_t(j) * n + i;
                if (diag[c] == 0.0) continue;
                double nb = 0.0;
                if (i > 0 && fluid(i - 1, j)) nb += phi[c - 1];
                if (i + 1 < n && fluid(i + 1, j)) nb += phi[c + 1];
                if (j > 0 && fluid(i, j - 1)) nb += phi[c - n];
                if (j + 1 < n && fluid(i, j + 1)) nb += phi[c + n];
                const double residual = rhs[c] + nb - diag[c] * phi[c];
                phi[c] += omega * residual / diag[c];
                worst = std::max(worst, std::abs(residual));
            }
        }
        if (worst < tol) break;
    }

    FlowField flow;
    flow.vert.assign(std::size_t(n + 1) * n, 0.0);
    flow.horiz.assign(std::size_t(n) * (n - 1), 0.0);
    for (int i = 0; i < n; ++i) {
        if (fluid(i, 0)) flow.vert[i] = injection;  // inlet faces
        if (fluid(i, n - 1))
            flow.vert[std::size_t(n) * n + i] = phi[std::size_t(n - 1) * n + i];  // outlet
    }
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i < n; ++i)
            if (fluid(i, j) && fluid(i, j + 1))
                flow.vert[std::size_t(j + 1) * n + i] =
                    phi[std::size_t(j) * n + i] - phi[std::size_t(j + 1) * n + i];
    for (int j = 0; j < n; ++j)
        for (int i = 0; i + 1 < n; ++i)
            if (fluid(i, j) && fluid(i + 1, j))
                flow.horiz[std::size_t(j) * (n - 1) + i] =
                    phi[std::size_t(j) * n + i] - phi[std::size_t(j) * n + i + 1];
    return flow;
}

Stencil build_stencil(const ThermalScene& scene, const ThermalConfig& config,
                      const FlowField& flow) {
    const int n = scene.grid_n;
    const std::size_t cells = std::size_t(n) * n;
    const double dx = scene.dx;
    const double rc_f = config.coolant.rho * config.coolant.cp;
    const double rc_s = config.cell.rho * config.cell.cp;

    auto held = [&](int i, int j) { return j == 0 && !scene.solid[std::size_t(j) * n + i]; };
    auto is_solid = [&](int i, int j) { return scene.solid[std::size_t(j) * n + i] != 0; };

    // first pass with dt = 1 yields per-cell rate sums for the stability bound
    Stencil st;
    st.n = n;
    st.cC.assign(cells, 0.0);
    st.cE.assign(cells, 0.0);
    st.cW.assign(cells, 0.0);
    st.cN.assign(cells, 0.0);
    st.cS.assign(cells, 0.0);
    st.src.assign(cells, 0.0);
    st.row_solid_lo.assign(n, n);
    st.row_solid_hi.assign(n, -1);

    std::vector<double> rate_sum(cells, 0.0);
    std::vector<double> exit_coef(cells, 0.0);

    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t c = std::size_t(j) * n + i;
            const bool solid = is_solid(i, j);
            if (solid) {
                if (i < st.row_solid_lo[j]) st.row_solid_lo[j] = i;
                if (i > st.row_solid_hi[j]) st.row_solid_hi[j] = i;
            }
            if (held(i, j)) continue;  // pinned to the inlet temperature

            const double rc = solid ? rc_s : rc_f;
            const double k_c = solid ? config.cell.k : config.coolant.k;
            const double inv_heat = 1.0 / (rc * dx * dx);

            // conduction: harmonic mean within a phase, interfacial film
            // coefficient across the cell-coolant boundary
            auto cond_face = [&](int ni, int nj, std::vector<double>& coef) {
                if (ni < 0 || ni >= n || nj < 0 || nj >= n) return;  // insulated wall
                if (held(ni, nj)) return;  // inlet ghosts carry no conductive flux
                const bool nb_solid = is_solid(ni, nj);
                double conductance;  // W/K per face and unit depth
                if (nb_solid != solid) {
                    conductance = config.film_h * dx;  // h * face area
                } else {
                    // harmonic k times face area over the center distance
                    const double k_nb = nb_solid ? config.cell.k : config.coolant.k;
                    conductance = 2.0 * k_c * k_nb / (k_c + k_nb);
                }
                const double rate = conductance * inv_heat;
                coef[c] += rate;
                rate_sum[c] += rate;
            };
            cond_face(i + 1, j, st.cE);
            cond_face(i - 1, j, st.cW);
            cond_face(i, j + 1, st.cN);
            cond_face(i, j - 1, st.cS);

            // advection in conservative upwind flux form over the flow network
            const double adv_scale = rc_f / (rc * dx * dx);
            if (j > 0) {
                const double q = flow.up(i, j, n);  // + up: inflow from below
                if (q > 0.0) st.cS[c] += adv_scale * q;
                if (q < 0.0) {
                    rate_sum[c] += adv_scale * (-q);
                    if (held(i, j - 1)) exit_coef[c] += rc_f * (-q);
                }
            }
            // j == 0 inflow arrives at the inlet temperature (excess zero)
            {
                const double q = flow.up(i, j + 1, n);
                if (q > 0.0) {
                    rate_sum[c] += adv_scale * q;
                    if (j + 1 == n) exit_coef[c] += rc_f * q;  // outlet
                }
                if (q < 0.0 && j + 1 < n) st.cN[c] += adv_scale * (-q);
            }
            if (i > 0) {
                const double h = flow.right(i - 1, j, n);
                if (h > 0.0) st.cW[c] += adv_scale * h;  // inflow from the left
                if (h < 0.0) {
                    rate_sum[c] += adv_scale * (-h);
                    if (held(i - 1, j)) exit_coef[c] += rc_f * (-h);
                }
            }
            if (i + 1 < n) {
                const double h = flow.right(i, j, n);
                if (h < 0.0) st.cE[c] += adv_scale * (-h);  // inflow from the right
                if (h > 0.0) {
                    rate_sum[c] += adv_scale * h;
                    if (held(i + 1, j)) exit_coef[c] += rc_f * h;
                }
            }

            if (solid) st.src[c] = 1.0 / rc_s;  // times dt later
        }
    }

    // stability: the diffusive and advective limits of the scheme plus the
    // generic positivity bound on the assembled rates
    const double diff_limit = std::min(
        dx * dx * config.coolant.rho * config.coolant.cp / (4.0 * config.coolant.k),
        dx * dx * config.cell.rho * config.cell.cp / (4.0 * config.cell.k));
    double v_max = 0.0;
    for (double v : scene.row_speed) v_max = std::max(v_max, v);
    double rate_max = 0.0;
    for (std::size_t c = 0; c < cells; ++c) rate_max = std::max(rate_max, rate_sum[c]);
    double dt = config.dt_safety * std::min(diff_limit, dx / v_max);
    // the assembled-rate bound guards the fast pinch channels of the flow
    // network; positivity of the center coefficient is what stability needs
    if (rate_max > 0.0) dt = std::min(dt, 0.9 / rate_max);
    st.dt = dt;

    for (std::size_t c = 0; c < cells; ++c) {
        st.cE[c] *= dt;
        st.cW[c] *= dt;
        st.cN[c] *= dt;
        st.cS[c] *= dt;
        st.src[c] *= dt;
        st.cC[c] = 1.0 - dt * rate_sum[c];
        if (exit_coef[c] != 0.0) st.exits.emplace_back(c, exit_coef[c] * dt);
    }
    return st;
}

inline void step_row(const Stencil& st, const double* t_old, double* t_new, double q,
                     double* max_field, int j) {
    const int n = st.n;
    const std::size_t base = std::size_t(j) * n;
    const double* row = t_old + base;
    const double* row_s = j > 0 ? row - n : row;
    const double* row_n = j + 1 < n ? row + n : row;

    t_new[base] = st.cC[base] * row[0] + st.cE[base] * row[1] +
                  (st.cN[base] * row_n[0] + st.cS[base] * row_s[0]) + st.src[base] * q;
    for (int i = 1; i < n - 1; ++i) {
        const std::size_t c = base + i;
        t_new[c] = st.cC[c] * row[i] + (st.cE[c] * row[i + 1] + st.cW[c] * row[i - 1]) +
                   (st.cN[c] * row_n[i] + st.cS[c] * row_s[i]) + st.src[c] * q;
    }
    const std::size_t last = base + n - 1;
    t_new[last] = st.cC[last] * row[n - 1] + st.cW[last] * row[n - 2] +
                  (st.cN[last] * row_n[n - 1] + st.cS[last] * row_s[n - 1]) +
                  st.src[last] * q;

    for (int i = st.row_solid_lo[j]; i <= st.row_solid_hi[j]; ++i)
        max_field[base + i] = std::max(max_field[base + i], t_new[base + i]);
}

void step_serial(const Stencil& st, const double* t_old, double* t_new, double q,
                 double* max_field) {
    for (int j = 0; j < st.n; ++j) step_row(st, t_old, t_new, q, max_field, j);
}

void step_openmp(const Stencil& st, const double* t_old, double* t_new, double q,
                 double* max_field) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < st.n; ++j) step_row(st, t_old, t_new, q, max_field, j);
}

}  // namespace

ThermalResult simulate_discharge(const CellLayout& layout, const PackSpec& spec,
                                 const HeatSourceProfile& profile,
                                 const ThermalConfig& config) {
    profile.validate();
    const ThermalScene scene = build_scene(layout, spec, config);
    const FlowField flow = build_flow(scene, config);
    const Stencil st = build_stencil(scene, config, flow);
    const int n = scene.grid_n;
    const std::size_t cells = std::size_t(n) * n;
    const double t_end = discharge_duration(profile);

    const long steps = t_end > 0.0 ? long(std::ceil(t_end / st.dt)) : 0;
    const double dt = steps > 0 ? t_end / double(steps) : 0.0;
    // rebuild with the rounded dt so coefficients and audit agree exactly
    Stencil stencil = st;
    if (steps > 0 && dt != st.dt) {
        const double scale = dt / st.dt;
        for (std::size_t c = 0; c < cells; ++c) {
            stencil.cE[c] *= scale;
            stencil.cW[c] *= scale;
            stencil.cN[c] *= scale;
            stencil.cS[c] *= scale;
            stencil.src[c] *= scale;
            stencil.cC[c] = 1.0 - (1.0 - stencil.cC[c]) * scale;
        }
        for (auto& [cell, coef] : stencil.exits) coef *= scale;
        stencil.dt = dt;
    }

    const double excess_init = config.t_init - config.t_inlet;
    std::vector<double> t_a(cells, 0.0), t_b(cells, 0.0), max_field(cells, 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = std::size_t(j) * n + i;
            const bool held = j == 0 && !scene.solid[c];
            t_a[c] = held ? 0.0 : excess_init;
            max_field[c] = t_a[c];
        }

    const double rc_f = config.coolant.rho * config.coolant.cp;
    const double rc_s = config.cell.rho * config.cell.cp;
    const double cell_area = scene.dx * scene.dx;

    double injected = 0.0;
    double advected_out = 0.0;
    double stored_init = 0.0;
    for (std::size_t c = 0; c < cells; ++c)
        stored_init += (scene.solid[c] ? rc_s : rc_f) * t_a[c] * cell_area;

    ThermalResult result;
    result.dt = stencil.dt;
    result.steps = steps;

    const double snapshot_interval = config.snapshot_every.value_or(0.0);
    double next_snapshot = snapshot_interval;

    double* cur = t_a.data();
    double* nxt = t_b.data();
    for (long step = 0; step < steps; ++step) {
        const double t_now = double(step) * stencil.dt;
        const double q = heat_source(profile, t_now);

        if (config.kernel == ThermalKernel::OpenMp)
            step_openmp(stencil, cur, nxt, q, max_field.data());
        else
            step_serial(stencil, cur, nxt, q, max_field.data());

        injected += q * stencil.dt * double(scene.solid_count) * cell_area;
        double out_flux = 0.0;
        for (const auto& [cell, coef] : stencil.exits) out_flux += coef * cur[cell];
        advected_out += out_flux;

        std::swap(cur, nxt);

        if ((step & 127) == 0 && !std::isfinite(cur[cells / 2])) {
            bool bad = false;
            for (std::size_t c = 0; c < cells && !bad; ++c) bad = !std::isfinite(cur[c]);
            if (bad)
                throw std::runtime_error("simulate_discharge: non-finite temperature at step " +
                                         std::to_string(step) + " (dt=" + std::to_string(stencil.dt) + ")");
        }
        if (snapshot_interval > 0.0 && t_now + stencil.dt >= next_snapshot) {
            std::vector<float> snap(cells);
            for (std::size_t c = 0; c < cells; ++c)
                snap[c] = float(cur[c] + config.t_inlet);
            result.snapshots.push_back(std::move(snap));
            next_snapshot += snapshot_interval;
        }
    }

    for (std::size_t c = 0; c < cells; ++c)
        if (!std::isfinite(cur[c]))
            throw std::runtime_error("simulate_discharge: non-finite temperature at end (dt=" +
                                     std::to_string(stencil.dt) + ")");

    double stored = 0.0;
    for (std::size_t c = 0; c < cells; ++c)
        stored += (scene.solid[c] ? rc_s : rc_f) * cur[c] * cell_area;
    const double balance = (stored - stored_init) + advected_out - injected;
    result.energy_residual = injected > 0.0 ? std::abs(balance) / injected : 0.0;

    result.per_cell_max.assign(layout.centers.size(), config.t_init);
    for (std::size_t c = 0; c < cells; ++c) {
        const int idx = scene.cell_index[c];
        if (idx >= 0)
            result.per_cell_max[idx] =
                std::max(result.per_cell_max[idx], max_field[c] + config.t_inlet);
    }
    result.max_cell_temp = config.t_init;
    for (double v : result.per_cell_max) result.max_cell_temp = std::max(result.max_cell_temp, v);
    return result;
}

LabelReport label_dataset(LayoutDataset& dataset, const PackSpec& spec,
                          const HeatSourceProfile& profile, const ThermalConfig& config,
                          int jobs) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (dataset.records[i].max_temp_c) continue;
        if (!check_feasibility(dataset.records[i].layout, spec, 0.0))
            throw std::invalid_argument("label_dataset: infeasible layout " +
                                        dataset.records[i].id);
        todo.push_back(i);
    }

    // simulations run serially inside, parallel across layouts
    ThermalConfig per_item = config;
    per_item.kernel = ThermalKernel::Serial;

    std::vector<uint8_t> failed(todo.size(), 0);
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < std::ptrdiff_t(todo.size()); ++k) {
        LayoutRecord& rec = dataset.records[todo[k]];
        try {
            const ThermalResult r = simulate_discharge(rec.layout, spec, profile, per_item);
            rec.max_temp_c = r.max_cell_temp;
            rec.energy_residual = r.energy_residual;
        } catch (const std::exception&) {
            failed[k] = 1;
        }
    }

    LabelReport report;
    for (std::size_t k = 0; k < todo.size(); ++k)
        if (failed[k]) report.failed_ids.push_back(dataset.records[todo[k]].id);
    if (!todo.empty() && report.failed_ids.size() * 10 > todo.size())
        throw std::runtime_error("label_dataset: more than 10% of simulations failed (" +
                                 std::to_string(report.failed_ids.size()) + "/" +
                                 std::to_string(todo.size()) + ")");
    return report;
}

void write_snapshots(const ThermalResult& result, int grid_n, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    const uint32_t n = uint32_t(grid_n);
    const uint32_t count = uint32_t(result.snapshots.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& snap : result.snapshots)
        out.write(reinterpret_cast<const char*>(snap.data()),
                  std::streamsize(snap.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace packgen
