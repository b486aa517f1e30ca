#include "packgen/diffusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "packgen/rng.hpp"

namespace packgen {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double running = 1.0;
    for (int t = 0; t < T; ++t) {
        s.beta[t] = T == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * double(t) / double(T - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        running *= s.alpha[t];
        s.alpha_bar[t] = running;
        s.sigma[t] = std::sqrt(s.beta[t]);
    }
    return s;
}

std::vector<double> forward_noise(const std::vector<double>& x0, int t,
                                  const std::vector<double>& eps, const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("forward_noise: t out of range");
    if (eps.size() != x0.size()) throw std::invalid_argument("forward_noise: eps size mismatch");
    const double a = std::sqrt(s.alpha_bar[t - 1]);
    const double b = std::sqrt(1.0 - s.alpha_bar[t - 1]);
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

void GuidanceConfig::validate() const {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("GuidanceConfig: gamma must be in [0,1]");
    if (lambda < 0.0) throw std::invalid_argument("GuidanceConfig: lambda must be >= 0");
}

std::vector<double> timestep_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
    std::vector<double> emb(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half - 1));
        emb[2 * i] = std::sin(double(t) * freq);
        emb[2 * i + 1] = std::cos(double(t) * freq);
    }
    return emb;
}

MlpModel make_denoiser(const DenoiserArch& arch, uint64_t seed) {
    std::vector<int> dims;
    dims.push_back(arch.data_dim + arch.embed_dim);
    for (int l = 0; l < arch.hidden_layers; ++l) dims.push_back(arch.hidden);
    dims.push_back(arch.data_dim);
    return make_mlp(MlpModel::Arch::Denoiser, dims, {}, seed);
}

std::pair<MlpModel, TrainReport> train_denoiser(
    const std::vector<std::vector<double>>& normalized_layouts, const NoiseSchedule& s,
    MlpModel denoiser, const TrainHyper& hyper) {
    if (normalized_layouts.empty())
        throw std::invalid_argument("train_denoiser: dataset is empty");
    if (denoiser.arch != MlpModel::Arch::Denoiser)
        throw std::invalid_argument("train_denoiser: wrong arch tag");

    const std::size_t n = normalized_layouts.size();
    const std::size_t data_dim = normalized_layouts[0].size();
    const std::size_t embed_dim = std::size_t(denoiser.layer_dims[0]) - data_dim;

    TrainReport report;
    report.seed = hyper.seed;
    {
        std::string bytes;
        for (const auto& row : normalized_layouts)
            bytes.append(reinterpret_cast<const char*>(row.data()),
                         row.size() * sizeof(double));
        report.dataset_fingerprint = fnv1a64(bytes);
    }

    AdamState adam(denoiser.params.size());
    adam.lr = hyper.lr;
    adam.beta1 = hyper.beta1;
    adam.beta2 = hyper.beta2;

    Rng rng(derive_seed(hyper.seed, "denoiser/train"));
    std::vector<std::vector<double>> inputs(n), targets(n);
    std::vector<std::size_t> order(n);
    std::vector<double> eps(data_dim);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        // linear decay to 10% settles the late epochs
        adam.lr = hyper.epochs > 1
                      ? hyper.lr * (1.0 - 0.9 * double(epoch) / double(hyper.epochs - 1))
                      : hyper.lr;
        for (std::size_t i = 0; i < n; ++i) {
            const int t = int(rng.below(uint64_t(s.T))) + 1;
            for (double& e : eps) e = rng.gaussian();
            const std::vector<double> x_t = forward_noise(normalized_layouts[i], t, eps, s);
            const std::vector<double> emb = timestep_embedding(t, int(embed_dim));
            inputs[i].resize(data_dim + embed_dim);
            std::copy(x_t.begin(), x_t.end(), inputs[i].begin());
            std::copy(emb.begin(), emb.end(), inputs[i].begin() + std::ptrdiff_t(data_dim));
            targets[i] = eps;
        }
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        const double loss = train_epoch_mse(denoiser, adam, inputs, targets, order, hyper.batch);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_denoiser: NaN loss at epoch " + std::to_string(epoch));
        report.epoch_losses.push_back(loss);
    }
    return {std::move(denoiser), std::move(report)};
}

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

SampleBatch sample_core(const MlpModel& denoiser, const MlpModel* classifier,
                        const MlpModel* surrogate, const NoiseSchedule& s,
                        const GuidanceConfig& g, const PackSpec& spec, int n,
                        uint64_t seed, const MlpModel* surrogate_for_eval) {
    g.validate();
    const std::size_t data_dim = std::size_t(denoiser.layer_dims.back());
    const std::size_t embed_dim = std::size_t(denoiser.layer_dims[0]) - data_dim;
    const bool guided = g.gamma != 0.0 || g.lambda != 0.0;
    if (g.gamma != 0.0 && classifier == nullptr)
        throw std::invalid_argument("sample: gamma > 0 requires a classifier");
    if (g.lambda != 0.0 && surrogate == nullptr)
        throw std::invalid_argument("sample: lambda > 0 requires a surrogate");

    std::vector<std::vector<double>> embeddings(std::size_t(s.T) + 1);
    for (int t = 1; t <= s.T; ++t) embeddings[t] = timestep_embedding(t, int(embed_dim));

    SampleBatch batch;
    batch.items.resize(std::size_t(n));
    std::vector<int> incidents(std::size_t(n), 0);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t chain = 0; chain < std::ptrdiff_t(n); ++chain) {
        Rng rng(derive_seed(seed, "diffusion/chain", uint64_t(chain)));
        std::vector<double> x(data_dim);
        for (double& v : x) v = rng.gaussian();

        std::vector<double> input(data_dim + embed_dim);
        std::vector<double> z(data_dim);
        for (int t = s.T; t >= 1; --t) {
            std::copy(x.begin(), x.end(), input.begin());
            std::copy(embeddings[t].begin(), embeddings[t].end(),
                      input.begin() + std::ptrdiff_t(data_dim));
            const std::vector<double> eps_hat = forward(denoiser, input);

            const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha[t - 1]);
            const double eps_coef = (1.0 - s.alpha[t - 1]) / std::sqrt(1.0 - s.alpha_bar[t - 1]);
            if (t > 1)
                for (double& v : z) v = rng.gaussian();
            else
                std::fill(z.begin(), z.end(), 0.0);

            if (!guided) {
                for (std::size_t i = 0; i < data_dim; ++i)
                    x[i] = inv_sqrt_alpha * (x[i] - eps_coef * eps_hat[i]) + s.sigma[t - 1] * z[i];
                continue;
            }

            std::vector<double> grad_cls, grad_sur;
            if (g.gamma != 0.0) {
                grad_cls = classifier_input_grad(*classifier, x, spec, g.gradient_mode);
                if (!all_finite(grad_cls)) {
                    std::fill(grad_cls.begin(), grad_cls.end(), 0.0);
                    ++incidents[std::size_t(chain)];
                }
            }
            if (g.lambda != 0.0) {
                grad_sur = surrogate_input_grad(*surrogate, x);
                if (!all_finite(grad_sur)) {
                    std::fill(grad_sur.begin(), grad_sur.end(), 0.0);
                    ++incidents[std::size_t(chain)];
                }
            }
            const double noise_coef = s.sigma[t - 1] * (1.0 - g.gamma);
            for (std::size_t i = 0; i < data_dim; ++i) {
                double v = inv_sqrt_alpha * (x[i] - eps_coef * eps_hat[i]) + noise_coef * z[i];
                if (g.gamma != 0.0) v += g.gamma * grad_cls[i];
                if (g.lambda != 0.0) v -= g.lambda * grad_sur[i];
                x[i] = v;
            }
        }

        SampleItem item;
        const CellLayout raw = denormalize({x}, spec);
        item.layout = canonical_order(raw, spec.cell_radius);
        item.feasible = item.layout.centers.size() == std::size_t(spec.n_cells) &&
                        check_feasibility(item.layout, spec, 0.0);
        const MlpModel* scorer = surrogate_for_eval ? surrogate_for_eval : surrogate;
        item.theta_hat = scorer ? surrogate_predict(*scorer, normalize(item.layout, spec).values)
                                : std::numeric_limits<double>::quiet_NaN();
        batch.items[std::size_t(chain)] = std::move(item);
    }
    for (int v : incidents) batch.guidance_incidents += v;
    return batch;
}

}  // namespace

SampleBatch sample_unguided(const MlpModel& denoiser, const NoiseSchedule& s,
                            const PackSpec& spec, int n, uint64_t seed,
                            const MlpModel* surrogate_for_eval) {
    GuidanceConfig g;
    return sample_core(denoiser, nullptr, nullptr, s, g, spec, n, seed, surrogate_for_eval);
}

SampleBatch sample_guided(const MlpModel& denoiser, const MlpModel& classifier,
                          const MlpModel& surrogate, const NoiseSchedule& s,
                          const GuidanceConfig& g, const PackSpec& spec, int n,
                          uint64_t seed) {
    return sample_core(denoiser, &classifier, &surrogate, s, g, spec, n, seed, nullptr);
}

}  // namespace packgen
