#pragma once

#include <cstdint>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/neural.hpp"

namespace packgen {

struct NoiseSchedule {
    int T = 1000;
    std::vector<double> beta;
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod alpha_s, s <= t
    std::vector<double> sigma;      // sqrt(beta_t)
};

NoiseSchedule build_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, t in [1, T]
std::vector<double> forward_noise(const std::vector<double>& x0, int t,
                                  const std::vector<double>& eps, const NoiseSchedule& s);

struct GuidanceConfig {
    double gamma = 0.0;   // classifier gradient weight, in [0,1]
    double lambda = 0.0;  // surrogate gradient weight, >= 0
    GradientMode gradient_mode = GradientMode::LogProbability;

    void validate() const;
};

std::vector<double> timestep_embedding(int t, int dim);

struct DenoiserArch {
    int data_dim = 40;
    int embed_dim = 64;
    int hidden = 256;
    int hidden_layers = 3;
};

MlpModel make_denoiser(const DenoiserArch& arch, uint64_t seed);

// MSE on predicted noise with per-sample t ~ uniform[1,T], fresh noise every
// epoch, random minibatches.
std::pair<MlpModel, TrainReport> train_denoiser(
    const std::vector<std::vector<double>>& normalized_layouts, const NoiseSchedule& s,
    MlpModel denoiser, const TrainHyper& hyper);

struct SampleItem {
    CellLayout layout;  // denormalized, canonical order
    bool feasible = false;
    double theta_hat = 0.0;  // surrogate prediction, NaN when no surrogate given
};

struct SampleBatch {
    std::vector<SampleItem> items;
    int guidance_incidents = 0;  // non-finite gradients clamped to zero
};

// Plain Algorithm-2 reverse chain; surrogate_for_eval (optional) only scores
// the finished samples and never steers them.
SampleBatch sample_unguided(const MlpModel& denoiser, const NoiseSchedule& s,
                            const PackSpec& spec, int n, uint64_t seed,
                            const MlpModel* surrogate_for_eval = nullptr);

// Guided chain: mean term as in the unguided sampler, stochastic term scaled
// by (1-gamma), plus gamma * grad classifier(feasible | x_t) minus
// lambda * grad surrogate(x_t), both evaluated directly on x_t each step.
// gamma = lambda = 0 reproduces sample_unguided bit for bit.
SampleBatch sample_guided(const MlpModel& denoiser, const MlpModel& classifier,
                          const MlpModel& surrogate, const NoiseSchedule& s,
                          const GuidanceConfig& g, const PackSpec& spec, int n,
                          uint64_t seed);

}  // namespace packgen
