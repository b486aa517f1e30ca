#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "packgen/geometry.hpp"
#include "packgen/layout_io.hpp"

namespace packgen {

// Dense ReLU network with a linear head and optional post-activation residual
// additions between equal-width layers. Parameters are one flat vector:
// per layer, the row-major (d_out x d_in) weight block then the bias.
struct MlpModel {
    enum class Arch { Denoiser, Classifier, Surrogate };

    Arch arch = Arch::Denoiser;
    std::vector<int> layer_dims;
    std::vector<std::pair<int, int>> residual_links;  // (from_layer, to_layer), 1-based
    std::vector<double> params;

    // normalization constants captured at training time
    double t_min = 0.0, t_max = 1.0;          // surrogate label range (degC)
    std::vector<double> feat_mean, feat_std;  // classifier distance features

    uint64_t seed = 0;

    std::size_t param_count() const;
    void validate() const;
};

// input_center folds an assumed input mean into the first-layer bias at
// initialization, which markedly improves training on all-positive inputs.
MlpModel make_mlp(MlpModel::Arch arch, const std::vector<int>& dims,
                  const std::vector<std::pair<int, int>>& residual_links, uint64_t seed,
                  double input_center = 0.0);

// Network output for one input vector.
std::vector<double> forward(const MlpModel& model, const std::vector<double>& input);

struct ForwardBackwardResult {
    std::vector<double> output;
    std::vector<double> param_grads;
    std::vector<double> input_grad;
};

// Output plus exact gradients of output . upstream_grad with respect to the
// parameters and the input, including through residual additions.
ForwardBackwardResult forward_backward(const MlpModel& model,
                                       const std::vector<double>& input,
                                       const std::vector<double>& upstream_grad);

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grads);

struct TrainHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch = 256;
    int epochs = 60;
    uint64_t seed = 0;
    int classifier_hidden = 64;  // 0 = single linear layer over the distances
    // label smoothing bounds the classifier logits, and with them the scale of
    // the guidance gradients, which plain BCE lets grow without limit
    double label_smoothing = 0.1;
};

struct TrainReport {
    std::vector<double> epoch_losses;
    double f1 = 0.0;
    std::vector<double> fold_train_r2;
    std::vector<double> fold_test_r2;
    double mean_test_r2 = 0.0;
    bool r2_undefined = false;
    uint64_t seed = 0;
    uint64_t dataset_fingerprint = 0;
};

// One pass of minibatch MSE training over pre-built rows, visiting `order`;
// returns the mean per-dimension loss. Used by the denoiser training loop,
// which rebuilds its noised inputs every epoch.
double train_epoch_mse(MlpModel& model, AdamState& state,
                       const std::vector<std::vector<double>>& inputs,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<std::size_t>& order, int batch);

enum class GradientMode { LogProbability, RawProbability };

// --- classifier: pairwise edge distances -> standardized -> net -> sigmoid ---

double classifier_logit(const MlpModel& model, const CellLayout& layout,
                        const PackSpec& spec);
double classifier_predict(const MlpModel& model, const CellLayout& layout,
                          const PackSpec& spec);

// Gradient of log p(feasible) (or raw p) with respect to the 2n normalized
// coordinates, chained analytically through the distance features. Pairs with
// coincident centers contribute a zero vector.
std::vector<double> classifier_input_grad(const MlpModel& model,
                                          const std::vector<double>& normalized,
                                          const PackSpec& spec, GradientMode mode);

std::pair<MlpModel, TrainReport> train_classifier(const LayoutDataset& feasible,
                                                  const LayoutDataset& infeasible,
                                                  const PackSpec& spec,
                                                  const TrainHyper& hyper);

// --- surrogate: canonical-ordered normalized coordinates -> theta ---

double surrogate_predict(const MlpModel& model, const std::vector<double>& normalized);
std::vector<double> surrogate_input_grad(const MlpModel& model,
                                         const std::vector<double>& normalized);

// Canonical-ordered normalized feature vectors plus raw degC labels.
std::pair<std::vector<std::vector<double>>, std::vector<double>> featurize_surrogate(
    const LayoutDataset& labeled, const PackSpec& spec);

std::pair<MlpModel, TrainReport> train_surrogate_kfold(
    const std::vector<std::vector<double>>& features, const std::vector<double>& labels_c,
    int folds, const TrainHyper& hyper);

// --- checkpoints ---

void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace packgen
