#include "packgen/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "packgen/rng.hpp"
#include <json.hpp>

namespace packgen {

std::size_t MlpModel::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        n += std::size_t(layer_dims[l]) * layer_dims[l + 1] + layer_dims[l + 1];
    return n;
}

void MlpModel::validate() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("MlpModel: need at least 2 layer dims");
    if (params.size() != param_count())
        throw std::invalid_argument("MlpModel: params length does not match layer dims");
    const int layers = int(layer_dims.size()) - 1;
    for (auto [from, to] : residual_links) {
        if (from < 1 || to <= from || to > layers)
            throw std::invalid_argument("MlpModel: bad residual link");
        if (layer_dims[from] != layer_dims[to])
            throw std::invalid_argument("MlpModel: residual link widths differ");
    }
}

MlpModel make_mlp(MlpModel::Arch arch, const std::vector<int>& dims,
                  const std::vector<std::pair<int, int>>& residual_links, uint64_t seed,
                  double input_center) {
    MlpModel model;
    model.arch = arch;
    model.layer_dims = dims;
    model.residual_links = residual_links;
    model.seed = seed;
    model.params.assign(model.param_count(), 0.0);

    Rng rng(derive_seed(seed, "mlp/init"));
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int d_in = dims[l];
        const int d_out = dims[l + 1];
        const bool head = l + 2 == dims.size();
        // near-zero head keeps fresh models close to the zero function
        const double scale = head ? 0.01 * std::sqrt(1.0 / double(d_in))
                                  : std::sqrt(2.0 / double(d_in));
        for (int i = 0; i < d_in * d_out; ++i) model.params[off + i] = scale * rng.gaussian();
        if (l == 0 && input_center != 0.0) {
            double* W = model.params.data() + off;
            double* b = W + std::size_t(d_in) * d_out;
            for (int o = 0; o < d_out; ++o) {
                double shift = 0.0;
                for (int i = 0; i < d_in; ++i) shift += W[std::size_t(o) * d_in + i];
                b[o] = -input_center * shift;
            }
        }
        off += std::size_t(d_in) * d_out + d_out;  // other biases stay zero
    }
    model.validate();
    return model;
}

namespace {

struct NetWorkspace {
    std::vector<std::vector<double>> act;   // act[0] = input, act[l] final activations
    std::vector<std::vector<double>> pre;   // pre[l] = pre-activation of layer l (1-based)
    std::vector<std::vector<double>> grad;  // grad w.r.t. final activations
};

void forward_ws(const MlpModel& model, const std::vector<double>& input, NetWorkspace& ws) {
    const auto& dims = model.layer_dims;
    const int layers = int(dims.size()) - 1;
    if (int(input.size()) != dims[0])
        throw std::invalid_argument("forward: input dimension mismatch");

    ws.act.resize(layers + 1);
    ws.pre.resize(layers + 1);
    ws.act[0] = input;

    std::size_t off = 0;
    for (int l = 1; l <= layers; ++l) {
        const int d_in = dims[l - 1];
        const int d_out = dims[l];
        const double* W = model.params.data() + off;
        const double* b = W + std::size_t(d_in) * d_out;
        const std::vector<double>& a_prev = ws.act[l - 1];

        ws.pre[l].assign(d_out, 0.0);
        for (int o = 0; o < d_out; ++o) {
            const double* row = W + std::size_t(o) * d_in;
            double z = b[o];
            for (int i = 0; i < d_in; ++i) z += row[i] * a_prev[i];
            ws.pre[l][o] = z;
        }
        ws.act[l] = ws.pre[l];
        if (l < layers)
            for (double& v : ws.act[l]) v = v > 0.0 ? v : 0.0;
        for (auto [from, to] : model.residual_links)
            if (to == l)
                for (int o = 0; o < d_out; ++o) ws.act[l][o] += ws.act[from][o];
        off += std::size_t(d_in) * d_out + d_out;
    }
}

// Accumulates parameter gradients into param_grads (sized, not cleared here)
// and returns via ws.grad[0] the input gradient.
void backward_ws(const MlpModel& model, const std::vector<double>& upstream,
                 NetWorkspace& ws, std::vector<double>& param_grads) {
    const auto& dims = model.layer_dims;
    const int layers = int(dims.size()) - 1;
    if (int(upstream.size()) != dims[layers])
        throw std::invalid_argument("backward: upstream dimension mismatch");

    ws.grad.assign(layers + 1, {});
    for (int l = 0; l <= layers; ++l) ws.grad[l].assign(dims[l], 0.0);
    ws.grad[layers] = upstream;

    std::size_t layer_off = model.param_count();
    for (int l = layers; l >= 1; --l) {
        const int d_in = dims[l - 1];
        const int d_out = dims[l];
        layer_off -= std::size_t(d_in) * d_out + d_out;
        const double* W = model.params.data() + layer_off;
        double* gW = param_grads.data() + layer_off;
        double* gb = gW + std::size_t(d_in) * d_out;

        // residual additions bypass the activation
        for (auto [from, to] : model.residual_links)
            if (to == l)
                for (int o = 0; o < d_out; ++o) ws.grad[from][o] += ws.grad[l][o];

        for (int o = 0; o < d_out; ++o) {
            double gz = ws.grad[l][o];
            if (l < layers && ws.pre[l][o] <= 0.0) gz = 0.0;
            if (gz == 0.0) continue;
            gb[o] += gz;
            const double* row = W + std::size_t(o) * d_in;
            double* gRow = gW + std::size_t(o) * d_in;
            const std::vector<double>& a_prev = ws.act[l - 1];
            std::vector<double>& g_prev = ws.grad[l - 1];
            for (int i = 0; i < d_in; ++i) {
                gRow[i] += gz * a_prev[i];
                g_prev[i] += gz * row[i];
            }
        }
    }
}

}  // namespace

std::vector<double> forward(const MlpModel& model, const std::vector<double>& input) {
    NetWorkspace ws;
    forward_ws(model, input, ws);
    return ws.act.back();
}

ForwardBackwardResult forward_backward(const MlpModel& model,
                                       const std::vector<double>& input,
                                       const std::vector<double>& upstream_grad) {
    NetWorkspace ws;
    forward_ws(model, input, ws);
    ForwardBackwardResult result;
    result.output = ws.act.back();
    result.param_grads.assign(model.params.size(), 0.0);
    backward_ws(model, upstream_grad, ws, result.param_grads);
    result.input_grad = ws.grad[0];
    return result;
}

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grads) {
    if (state.m.size() != params.size() || grads.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

namespace {

double sigmoid(double s) { return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s)); }

double bce_loss(double logit, double y) {
    // softplus(logit) - y*logit, numerically stable
    const double sp = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                  : std::log1p(std::exp(logit));
    return sp - y * logit;
}

uint64_t fingerprint_vectors(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y) {
    std::string bytes;
    bytes.reserve((X.empty() ? 0 : X.size() * X[0].size() + y.size()) * sizeof(double));
    for (const auto& row : X)
        bytes.append(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(y.data()), y.size() * sizeof(double));
    return fnv1a64(bytes);
}

// One Adam-trained pass over (X, targets); scalar_bce targets are 0/1 labels
// on a single logit output, otherwise per-dimension MSE.
std::vector<double> train_loop(MlpModel& model, const std::vector<std::vector<double>>& X,
                               const std::vector<std::vector<double>>& targets,
                               bool scalar_bce, const TrainHyper& hyper, uint64_t stream) {
    const std::size_t n = X.size();
    AdamState adam(model.params.size());
    adam.lr = hyper.lr;
    adam.beta1 = hyper.beta1;
    adam.beta2 = hyper.beta2;

    Rng rng(derive_seed(hyper.seed, "train/shuffle", stream));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    NetWorkspace ws;
    std::vector<double> grads(model.params.size());
    std::vector<double> upstream;
    std::vector<double> epoch_losses;
    epoch_losses.reserve(hyper.epochs);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += std::size_t(hyper.batch)) {
            const std::size_t stop = std::min(n, start + std::size_t(hyper.batch));
            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = order[b];
                forward_ws(model, X[idx], ws);
                const std::vector<double>& out = ws.act.back();
                upstream.assign(out.size(), 0.0);
                if (scalar_bce) {
                    const double y =
                        targets[idx][0] * (1.0 - 2.0 * hyper.label_smoothing) + hyper.label_smoothing;
                    loss_sum += bce_loss(out[0], y);
                    upstream[0] = sigmoid(out[0]) - y;
                } else {
                    const double inv_dim = 1.0 / double(out.size());
                    for (std::size_t o = 0; o < out.size(); ++o) {
                        const double diff = out[o] - targets[idx][o];
                        loss_sum += diff * diff * inv_dim;
                        upstream[o] = 2.0 * diff * inv_dim;
                    }
                }
                backward_ws(model, upstream, ws, grads);
            }
            const double inv_batch = 1.0 / double(stop - start);
            for (double& g : grads) g *= inv_batch;
            adam_step(adam, model.params, grads);
        }
        const double epoch_loss = loss_sum / double(n);
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                     std::to_string(epoch));
        epoch_losses.push_back(epoch_loss);
    }
    return epoch_losses;
}

}  // namespace

double train_epoch_mse(MlpModel& model, AdamState& state,
                       const std::vector<std::vector<double>>& inputs,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<std::size_t>& order, int batch) {
    NetWorkspace ws;
    std::vector<double> grads(model.params.size());
    std::vector<double> upstream;
    double loss_sum = 0.0;
    const std::size_t n = order.size();
    for (std::size_t start = 0; start < n; start += std::size_t(batch)) {
        const std::size_t stop = std::min(n, start + std::size_t(batch));
        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t b = start; b < stop; ++b) {
            const std::size_t idx = order[b];
            forward_ws(model, inputs[idx], ws);
            const std::vector<double>& out = ws.act.back();
            upstream.assign(out.size(), 0.0);
            const double inv_dim = 1.0 / double(out.size());
            for (std::size_t o = 0; o < out.size(); ++o) {
                const double diff = out[o] - targets[idx][o];
                loss_sum += diff * diff * inv_dim;
                upstream[o] = 2.0 * diff * inv_dim;
            }
            backward_ws(model, upstream, ws, grads);
        }
        const double inv_batch = 1.0 / double(stop - start);
        for (double& g : grads) g *= inv_batch;
        adam_step(state, model.params, grads);
    }
    return loss_sum / double(n);
}

// ---------------------------------------------------------------------------
// classifier

static std::vector<double> raw_distance_features(const CellLayout& layout,
                                                 const PackSpec& spec) {
    return pairwise_edge_distances(layout, spec);
}

static std::vector<double> standardized_features(const MlpModel& model,
                                                 const std::vector<double>& raw) {
    if (raw.size() != model.feat_mean.size())
        throw std::invalid_argument("classifier: feature count mismatch");
    std::vector<double> out(raw.size());
    for (std::size_t f = 0; f < raw.size(); ++f)
        out[f] = (raw[f] - model.feat_mean[f]) / model.feat_std[f];
    return out;
}

double classifier_logit(const MlpModel& model, const CellLayout& layout,
                        const PackSpec& spec) {
    if (model.arch != MlpModel::Arch::Classifier)
        throw std::invalid_argument("classifier_logit: wrong arch tag");
    const std::vector<double> feat = standardized_features(model, raw_distance_features(layout, spec));
    return forward(model, feat)[0];
}

double classifier_predict(const MlpModel& model, const CellLayout& layout,
                          const PackSpec& spec) {
    return sigmoid(classifier_logit(model, layout, spec));
}

std::vector<double> classifier_input_grad(const MlpModel& model,
                                          const std::vector<double>& normalized,
                                          const PackSpec& spec, GradientMode mode) {
    if (model.arch != MlpModel::Arch::Classifier)
        throw std::invalid_argument("classifier_input_grad: wrong arch tag");
    const CellLayout layout = denormalize({normalized}, spec);
    const std::vector<double> raw = raw_distance_features(layout, spec);
    const std::vector<double> feat = standardized_features(model, raw);

    const ForwardBackwardResult fb = forward_backward(model, feat, {1.0});
    const double logit = fb.output[0];
    const double factor = mode == GradientMode::LogProbability
                              ? sigmoid(-logit)                         // d log p / d logit
                              : sigmoid(logit) * sigmoid(-logit);       // d p / d logit

    std::vector<double> grad_mm(normalized.size(), 0.0);
    const std::size_t n = layout.centers.size();
    std::size_t f = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++f) {
            const double g_feat = fb.input_grad[f] / model.feat_std[f];
            const double dx = layout.centers[i].x - layout.centers[j].x;
            const double dy = layout.centers[i].y - layout.centers[j].y;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d == 0.0) continue;  // direction undefined, contributes nothing
            const double ux = dx / d, uy = dy / d;
            grad_mm[2 * i] += g_feat * ux;
            grad_mm[2 * i + 1] += g_feat * uy;
            grad_mm[2 * j] -= g_feat * ux;
            grad_mm[2 * j + 1] -= g_feat * uy;
        }
    }
    for (double& g : grad_mm) g *= factor * spec.frame_side;
    return grad_mm;
}

std::pair<MlpModel, TrainReport> train_classifier(const LayoutDataset& feasible,
                                                  const LayoutDataset& infeasible,
                                                  const PackSpec& spec,
                                                  const TrainHyper& hyper) {
    if (feasible.empty() || infeasible.empty())
        throw std::invalid_argument("train_classifier: both classes must be nonempty");

    std::vector<std::vector<double>> X;
    std::vector<double> y;
    X.reserve(feasible.size() + infeasible.size());
    for (const LayoutRecord& rec : feasible.records) {
        X.push_back(raw_distance_features(rec.layout, spec));
        y.push_back(1.0);
    }
    for (const LayoutRecord& rec : infeasible.records) {
        X.push_back(raw_distance_features(rec.layout, spec));
        y.push_back(0.0);
    }

    // stratified 90/10 split
    Rng rng(derive_seed(hyper.seed, "classifier/split"));
    std::vector<std::size_t> train_idx, test_idx;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (int(y[i]) == cls) members.push_back(i);
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.below(i)]);
        const std::size_t held = std::max<std::size_t>(1, members.size() / 10);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < held ? test_idx : train_idx).push_back(members[i]);
    }

    const std::size_t n_feat = X[0].size();
    std::vector<double> mean(n_feat, 0.0), stdev(n_feat, 0.0);
    for (std::size_t i : train_idx)
        for (std::size_t f = 0; f < n_feat; ++f) mean[f] += X[i][f];
    for (double& m : mean) m /= double(train_idx.size());
    for (std::size_t i : train_idx)
        for (std::size_t f = 0; f < n_feat; ++f) {
            const double d = X[i][f] - mean[f];
            stdev[f] += d * d;
        }
    for (double& s : stdev) s = std::max(std::sqrt(s / double(train_idx.size())), 1e-12);

    std::vector<int> dims;
    if (hyper.classifier_hidden > 0)
        dims = {int(n_feat), hyper.classifier_hidden, 1};
    else
        dims = {int(n_feat), 1};
    MlpModel model = make_mlp(MlpModel::Arch::Classifier, dims, {}, hyper.seed);
    model.feat_mean = mean;
    model.feat_std = stdev;

    std::vector<std::vector<double>> X_train;
    std::vector<std::vector<double>> T_train;
    X_train.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
        std::vector<double> row(n_feat);
        for (std::size_t f = 0; f < n_feat; ++f) row[f] = (X[i][f] - mean[f]) / stdev[f];
        X_train.push_back(std::move(row));
        T_train.push_back({y[i]});
    }

    TrainReport report;
    report.seed = hyper.seed;
    report.dataset_fingerprint = fingerprint_vectors(X, y);
    report.epoch_losses = train_loop(model, X_train, T_train, true, hyper, 0);

    // held-out F1 at threshold 0.5
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i : test_idx) {
        std::vector<double> row(n_feat);
        for (std::size_t f = 0; f < n_feat; ++f) row[f] = (X[i][f] - mean[f]) / stdev[f];
        const bool predicted = forward(model, row)[0] > 0.0;
        const bool actual = y[i] > 0.5;
        if (predicted && actual) ++tp;
        else if (predicted && !actual) ++fp;
        else if (!predicted && actual) ++fn;
    }
    report.f1 = (2 * tp + fp + fn) > 0 ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// surrogate

double surrogate_predict(const MlpModel& model, const std::vector<double>& normalized) {
    if (model.arch != MlpModel::Arch::Surrogate)
        throw std::invalid_argument("surrogate_predict: wrong arch tag");
    return forward(model, normalized)[0];
}

std::vector<double> surrogate_input_grad(const MlpModel& model,
                                         const std::vector<double>& normalized) {
    if (model.arch != MlpModel::Arch::Surrogate)
        throw std::invalid_argument("surrogate_input_grad: wrong arch tag");
    return forward_backward(model, normalized, {1.0}).input_grad;
}

std::pair<std::vector<std::vector<double>>, std::vector<double>> featurize_surrogate(
    const LayoutDataset& labeled, const PackSpec& spec) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (const LayoutRecord& rec : labeled.records) {
        if (!rec.max_temp_c) continue;
        const CellLayout canon = canonical_order(rec.layout, spec.cell_radius);
        X.push_back(normalize(canon, spec).values);
        y.push_back(*rec.max_temp_c);
    }
    return {std::move(X), std::move(y)};
}

std::pair<MlpModel, TrainReport> train_surrogate_kfold(
    const std::vector<std::vector<double>>& features, const std::vector<double>& labels_c,
    int folds, const TrainHyper& hyper) {
    if (folds < 2) throw std::invalid_argument("train_surrogate_kfold: folds must be >= 2");
    if (features.size() != labels_c.size() || features.empty())
        throw std::invalid_argument("train_surrogate_kfold: labels missing");
    if (features.size() < std::size_t(folds))
        throw std::invalid_argument("train_surrogate_kfold: fewer samples than folds");

    TrainReport report;
    report.seed = hyper.seed;
    report.dataset_fingerprint = fingerprint_vectors(features, labels_c);

    double t_min = labels_c[0], t_max = labels_c[0];
    for (double v : labels_c) {
        t_min = std::min(t_min, v);
        t_max = std::max(t_max, v);
    }
    const double range = t_max - t_min;
    report.r2_undefined = range <= 0.0;

    std::vector<std::vector<double>> theta(labels_c.size());
    for (std::size_t i = 0; i < labels_c.size(); ++i)
        theta[i] = {range > 0.0 ? (labels_c[i] - t_min) / range : 0.0};

    const int din = int(features[0].size());
    const std::vector<int> dims = {din, 256, 256, 1};
    const std::vector<std::pair<int, int>> residual = {{1, 2}};

    Rng fold_rng(derive_seed(hyper.seed, "surrogate/folds"));
    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[fold_rng.below(i)]);

    if (!report.r2_undefined) {
        for (int f = 0; f < folds; ++f) {
            std::vector<std::vector<double>> X_train, T_train, X_test;
            std::vector<double> y_test;
            for (std::size_t pos = 0; pos < order.size(); ++pos) {
                const std::size_t idx = order[pos];
                if (int(pos % std::size_t(folds)) == f) {
                    X_test.push_back(features[idx]);
                    y_test.push_back(theta[idx][0]);
                } else {
                    X_train.push_back(features[idx]);
                    T_train.push_back(theta[idx]);
                }
            }
            MlpModel fold_model =
                make_mlp(MlpModel::Arch::Surrogate, dims, residual, derive_seed(hyper.seed, "surrogate/fold", f), 0.5);
            train_loop(fold_model, X_train, T_train, false, hyper, uint64_t(f) + 1);

            auto r2 = [&](const std::vector<std::vector<double>>& Xs,
                          const std::vector<double>& ys) {
                double mean = 0.0;
                for (double v : ys) mean += v;
                mean /= double(ys.size());
                double ss_res = 0.0, ss_tot = 0.0;
                for (std::size_t i = 0; i < Xs.size(); ++i) {
                    const double pred = forward(fold_model, Xs[i])[0];
                    ss_res += (pred - ys[i]) * (pred - ys[i]);
                    ss_tot += (ys[i] - mean) * (ys[i] - mean);
                }
                return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                                    : std::numeric_limits<double>::quiet_NaN();
            };
            std::vector<double> y_train;
            for (const auto& t : T_train) y_train.push_back(t[0]);
            report.fold_train_r2.push_back(r2(X_train, y_train));
            report.fold_test_r2.push_back(r2(X_test, y_test));
        }
        double sum = 0.0;
        int count = 0;
        for (double v : report.fold_test_r2)
            if (std::isfinite(v)) {
                sum += v;
                ++count;
            }
        report.mean_test_r2 = count > 0 ? sum / count : 0.0;
    }

    MlpModel model = make_mlp(MlpModel::Arch::Surrogate, dims, residual, hyper.seed, 0.5);
    model.t_min = t_min;
    model.t_max = t_max;
    report.epoch_losses = train_loop(model, features, theta, false, hyper, 0);
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// checkpoints

static std::string arch_name(MlpModel::Arch arch) {
    switch (arch) {
        case MlpModel::Arch::Denoiser: return "denoiser";
        case MlpModel::Arch::Classifier: return "classifier";
        case MlpModel::Arch::Surrogate: return "surrogate";
    }
    return "unknown";
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
    model.validate();
    nlohmann::json j;
    j["format_version"] = 1;
    j["arch_tag"] = arch_name(model.arch);
    j["layer_dims"] = model.layer_dims;
    nlohmann::json links = nlohmann::json::array();
    for (auto [from, to] : model.residual_links)
        links.push_back(nlohmann::json::array({from, to}));
    j["residual_links"] = std::move(links);
    nlohmann::json norm;
    if (model.arch == MlpModel::Arch::Surrogate) {
        norm["t_min"] = model.t_min;
        norm["t_max"] = model.t_max;
    } else if (model.arch == MlpModel::Arch::Classifier) {
        norm["feat_mean"] = model.feat_mean;
        norm["feat_std"] = model.feat_std;
    }
    j["normalization"] = std::move(norm);
    j["params"] = model.params;
    j["seed"] = model.seed;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << j.dump() << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

MlpModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error(path + ": unsupported checkpoint format version");

    MlpModel model;
    const std::string tag = j.at("arch_tag").get<std::string>();
    if (tag == "denoiser") model.arch = MlpModel::Arch::Denoiser;
    else if (tag == "classifier") model.arch = MlpModel::Arch::Classifier;
    else if (tag == "surrogate") model.arch = MlpModel::Arch::Surrogate;
    else throw std::runtime_error(path + ": unknown arch tag " + tag);

    model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    for (const auto& link : j.at("residual_links"))
        model.residual_links.emplace_back(link.at(0).get<int>(), link.at(1).get<int>());
    const auto& norm = j.at("normalization");
    if (model.arch == MlpModel::Arch::Surrogate) {
        model.t_min = norm.at("t_min").get<double>();
        model.t_max = norm.at("t_max").get<double>();
    } else if (model.arch == MlpModel::Arch::Classifier) {
        model.feat_mean = norm.at("feat_mean").get<std::vector<double>>();
        model.feat_std = norm.at("feat_std").get<std::vector<double>>();
    }
    model.params = j.at("params").get<std::vector<double>>();
    model.seed = j.at("seed").get<uint64_t>();
    model.validate();
    return model;
}

}  // namespace packgen
