#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <functional>

#include "packgen/datagen.hpp"
#include "packgen/neural.hpp"
#include "packgen/rng.hpp"

using namespace packgen;

namespace {

// central finite differences of f along every input coordinate
std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double h = 1e-5) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double hi = f(x);
        x[i] = keep - h;
        const double lo = f(x);
        x[i] = keep;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        scale += std::max(a[i] * a[i], b[i] * b[i]);
    }
    return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12);
}

// central differences are invalid next to a ReLU kink; resample such inputs
bool away_from_kinks(const MlpModel& model, const std::vector<double>& input) {
    const int layers = int(model.layer_dims.size()) - 1;
    std::vector<double> act = input;
    std::size_t off = 0;
    std::vector<std::vector<double>> saved{act};
    for (int l = 1; l <= layers; ++l) {
        const int d_in = model.layer_dims[l - 1];
        const int d_out = model.layer_dims[l];
        const double* W = model.params.data() + off;
        const double* b = W + std::size_t(d_in) * d_out;
        std::vector<double> next(d_out);
        for (int o = 0; o < d_out; ++o) {
            double z = b[o];
            for (int i = 0; i < d_in; ++i) z += W[std::size_t(o) * d_in + i] * act[i];
            if (l < layers && std::abs(z) < 1e-4) return false;
            next[o] = (l < layers) ? std::max(z, 0.0) : z;
        }
        for (auto [from, to] : model.residual_links)
            if (to == l)
                for (int o = 0; o < d_out; ++o) next[o] += saved[std::size_t(from)][o];
        saved.push_back(next);
        act = std::move(next);
        off += std::size_t(d_in) * d_out + d_out;
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("neural");

TEST_CASE("zero weights with a bias head") {
    MlpModel model = make_mlp(MlpModel::Arch::Denoiser, {4, 3}, {}, 1);
    std::fill(model.params.begin(), model.params.end(), 0.0);
    model.params[12] = 0.7;  // first bias entry
    const std::vector<double> out = forward(model, {1.0, -2.0, 3.0, 4.0});
    CHECK(out[0] == 0.7);
    CHECK(out[1] == 0.0);
    const ForwardBackwardResult fb = forward_backward(model, {1.0, -2.0, 3.0, 4.0}, {1.0, 1.0, 1.0});
    for (double g : fb.input_grad) CHECK(g == 0.0);
}

TEST_CASE("single linear layer input gradient is the column sums") {
    MlpModel model = make_mlp(MlpModel::Arch::Denoiser, {3, 2}, {}, 1);
    // W rows: [1 2 3; 4 5 6]
    for (int i = 0; i < 6; ++i) model.params[std::size_t(i)] = double(i + 1);
    model.params[6] = model.params[7] = 0.0;
    const ForwardBackwardResult fb = forward_backward(model, {0.5, -1.0, 2.0}, {1.0, 1.0});
    CHECK(fb.input_grad[0] == doctest::Approx(5.0));
    CHECK(fb.input_grad[1] == doctest::Approx(7.0));
    CHECK(fb.input_grad[2] == doctest::Approx(9.0));
}

TEST_CASE("analytic gradients match finite differences through residual links") {
    Rng rng(99);
    int done = 0;
    uint64_t attempt = 0;
    while (done < 12) {
        MlpModel model = make_mlp(MlpModel::Arch::Denoiser, {7, 16, 16, 3}, {{1, 2}},
                                  1000 + attempt);
        std::vector<double> input(7), upstream(3);
        for (double& v : input) v = rng.gaussian();
        for (double& v : upstream) v = rng.gaussian();
        ++attempt;
        if (!away_from_kinks(model, input)) continue;

        const ForwardBackwardResult fb = forward_backward(model, input, upstream);
        const auto scalar = [&](const std::vector<double>& x) {
            const std::vector<double> out = forward(model, x);
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * upstream[i];
            return s;
        };
        CHECK(rel_error(fb.input_grad, fd_gradient(scalar, input)) < 1e-4);

        // spot-check parameter gradients along a few coordinates
        for (std::size_t p : {std::size_t(0), model.params.size() / 2, model.params.size() - 1}) {
            const double keep = model.params[p];
            const double h = 1e-5;
            model.params[p] = keep + h;
            const double hi = scalar(input);
            model.params[p] = keep - h;
            const double lo = scalar(input);
            model.params[p] = keep;
            const double fd = (hi - lo) / (2.0 * h);
            CHECK(fb.param_grads[p] == doctest::Approx(fd).epsilon(1e-3));
        }
        ++done;
    }
}

TEST_CASE("adam basics") {
    std::vector<double> params{1.0, -2.0};
    AdamState state(2);
    state.lr = 1e-3;

    adam_step(state, params, {0.0, 0.0});
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);

    AdamState fresh(2);
    fresh.lr = 1e-3;
    std::vector<double> p2{1.0, -2.0};
    adam_step(fresh, p2, {1.0, 1.0});
    CHECK(p2[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));

    AdamState again(2);
    again.lr = 1e-3;
    std::vector<double> p3{1.0, -2.0};
    adam_step(again, p3, {1.0, 1.0});
    CHECK(p3[0] == p2[0]);
    CHECK(p3[1] == p2[1]);

    CHECK_THROWS_AS(adam_step(state, params, {1.0}), std::invalid_argument);
}

namespace {

LayoutDataset two_cell_dataset(double lo_gap, double hi_gap, int count, uint64_t seed,
                               bool feasible_flag) {
    PackSpec spec;
    spec.n_cells = 2;
    Rng rng(seed);
    LayoutDataset dataset;
    for (int i = 0; i < count; ++i) {
        const double gap = lo_gap + (hi_gap - lo_gap) * rng.uniform();
        const double x = 25.0 + 40.0 * rng.uniform();
        const double y = 20.0 + 80.0 * rng.uniform();
        LayoutRecord rec;
        rec.id = (feasible_flag ? "f" : "i") + std::to_string(i);
        rec.layout.centers = {{x, y}, {x + 21.0 + gap, y}};
        rec.feasible = feasible_flag;
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

}  // namespace

TEST_CASE("classifier separates a one-feature toy problem perfectly") {
    PackSpec spec;
    spec.n_cells = 2;
    const LayoutDataset feasible = two_cell_dataset(2.0, 15.0, 120, 5, true);
    const LayoutDataset infeasible = two_cell_dataset(-6.0, -1.0, 120, 6, false);
    TrainHyper hyper;
    hyper.epochs = 60;
    hyper.seed = 3;
    auto [model, report] = train_classifier(feasible, infeasible, spec, hyper);
    CHECK(report.f1 == 1.0);

    const double p = classifier_predict(model, feasible.records[0].layout, spec);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
}

TEST_CASE("classifier is invariant under dihedral transforms") {
    PackSpec spec;
    const LayoutDataset feasible = [&] {
        LayoutDataset d;
        for (int i = 0; i < 40; ++i) {
            RelaxConfig cfg;
            cfg.min_distance = 1.0;
            cfg.rng_seed = 800 + uint64_t(i);
            LayoutRecord rec;
            rec.id = "f" + std::to_string(i);
            rec.layout = relax_layout(cfg, spec).layout;
            d.records.push_back(std::move(rec));
        }
        return d;
    }();
    LayoutDataset infeasible = feasible;
    for (auto& rec : infeasible.records) rec.layout.centers[1] = rec.layout.centers[0];

    TrainHyper hyper;
    hyper.epochs = 10;
    hyper.seed = 4;
    auto [model, report] = train_classifier(feasible, infeasible, spec, hyper);

    const CellLayout& layout = feasible.records[0].layout;
    const double base = classifier_predict(model, layout, spec);
    for (int element = 1; element < 8; ++element) {
        const double p = classifier_predict(model, dihedral_transform(layout, spec, element), spec);
        CHECK(p == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("classifier input gradient matches finite differences") {
    PackSpec spec;
    const LayoutDataset feasible = [&] {
        LayoutDataset d;
        for (int i = 0; i < 30; ++i) {
            RelaxConfig cfg;
            cfg.min_distance = 1.0;
            cfg.rng_seed = 900 + uint64_t(i);
            LayoutRecord rec;
            rec.id = "f" + std::to_string(i);
            rec.layout = relax_layout(cfg, spec).layout;
            d.records.push_back(std::move(rec));
        }
        return d;
    }();
    LayoutDataset infeasible = feasible;
    for (auto& rec : infeasible.records)
        for (Point& p : rec.layout.centers) p.x *= 0.5;

    TrainHyper hyper;
    hyper.epochs = 8;
    hyper.seed = 12;
    auto [model, report] = train_classifier(feasible, infeasible, spec, hyper);

    for (int trial = 0; trial < 6; ++trial) {
        const std::vector<double> x = normalize(feasible.records[trial].layout, spec).values;
        for (GradientMode mode : {GradientMode::LogProbability, GradientMode::RawProbability}) {
            const std::vector<double> analytic = classifier_input_grad(model, x, spec, mode);
            const auto f = [&](const std::vector<double>& v) {
                const CellLayout layout = denormalize({v}, spec);
                const double p = classifier_predict(model, layout, spec);
                return mode == GradientMode::LogProbability ? std::log(p) : p;
            };
            CHECK(rel_error(analytic, fd_gradient(f, x)) < 1e-4);
        }
    }
}

TEST_CASE("coincident centers contribute no gradient and no NaN") {
    PackSpec spec;
    spec.n_cells = 2;
    const LayoutDataset feasible = two_cell_dataset(2.0, 10.0, 30, 7, true);
    const LayoutDataset infeasible = two_cell_dataset(-5.0, -1.0, 30, 8, false);
    TrainHyper hyper;
    hyper.epochs = 5;
    hyper.seed = 5;
    auto [model, report] = train_classifier(feasible, infeasible, spec, hyper);

    const std::vector<double> coincident{0.3, 0.3, 0.3, 0.3};
    const std::vector<double> grad =
        classifier_input_grad(model, coincident, spec, GradientMode::LogProbability);
    for (double g : grad) {
        CHECK(std::isfinite(g));
        CHECK(g == 0.0);
    }
}

TEST_CASE("surrogate learns a linear synthetic target") {
    Rng rng(31);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 800; ++i) {
        std::vector<double> row(40);
        double mean = 0.0;
        for (double& v : row) {
            v = rng.uniform();
            mean += v;
        }
        mean /= 40.0;
        X.push_back(std::move(row));
        y.push_back(20.0 + 20.0 * mean);  // degC-like affine target
    }
    TrainHyper hyper;
    hyper.epochs = 350;
    hyper.batch = 32;
    hyper.lr = 3e-3;
    hyper.seed = 8;
    auto [model, report] = train_surrogate_kfold(X, y, 5, hyper);
    CHECK_FALSE(report.r2_undefined);
    CHECK(report.mean_test_r2 >= 0.99);
    CHECK(model.t_min < model.t_max);

    // deterministic predictions for equal inputs
    CHECK(surrogate_predict(model, X[0]) == surrogate_predict(model, X[0]));
}

TEST_CASE("surrogate gradient matches finite differences") {
    Rng rng(32);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 120; ++i) {
        std::vector<double> row(40);
        double s = 0.0;
        for (double& v : row) {
            v = rng.uniform();
            s += v * v;
        }
        X.push_back(std::move(row));
        y.push_back(s);
    }
    TrainHyper hyper;
    hyper.epochs = 40;
    hyper.seed = 9;
    auto [model, report] = train_surrogate_kfold(X, y, 4, hyper);

    int done = 0;
    std::size_t trial = 0;
    while (done < 6 && trial < X.size()) {
        const std::vector<double>& x = X[trial++];
        if (!away_from_kinks(model, x)) continue;
        const std::vector<double> analytic = surrogate_input_grad(model, x);
        const auto f = [&](const std::vector<double>& v) { return surrogate_predict(model, v); };
        CHECK(rel_error(analytic, fd_gradient(f, x)) < 1e-4);
        ++done;
    }
    CHECK(done >= 4);
}

TEST_CASE("constant labels raise the undefined flag without crashing") {
    std::vector<std::vector<double>> X(12, std::vector<double>(6, 0.5));
    std::vector<double> y(12, 36.0);
    TrainHyper hyper;
    hyper.epochs = 2;
    auto [model, report] = train_surrogate_kfold(X, y, 3, hyper);
    CHECK(report.r2_undefined);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    PackSpec spec;
    spec.n_cells = 2;
    const LayoutDataset feasible = two_cell_dataset(2.0, 10.0, 40, 15, true);
    const LayoutDataset infeasible = two_cell_dataset(-5.0, -1.0, 40, 16, false);
    TrainHyper hyper;
    hyper.epochs = 6;
    hyper.seed = 77;
    auto [m1, r1] = train_classifier(feasible, infeasible, spec, hyper);
    auto [m2, r2] = train_classifier(feasible, infeasible, spec, hyper);
    REQUIRE(m1.params.size() == m2.params.size());
    for (std::size_t i = 0; i < m1.params.size(); ++i) CHECK(m1.params[i] == m2.params[i]);
    CHECK(r1.dataset_fingerprint == r2.dataset_fingerprint);
}

TEST_CASE("checkpoints round-trip exactly") {
    Rng rng(3);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> row(8);
        for (double& v : row) v = rng.uniform();
        X.push_back(row);
        y.push_back(row[0] * 10.0 + 25.0);
    }
    TrainHyper hyper;
    hyper.epochs = 10;
    auto [model, report] = train_surrogate_kfold(X, y, 3, hyper);
    save_checkpoint(model, "neural_ckpt.json");
    const MlpModel back = load_checkpoint("neural_ckpt.json");
    CHECK(back.arch == model.arch);
    CHECK(back.layer_dims == model.layer_dims);
    CHECK(back.t_min == model.t_min);
    CHECK(back.t_max == model.t_max);
    REQUIRE(back.params.size() == model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) CHECK(back.params[i] == model.params[i]);
    CHECK(surrogate_predict(back, X[0]) == surrogate_predict(model, X[0]));
    std::remove("neural_ckpt.json");
}

TEST_CASE("shuffled labels yield chance-level f1") {
    PackSpec spec;
    // identical feature distributions in both classes: random feasible
    // 20-cell layouts split arbitrarily, so the net can only memorize noise
    LayoutDataset a, b;
    for (int i = 0; i < 1000; ++i) {
        RelaxConfig cfg;
        cfg.min_distance = 1.0;
        cfg.rng_seed = 7000 + uint64_t(i);
        LayoutRecord rec;
        rec.id = std::to_string(i);
        rec.layout = relax_layout(cfg, spec).layout;
        (i % 2 == 0 ? a : b).records.push_back(std::move(rec));
    }
    TrainHyper hyper;
    hyper.epochs = 80;
    hyper.batch = 32;
    hyper.seed = 2;
    auto [model, report] = train_classifier(a, b, spec, hyper);
    CHECK(report.f1 >= 0.35);
    CHECK(report.f1 <= 0.65);
}

TEST_SUITE_END();
