#include "packgen/smogn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "packgen/rng.hpp"

namespace packgen {

namespace {

double quantile(std::vector<double> sorted, double p) {
    const double pos = p * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct RelevanceCurve {
    double median = 0.0;
    double span_low = 0.0;   // median - lower whisker
    double span_high = 0.0;  // upper whisker - median

    double operator()(double y) const {
        if (y >= this->median)
            return span_high > 0.0 ? smoothstep((y - median) / span_high) : 0.0;
        return span_low > 0.0 ? smoothstep((median - y) / span_low) : 0.0;
    }
};

RelevanceCurve fit_relevance(const std::vector<double>& labels) {
    if (labels.size() < 5)
        throw std::invalid_argument("relevance: need at least 5 labels");
    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back())
        throw std::invalid_argument("relevance: zero-variance labels");

    RelevanceCurve curve;
    curve.median = quantile(sorted, 0.5);
    const double q1 = quantile(sorted, 0.25);
    const double q3 = quantile(sorted, 0.75);
    const double iqr = q3 - q1;
    curve.span_low = curve.median - (q1 - 1.5 * iqr);
    curve.span_high = (q3 + 1.5 * iqr) - curve.median;
    // degenerate quartiles: fall back to the observed extremes
    if (curve.span_low <= 0.0) curve.span_low = curve.median - sorted.front();
    if (curve.span_high <= 0.0) curve.span_high = sorted.back() - curve.median;
    return curve;
}

}  // namespace

std::vector<double> relevance(const RelevanceSpec&, const std::vector<double>& labels) {
    const RelevanceCurve curve = fit_relevance(labels);
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = curve(labels[i]);
    return out;
}

SmognResult smogn_resample(const LabeledVectors& dataset, const RelevanceSpec& spec,
                           int k_neighbors, double noise_sigma, uint64_t seed,
                           bool undersample_common) {
    SmognResult result;
    result.data = dataset;

    RelevanceCurve curve;
    try {
        curve = fit_relevance(dataset.labels);
    } catch (const std::invalid_argument&) {
        result.passthrough = true;  // constant or tiny label set
        return result;
    }

    const std::size_t n = dataset.labels.size();
    std::vector<std::size_t> rare, common;
    for (std::size_t i = 0; i < n; ++i)
        (curve(dataset.labels[i]) > spec.threshold ? rare : common).push_back(i);
    result.rare_before = rare.size();
    result.rare_after = rare.size();

    if (rare.size() < std::size_t(k_neighbors) + 1) {
        result.passthrough = true;
        return result;
    }

    const std::size_t dim = dataset.features[0].size();
    std::vector<double> feat_std(dim, 0.0), feat_mean(dim, 0.0);
    for (const auto& row : dataset.features)
        for (std::size_t f = 0; f < dim; ++f) feat_mean[f] += row[f];
    for (double& m : feat_mean) m /= double(n);
    for (const auto& row : dataset.features)
        for (std::size_t f = 0; f < dim; ++f) {
            const double d = row[f] - feat_mean[f];
            feat_std[f] += d * d;
        }
    for (double& s : feat_std) s = std::sqrt(s / double(n));
    double label_std = 0.0, label_mean = 0.0;
    for (double v : dataset.labels) label_mean += v;
    label_mean /= double(n);
    for (double v : dataset.labels) label_std += (v - label_mean) * (v - label_mean);
    label_std = std::sqrt(label_std / double(n));

    // rare-region mass approaches parity with the common region
    const std::size_t total_new = common.size() > rare.size() ? common.size() - rare.size() : 0;
    const std::size_t base = total_new / rare.size();
    const std::size_t extra = total_new % rare.size();

    auto sq_dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t f = 0; f < dim; ++f) {
            const double d = dataset.features[a][f] - dataset.features[b][f];
            s += d * d;
        }
        return s;
    };

    for (std::size_t pos = 0; pos < rare.size(); ++pos) {
        const std::size_t count = base + (pos < extra ? 1 : 0);
        if (count == 0) continue;
        const std::size_t r = rare[pos];

        // k nearest rare neighbors of r
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(rare.size() - 1);
        for (std::size_t other : rare)
            if (other != r) dists.emplace_back(sq_dist(r, other), other);
        std::sort(dists.begin(), dists.end());
        dists.resize(std::size_t(k_neighbors));
        const double median_dist = dists[dists.size() / 2].first;

        Rng rng(derive_seed(seed, "smogn/sample", pos));
        for (std::size_t s = 0; s < count; ++s) {
            const auto [d2, nb] = dists[rng.below(dists.size())];
            std::vector<double> row(dim);
            double label;
            if (d2 < median_dist) {
                const double t = rng.uniform();
                for (std::size_t f = 0; f < dim; ++f)
                    row[f] = dataset.features[r][f] +
                             t * (dataset.features[nb][f] - dataset.features[r][f]);
                label = dataset.labels[r] + t * (dataset.labels[nb] - dataset.labels[r]);
            } else {
                for (std::size_t f = 0; f < dim; ++f) {
                    const double g = std::clamp(rng.gaussian(), -3.0, 3.0);
                    row[f] = dataset.features[r][f] + g * noise_sigma * feat_std[f];
                }
                const double g = std::clamp(rng.gaussian(), -3.0, 3.0);
                label = dataset.labels[r] + g * noise_sigma * label_std;
            }
            if (curve(label) > spec.threshold) ++result.rare_after;
            result.data.features.push_back(std::move(row));
            result.data.labels.push_back(label);
            ++result.synthetic_count;
        }
    }

    if (undersample_common && common.size() > result.rare_after) {
        Rng rng(derive_seed(seed, "smogn/undersample"));
        std::vector<std::size_t> keep = common;
        for (std::size_t i = keep.size(); i > 1; --i)
            std::swap(keep[i - 1], keep[rng.below(i)]);
        keep.resize(result.rare_after);
        std::vector<bool> drop(n, false);
        for (std::size_t i : common) drop[i] = true;
        for (std::size_t i : keep) drop[i] = false;

        LabeledVectors compact;
        for (std::size_t i = 0; i < result.data.labels.size(); ++i) {
            if (i < n && drop[i]) continue;
            compact.features.push_back(std::move(result.data.features[i]));
            compact.labels.push_back(result.data.labels[i]);
        }
        result.data = std::move(compact);
    }
    return result;
}

}  // namespace packgen
