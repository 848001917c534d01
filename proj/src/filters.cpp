#include "nsn/filters.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nsn/error.hpp"

namespace nsn {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return d2;
}

double peak_similarity(double sigma) {
    return -std::log(std::sqrt(2.0 * std::numbers::pi) * sigma);
}

double similarity(std::span<const double> x, const GaussianFilter& g) {
    if (x.size() != g.mu.size()) {
        throw ShapeError("patch of " + std::to_string(x.size()) + " values scored against filter of shape " +
                         to_string(g.mu.shape()));
    }
    return peak_similarity(g.sigma) - squared_distance(x, g.mu.data()) / (2.0 * g.sigma * g.sigma);
}

double similarity(const Tensor3& x, const GaussianFilter& g) {
    if (x.shape() != g.mu.shape()) {
        throw ShapeError("patch shape " + to_string(x.shape()) + " != filter shape " + to_string(g.mu.shape()));
    }
    return similarity(x.data(), g);
}

FilterBank::FilterBank(Shape3 patch_shape, std::vector<GaussianFilter> filters) : patch_shape_(patch_shape) {
    filters_.reserve(filters.size());
    for (auto& g : filters) add(std::move(g));
}

void FilterBank::add(GaussianFilter g) {
    if (g.mu.shape() != patch_shape_) {
        throw ShapeError("filter mean " + to_string(g.mu.shape()) + " does not match bank patch shape " +
                         to_string(patch_shape_));
    }
    filters_.push_back(std::move(g));
}

FilterBank FilterBank::quantized() const {
    FilterBank out(patch_shape_);
    for (const auto& g : filters_) {
        GaussianFilter q{g.mu, static_cast<double>(static_cast<float>(g.sigma))};
        for (double& v : q.mu.values()) v = static_cast<double>(static_cast<float>(v));
        out.filters_.push_back(std::move(q));
    }
    return out;
}

Match best_filter(std::span<const double> x, const FilterBank& bank) {
    if (bank.empty()) throw std::invalid_argument("best_filter on an empty filter bank");
    Match best{0, similarity(x, bank[0])};
    for (std::size_t j = 1; j < bank.size(); ++j) {
        const double s = similarity(x, bank[j]);
        if (s > best.score) best = {j, s};
    }
    return best;
}

Match best_filter(const Tensor3& x, const FilterBank& bank) {
    if (!bank.empty() && x.shape() != bank.patch_shape()) {
        throw ShapeError("patch shape " + to_string(x.shape()) + " != bank shape " + to_string(bank.patch_shape()));
    }
    return best_filter(x.data(), bank);
}

Tensor3 sample_filter(const GaussianFilter& g, double delta2, Rng& rng) {
    if (delta2 < 0.0) throw std::invalid_argument("delta2 must be non-negative");
    Tensor3 y = g.mu;
    if (delta2 == 0.0) return y;
    const double scale = delta2 * g.sigma;
    for (double& v : y.values()) v += scale * rng.normal();
    return y;
}

}  // namespace nsn
