#include "nsn/generation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nsn/error.hpp"

namespace nsn {

void GenConfig::validate() const {
    if (!(delta1 >= 0.0 && delta2 >= 0.0 && delta3 >= 0.0)) {
        throw std::invalid_argument("delta1, delta2 and delta3 must be non-negative");
    }
    if (n < 1) throw std::invalid_argument("the multinomial draw count n must be at least 1");
}

std::vector<double> softmax(std::span<const double> v, double delta1) {
    if (v.empty()) throw std::invalid_argument("softmax of an empty vector");
    std::vector<double> p(v.size());
    double top = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument("softmax input is not finite");
        top = std::max(top, delta1 * x);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += p[i] = std::exp(delta1 * v[i] - top);
    for (double& x : p) x /= total;
    return p;
}

std::vector<double> weight_vector(std::span<const double> v, const GenConfig& cfg, Rng& rng) {
    const std::vector<double> probs = softmax(v, cfg.delta1);
    std::vector<std::size_t> counts(v.size(), 0);
    for (std::size_t draw = 0; draw < cfg.n; ++draw) ++counts[rng.categorical(probs)];
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(cfg.n);
    return w;
}

Tensor3 generate_feature_map(const Tensor3& output_map, const FilterBank& bank, const LayerSpec& spec,
                             const Shape3& target, const GenConfig& cfg, Rng& rng, WeightMap* weights_out) {
    cfg.validate();
    if (output_map.channels() != bank.size()) {
        throw ShapeError("feature map has " + std::to_string(output_map.channels()) + " channels but the bank has " +
                         std::to_string(bank.size()) + " filters");
    }
    const Shape3 patch_shape{spec.patch_h, spec.patch_w, target.channels};
    if (bank.patch_shape() != patch_shape) {
        throw ShapeError("filters of shape " + to_string(bank.patch_shape()) + " cannot build a " +
                         to_string(target) + " map");
    }
    const std::size_t rows = output_map.height();
    const std::size_t cols = output_map.width();
    if (covered_extent(rows, spec.patch_h, spec.stride) != target.height ||
        covered_extent(cols, spec.patch_w, spec.stride) != target.width) {
        throw ShapeError("a " + std::to_string(rows) + "x" + std::to_string(cols) + " grid does not tile " +
                         to_string(target));
    }

    const std::size_t nf = bank.size();
    std::vector<Tensor3> samples;
    if (!cfg.redraw_per_cell) {
        samples.reserve(nf);
        for (std::size_t j = 0; j < nf; ++j) samples.push_back(sample_filter(bank[j], cfg.delta2, rng));
    }
    if (weights_out) *weights_out = WeightMap{rows, cols, nf, std::vector<double>(rows * cols * nf)};

    PatchGrid grid(rows, cols, patch_shape, spec.stride);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const std::vector<double> w = weight_vector(output_map.cell(r, c), cfg, rng);
            if (weights_out) std::copy(w.begin(), w.end(), weights_out->weights.begin() + static_cast<std::ptrdiff_t>((r * cols + c) * nf));
            auto patch = grid.patch(r, c);
            for (std::size_t j = 0; j < nf; ++j) {
                if (w[j] == 0.0) continue;
                const Tensor3 y = cfg.redraw_per_cell ? sample_filter(bank[j], cfg.delta2, rng) : Tensor3{};
                const auto yv = cfg.redraw_per_cell ? y.data() : samples[j].data();
                const double scale = cfg.delta3 * w[j];
                for (std::size_t d = 0; d < patch.size(); ++d) patch[d] += scale * yv[d];
            }
        }
    }
    return stitch_patches(grid, target.height, target.width);
}

Tensor3 descend(const Network& net, Tensor3 map, std::size_t from_layer, const GenConfig& cfg, Rng& rng,
                GenerationTrace* trace, std::size_t to_layer) {
    if (from_layer > net.depth() || to_layer > from_layer) throw std::out_of_range("invalid layer range for descent");
    for (std::size_t k = from_layer; k > to_layer; --k) {
        const Layer& layer = net.layers[k - 1];
        const Shape3 target{covered_extent(map.height(), layer.spec.patch_h, layer.spec.stride),
                            covered_extent(map.width(), layer.spec.patch_w, layer.spec.stride),
                            layer.bank.patch_shape().channels};
        WeightMap weights;
        map = generate_feature_map(map, layer.bank, layer.spec, target, cfg, rng, trace ? &weights : nullptr);
        if (trace) {
            trace->weight_maps.push_back(std::move(weights));
            trace->feature_maps.push_back(map);
        }
    }
    return map;
}

Tensor3 to_pixels(const Network& net, const Tensor3& input_space) {
    const Preprocessing& pre = net.preprocessing;
    Tensor3 out;
    if (input_space.shape() == net.input_shape) {
        out = pre.invert(input_space);
    } else if (pre.kind == PreprocessKind::normalize) {
        out = Preprocessing::normalize(pre.offset, pre.scale).invert(input_space);
    } else if (pre.kind == PreprocessKind::zca) {
        // Whitening is defined on whole images only; rescale partial patches for display.
        out = input_space;
        const auto [lo, hi] = std::minmax_element(out.values().begin(), out.values().end());
        const double low = *lo;
        const double range = *hi - *lo;
        for (double& v : out.values()) v = range > 0.0 ? (v - low) / range : 0.5;
    } else {
        out = input_space;
    }
    clamp_unit(out);
    return out;
}

Tensor3 generate(const Network& net, std::span<const double> z, const GenConfig& cfg, Rng& rng,
                 GenerationTrace* trace) {
    if (net.layers.empty()) throw std::invalid_argument("cannot generate from an untrained network");
    const std::size_t top = net.layers.back().bank.size();
    if (z.size() != top) {
        throw std::invalid_argument("noise vector has length " + std::to_string(z.size()) + ", the final layer has " +
                                    std::to_string(top) + " filters");
    }
    Tensor3 map(Shape3{1, 1, top}, std::vector<double>(z.begin(), z.end()));
    return to_pixels(net, descend(net, std::move(map), net.depth(), cfg, rng, trace));
}

std::vector<double> sample_noise(std::size_t length, Rng& rng) {
    std::vector<double> z(length);
    for (double& v : z) v = rng.normal();
    return z;
}

std::pair<std::size_t, std::size_t> receptive_field(const Network& net, std::size_t k) {
    if (k < 1 || k > net.depth()) throw std::out_of_range("layer index " + std::to_string(k) + " is out of range");
    std::size_t h = 1;
    std::size_t w = 1;
    for (std::size_t j = k; j >= 1; --j) {
        const auto& s = net.layers[j - 1].spec;
        h = covered_extent(h, s.patch_h, s.stride);
        w = covered_extent(w, s.patch_w, s.stride);
    }
    return {h, w};
}

Tensor3 sample_hidden(const Network& net, std::size_t k, const GenConfig& cfg, Rng& rng) {
    if (k < 1 || k > net.depth()) throw std::out_of_range("layer index " + std::to_string(k) + " is out of range");
    const std::size_t filters = net.layers[k - 1].bank.size();
    Tensor3 map(Shape3{1, 1, filters}, sample_noise(filters, rng));
    return to_pixels(net, descend(net, std::move(map), k, cfg, rng));
}

std::vector<double> noise_from_filter(std::size_t j, std::size_t n) {
    if (j >= n) throw std::out_of_range("filter index " + std::to_string(j) + " >= " + std::to_string(n));
    std::vector<double> z(n, 0.0);
    z[j] = 1.0;
    return z;
}

std::vector<double> interpolate_noise(std::span<const double> a, std::span<const double> b, double t) {
    if (a.size() != b.size()) throw std::invalid_argument("noise vectors differ in length");
    std::vector<double> z(a.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * a[i] + t * b[i];
    return z;
}

Tensor3 feature_arithmetic(const Network& net, const std::vector<std::vector<double>>& noises,
                           std::span<const double> coeffs, const GenConfig& cfg, Rng& rng) {
    if (noises.empty() || noises.size() != coeffs.size()) {
        throw std::invalid_argument("need one coefficient per noise vector and at least one of each");
    }
    if (net.layers.empty()) throw std::invalid_argument("cannot generate from an untrained network");
    const std::size_t top = net.layers.back().bank.size();
    Tensor3 combined;
    for (std::size_t i = 0; i < noises.size(); ++i) {
        if (noises[i].size() != top) throw std::invalid_argument("noise vector length does not match the final layer");
        Tensor3 map(Shape3{1, 1, top}, noises[i]);
        Tensor3 below = descend(net, std::move(map), net.depth(), cfg, rng, nullptr, net.depth() - 1);
        for (double& v : below.values()) v *= coeffs[i];
        if (combined.empty()) {
            combined = std::move(below);
        } else {
            for (std::size_t d = 0; d < combined.size(); ++d) combined.values()[d] += below.values()[d];
        }
    }
    return to_pixels(net, descend(net, std::move(combined), net.depth() - 1, cfg, rng));
}

}  // namespace nsn
