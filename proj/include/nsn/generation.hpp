#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nsn/filters.hpp"
#include "nsn/network.hpp"
#include "nsn/rng.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

struct GenConfig {
    double delta1 = 1.0;  // sharpness of the filter-choice distribution
    double delta2 = 1.0;  // spread of the per-filter samples
    double delta3 = 1.0;  // gain applied to each generated patch
    std::size_t n = 10;   // multinomial draws per cell
    std::uint64_t seed = 0;
    bool redraw_per_cell = false;  // fresh filter samples for every cell instead of one set per layer

    void validate() const;
};

/// Per-cell weight vectors over one layer's filters.
struct WeightMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t filters = 0;
    std::vector<double> weights;

    std::span<const double> cell(std::size_t r, std::size_t c) const {
        return {weights.data() + (r * cols + c) * filters, filters};
    }
};

/// Numerically stable softmax of delta1 * v.
std::vector<double> softmax(std::span<const double> v, double delta1);

/// Normalized counts of cfg.n draws (with replacement) from softmax(delta1 * v).
std::vector<double> weight_vector(std::span<const double> v, const GenConfig& cfg, Rng& rng);

/// One backward step: rebuild the layer input map from the layer output map.
/// `target` is the shape of the layer input and must match the grid geometry.
/// If `weights_out` is given it receives the weight map that was used.
Tensor3 generate_feature_map(const Tensor3& output_map, const FilterBank& bank, const LayerSpec& spec,
                             const Shape3& target, const GenConfig& cfg, Rng& rng, WeightMap* weights_out = nullptr);

/// Records every weight map built while descending, from the top layer down.
struct GenerationTrace {
    std::vector<WeightMap> weight_maps;
    std::vector<Tensor3> feature_maps;  // maps produced by each step, top layer first
};

/// Descends from a map at the output of layer `from_layer` (1-based) to the
/// network input space; no preprocessing inverse or clamping.
Tensor3 descend(const Network& net, Tensor3 map, std::size_t from_layer, const GenConfig& cfg, Rng& rng,
                GenerationTrace* trace = nullptr, std::size_t to_layer = 0);

/// Image from a final-layer vector z of length N_L: full descent, inverse
/// preprocessing, pixels clamped to [0, 1].
Tensor3 generate(const Network& net, std::span<const double> z, const GenConfig& cfg, Rng& rng,
                 GenerationTrace* trace = nullptr);

/// Standard normal vector of the given length.
std::vector<double> sample_noise(std::size_t length, Rng& rng);

/// Patch of layer k's receptive field generated from 1x1xN_k Gaussian noise
/// (k is 1-based). Full-image patches get the inverse preprocessing; smaller
/// ZCA patches are min-max scaled for display.
Tensor3 sample_hidden(const Network& net, std::size_t k, const GenConfig& cfg, Rng& rng);

/// Receptive-field extent (height, width) of one cell of layer k (1-based).
std::pair<std::size_t, std::size_t> receptive_field(const Network& net, std::size_t k);

/// One-hot vector selecting filter j of a bank of size n.
std::vector<double> noise_from_filter(std::size_t j, std::size_t n);

/// (1 - t) a + t b.
std::vector<double> interpolate_noise(std::span<const double> a, std::span<const double> b, double t);

/// Generates the second-to-last feature map for every noise vector, combines
/// them as sum_i coeffs[i] * map_i and descends from the combination.
Tensor3 feature_arithmetic(const Network& net, const std::vector<std::vector<double>>& noises,
                           std::span<const double> coeffs, const GenConfig& cfg, Rng& rng);

/// Maps a tensor in network input space back to displayable [0, 1] pixels.
Tensor3 to_pixels(const Network& net, const Tensor3& input_space);

}  // namespace nsn
