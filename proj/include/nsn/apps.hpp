#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nsn/generation.hpp"
#include "nsn/network.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

/// `count` images from Gaussian noise; image i uses stream split(i) of cfg.seed.
std::vector<Tensor3> generate_batch(const Network& net, std::size_t count, const GenConfig& cfg);

/// Hidden-layer samples of layer k (1-based), stream split(i) per sample.
std::vector<Tensor3> sample_layer_batch(const Network& net, std::size_t k, std::size_t count, const GenConfig& cfg);

/// Generations along the line between one-hot noises of final-layer filters a
/// and b, t = i / (steps - 1); step i uses stream split(i).
std::vector<Tensor3> interpolation_strip(const Network& net, std::size_t a, std::size_t b, std::size_t steps,
                                         const GenConfig& cfg);

/// Signed sum of filter indices such as "0 + 1 - 2".
struct FilterExpression {
    std::vector<std::size_t> indices;
    std::vector<double> coeffs;
};

/// Throws std::invalid_argument on malformed input.
FilterExpression parse_filter_expression(const std::string& text);

/// Rows of `samples` images: one row per operand (its one-hot generation),
/// then one row of combined results. Row-major order.
std::vector<Tensor3> arithmetic_rows(const Network& net, const FilterExpression& expr, std::size_t samples,
                                     const GenConfig& cfg);

/// Re-encodes a raw image and rebuilds it from its first-layer map, once per
/// variant with stream split(v).
std::vector<Tensor3> style_variants(const Network& net, const Tensor3& raw_image, std::size_t variants,
                                    const GenConfig& cfg);

/// Image-resolution mask; true marks occluded pixels.
struct OcclusionMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<bool> occluded;

    static OcclusionMask none(std::size_t height, std::size_t width);
    static OcclusionMask all(std::size_t height, std::size_t width);
    static OcclusionMask rectangle(std::size_t height, std::size_t width, std::size_t top, std::size_t left,
                                   std::size_t rect_h, std::size_t rect_w);
    /// Any non-zero value counts as occluded.
    static OcclusionMask from_tensor(const Tensor3& t);

    bool at(std::size_t r, std::size_t c) const { return occluded[r * width + c]; }
    std::size_t count() const;
};

enum class InpaintMode { occluded_cells, full };

struct InpaintResult {
    Tensor3 image;
    Tensor3 first_map;        // F1 of the occluded image
    Tensor3 regenerated_map;  // F1 rebuilt from the final-layer map
    Tensor3 modified_map;     // F1 with occluded cells taken from regenerated_map
    std::vector<bool> replaced_cells;
};

/// A first-layer cell counts as occluded when more than half of its window is masked.
std::vector<bool> occluded_cells(const OcclusionMask& mask, const LayerSpec& spec, std::size_t rows, std::size_t cols);

/// Reconstructs masked regions by conditioning on the final-layer map of the
/// occluded image; see InpaintResult for the intermediate maps.
InpaintResult inpaint(const Network& net, const Tensor3& raw_image, const OcclusionMask& mask, const GenConfig& cfg,
                      Rng& rng, InpaintMode mode = InpaintMode::occluded_cells);

/// Mean squared error between a and b over masked pixels (all channels).
double masked_mse(const Tensor3& a, const Tensor3& b, const OcclusionMask& mask);

}  // namespace nsn
