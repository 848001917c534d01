#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nsn/filters.hpp"
#include "nsn/preprocess.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

/// Sliding-window geometry of one layer.
struct LayerSpec {
    std::size_t patch_h = 1;
    std::size_t patch_w = 1;
    std::size_t stride = 1;

    bool operator==(const LayerSpec&) const = default;
};

/// Parses "4x4/2,3x3/2,6x6/2" (or "4/2" for square windows).
std::vector<LayerSpec> parse_architecture(const std::string& text);
std::string format_architecture(std::span<const LayerSpec> arch);

/// The two published layouts: 28x28 inputs with three layers and 64x64 inputs with five.
std::vector<LayerSpec> mnist_architecture();
std::vector<LayerSpec> architecture_64();

/// Spatial sizes (height, width) entering each layer plus the final output,
/// so the result has arch.size() + 1 entries. Throws ShapeError if a window
/// does not fit, if the chain does not end at 1x1, or if some input position
/// would be left uncovered (generation could not reconstruct it).
std::vector<std::pair<std::size_t, std::size_t>> spatial_chain(std::size_t height, std::size_t width,
                                                               std::span<const LayerSpec> arch);

struct Layer {
    LayerSpec spec;
    FilterBank bank;
    double alpha = 0.0;         // spawn threshold the bank was trained with
    double score_offset = 0.0;  // added to scores before the sigmoid; 0 keeps raw log-densities

    bool operator==(const Layer&) const = default;
};

struct Network {
    Shape3 input_shape;
    std::vector<Layer> layers;
    Preprocessing preprocessing;
    Tensor3 mean_image;  // training-set pixel mean, empty if unknown
    std::map<std::string, std::string> metadata;

    std::size_t depth() const { return layers.size(); }
    std::vector<LayerSpec> architecture() const;

    /// Tensor shape entering layer k (0-based); index depth() gives the final 1x1xN map.
    std::vector<Shape3> shape_chain() const;

    /// Checks filter shapes against the layer chain. Throws ShapeError.
    void validate() const;

    bool operator==(const Network&) const = default;
};

/// Output cell (r, c), channel j = sigmoid(similarity(patch(r, c), filter j) + score_offset).
Tensor3 forward_layer(const Tensor3& t, const LayerSpec& spec, const FilterBank& bank, double score_offset = 0.0);

/// Feature maps F1..FL of an already-preprocessed image.
std::vector<Tensor3> forward(const Network& net, const Tensor3& image);

/// Preprocesses a raw [0,1] image and runs forward.
std::vector<Tensor3> encode(const Network& net, const Tensor3& raw_image);

}  // namespace nsn
