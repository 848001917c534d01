#include "nsn/network.hpp"

#include <charconv>
#include <sstream>

#include "nsn/error.hpp"

namespace nsn {
namespace {

std::size_t parse_count(std::string_view s, const std::string& whole) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
        throw std::invalid_argument("malformed architecture '" + whole + "'");
    }
    return v;
}

void check_axis(std::size_t extent, std::size_t window, std::size_t stride, std::size_t layer) {
    const std::size_t cells = grid_extent(extent, window, stride);
    if (covered_extent(cells, window, stride) != extent) {
        throw ShapeError("layer " + std::to_string(layer) + ": window " + std::to_string(window) + " with stride " +
                         std::to_string(stride) + " leaves part of an extent of " + std::to_string(extent) +
                         " uncovered");
    }
}

}  // namespace

std::vector<LayerSpec> parse_architecture(const std::string& text) {
    std::vector<LayerSpec> arch;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto slash = item.find('/');
        if (slash == std::string::npos) throw std::invalid_argument("malformed architecture '" + text + "'");
        const std::string window = item.substr(0, slash);
        LayerSpec spec;
        spec.stride = parse_count(std::string_view(item).substr(slash + 1), text);
        if (const auto x = window.find('x'); x != std::string::npos) {
            spec.patch_h = parse_count(std::string_view(window).substr(0, x), text);
            spec.patch_w = parse_count(std::string_view(window).substr(x + 1), text);
        } else {
            spec.patch_h = spec.patch_w = parse_count(window, text);
        }
        arch.push_back(spec);
    }
    if (arch.empty()) throw std::invalid_argument("empty architecture");
    return arch;
}

std::string format_architecture(std::span<const LayerSpec> arch) {
    std::string out;
    for (const auto& s : arch) {
        if (!out.empty()) out += ',';
        out += std::to_string(s.patch_h) + "x" + std::to_string(s.patch_w) + "/" + std::to_string(s.stride);
    }
    return out;
}

std::vector<LayerSpec> mnist_architecture() { return {{4, 4, 2}, {3, 3, 2}, {6, 6, 2}}; }

std::vector<LayerSpec> architecture_64() { return {{4, 4, 2}, {3, 3, 2}, {3, 3, 2}, {3, 3, 2}, {3, 3, 1}}; }

std::vector<std::pair<std::size_t, std::size_t>> spatial_chain(std::size_t height, std::size_t width,
                                                               std::span<const LayerSpec> arch) {
    if (arch.empty()) throw ShapeError("architecture has no layers");
    std::vector<std::pair<std::size_t, std::size_t>> chain{{height, width}};
    for (std::size_t k = 0; k < arch.size(); ++k) {
        const auto& s = arch[k];
        check_axis(height, s.patch_h, s.stride, k);
        check_axis(width, s.patch_w, s.stride, k);
        height = grid_extent(height, s.patch_h, s.stride);
        width = grid_extent(width, s.patch_w, s.stride);
        chain.emplace_back(height, width);
    }
    if (height != 1 || width != 1) {
        throw ShapeError("architecture " + format_architecture(arch) + " ends at " + std::to_string(height) + "x" +
                         std::to_string(width) + ", not 1x1");
    }
    return chain;
}

std::vector<LayerSpec> Network::architecture() const {
    std::vector<LayerSpec> arch;
    for (const auto& l : layers) arch.push_back(l.spec);
    return arch;
}

std::vector<Shape3> Network::shape_chain() const {
    const auto arch = architecture();
    const auto spatial = spatial_chain(input_shape.height, input_shape.width, arch);
    std::vector<Shape3> chain;
    chain.push_back(input_shape);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        chain.push_back({spatial[k + 1].first, spatial[k + 1].second, layers[k].bank.size()});
    }
    return chain;
}

void Network::validate() const {
    const auto chain = shape_chain();
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        const Shape3 expected{l.spec.patch_h, l.spec.patch_w, chain[k].channels};
        if (l.bank.empty()) throw ShapeError("layer " + std::to_string(k) + " has no filters");
        if (l.bank.patch_shape() != expected) {
            throw ShapeError("layer " + std::to_string(k) + " filters are " + to_string(l.bank.patch_shape()) +
                             ", expected " + to_string(expected));
        }
    }
    if (!mean_image.empty() && mean_image.shape() != input_shape) throw ShapeError("mean image shape mismatch");
    if (preprocessing.kind == PreprocessKind::zca && (!preprocessing.zca || preprocessing.zca->shape() != input_shape))
        throw ShapeError("ZCA transform does not match the network input");
}

Tensor3 forward_layer(const Tensor3& t, const LayerSpec& spec, const FilterBank& bank, double score_offset) {
    if (bank.patch_shape() != Shape3{spec.patch_h, spec.patch_w, t.channels()}) {
        throw ShapeError("layer input " + to_string(t.shape()) + " is incompatible with filters of shape " +
                         to_string(bank.patch_shape()));
    }
    const PatchGrid grid = extract_patches(t, spec.patch_h, spec.patch_w, spec.stride);
    Tensor3 out(grid.rows(), grid.cols(), bank.size());
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            const auto p = grid.patch(r, c);
            auto cell = out.cell(r, c);
            for (std::size_t j = 0; j < bank.size(); ++j) cell[j] = sigmoid(similarity(p, bank[j]) + score_offset);
        }
    }
    return out;
}

std::vector<Tensor3> forward(const Network& net, const Tensor3& image) {
    if (image.shape() != net.input_shape) {
        throw ShapeError("image " + to_string(image.shape()) + " does not match network input " +
                         to_string(net.input_shape));
    }
    std::vector<Tensor3> maps;
    maps.reserve(net.depth());
    const Tensor3* current = &image;
    for (const auto& layer : net.layers) {
        maps.push_back(forward_layer(*current, layer.spec, layer.bank, layer.score_offset));
        current = &maps.back();
    }
    return maps;
}

std::vector<Tensor3> encode(const Network& net, const Tensor3& raw_image) {
    return forward(net, net.preprocessing.apply(raw_image));
}

}  // namespace nsn
