#include "nsn/apps.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "nsn/error.hpp"

namespace nsn {

std::vector<Tensor3> generate_batch(const Network& net, std::size_t count, const GenConfig& cfg) {
    if (net.layers.empty()) throw std::invalid_argument("cannot generate from an untrained network");
    const Rng base(cfg.seed);
    std::vector<Tensor3> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = base.split(i);
        const auto z = sample_noise(net.layers.back().bank.size(), rng);
        images.push_back(generate(net, z, cfg, rng));
    }
    return images;
}

std::vector<Tensor3> sample_layer_batch(const Network& net, std::size_t k, std::size_t count, const GenConfig& cfg) {
    const Rng base(cfg.seed);
    std::vector<Tensor3> out;
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = base.split(i);
        out.push_back(sample_hidden(net, k, cfg, rng));
    }
    return out;
}

std::vector<Tensor3> interpolation_strip(const Network& net, std::size_t a, std::size_t b, std::size_t steps,
                                         const GenConfig& cfg) {
    if (steps < 2) throw std::invalid_argument("interpolation needs at least two steps");
    if (net.layers.empty()) throw std::invalid_argument("cannot generate from an untrained network");
    const std::size_t top = net.layers.back().bank.size();
    const auto za = noise_from_filter(a, top);
    const auto zb = noise_from_filter(b, top);
    const Rng base(cfg.seed);
    std::vector<Tensor3> out;
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
        Rng rng = base.split(i);
        out.push_back(generate(net, interpolate_noise(za, zb, t), cfg, rng));
    }
    return out;
}

FilterExpression parse_filter_expression(const std::string& text) {
    FilterExpression expr;
    std::size_t i = 0;
    const auto skip_space = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    double sign = 1.0;
    skip_space();
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
        sign = text[i] == '-' ? -1.0 : 1.0;
        ++i;
    }
    while (true) {
        skip_space();
        if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
            throw std::invalid_argument("malformed filter expression '" + text + "': expected a filter index");
        }
        std::size_t value = 0;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            value = value * 10 + static_cast<std::size_t>(text[i] - '0');
            ++i;
        }
        expr.indices.push_back(value);
        expr.coeffs.push_back(sign);
        skip_space();
        if (i == text.size()) break;
        if (text[i] != '+' && text[i] != '-') {
            throw std::invalid_argument("malformed filter expression '" + text + "': expected + or -");
        }
        sign = text[i] == '-' ? -1.0 : 1.0;
        ++i;
    }
    return expr;
}

std::vector<Tensor3> arithmetic_rows(const Network& net, const FilterExpression& expr, std::size_t samples,
                                     const GenConfig& cfg) {
    if (net.layers.empty()) throw std::invalid_argument("cannot generate from an untrained network");
    const std::size_t top = net.layers.back().bank.size();
    std::vector<std::vector<double>> noises;
    for (std::size_t j : expr.indices) noises.push_back(noise_from_filter(j, top));

    const Rng base(cfg.seed);
    std::vector<Tensor3> out;
    for (std::size_t op = 0; op < noises.size(); ++op) {
        for (std::size_t s = 0; s < samples; ++s) {
            Rng rng = base.split(op * samples + s);
            out.push_back(generate(net, noises[op], cfg, rng));
        }
    }
    for (std::size_t s = 0; s < samples; ++s) {
        Rng rng = base.split(noises.size() * samples + s);
        out.push_back(feature_arithmetic(net, noises, expr.coeffs, cfg, rng));
    }
    return out;
}

std::vector<Tensor3> style_variants(const Network& net, const Tensor3& raw_image, std::size_t variants,
                                    const GenConfig& cfg) {
    if (net.layers.empty()) throw std::invalid_argument("cannot style with an untrained network");
    const auto maps = encode(net, raw_image);
    const Rng base(cfg.seed);
    std::vector<Tensor3> out;
    for (std::size_t v = 0; v < variants; ++v) {
        Rng rng = base.split(v);
        out.push_back(to_pixels(net, descend(net, maps.front(), 1, cfg, rng)));
    }
    return out;
}

OcclusionMask OcclusionMask::none(std::size_t height, std::size_t width) {
    return {height, width, std::vector<bool>(height * width, false)};
}

OcclusionMask OcclusionMask::all(std::size_t height, std::size_t width) {
    return {height, width, std::vector<bool>(height * width, true)};
}

OcclusionMask OcclusionMask::rectangle(std::size_t height, std::size_t width, std::size_t top, std::size_t left,
                                       std::size_t rect_h, std::size_t rect_w) {
    OcclusionMask m = none(height, width);
    for (std::size_t r = top; r < std::min(height, top + rect_h); ++r)
        for (std::size_t c = left; c < std::min(width, left + rect_w); ++c) m.occluded[r * width + c] = true;
    return m;
}

OcclusionMask OcclusionMask::from_tensor(const Tensor3& t) {
    OcclusionMask m = none(t.height(), t.width());
    for (std::size_t r = 0; r < t.height(); ++r)
        for (std::size_t c = 0; c < t.width(); ++c) {
            const auto cell = t.cell(r, c);
            m.occluded[r * t.width() + c] = std::any_of(cell.begin(), cell.end(), [](double v) { return v != 0.0; });
        }
    return m;
}

std::size_t OcclusionMask::count() const { return static_cast<std::size_t>(std::count(occluded.begin(), occluded.end(), true)); }

std::vector<bool> occluded_cells(const OcclusionMask& mask, const LayerSpec& spec, std::size_t rows, std::size_t cols) {
    std::vector<bool> cells(rows * cols, false);
    const std::size_t area = spec.patch_h * spec.patch_w;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::size_t masked = 0;
            for (std::size_t pr = 0; pr < spec.patch_h; ++pr)
                for (std::size_t pc = 0; pc < spec.patch_w; ++pc)
                    masked += mask.at(r * spec.stride + pr, c * spec.stride + pc);
            cells[r * cols + c] = 2 * masked > area;
        }
    }
    return cells;
}

InpaintResult inpaint(const Network& net, const Tensor3& raw_image, const OcclusionMask& mask, const GenConfig& cfg,
                      Rng& rng, InpaintMode mode) {
    if (net.layers.empty()) throw std::invalid_argument("cannot inpaint with an untrained network");
    if (mask.height != raw_image.height() || mask.width != raw_image.width()) {
        throw ShapeError("occlusion mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " but the image is " + to_string(raw_image.shape()));
    }
    const auto maps = encode(net, raw_image);
    InpaintResult res;
    res.first_map = maps.front();
    res.regenerated_map = descend(net, maps.back(), net.depth(), cfg, rng, nullptr, 1);

    const std::size_t rows = res.first_map.height();
    const std::size_t cols = res.first_map.width();
    res.replaced_cells = mode == InpaintMode::full ? std::vector<bool>(rows * cols, true)
                                                   : occluded_cells(mask, net.layers.front().spec, rows, cols);
    res.modified_map = res.first_map;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (!res.replaced_cells[r * cols + c]) continue;
            const auto src = res.regenerated_map.cell(r, c);
            std::copy(src.begin(), src.end(), res.modified_map.cell(r, c).begin());
        }
    }
    res.image = to_pixels(net, descend(net, res.modified_map, 1, cfg, rng));
    return res;
}

double masked_mse(const Tensor3& a, const Tensor3& b, const OcclusionMask& mask) {
    if (a.shape() != b.shape() || mask.height != a.height() || mask.width != a.width()) {
        throw ShapeError("masked_mse operands differ in shape");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < a.height(); ++r)
        for (std::size_t c = 0; c < a.width(); ++c) {
            if (!mask.at(r, c)) continue;
            for (std::size_t ch = 0; ch < a.channels(); ++ch) {
                const double d = a(r, c, ch) - b(r, c, ch);
                sum += d * d;
                ++n;
            }
        }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace nsn
