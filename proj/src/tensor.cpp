#include "nsn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsn/error.hpp"

namespace nsn {

std::string to_string(const Shape3& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

Tensor3::Tensor3(Shape3 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor3::Tensor3(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : Tensor3(Shape3{height, width, channels}, fill) {}

Tensor3::Tensor3(Shape3 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

bool Tensor3::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t grid_extent(std::size_t extent, std::size_t window, std::size_t stride) {
    if (stride == 0) throw ShapeError("stride must be at least 1");
    if (window == 0 || window > extent) {
        throw ShapeError("window " + std::to_string(window) + " does not fit extent " + std::to_string(extent));
    }
    return (extent - window) / stride + 1;
}

std::size_t covered_extent(std::size_t cells, std::size_t window, std::size_t stride) {
    if (cells == 0) throw ShapeError("empty grid");
    return (cells - 1) * stride + window;
}

PatchGrid::PatchGrid(std::size_t rows, std::size_t cols, Shape3 patch_shape, std::size_t stride)
    : rows_(rows), cols_(cols), patch_shape_(patch_shape), stride_(stride),
      data_(rows * cols * patch_shape.size(), 0.0) {}

Tensor3 PatchGrid::patch_tensor(std::size_t r, std::size_t c) const {
    auto p = patch(r, c);
    return Tensor3(patch_shape_, std::vector<double>(p.begin(), p.end()));
}

PatchGrid extract_patches(const Tensor3& t, std::size_t patch_h, std::size_t patch_w, std::size_t stride) {
    const std::size_t rows = grid_extent(t.height(), patch_h, stride);
    const std::size_t cols = grid_extent(t.width(), patch_w, stride);
    const std::size_t ch = t.channels();
    PatchGrid grid(rows, cols, Shape3{patch_h, patch_w, ch}, stride);
    const std::size_t row_len = patch_w * ch;
    const auto src = t.data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            auto dst = grid.patch(r, c);
            for (std::size_t pr = 0; pr < patch_h; ++pr) {
                const auto from = src.begin() + static_cast<std::ptrdiff_t>(t.index(r * stride + pr, c * stride, 0));
                std::copy(from, from + static_cast<std::ptrdiff_t>(row_len), dst.begin() + static_cast<std::ptrdiff_t>(pr * row_len));
            }
        }
    }
    return grid;
}

Tensor3 stitch_patches(const PatchGrid& grid, std::size_t out_h, std::size_t out_w) {
    const auto& ps = grid.patch_shape();
    if (grid.count() == 0) throw ShapeError("cannot stitch an empty patch grid");
    if (covered_extent(grid.rows(), ps.height, grid.stride()) > out_h ||
        covered_extent(grid.cols(), ps.width, grid.stride()) > out_w) {
        throw ShapeError("patch grid extends past the " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                         " output");
    }
    Tensor3 sum(out_h, out_w, ps.channels);
    std::vector<std::size_t> coverage(out_h * out_w, 0);
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            auto p = grid.patch(r, c);
            std::size_t k = 0;
            for (std::size_t pr = 0; pr < ps.height; ++pr) {
                const std::size_t y = r * grid.stride() + pr;
                for (std::size_t pc = 0; pc < ps.width; ++pc) {
                    const std::size_t x = c * grid.stride() + pc;
                    ++coverage[y * out_w + x];
                    auto cell = sum.cell(y, x);
                    for (std::size_t ch = 0; ch < ps.channels; ++ch) cell[ch] += p[k++];
                }
            }
        }
    }
    for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t n = coverage[y * out_w + x];
            if (n == 0) {
                throw ShapeError("output position (" + std::to_string(y) + "," + std::to_string(x) +
                                 ") is not covered by any patch");
            }
            if (n == 1) continue;
            for (double& v : sum.cell(y, x)) v /= static_cast<double>(n);
        }
    }
    return sum;
}

double sigmoid(double x) {
    // Kept inside the open interval (0, 1) even where exp() saturates.
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(s, lo, hi);
}

Tensor3 sigmoid_map(const Tensor3& t) {
    Tensor3 out(t.shape());
    std::transform(t.values().begin(), t.values().end(), out.values().begin(), sigmoid);
    return out;
}

}  // namespace nsn
