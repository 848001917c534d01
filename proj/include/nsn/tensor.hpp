#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nsn {

struct Shape3 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t size() const { return height * width * channels; }
    bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

/// Dense height x width x channels array stored row-major as (row, col, channel).
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Shape3 shape, double fill = 0.0);
    Tensor3(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    Tensor3(Shape3 shape, std::vector<double> data);

    const Shape3& shape() const { return shape_; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::size_t r, std::size_t c, std::size_t ch) const {
        return (r * shape_.width + c) * shape_.channels + ch;
    }
    double& operator()(std::size_t r, std::size_t c, std::size_t ch) { return data_[index(r, c, ch)]; }
    double operator()(std::size_t r, std::size_t c, std::size_t ch) const { return data_[index(r, c, ch)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    /// Channel vector at one spatial cell.
    std::span<const double> cell(std::size_t r, std::size_t c) const {
        return {data_.data() + index(r, c, 0), shape_.channels};
    }
    std::span<double> cell(std::size_t r, std::size_t c) { return {data_.data() + index(r, c, 0), shape_.channels}; }

    bool all_finite() const;

    bool operator==(const Tensor3&) const = default;

private:
    Shape3 shape_;
    std::vector<double> data_;
};

/// Spatial size of a valid-padding sliding window: floor((extent - window) / stride) + 1.
std::size_t grid_extent(std::size_t extent, std::size_t window, std::size_t stride);

/// Smallest extent that a grid of `cells` windows covers: (cells - 1) * stride + window.
std::size_t covered_extent(std::size_t cells, std::size_t window, std::size_t stride);

/// Patches of one tensor laid out on a rows x cols grid. Each patch is stored
/// contiguously in (row, col, channel) order, so a patch is a flat vector of
/// `patch_size()` values.
class PatchGrid {
public:
    PatchGrid() = default;
    PatchGrid(std::size_t rows, std::size_t cols, Shape3 patch_shape, std::size_t stride);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t stride() const { return stride_; }
    const Shape3& patch_shape() const { return patch_shape_; }
    std::size_t patch_size() const { return patch_shape_.size(); }
    std::size_t count() const { return rows_ * cols_; }

    std::span<const double> patch(std::size_t r, std::size_t c) const {
        return {data_.data() + (r * cols_ + c) * patch_size(), patch_size()};
    }
    std::span<double> patch(std::size_t r, std::size_t c) {
        return {data_.data() + (r * cols_ + c) * patch_size(), patch_size()};
    }
    Tensor3 patch_tensor(std::size_t r, std::size_t c) const;

    std::span<const double> values() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Shape3 patch_shape_;
    std::size_t stride_ = 1;
    std::vector<double> data_;
};

PatchGrid extract_patches(const Tensor3& t, std::size_t patch_h, std::size_t patch_w, std::size_t stride);

/// Overlap-averaging inverse of extract_patches. Throws ShapeError if the grid
/// does not fit inside out_h x out_w or leaves some position uncovered.
Tensor3 stitch_patches(const PatchGrid& grid, std::size_t out_h, std::size_t out_w);

double sigmoid(double x);
Tensor3 sigmoid_map(const Tensor3& t);

}  // namespace nsn
