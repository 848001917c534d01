#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nsn/tensor.hpp"

namespace nsn {

struct Dataset {
    std::string name;
    std::vector<Tensor3> images;

    std::size_t size() const { return images.size(); }
    Shape3 shape() const { return images.empty() ? Shape3{} : images.front().shape(); }
};

/// Reads an IDX3 unsigned-byte image file (optionally gzip-compressed), scaling
/// pixels to [0, 1]. `limit` > 0 keeps only the first `limit` images.
/// Throws FormatError on bad magic or truncation and ShapeError when the
/// images do not have the expected shape.
Dataset load_idx(const std::filesystem::path& path, std::optional<Shape3> expected = std::nullopt,
                 std::size_t limit = 0);

/// Builds an IDX3 byte stream from 8-bit quantized single-channel images.
std::vector<std::uint8_t> encode_idx(const std::vector<Tensor3>& images);

/// Decodes every raster file in `dir` (sorted by name), resizes bilinearly to
/// height x width and scales to [0, 1]. Grayscale files are replicated into
/// three channels when channels == 3; color files are converted to luma when
/// channels == 1. Undecodable files are skipped with a warning on stderr.
Dataset load_image_dir(const std::filesystem::path& dir, std::size_t height, std::size_t width, std::size_t channels);

/// One raster file, resized to height x width when both are non-zero.
Tensor3 read_image(const std::filesystem::path& path, std::size_t channels, std::size_t height = 0,
                   std::size_t width = 0);

/// 8-bit quantization used for every emitted raster: round(clamp(v) * 255).
std::vector<std::uint8_t> quantize(const Tensor3& t);
Tensor3 dequantize(const std::vector<std::uint8_t>& bytes, Shape3 shape);

/// Writes a 1- or 3-channel tensor as an 8-bit raster; format from the extension.
void write_image(const std::filesystem::path& path, const Tensor3& t);

/// Tiles equally-shaped images row-major into `cols` columns separated by
/// `gap` pixels of `gap_value`. A single image is returned unchanged.
Tensor3 tile_grid(const std::vector<Tensor3>& images, std::size_t cols, std::size_t gap = 2, double gap_value = 1.0);

/// Inverse of tile_grid for one tile.
Tensor3 extract_tile(const Tensor3& grid, Shape3 tile, std::size_t index, std::size_t cols, std::size_t gap = 2);

/// Columns used when the caller does not choose: ceil(sqrt(count)).
std::size_t default_grid_cols(std::size_t count);

/// FNV-1a hash over the quantized pixels of every image, as 16 hex digits.
std::string fingerprint(const std::vector<Tensor3>& images);

}  // namespace nsn
