#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nsn/network.hpp"

namespace nsn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Model container, little-endian throughout:
///
///   "NSN1" | u32 version | u32 H, W, C
///   u32 preprocessing (0 none, 1 normalize, 2 zca)
///       normalize: f64 offset, f64 scale
///       zca: u32 height, width, channels | f64 epsilon |
///            per channel f64 mean[D], whiten[D*D], dewhiten[D*D]   (D = height*width)
///   u32 has_mean_image | f32 mean[H*W*C] if set
///   u32 layer count, then per layer:
///       u32 record bytes | u32 patch_h, patch_w, stride, channels, filters |
///       f64 alpha | f64 score_offset | f32 sigma[filters] | f32 means[filters * patch size]
///   u32 metadata entries, each u32 length + key bytes, u32 length + value bytes
///   u32 CRC-32 of everything before it
///
/// Filter tensors are single precision; ZCA matrices are kept in double.
std::vector<std::uint8_t> serialize_model(const Network& net);
Network deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

}  // namespace nsn
