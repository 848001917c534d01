#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nsn/tensor.hpp"

namespace nsn {

/// Whitening for one color channel; the channel plane is flattened row-major.
struct ZcaChannel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd whiten;    // U (L + eps I)^(-1/2) U^T
    Eigen::MatrixXd dewhiten;  // U (L + eps I)^(1/2) U^T
};

/// Independent ZCA whitening of each color channel of fixed-size images.
struct ZcaTransform {
    std::size_t height = 0;
    std::size_t width = 0;
    double epsilon = 0.0;
    std::vector<ZcaChannel> channels;

    Shape3 shape() const { return {height, width, channels.size()}; }
    bool operator==(const ZcaTransform& o) const;
};

/// Fits a ZCA transform on up to `max_images` images. Throws
/// std::invalid_argument with fewer than two images, ShapeError on mixed shapes.
ZcaTransform fit_zca(const std::vector<Tensor3>& images, double epsilon = 1e-2, std::size_t max_images = 10000);

Tensor3 apply_zca(const Tensor3& t, const ZcaTransform& z);
Tensor3 invert_zca(const Tensor3& t, const ZcaTransform& z);

enum class PreprocessKind { none = 0, normalize = 1, zca = 2 };

/// Pixel-space transform applied before the first layer and undone after
/// generation. `normalize` is (x - offset) / scale with global scalars.
struct Preprocessing {
    PreprocessKind kind = PreprocessKind::none;
    double offset = 0.0;
    double scale = 1.0;
    std::optional<ZcaTransform> zca;

    static Preprocessing none() { return {}; }
    static Preprocessing normalize(double offset, double scale);
    static Preprocessing whitening(ZcaTransform z);

    /// Global mean / standard deviation of all pixels of `images`.
    static Preprocessing fit_normalize(const std::vector<Tensor3>& images);

    Tensor3 apply(const Tensor3& t) const;
    Tensor3 invert(const Tensor3& t) const;

    bool operator==(const Preprocessing&) const = default;
};

const char* to_string(PreprocessKind kind);

/// Clamps every element to [0, 1] in place.
void clamp_unit(Tensor3& t);

}  // namespace nsn
