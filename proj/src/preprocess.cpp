#include "nsn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "nsn/error.hpp"

namespace nsn {
namespace {

Eigen::VectorXd channel_plane(const Tensor3& t, std::size_t ch) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.height() * t.width()));
    for (std::size_t r = 0; r < t.height(); ++r)
        for (std::size_t c = 0; c < t.width(); ++c) v[static_cast<Eigen::Index>(r * t.width() + c)] = t(r, c, ch);
    return v;
}

void set_channel_plane(Tensor3& t, std::size_t ch, const Eigen::VectorXd& v) {
    for (std::size_t r = 0; r < t.height(); ++r)
        for (std::size_t c = 0; c < t.width(); ++c) t(r, c, ch) = v[static_cast<Eigen::Index>(r * t.width() + c)];
}

void check_shape(const Tensor3& t, const ZcaTransform& z) {
    if (t.shape() != z.shape()) {
        throw ShapeError("tensor " + to_string(t.shape()) + " does not match ZCA transform " + to_string(z.shape()));
    }
}

}  // namespace

bool ZcaTransform::operator==(const ZcaTransform& o) const {
    if (height != o.height || width != o.width || epsilon != o.epsilon || channels.size() != o.channels.size())
        return false;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto& a = channels[i];
        const auto& b = o.channels[i];
        if (a.mean != b.mean || a.whiten != b.whiten || a.dewhiten != b.dewhiten) return false;
    }
    return true;
}

ZcaTransform fit_zca(const std::vector<Tensor3>& images, double epsilon, std::size_t max_images) {
    if (images.size() < 2) throw std::invalid_argument("ZCA needs at least two images");
    if (epsilon < 0.0) throw std::invalid_argument("ZCA epsilon must be non-negative");
    const Shape3 shape = images.front().shape();
    const std::size_t n = std::min(images.size(), std::max<std::size_t>(max_images, 2));
    const auto dim = static_cast<Eigen::Index>(shape.height * shape.width);

    ZcaTransform z;
    z.height = shape.height;
    z.width = shape.width;
    z.epsilon = epsilon;
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), dim);
        for (std::size_t i = 0; i < n; ++i) {
            if (images[i].shape() != shape) throw ShapeError("ZCA input images differ in shape");
            x.row(static_cast<Eigen::Index>(i)) = channel_plane(images[i], ch).transpose();
        }
        ZcaChannel zc;
        zc.mean = x.colwise().mean().transpose();
        x.rowwise() -= zc.mean.transpose();
        const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success) throw std::runtime_error("ZCA eigendecomposition failed");
        const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0).array() + epsilon;
        const Eigen::MatrixXd& u = eig.eigenvectors();
        zc.whiten = u * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose();
        zc.dewhiten = u * lambda.cwiseSqrt().asDiagonal() * u.transpose();
        // Symmetric by construction; remove rounding asymmetry.
        zc.whiten = (0.5 * (zc.whiten + zc.whiten.transpose())).eval();
        zc.dewhiten = (0.5 * (zc.dewhiten + zc.dewhiten.transpose())).eval();
        z.channels.push_back(std::move(zc));
    }
    return z;
}

Tensor3 apply_zca(const Tensor3& t, const ZcaTransform& z) {
    check_shape(t, z);
    Tensor3 out(t.shape());
    for (std::size_t ch = 0; ch < z.channels.size(); ++ch) {
        const auto& zc = z.channels[ch];
        set_channel_plane(out, ch, zc.whiten * (channel_plane(t, ch) - zc.mean));
    }
    return out;
}

Tensor3 invert_zca(const Tensor3& t, const ZcaTransform& z) {
    check_shape(t, z);
    Tensor3 out(t.shape());
    for (std::size_t ch = 0; ch < z.channels.size(); ++ch) {
        const auto& zc = z.channels[ch];
        set_channel_plane(out, ch, zc.dewhiten * channel_plane(t, ch) + zc.mean);
    }
    return out;
}

Preprocessing Preprocessing::normalize(double offset, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("normalization scale must be positive");
    Preprocessing p;
    p.kind = PreprocessKind::normalize;
    p.offset = offset;
    p.scale = scale;
    return p;
}

Preprocessing Preprocessing::whitening(ZcaTransform z) {
    Preprocessing p;
    p.kind = PreprocessKind::zca;
    p.zca = std::move(z);
    return p;
}

Preprocessing Preprocessing::fit_normalize(const std::vector<Tensor3>& images) {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& img : images) {
        for (double v : img.values()) {
            sum += v;
            sum_sq += v * v;
        }
        count += img.size();
    }
    if (count == 0) throw std::invalid_argument("cannot fit normalization on empty data");
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
    return normalize(mean, std::max(std::sqrt(var), 1e-8));
}

Tensor3 Preprocessing::apply(const Tensor3& t) const {
    switch (kind) {
    case PreprocessKind::none:
        return t;
    case PreprocessKind::normalize: {
        Tensor3 out = t;
        for (double& v : out.values()) v = (v - offset) / scale;
        return out;
    }
    case PreprocessKind::zca:
        return apply_zca(t, *zca);
    }
    return t;
}

Tensor3 Preprocessing::invert(const Tensor3& t) const {
    switch (kind) {
    case PreprocessKind::none:
        return t;
    case PreprocessKind::normalize: {
        Tensor3 out = t;
        for (double& v : out.values()) v = v * scale + offset;
        return out;
    }
    case PreprocessKind::zca:
        return invert_zca(t, *zca);
    }
    return t;
}

const char* to_string(PreprocessKind kind) {
    switch (kind) {
    case PreprocessKind::none: return "none";
    case PreprocessKind::normalize: return "normalize";
    case PreprocessKind::zca: return "zca";
    }
    return "unknown";
}

void clamp_unit(Tensor3& t) {
    for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace nsn
