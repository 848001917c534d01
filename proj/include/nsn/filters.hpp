#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nsn/rng.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

inline constexpr double kDefaultSigmaFloor = 1e-4;

/// Isotropic Gaussian over patch space: mean tensor plus one scalar spread.
struct GaussianFilter {
    Tensor3 mu;
    double sigma = 1.0;

    bool operator==(const GaussianFilter&) const = default;
};

/// Log-density of `x` under g with a single-variable normalizer:
///   -ln(sqrt(2 pi) sigma) - |x - mu|^2 / (2 sigma^2)
double similarity(std::span<const double> x, const GaussianFilter& g);
double similarity(const Tensor3& x, const GaussianFilter& g);

/// Score a filter attains at its own mean.
double peak_similarity(double sigma);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Ordered set of filters sharing one patch shape.
class FilterBank {
public:
    FilterBank() = default;
    explicit FilterBank(Shape3 patch_shape) : patch_shape_(patch_shape) {}
    FilterBank(Shape3 patch_shape, std::vector<GaussianFilter> filters);

    const Shape3& patch_shape() const { return patch_shape_; }
    std::size_t size() const { return filters_.size(); }
    bool empty() const { return filters_.empty(); }

    const GaussianFilter& operator[](std::size_t i) const { return filters_[i]; }
    const std::vector<GaussianFilter>& filters() const { return filters_; }

    /// Throws ShapeError if g.mu does not match the bank's patch shape.
    void add(GaussianFilter g);

    /// Copy with every mean and sigma rounded to single precision, the
    /// resolution the model file stores.
    FilterBank quantized() const;

    bool operator==(const FilterBank&) const = default;

private:
    Shape3 patch_shape_;
    std::vector<GaussianFilter> filters_;
};

struct Match {
    std::size_t index = 0;
    double score = 0.0;
};

/// Highest-similarity filter; ties go to the lowest index. Throws
/// std::invalid_argument on an empty bank.
Match best_filter(std::span<const double> x, const FilterBank& bank);
Match best_filter(const Tensor3& x, const FilterBank& bank);

/// mu + delta2 * sigma * M with M elementwise standard normal.
Tensor3 sample_filter(const GaussianFilter& g, double delta2, Rng& rng);

}  // namespace nsn
