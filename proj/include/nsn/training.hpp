#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsn/filters.hpp"
#include "nsn/network.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

/// Flat list of equally-shaped patches, one contiguous row per patch.
class PatchSet {
public:
    PatchSet() = default;
    explicit PatchSet(Shape3 patch_shape) : shape_(patch_shape) {}

    const Shape3& patch_shape() const { return shape_; }
    std::size_t dim() const { return shape_.size(); }
    std::size_t count() const { return dim() == 0 ? 0 : data_.size() / dim(); }
    bool empty() const { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim(), dim()}; }
    Tensor3 tensor(std::size_t i) const;

    void reserve(std::size_t patches) { data_.reserve(patches * dim()); }
    void add(std::span<const double> patch);
    void add(const Tensor3& patch);
    void add_grid(const PatchGrid& grid);

private:
    Shape3 shape_;
    std::vector<double> data_;
};

struct EmConfig {
    double alpha = -std::numeric_limits<double>::infinity();
    /// When set, alpha is replaced by calibrate_alpha(patches, *alpha_percentile).
    std::optional<double> alpha_percentile;
    std::size_t max_iters = 20;
    double convergence_frac = 1e-3;
    double sigma_floor = kDefaultSigmaFloor;
    double init_sigma = 1.0;
    std::size_t max_filters = 256;
    std::size_t patch_subsample = 0;  // patches drawn per image, 0 = all
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool remove_empty = true;
};

/// Default per-layer configs: 64 patches per image on the first layer, all
/// patches on deeper ones.
std::vector<EmConfig> default_layer_configs(std::size_t depth, const EmConfig& base = {});

struct Assignment {
    std::vector<std::size_t> index;
    std::vector<double> score;

    double objective() const;
};

struct EStepResult {
    Assignment assignment;
    std::size_t spawned = 0;
};

/// Assigns every patch to its highest-similarity filter. A patch whose best
/// score falls below `alpha` founds a new filter (mean = patch, sigma =
/// cfg.init_sigma) that later patches of the same pass can also join. New
/// filters are appended to `bank`; spawning stops at cfg.max_filters.
EStepResult e_step(const PatchSet& patches, FilterBank& bank, double alpha, const EmConfig& cfg = {});

/// Closed-form updates: mean of the assigned patches and the RMS distance to
/// that mean, floored at cfg.sigma_floor. Filters with no patches are dropped
/// when cfg.remove_empty is set; `remap`, if given, receives the new index of
/// every old filter (npos for dropped ones).
FilterBank m_step(const PatchSet& patches, const Assignment& assignment, const FilterBank& bank,
                  const EmConfig& cfg = {}, std::vector<std::size_t>* remap = nullptr);

/// Spawn threshold at the given percentile (0..100) of the scores every patch
/// gets under one filter fitted to the whole set.
double calibrate_alpha(const PatchSet& patches, double percentile, double sigma_floor = kDefaultSigmaFloor);

struct EmIteration {
    std::size_t iteration = 0;
    std::size_t filters = 0;
    double objective = 0.0;  // sum of assigned scores after the E-step
    double changed = 0.0;    // fraction of patches whose filter changed
    std::size_t spawned = 0;
};

std::string format_iteration(std::size_t layer, const EmIteration& it);

struct LayerFit {
    FilterBank bank;
    double alpha = 0.0;
    std::vector<EmIteration> history;
};

using EmObserver = std::function<void(const EmIteration&)>;

/// Hard EM from a single filter seeded at a random patch.
LayerFit train_layer(const PatchSet& patches, const EmConfig& cfg, const EmObserver& observer = {});

/// Hard EM from a caller-supplied starting bank.
LayerFit train_layer(const PatchSet& patches, const EmConfig& cfg, FilterBank initial,
                     const EmObserver& observer = {});

struct TrainOptions {
    Preprocessing preprocessing;
    std::function<void(std::size_t layer, const EmIteration&)> observer;
    std::size_t threads = 1;
};

/// Layer-wise training: for each layer, gather patches of the current feature
/// maps, fit a bank, then push every map through the new layer. `cfgs` holds
/// one config per layer, or a single one used for all. Images are raw [0, 1]
/// pixels; preprocessing is applied here.
Network train_network(const std::vector<Tensor3>& images, std::span<const LayerSpec> arch,
                      std::span<const EmConfig> cfgs, const TrainOptions& opts = {});

}  // namespace nsn
