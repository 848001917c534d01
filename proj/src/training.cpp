#include "nsn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "nsn/error.hpp"
#include "nsn/parallel.hpp"
#include "nsn/rng.hpp"

namespace nsn {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

Tensor3 PatchSet::tensor(std::size_t i) const {
    const auto p = (*this)[i];
    return Tensor3(shape_, std::vector<double>(p.begin(), p.end()));
}

void PatchSet::add(std::span<const double> patch) {
    if (patch.size() != dim()) throw ShapeError("patch length does not match the patch set shape");
    data_.insert(data_.end(), patch.begin(), patch.end());
}

void PatchSet::add(const Tensor3& patch) {
    if (patch.shape() != shape_) throw ShapeError("patch " + to_string(patch.shape()) + " != " + to_string(shape_));
    add(patch.data());
}

void PatchSet::add_grid(const PatchGrid& grid) {
    if (grid.patch_shape() != shape_) throw ShapeError("patch grid shape does not match the patch set");
    data_.insert(data_.end(), grid.values().begin(), grid.values().end());
}

std::vector<EmConfig> default_layer_configs(std::size_t depth, const EmConfig& base) {
    std::vector<EmConfig> cfgs(depth, base);
    for (std::size_t k = 0; k < depth; ++k) {
        cfgs[k].patch_subsample = k == 0 ? 64 : 0;
        cfgs[k].seed = mix_seed(base.seed + k);
    }
    return cfgs;
}

double Assignment::objective() const { return std::accumulate(score.begin(), score.end(), 0.0); }

EStepResult e_step(const PatchSet& patches, FilterBank& bank, double alpha, const EmConfig& cfg) {
    if (bank.empty()) throw std::invalid_argument("e_step needs a non-empty filter bank");
    if (bank.patch_shape() != patches.patch_shape()) throw ShapeError("patch set and filter bank shapes differ");
    const std::size_t n = patches.count();
    EStepResult result;
    result.assignment.index.resize(n);
    result.assignment.score.resize(n);

    const std::size_t existing = bank.size();
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const Match m = best_filter(patches[i], bank);
        result.assignment.index[i] = m.index;
        result.assignment.score[i] = m.score;
    });

    // Spawning is order dependent, so this pass is sequential.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t& idx = result.assignment.index[i];
        double& score = result.assignment.score[i];
        for (std::size_t j = existing; j < bank.size(); ++j) {
            const double s = similarity(patches[i], bank[j]);
            if (s > score) {
                idx = j;
                score = s;
            }
        }
        if (score < alpha && bank.size() < cfg.max_filters) {
            bank.add({patches.tensor(i), cfg.init_sigma});
            idx = bank.size() - 1;
            score = peak_similarity(cfg.init_sigma);
            ++result.spawned;
        }
    }
    return result;
}

FilterBank m_step(const PatchSet& patches, const Assignment& assignment, const FilterBank& bank,
                  const EmConfig& cfg, std::vector<std::size_t>* remap) {
    const std::size_t k = bank.size();
    const std::size_t dim = patches.dim();
    if (assignment.index.size() != patches.count()) throw std::invalid_argument("assignment size != patch count");

    std::vector<std::size_t> counts(k, 0);
    std::vector<double> sums(k * dim, 0.0);
    for (std::size_t i = 0; i < patches.count(); ++i) {
        const std::size_t j = assignment.index[i];
        if (j >= k) throw std::invalid_argument("assignment refers to a filter outside the bank");
        ++counts[j];
        const auto p = patches[i];
        double* s = sums.data() + j * dim;
        for (std::size_t d = 0; d < dim; ++d) s[d] += p[d];
    }
    std::vector<double> spread(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] == 0) continue;
        double* s = sums.data() + j * dim;
        for (std::size_t d = 0; d < dim; ++d) s[d] /= static_cast<double>(counts[j]);
    }
    for (std::size_t i = 0; i < patches.count(); ++i) {
        const std::size_t j = assignment.index[i];
        spread[j] += squared_distance(patches[i], {sums.data() + j * dim, dim});
    }

    FilterBank out(bank.patch_shape());
    if (remap) remap->assign(k, npos);
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] == 0) {
            if (cfg.remove_empty) continue;
            if (remap) (*remap)[j] = out.size();
            out.add(bank[j]);
            continue;
        }
        GaussianFilter g;
        g.mu = Tensor3(bank.patch_shape(), std::vector<double>(sums.begin() + static_cast<std::ptrdiff_t>(j * dim),
                                                              sums.begin() + static_cast<std::ptrdiff_t>((j + 1) * dim)));
        g.sigma = std::max(std::sqrt(spread[j] / static_cast<double>(counts[j])), cfg.sigma_floor);
        if (remap) (*remap)[j] = out.size();
        out.add(std::move(g));
    }
    return out;
}

double calibrate_alpha(const PatchSet& patches, double percentile, double sigma_floor) {
    if (patches.empty()) throw std::invalid_argument("calibrate_alpha needs patches");
    if (!(percentile >= 0.0 && percentile <= 100.0)) throw std::invalid_argument("percentile must lie in [0, 100]");
    const std::size_t n = patches.count();
    Assignment all;
    all.index.assign(n, 0);
    FilterBank seed_bank(patches.patch_shape());
    seed_bank.add({Tensor3(patches.patch_shape()), 1.0});
    EmConfig cfg;
    cfg.sigma_floor = sigma_floor;
    const FilterBank global = m_step(patches, all, seed_bank, cfg);

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = similarity(patches[i], global[0]);
    const auto rank = static_cast<std::size_t>(std::floor(percentile / 100.0 * static_cast<double>(n - 1)));
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(rank), scores.end());
    return scores[rank];
}

std::string format_iteration(std::size_t layer, const EmIteration& it) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "layer %zu iter %zu filters %zu objective %.6g changed %.4f spawned %zu", layer,
                  it.iteration, it.filters, it.objective, it.changed, it.spawned);
    return buf;
}

LayerFit train_layer(const PatchSet& patches, const EmConfig& cfg, const EmObserver& observer) {
    if (patches.empty()) throw std::invalid_argument("train_layer needs at least one patch");
    Rng rng(cfg.seed);
    FilterBank initial(patches.patch_shape());
    initial.add({patches.tensor(rng.index(patches.count())), cfg.init_sigma});
    return train_layer(patches, cfg, std::move(initial), observer);
}

LayerFit train_layer(const PatchSet& patches, const EmConfig& cfg, FilterBank initial, const EmObserver& observer) {
    if (patches.empty()) throw std::invalid_argument("train_layer needs at least one patch");
    if (cfg.max_iters < 1 || cfg.max_filters < 1) throw std::invalid_argument("max_iters and max_filters must be >= 1");
    if (initial.empty()) throw std::invalid_argument("train_layer needs a non-empty starting bank");

    LayerFit fit;
    fit.alpha = cfg.alpha_percentile ? calibrate_alpha(patches, *cfg.alpha_percentile, cfg.sigma_floor) : cfg.alpha;
    fit.bank = std::move(initial);

    const std::size_t n = patches.count();
    std::vector<std::size_t> previous;
    std::vector<std::size_t> remap;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        EStepResult e = e_step(patches, fit.bank, fit.alpha, cfg);

        std::size_t changed = n;
        if (!previous.empty()) {
            changed = 0;
            for (std::size_t i = 0; i < n; ++i) changed += previous[i] != e.assignment.index[i];
        }
        EmIteration record{it, fit.bank.size(), e.assignment.objective(),
                           static_cast<double>(changed) / static_cast<double>(n), e.spawned};
        fit.history.push_back(record);
        if (observer) observer(record);

        fit.bank = m_step(patches, e.assignment, fit.bank, cfg, &remap);
        previous.resize(n);
        for (std::size_t i = 0; i < n; ++i) previous[i] = remap[e.assignment.index[i]];

        if (record.changed < cfg.convergence_frac) break;
    }
    return fit;
}

namespace {

PatchSet gather_patches(const std::vector<Tensor3>& maps, const LayerSpec& spec, const EmConfig& cfg) {
    const Shape3 shape{spec.patch_h, spec.patch_w, maps.front().channels()};
    PatchSet set(shape);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const PatchGrid grid = extract_patches(maps[i], spec.patch_h, spec.patch_w, spec.stride);
        if (cfg.patch_subsample == 0 || cfg.patch_subsample >= grid.count()) {
            set.add_grid(grid);
            continue;
        }
        // Partial Fisher-Yates: the first patch_subsample cells of a shuffled grid.
        Rng image_rng = rng.split(i);
        order.resize(grid.count());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t s = 0; s < cfg.patch_subsample; ++s) {
            std::swap(order[s], order[s + image_rng.index(order.size() - s)]);
            set.add(grid.patch(order[s] / grid.cols(), order[s] % grid.cols()));
        }
    }
    return set;
}

}  // namespace

Network train_network(const std::vector<Tensor3>& images, std::span<const LayerSpec> arch,
                      std::span<const EmConfig> cfgs, const TrainOptions& opts) {
    if (images.empty()) throw std::invalid_argument("train_network needs at least one image");
    if (cfgs.size() != 1 && cfgs.size() != arch.size()) {
        throw std::invalid_argument("need one EM config per layer or a single shared one");
    }
    Network net;
    net.input_shape = images.front().shape();
    spatial_chain(net.input_shape.height, net.input_shape.width, arch);
    net.preprocessing = opts.preprocessing;

    net.mean_image = Tensor3(net.input_shape);
    for (const auto& img : images) {
        if (img.shape() != net.input_shape) throw ShapeError("training images differ in shape");
        for (std::size_t i = 0; i < img.size(); ++i) net.mean_image.values()[i] += img.values()[i];
    }
    for (double& v : net.mean_image.values()) v = static_cast<double>(static_cast<float>(v / static_cast<double>(images.size())));

    std::vector<Tensor3> maps(images.size());
    parallel_for(images.size(), opts.threads, [&](std::size_t i) { maps[i] = net.preprocessing.apply(images[i]); });

    for (std::size_t k = 0; k < arch.size(); ++k) {
        const EmConfig& cfg = cfgs.size() == 1 ? cfgs[0] : cfgs[k];
        const PatchSet patches = gather_patches(maps, arch[k], cfg);
        EmObserver observer;
        if (opts.observer) observer = [&, k](const EmIteration& it) { opts.observer(k + 1, it); };
        LayerFit fit = train_layer(patches, cfg, observer);

        Layer layer{arch[k], fit.bank.quantized(), fit.alpha, 0.0};
        parallel_for(maps.size(), opts.threads,
                     [&](std::size_t i) { maps[i] = forward_layer(maps[i], layer.spec, layer.bank); });
        net.layers.push_back(std::move(layer));
    }
    net.metadata["architecture"] = format_architecture(arch);
    net.metadata["training_images"] = std::to_string(images.size());
    net.metadata["preprocessing"] = to_string(net.preprocessing.kind);
    net.validate();
    return net;
}

}  // namespace nsn
