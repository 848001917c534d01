// nsn: command-line front end for training and sampling.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nsn/apps.hpp"
#include "nsn/dataset.hpp"
#include "nsn/error.hpp"
#include "nsn/model_io.hpp"
#include "nsn/network.hpp"
#include "nsn/preprocess.hpp"
#include "nsn/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

/// Bad arguments discovered after parsing; exits with status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// Config file: `key = value` lines, `#` comments, optional `command.key`.

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        entries.emplace_back(std::move(key), std::move(value));
    }
    return entries;
}

/// Splices config entries in right after the subcommand name so that flags
/// given on the command line (which come later) take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const std::vector<std::string>& commands) {
    std::optional<std::string> config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
    }
    if (!config) return args;

    std::size_t pos = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (std::find(commands.begin(), commands.end(), args[i]) != commands.end()) {
            pos = i;
            break;
        }
    }
    if (pos == args.size()) return args;

    std::vector<std::string> injected;
    for (auto [key, value] : read_config(*config)) {
        if (const auto dot = key.find('.'); dot != std::string::npos) {
            if (key.substr(0, dot) != args[pos]) continue;
            key = key.substr(dot + 1);
        }
        injected.push_back("--" + key + "=" + value);
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(pos) + 1);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(pos) + 1, args.end());
    return out;
}

// ---------------------------------------------------------------------------
// Options shared by the sampling commands.

struct GenFlags {
    std::string model;
    std::uint64_t seed = 0;
    double delta1 = 1.0, delta2 = 1.0, delta3 = 1.0;
    std::size_t n = 10;
    bool redraw = false;
    std::string out;
    std::size_t grid_cols = 0;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* d1_opt = nullptr;
    CLI::Option* d2_opt = nullptr;
    CLI::Option* d3_opt = nullptr;
    CLI::Option* n_opt = nullptr;
};

void add_gen_flags(CLI::App* cmd, GenFlags& f, bool need_out = true) {
    cmd->add_option("--model", f.model, "Model file")->required();
    f.seed_opt = cmd->add_option("--seed", f.seed, "Random seed (default: from the model)");
    f.d1_opt = cmd->add_option("--delta1", f.delta1, "Filter-choice sharpness")->check(CLI::NonNegativeNumber);
    f.d2_opt = cmd->add_option("--delta2", f.delta2, "Filter sample spread")->check(CLI::NonNegativeNumber);
    f.d3_opt = cmd->add_option("--delta3", f.delta3, "Patch gain");
    f.n_opt = cmd->add_option("--n", f.n, "Multinomial draws per cell")->check(CLI::PositiveNumber);
    cmd->add_flag("--redraw-per-cell", f.redraw, "Draw fresh filter samples for every cell");
    auto* out = cmd->add_option("--out", f.out, "Output raster (.png, .pgm, .ppm, ...)");
    if (need_out) out->required();
    cmd->add_option("--grid-cols", f.grid_cols, "Grid columns (default: square-ish)");
}

/// Flags win; otherwise values recorded in the model at training time.
nsn::GenConfig resolve_gen(const GenFlags& f, const nsn::Network& net) {
    nsn::GenConfig cfg;
    const auto meta = [&](const char* key) -> std::optional<std::string> {
        const auto it = net.metadata.find(key);
        if (it == net.metadata.end()) return std::nullopt;
        return it->second;
    };
    const auto pick_double = [&](CLI::Option* opt, double flag, const char* key, double fallback) {
        if (opt->count() > 0) return flag;
        if (auto v = meta(key)) return std::stod(*v);
        return fallback;
    };
    cfg.delta1 = pick_double(f.d1_opt, f.delta1, "delta1", cfg.delta1);
    cfg.delta2 = pick_double(f.d2_opt, f.delta2, "delta2", cfg.delta2);
    cfg.delta3 = pick_double(f.d3_opt, f.delta3, "delta3", cfg.delta3);
    if (f.n_opt->count() > 0) cfg.n = f.n;
    else if (auto v = meta("n")) cfg.n = std::stoull(*v);
    if (f.seed_opt->count() > 0) cfg.seed = f.seed;
    else if (auto v = meta("seed")) cfg.seed = std::stoull(*v);
    cfg.redraw_per_cell = f.redraw;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

json gen_json(const nsn::GenConfig& cfg) {
    return {{"delta1", cfg.delta1}, {"delta2", cfg.delta2},   {"delta3", cfg.delta3},
            {"n", cfg.n},           {"seed", cfg.seed},       {"redraw_per_cell", cfg.redraw_per_cell}};
}

std::string hex_digest(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json model_json(const nsn::Network& net, const std::string& path) {
    json layers = json::array();
    const auto chain = nsn::spatial_chain(net.input_shape.height, net.input_shape.width, net.architecture());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        layers.push_back({{"layer", k + 1},
                          {"patch", std::to_string(l.spec.patch_h) + "x" + std::to_string(l.spec.patch_w)},
                          {"stride", l.spec.stride},
                          {"output", std::to_string(chain[k + 1].first) + "x" + std::to_string(chain[k + 1].second)},
                          {"filters", l.bank.size()},
                          {"alpha", l.alpha},
                          {"score_offset", l.score_offset}});
    }
    json meta = json::object();
    for (const auto& [k, v] : net.metadata) meta[k] = v;
    return {{"path", path},
            {"digest", hex_digest(nsn::serialize_model(net))},
            {"input", nsn::to_string(net.input_shape)},
            {"preprocessing", nsn::to_string(net.preprocessing.kind)},
            {"layers", layers},
            {"metadata", meta}};
}

std::vector<std::string> manifest_notes(const nsn::Network& net, const std::string& command) {
    std::vector<std::string> notes;
    if (net.preprocessing.kind == nsn::PreprocessKind::zca &&
        (command == "inpaint" || command == "style" || command == "sample-layer")) {
        notes.push_back("ZCA preprocessing loses colour information in reconstructions; outputs are not colour-corrected");
    }
    return notes;
}

void write_manifest(const fs::path& path, json manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

fs::path manifest_path(const std::string& out) { return fs::path(out + ".manifest.json"); }

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
    return {{"tool", "nsn"}, {"version", kToolVersion}, {"command", command}, {"argv", argv}};
}

std::size_t grid_cols(const GenFlags& f, std::size_t count) {
    return f.grid_cols > 0 ? f.grid_cols : nsn::default_grid_cols(count);
}

void emit_grid(const std::vector<nsn::Tensor3>& images, std::size_t cols, const std::string& out) {
    nsn::write_image(out, nsn::tile_grid(images, cols));
}

nsn::Network load_for(const GenFlags& f) {
    if (!fs::exists(f.model)) throw UsageError("model file not found: " + f.model);
    return nsn::load_model(f.model);
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double>) out.push_back(std::stod(item, &used));
            else out.push_back(static_cast<T>(std::stoull(item, &used)));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string("bad value '") + item + "' in " + what);
        }
    }
    if (out.empty()) throw UsageError(std::string("empty list for ") + what);
    return out;
}

template <class T>
T per_layer(const std::vector<T>& values, std::size_t k) {
    return values.size() == 1 ? values.front() : values.at(k);
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
    std::string idx, images, size = "28x28", arch = "mnist", preprocess = "none";
    std::string alpha, alpha_percentile = "20,5,5", subsample = "64,16,0", max_filters = "200";
    std::size_t channels = 1, limit = 0, max_iters = 20, threads = 1;
    double convergence = 1e-3, zca_eps = 1e-2, sigma_floor = nsn::kDefaultSigmaFloor;
    std::uint64_t seed = 0;
    double delta1 = 1.0, delta2 = 1.0, delta3 = 1.0;
    std::size_t n = 10;
    std::string out;
    bool quiet = false;
};

void add_train(CLI::App* cmd, TrainFlags& f) {
    auto* src = cmd->add_option_group("dataset");
    src->add_option("--idx", f.idx, "IDX3 image file (plain or gzip)");
    src->add_option("--images", f.images, "Directory of raster images");
    src->require_option(1);
    cmd->add_option("--size", f.size, "HxW for --images (IDX files carry their own size)");
    cmd->add_option("--channels", f.channels, "Channels for --images")->check(CLI::IsMember({1, 3}));
    cmd->add_option("--limit", f.limit, "Use only the first N images (0 = all)");
    cmd->add_option("--arch", f.arch, "mnist, 64, or layers such as 4x4/2,3x3/2,6x6/2");
    cmd->add_option("--preprocess", f.preprocess, "none, normalize or zca")
        ->check(CLI::IsMember({"none", "normalize", "zca"}));
    cmd->add_option("--zca-eps", f.zca_eps, "ZCA regularizer")->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", f.alpha, "Fixed spawn threshold(s), one or one per layer; overrides percentiles");
    cmd->add_option("--alpha-percentile", f.alpha_percentile, "Spawn threshold percentile(s), one or one per layer");
    cmd->add_option("--patch-subsample", f.subsample, "Patches drawn per image, one or one per layer (0 = all)");
    cmd->add_option("--max-filters", f.max_filters, "Filter cap(s), one or one per layer");
    cmd->add_option("--max-iters", f.max_iters, "EM iterations per layer")->check(CLI::PositiveNumber);
    cmd->add_option("--convergence", f.convergence, "Stop when fewer than this fraction of patches move");
    cmd->add_option("--sigma-floor", f.sigma_floor, "Lower bound for filter sigmas")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", f.threads, "Worker threads for scoring")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Training seed; also the default sampling seed");
    cmd->add_option("--delta1", f.delta1, "Default sampling delta1 stored in the model");
    cmd->add_option("--delta2", f.delta2, "Default sampling delta2 stored in the model");
    cmd->add_option("--delta3", f.delta3, "Default sampling delta3 stored in the model");
    cmd->add_option("--n", f.n, "Default multinomial draws stored in the model")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "Model file to write")->required();
    cmd->add_flag("--quiet", f.quiet, "Only log per-layer summaries");
}

std::vector<nsn::LayerSpec> resolve_arch(const std::string& text) {
    if (text == "mnist") return nsn::mnist_architecture();
    if (text == "64") return nsn::architecture_64();
    try {
        return nsn::parse_architecture(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) {
            const auto s = std::stoull(text);
            return {s, s};
        }
        return {std::stoull(text.substr(0, x)), std::stoull(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw UsageError("bad --size '" + text + "', expected HxW");
    }
}

int run_train(const TrainFlags& f, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto arch = resolve_arch(f.arch);

    nsn::Dataset data;
    std::string source;
    if (!f.idx.empty()) {
        if (!fs::exists(f.idx)) throw UsageError("dataset not found: " + f.idx);
        data = nsn::load_idx(f.idx, std::nullopt, f.limit);
        source = f.idx;
    } else {
        if (!fs::is_directory(f.images)) throw UsageError("image directory not found: " + f.images);
        const auto [h, w] = parse_size(f.size);
        data = nsn::load_image_dir(f.images, h, w, f.channels);
        if (f.limit > 0 && data.images.size() > f.limit) data.images.resize(f.limit);
        source = f.images;
    }
    const double load_s = seconds_since(t0);
    const nsn::Shape3 shape = data.shape();
    try {
        nsn::spatial_chain(shape.height, shape.width, arch);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("architecture does not fit ") + nsn::to_string(shape) + ": " + e.what());
    }

    const auto percentiles = parse_list<double>(f.alpha_percentile, "--alpha-percentile");
    const auto subsample = parse_list<std::size_t>(f.subsample, "--patch-subsample");
    const auto caps = parse_list<std::size_t>(f.max_filters, "--max-filters");
    std::vector<double> alphas;
    if (!f.alpha.empty()) alphas = parse_list<double>(f.alpha, "--alpha");
    for (std::size_t size : {percentiles.size(), subsample.size(), caps.size()}) {
        if (size != 1 && size != arch.size()) {
            throw UsageError("per-layer lists need 1 or " + std::to_string(arch.size()) + " values");
        }
    }
    if (!alphas.empty() && alphas.size() != 1 && alphas.size() != arch.size()) {
        throw UsageError("--alpha needs 1 or " + std::to_string(arch.size()) + " values");
    }

    nsn::EmConfig base;
    base.max_iters = f.max_iters;
    base.convergence_frac = f.convergence;
    base.sigma_floor = f.sigma_floor;
    base.threads = f.threads;
    base.seed = f.seed;
    auto cfgs = nsn::default_layer_configs(arch.size(), base);
    for (std::size_t k = 0; k < arch.size(); ++k) {
        if (alphas.empty()) cfgs[k].alpha_percentile = per_layer(percentiles, k);
        else cfgs[k].alpha = per_layer(alphas, k);
        cfgs[k].patch_subsample = per_layer(subsample, k);
        cfgs[k].max_filters = per_layer(caps, k);
    }

    nsn::TrainOptions opts;
    opts.threads = f.threads;
    if (f.preprocess == "normalize") opts.preprocessing = nsn::Preprocessing::fit_normalize(data.images);
    else if (f.preprocess == "zca") opts.preprocessing = nsn::Preprocessing::whitening(nsn::fit_zca(data.images, f.zca_eps));

    std::vector<double> layer_seconds(arch.size(), 0.0);
    auto layer_t0 = Clock::now();
    std::size_t current = 0;
    opts.observer = [&](std::size_t layer, const nsn::EmIteration& it) {
        if (layer != current) {
            layer_t0 = Clock::now();
            current = layer;
        }
        layer_seconds.at(layer - 1) = seconds_since(layer_t0);
        if (!f.quiet) std::cerr << nsn::format_iteration(layer, it) << "\n";
    };

    const auto train_t0 = Clock::now();
    nsn::Network net = nsn::train_network(data.images, arch, cfgs, opts);
    const double train_s = seconds_since(train_t0);

    net.metadata["seed"] = std::to_string(f.seed);
    net.metadata["delta1"] = json(f.delta1).dump();
    net.metadata["delta2"] = json(f.delta2).dump();
    net.metadata["delta3"] = json(f.delta3).dump();
    net.metadata["n"] = std::to_string(f.n);
    net.metadata["dataset_fingerprint"] = nsn::fingerprint(data.images);
    nsn::save_model(net, f.out);

    for (std::size_t k = 0; k < net.depth(); ++k) {
        std::cerr << "layer " << k + 1 << ": " << net.layers[k].bank.size() << " filters, alpha "
                  << net.layers[k].alpha << "\n";
    }

    json layer_cfg = json::array();
    for (std::size_t k = 0; k < arch.size(); ++k) {
        layer_cfg.push_back({{"alpha", net.layers[k].alpha},
                             {"alpha_percentile", alphas.empty() ? json(per_layer(percentiles, k)) : json(nullptr)},
                             {"patch_subsample", cfgs[k].patch_subsample},
                             {"max_filters", cfgs[k].max_filters},
                             {"seed", cfgs[k].seed},
                             {"seconds", layer_seconds[k]}});
    }
    json m = base_manifest("train", argv);
    m["config"] = {{"source", source},
                   {"images", data.size()},
                   {"image_shape", nsn::to_string(shape)},
                   {"arch", nsn::format_architecture(arch)},
                   {"preprocess", f.preprocess},
                   {"zca_eps", f.zca_eps},
                   {"max_iters", f.max_iters},
                   {"convergence", f.convergence},
                   {"sigma_floor", f.sigma_floor},
                   {"threads", f.threads},
                   {"seed", f.seed},
                   {"layers", layer_cfg},
                   {"sampling_defaults", {{"delta1", f.delta1}, {"delta2", f.delta2}, {"delta3", f.delta3}, {"n", f.n}}}};
    m["dataset_fingerprint"] = net.metadata["dataset_fingerprint"];
    m["model"] = model_json(net, f.out);
    m["timings"] = {{"load_s", load_s}, {"train_s", train_s}, {"total_s", seconds_since(t0)}};
    m["outputs"] = {f.out};
    write_manifest(manifest_path(f.out), m);
    return 0;
}

// ---------------------------------------------------------------------------
// sampling commands

json sampling_manifest(const std::string& command, const std::vector<std::string>& argv, const nsn::Network& net,
                       const GenFlags& f, const nsn::GenConfig& cfg, Clock::time_point t0, double work_s) {
    json m = base_manifest(command, argv);
    m["config"] = gen_json(cfg);
    m["config"]["grid_cols"] = f.grid_cols;
    m["dataset_fingerprint"] = net.metadata.count("dataset_fingerprint") ? net.metadata.at("dataset_fingerprint") : "";
    m["model"] = model_json(net, f.model);
    m["timings"] = {{"work_s", work_s}, {"total_s", seconds_since(t0)}};
    m["outputs"] = {f.out};
    m["notes"] = manifest_notes(net, command);
    return m;
}

int run_generate(const GenFlags& f, std::size_t count, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    const auto w0 = Clock::now();
    const auto images = nsn::generate_batch(net, count, cfg);
    const double work = seconds_since(w0);
    emit_grid(images, grid_cols(f, count), f.out);
    auto m = sampling_manifest("generate", argv, net, f, cfg, t0, work);
    m["config"]["count"] = count;
    write_manifest(manifest_path(f.out), m);
    return 0;
}

int run_style(const GenFlags& f, const std::string& image, std::size_t variants, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    if (!fs::exists(image)) throw UsageError("input image not found: " + image);
    const auto raw = nsn::read_image(image, net.input_shape.channels, net.input_shape.height, net.input_shape.width);
    const auto w0 = Clock::now();
    auto images = nsn::style_variants(net, raw, variants, cfg);
    const double work = seconds_since(w0);
    emit_grid(images, grid_cols(f, images.size()), f.out);
    auto m = sampling_manifest("style", argv, net, f, cfg, t0, work);
    m["config"]["input"] = image;
    m["config"]["variants"] = variants;
    write_manifest(manifest_path(f.out), m);
    return 0;
}

struct InpaintFlags {
    std::string image, mask, idx, rect = "9,9,10,10", mode = "cells";
    std::size_t offset = 0, count = 50;
    double fill = 0.0;
};

nsn::OcclusionMask parse_rect(const std::string& text, std::size_t h, std::size_t w) {
    const auto v = parse_list<std::size_t>(text, "--occlude");
    if (v.size() != 4) throw UsageError("--occlude expects top,left,height,width");
    if (v[0] + v[2] > h || v[1] + v[3] > w) throw UsageError("--occlude rectangle lies outside the image");
    return nsn::OcclusionMask::rectangle(h, w, v[0], v[1], v[2], v[3]);
}

nsn::Tensor3 occlude(const nsn::Tensor3& img, const nsn::OcclusionMask& mask, double fill) {
    nsn::Tensor3 out = img;
    for (std::size_t r = 0; r < img.height(); ++r)
        for (std::size_t c = 0; c < img.width(); ++c)
            if (mask.at(r, c))
                for (double& v : out.cell(r, c)) v = fill;
    return out;
}

int run_inpaint(const GenFlags& f, const InpaintFlags& p, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    const auto [h, w, ch] = std::tuple{net.input_shape.height, net.input_shape.width, net.input_shape.channels};
    const auto mode = p.mode == "full" ? nsn::InpaintMode::full : nsn::InpaintMode::occluded_cells;

    std::vector<nsn::Tensor3> originals;
    std::vector<nsn::OcclusionMask> masks;
    if (!p.idx.empty()) {
        if (!fs::exists(p.idx)) throw UsageError("dataset not found: " + p.idx);
        auto data = nsn::load_idx(p.idx, net.input_shape, p.offset + p.count);
        if (data.size() <= p.offset) throw UsageError("--offset is past the end of the dataset");
        const auto mask = parse_rect(p.rect, h, w);
        for (std::size_t i = p.offset; i < data.size(); ++i) {
            originals.push_back(data.images[i]);
            masks.push_back(mask);
        }
    } else {
        if (p.image.empty()) throw UsageError("inpaint needs --image or --idx");
        if (!fs::exists(p.image)) throw UsageError("input image not found: " + p.image);
        originals.push_back(nsn::read_image(p.image, ch, h, w));
        if (!p.mask.empty()) {
            if (!fs::exists(p.mask)) throw UsageError("mask not found: " + p.mask);
            const auto mask_img = nsn::read_image(p.mask, 1);
            if (mask_img.height() != h || mask_img.width() != w) {
                throw nsn::ShapeError("mask is " + nsn::to_string(mask_img.shape()) + " but the model input is " +
                                      nsn::to_string(net.input_shape));
            }
            masks.push_back(nsn::OcclusionMask::from_tensor(mask_img));
        } else {
            masks.push_back(parse_rect(p.rect, h, w));
        }
    }

    const nsn::Rng base(cfg.seed);
    std::vector<nsn::Tensor3> tiles;
    double mse_sum = 0.0, baseline_sum = 0.0;
    std::size_t replaced = 0;
    const auto w0 = Clock::now();
    for (std::size_t i = 0; i < originals.size(); ++i) {
        const auto occluded = occlude(originals[i], masks[i], p.fill);
        nsn::Rng rng = base.split(i);
        const auto res = nsn::inpaint(net, occluded, masks[i], cfg, rng, mode);
        mse_sum += nsn::masked_mse(res.image, originals[i], masks[i]);
        if (!net.mean_image.empty()) baseline_sum += nsn::masked_mse(net.mean_image, originals[i], masks[i]);
        replaced += static_cast<std::size_t>(std::count(res.replaced_cells.begin(), res.replaced_cells.end(), true));
        tiles.push_back(originals[i]);
        tiles.push_back(occluded);
        tiles.push_back(res.image);
    }
    const double work = seconds_since(w0);
    const double count = static_cast<double>(originals.size());
    emit_grid(tiles, f.grid_cols > 0 ? f.grid_cols : 3, f.out);

    auto m = sampling_manifest("inpaint", argv, net, f, cfg, t0, work);
    m["config"]["mode"] = p.mode;
    m["config"]["fill"] = p.fill;
    if (!p.idx.empty()) {
        m["config"]["idx"] = p.idx;
        m["config"]["offset"] = p.offset;
        m["config"]["count"] = originals.size();
        m["config"]["occlude"] = p.rect;
    } else {
        m["config"]["image"] = p.image;
        m["config"]["mask"] = p.mask.empty() ? json(p.rect) : json(p.mask);
    }
    m["results"] = {{"images", originals.size()},
                    {"occluded_pixels", masks.front().count()},
                    {"replaced_cells_mean", static_cast<double>(replaced) / count},
                    {"mse_inpainted", mse_sum / count},
                    {"mse_mean_image_baseline", !net.mean_image.empty() ? json(baseline_sum / count) : json(nullptr)}};
    m["notes"].push_back("grid rows: original, occluded, reconstructed");
    write_manifest(manifest_path(f.out), m);
    std::cerr << "occluded-region MSE " << mse_sum / count;
    if (!net.mean_image.empty()) std::cerr << " (mean-image baseline " << baseline_sum / count << ")";
    std::cerr << "\n";
    return 0;
}

void check_filter_index(const nsn::Network& net, std::size_t j) {
    const std::size_t top = net.layers.back().bank.size();
    if (j >= top) {
        throw UsageError("filter index " + std::to_string(j) + " out of range (final layer has " +
                         std::to_string(top) + " filters)");
    }
}

int run_interpolate(const GenFlags& f, std::size_t a, std::size_t b, std::size_t steps,
                    const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    check_filter_index(net, a);
    check_filter_index(net, b);
    const auto w0 = Clock::now();
    const auto images = nsn::interpolation_strip(net, a, b, steps, cfg);
    const double work = seconds_since(w0);
    emit_grid(images, f.grid_cols > 0 ? f.grid_cols : steps, f.out);
    auto m = sampling_manifest("interpolate", argv, net, f, cfg, t0, work);
    m["config"]["a"] = a;
    m["config"]["b"] = b;
    m["config"]["steps"] = steps;
    write_manifest(manifest_path(f.out), m);
    return 0;
}

int run_arith(const GenFlags& f, const std::string& expression, std::size_t samples,
              const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    nsn::FilterExpression expr;
    try {
        expr = nsn::parse_filter_expression(expression);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    for (std::size_t j : expr.indices) check_filter_index(net, j);
    const auto w0 = Clock::now();
    const auto images = nsn::arithmetic_rows(net, expr, samples, cfg);
    const double work = seconds_since(w0);
    emit_grid(images, samples, f.out);
    auto m = sampling_manifest("arith", argv, net, f, cfg, t0, work);
    m["config"]["expression"] = expression;
    m["config"]["indices"] = expr.indices;
    m["config"]["coefficients"] = expr.coeffs;
    m["config"]["samples"] = samples;
    m["notes"].push_back("one row per operand, last row is the combination");
    write_manifest(manifest_path(f.out), m);
    return 0;
}

int run_sample_layer(const GenFlags& f, std::size_t layer, std::size_t count, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const auto net = load_for(f);
    const auto cfg = resolve_gen(f, net);
    if (layer < 1 || layer > net.depth()) {
        throw UsageError("--layer must be between 1 and " + std::to_string(net.depth()));
    }
    const auto w0 = Clock::now();
    const auto images = nsn::sample_layer_batch(net, layer, count, cfg);
    const double work = seconds_since(w0);
    emit_grid(images, grid_cols(f, count), f.out);
    auto m = sampling_manifest("sample-layer", argv, net, f, cfg, t0, work);
    m["config"]["layer"] = layer;
    m["config"]["count"] = count;
    const auto [rh, rw] = nsn::receptive_field(net, layer);
    m["config"]["patch"] = std::to_string(rh) + "x" + std::to_string(rw);
    write_manifest(manifest_path(f.out), m);
    return 0;
}

int run_inspect(const std::string& model, const std::string& out, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    if (!fs::exists(model)) throw UsageError("model file not found: " + model);
    const auto net = nsn::load_model(model);
    const auto chain = nsn::spatial_chain(net.input_shape.height, net.input_shape.width, net.architecture());

    std::cout << "input " << nsn::to_string(net.input_shape) << ", preprocessing "
              << nsn::to_string(net.preprocessing.kind) << "\n";
    std::cout << "architecture " << nsn::format_architecture(net.architecture()) << "\n";
    std::cout << "spatial chain";
    for (const auto& [h, w] : chain) std::cout << " " << h << "x" << w;
    std::cout << "\n";
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const auto& l = net.layers[k];
        double lo = 0.0, hi = 0.0;
        if (l.bank.size() > 0) {
            lo = hi = l.bank[0].sigma;
            for (const auto& g : l.bank.filters()) {
                lo = std::min(lo, g.sigma);
                hi = std::max(hi, g.sigma);
            }
        }
        std::cout << "layer " << k + 1 << ": " << l.bank.size() << " filters of " << nsn::to_string(l.bank.patch_shape())
                  << ", stride " << l.spec.stride << ", alpha " << l.alpha << ", sigma [" << lo << ", " << hi
                  << "]\n";
    }
    for (const auto& [k, v] : net.metadata) std::cout << k << " = " << v << "\n";

    json m = base_manifest("inspect", argv);
    m["model"] = model_json(net, model);
    m["dataset_fingerprint"] = net.metadata.count("dataset_fingerprint") ? net.metadata.at("dataset_fingerprint") : "";
    m["timings"] = {{"total_s", seconds_since(t0)}};
    const std::string target = out.empty() ? model + ".inspect.json" : out;
    m["outputs"] = {target};
    write_manifest(target, m);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> commands{"train",       "generate", "style",        "inpaint",
                                            "interpolate", "arith",    "sample-layer", "inspect"};
    std::vector<std::string> raw(argv, argv + argc);

    CLI::App app{"Normal similarity network: training and sampling"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    app.add_option("--config", config_path, "key = value file; command-line flags take precedence");

    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "Fit a network layer by layer");
    add_train(train_cmd, train);

    GenFlags gen;
    std::size_t count = 64;
    auto* gen_cmd = app.add_subcommand("generate", "Sample images from Gaussian noise");
    add_gen_flags(gen_cmd, gen);
    gen_cmd->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);

    GenFlags style;
    std::string style_image;
    std::size_t variants = 4;
    auto* style_cmd = app.add_subcommand("style", "Re-render an image from its first-layer map");
    add_gen_flags(style_cmd, style);
    style_cmd->add_option("--image", style_image, "Input image")->required();
    style_cmd->add_option("--variants", variants, "Number of variants")->check(CLI::PositiveNumber);

    GenFlags inp;
    InpaintFlags inp_flags;
    auto* inp_cmd = app.add_subcommand("inpaint", "Reconstruct occluded regions");
    add_gen_flags(inp_cmd, inp);
    inp_cmd->add_option("--image", inp_flags.image, "Occluded input image");
    inp_cmd->add_option("--mask", inp_flags.mask, "Mask raster, non-zero = occluded");
    inp_cmd->add_option("--idx", inp_flags.idx, "Occlude and reconstruct images from an IDX3 file");
    inp_cmd->add_option("--offset", inp_flags.offset, "First IDX image to use");
    inp_cmd->add_option("--count", inp_flags.count, "IDX images to use")->check(CLI::PositiveNumber);
    inp_cmd->add_option("--occlude", inp_flags.rect, "Occluded rectangle top,left,height,width");
    inp_cmd->add_option("--fill", inp_flags.fill, "Pixel value written into occluded regions");
    inp_cmd->add_option("--mode", inp_flags.mode, "cells: replace occluded cells only; full: replace all")
        ->check(CLI::IsMember({"cells", "full"}));

    GenFlags interp;
    std::size_t ia = 0, ib = 1, steps = 8;
    auto* interp_cmd = app.add_subcommand("interpolate", "Walk between two final-layer filters");
    add_gen_flags(interp_cmd, interp);
    interp_cmd->add_option("--a", ia, "First filter index")->required();
    interp_cmd->add_option("--b", ib, "Second filter index")->required();
    interp_cmd->add_option("--steps", steps, "Images along the path")->check(CLI::Range(2, 1 << 20));

    GenFlags arith;
    std::string expression;
    std::size_t samples = 4;
    auto* arith_cmd = app.add_subcommand("arith", "Add and subtract final-layer filters");
    add_gen_flags(arith_cmd, arith);
    arith_cmd->add_option("--expr", expression, "Expression such as \"0 + 1 - 2\"")->required();
    arith_cmd->add_option("--samples", samples, "Samples per row")->check(CLI::PositiveNumber);

    GenFlags layer_flags;
    std::size_t layer = 1, layer_count = 16;
    auto* layer_cmd = app.add_subcommand("sample-layer", "Sample receptive-field patches of a hidden layer");
    add_gen_flags(layer_cmd, layer_flags);
    layer_cmd->add_option("--layer", layer, "Layer index, 1-based")->required();
    layer_cmd->add_option("--count", layer_count, "Number of patches")->check(CLI::PositiveNumber);

    std::string inspect_model, inspect_out;
    auto* inspect_cmd = app.add_subcommand("inspect", "Describe a model file");
    inspect_cmd->add_option("--model", inspect_model, "Model file")->required();
    inspect_cmd->add_option("--out", inspect_out, "Manifest path (default: <model>.inspect.json)");

    for (auto* cmd : app.get_subcommands({})) cmd->add_option("--config", config_path, "key = value file");

    try {
        auto args = expand_config(raw, commands);
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "nsn: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*train_cmd) return run_train(train, raw);
        if (*gen_cmd) return run_generate(gen, count, raw);
        if (*style_cmd) return run_style(style, style_image, variants, raw);
        if (*inp_cmd) return run_inpaint(inp, inp_flags, raw);
        if (*interp_cmd) return run_interpolate(interp, ia, ib, steps, raw);
        if (*arith_cmd) return run_arith(arith, expression, samples, raw);
        if (*layer_cmd) return run_sample_layer(layer_flags, layer, layer_count, raw);
        if (*inspect_cmd) return run_inspect(inspect_model, inspect_out, raw);
    } catch (const UsageError& e) {
        std::cerr << "nsn: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nsn: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
