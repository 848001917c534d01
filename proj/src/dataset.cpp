#include "nsn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <zlib.h>

#include "nsn/error.hpp"

namespace nsn {
namespace {

constexpr std::uint32_t kIdx3Magic = 0x00000803;

std::vector<std::uint8_t> read_maybe_gzipped(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("no such file: " + path.string());
    gzFile f = gzopen(path.c_str(), "rb");  // reads plain files transparently
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::uint8_t buf[1 << 16];
    int got = 0;
    while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw FormatError("corrupt compressed stream in " + path.string());
    return bytes;
}

std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

Tensor3 from_mat(const cv::Mat& m8) {
    const std::size_t ch = static_cast<std::size_t>(m8.channels());
    Tensor3 t(static_cast<std::size_t>(m8.rows), static_cast<std::size_t>(m8.cols), ch);
    for (int r = 0; r < m8.rows; ++r) {
        const std::uint8_t* row = m8.ptr<std::uint8_t>(r);
        for (std::size_t i = 0; i < static_cast<std::size_t>(m8.cols) * ch; ++i) {
            t.values()[static_cast<std::size_t>(r) * static_cast<std::size_t>(m8.cols) * ch + i] = row[i] / 255.0;
        }
    }
    return t;
}

cv::Mat decode(const std::filesystem::path& path, std::size_t channels) {
    if (channels != 1 && channels != 3) throw std::invalid_argument("images must have 1 or 3 channels");
    cv::Mat m = cv::imread(path.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (m.empty()) return m;
    if (channels == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    return m;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& path, std::optional<Shape3> expected, std::size_t limit) {
    const std::vector<std::uint8_t> bytes = read_maybe_gzipped(path);
    if (bytes.size() < 16) throw FormatError(path.string() + ": truncated IDX header");
    const std::uint32_t magic = read_be32(bytes.data());
    if (magic != kIdx3Magic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", magic);
        throw FormatError(path.string() + ": bad IDX3 magic " + hex);
    }
    const std::size_t count = read_be32(bytes.data() + 4);
    const std::size_t rows = read_be32(bytes.data() + 8);
    const std::size_t cols = read_be32(bytes.data() + 12);
    const Shape3 shape{rows, cols, 1};
    if (expected && *expected != shape) {
        throw ShapeError(path.string() + ": images are " + to_string(shape) + ", expected " + to_string(*expected));
    }
    if (bytes.size() - 16 < count * rows * cols) {
        throw FormatError(path.string() + ": truncated payload, header announces " + std::to_string(count) + " images");
    }
    const std::size_t keep = limit > 0 ? std::min(limit, count) : count;
    Dataset ds;
    ds.name = path.filename().string();
    ds.images.reserve(keep);
    const std::uint8_t* p = bytes.data() + 16;
    for (std::size_t i = 0; i < keep; ++i) {
        Tensor3 t(shape);
        for (double& v : t.values()) v = *p++ / 255.0;
        ds.images.push_back(std::move(t));
    }
    return ds;
}

std::vector<std::uint8_t> encode_idx(const std::vector<Tensor3>& images) {
    std::vector<std::uint8_t> out;
    const Shape3 shape = images.empty() ? Shape3{0, 0, 1} : images.front().shape();
    write_be32(out, kIdx3Magic);
    write_be32(out, static_cast<std::uint32_t>(images.size()));
    write_be32(out, static_cast<std::uint32_t>(shape.height));
    write_be32(out, static_cast<std::uint32_t>(shape.width));
    for (const auto& img : images) {
        if (img.shape() != shape || shape.channels != 1) throw ShapeError("IDX3 holds equally-shaped 1-channel images");
        const auto q = quantize(img);
        out.insert(out.end(), q.begin(), q.end());
    }
    return out;
}

Dataset load_image_dir(const std::filesystem::path& dir, std::size_t height, std::size_t width, std::size_t channels) {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Dataset ds;
    ds.name = dir.filename().string();
    for (const auto& f : files) {
        cv::Mat m = decode(f, channels);
        if (m.empty()) {
            std::cerr << "warning: skipping undecodable file " << f.string() << "\n";
            continue;
        }
        cv::resize(m, m, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
        ds.images.push_back(from_mat(m));
    }
    if (ds.images.empty()) throw std::runtime_error("no decodable images in " + dir.string());
    return ds;
}

Tensor3 read_image(const std::filesystem::path& path, std::size_t channels, std::size_t height, std::size_t width) {
    cv::Mat m = decode(path, channels);
    if (m.empty()) throw FormatError("cannot decode image " + path.string());
    if (height > 0 && width > 0 &&
        (static_cast<std::size_t>(m.rows) != height || static_cast<std::size_t>(m.cols) != width)) {
        cv::resize(m, m, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
    }
    return from_mat(m);
}

std::vector<std::uint8_t> quantize(const Tensor3& t) {
    std::vector<std::uint8_t> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t.values()[i], 0.0, 1.0) * 255.0));
    }
    return out;
}

Tensor3 dequantize(const std::vector<std::uint8_t>& bytes, Shape3 shape) {
    std::vector<double> v(bytes.size());
    std::transform(bytes.begin(), bytes.end(), v.begin(), [](std::uint8_t b) { return b / 255.0; });
    return Tensor3(shape, std::move(v));
}

void write_image(const std::filesystem::path& path, const Tensor3& t) {
    if (t.channels() != 1 && t.channels() != 3) throw ShapeError("only 1- or 3-channel tensors can be written");
    const auto q = quantize(t);
    cv::Mat m(static_cast<int>(t.height()), static_cast<int>(t.width()), t.channels() == 1 ? CV_8UC1 : CV_8UC3);
    std::copy(q.begin(), q.end(), m.data);
    if (t.channels() == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write image " + path.string());
}

Tensor3 tile_grid(const std::vector<Tensor3>& images, std::size_t cols, std::size_t gap, double gap_value) {
    if (images.empty()) throw std::invalid_argument("nothing to tile");
    if (images.size() == 1) return images.front();
    const Shape3 tile = images.front().shape();
    cols = std::max<std::size_t>(1, std::min(cols, images.size()));
    const std::size_t rows = (images.size() + cols - 1) / cols;
    Tensor3 grid(rows * tile.height + (rows - 1) * gap, cols * tile.width + (cols - 1) * gap, tile.channels, gap_value);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != tile) throw ShapeError("grid tiles differ in shape");
        const std::size_t y0 = (i / cols) * (tile.height + gap);
        const std::size_t x0 = (i % cols) * (tile.width + gap);
        for (std::size_t r = 0; r < tile.height; ++r)
            for (std::size_t c = 0; c < tile.width; ++c)
                for (std::size_t ch = 0; ch < tile.channels; ++ch) grid(y0 + r, x0 + c, ch) = images[i](r, c, ch);
    }
    return grid;
}

Tensor3 extract_tile(const Tensor3& grid, Shape3 tile, std::size_t index, std::size_t cols, std::size_t gap) {
    Tensor3 out(tile);
    const std::size_t y0 = (index / cols) * (tile.height + gap);
    const std::size_t x0 = (index % cols) * (tile.width + gap);
    if (y0 + tile.height > grid.height() || x0 + tile.width > grid.width()) throw ShapeError("tile outside the grid");
    for (std::size_t r = 0; r < tile.height; ++r)
        for (std::size_t c = 0; c < tile.width; ++c)
            for (std::size_t ch = 0; ch < tile.channels; ++ch) out(r, c, ch) = grid(y0 + r, x0 + c, ch);
    return out;
}

std::size_t default_grid_cols(std::size_t count) {
    std::size_t cols = 1;
    while (cols * cols < count) ++cols;
    return cols;
}

std::string fingerprint(const std::vector<Tensor3>& images) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& img : images) {
        for (std::uint8_t b : quantize(img)) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace nsn
