#include "nsn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <zlib.h>

#include "nsn/error.hpp"

namespace nsn {
namespace {

constexpr std::string_view kMagic = "NSN1";

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void size(std::size_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void text(const std::string& s) {
        size(s.size());
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    std::size_t position() const { return bytes_.size(); }
    void patch_u32(std::size_t at, std::uint32_t v) {
        for (int s = 0; s < 4; ++s) bytes_[at + static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(v >> (8 * s));
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= std::uint32_t{data_[pos_++]} << (8 * s);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int s = 0; s < 8; ++s) v |= std::uint64_t{data_[pos_++]} << (8 * s);
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string text() {
        const std::size_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ == size_; }

private:
    void need(std::size_t n) const {
        if (n > size_ - pos_) throw FormatError("model file is truncated");
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Network& net) {
    net.validate();
    Writer w;
    w.raw(kMagic);
    w.u32(kModelFormatVersion);
    w.size(net.input_shape.height);
    w.size(net.input_shape.width);
    w.size(net.input_shape.channels);

    const auto& pre = net.preprocessing;
    w.u32(static_cast<std::uint32_t>(pre.kind));
    if (pre.kind == PreprocessKind::normalize) {
        w.f64(pre.offset);
        w.f64(pre.scale);
    } else if (pre.kind == PreprocessKind::zca) {
        const ZcaTransform& z = *pre.zca;
        w.size(z.height);
        w.size(z.width);
        w.size(z.channels.size());
        w.f64(z.epsilon);
        for (const auto& zc : z.channels) {
            for (Eigen::Index i = 0; i < zc.mean.size(); ++i) w.f64(zc.mean[i]);
            for (Eigen::Index r = 0; r < zc.whiten.rows(); ++r)
                for (Eigen::Index c = 0; c < zc.whiten.cols(); ++c) w.f64(zc.whiten(r, c));
            for (Eigen::Index r = 0; r < zc.dewhiten.rows(); ++r)
                for (Eigen::Index c = 0; c < zc.dewhiten.cols(); ++c) w.f64(zc.dewhiten(r, c));
        }
    }

    w.u32(net.mean_image.empty() ? 0 : 1);
    for (double v : net.mean_image.values()) w.f32(v);

    w.size(net.layers.size());
    for (const auto& layer : net.layers) {
        const std::size_t length_at = w.position();
        w.u32(0);
        w.size(layer.spec.patch_h);
        w.size(layer.spec.patch_w);
        w.size(layer.spec.stride);
        w.size(layer.bank.patch_shape().channels);
        w.size(layer.bank.size());
        w.f64(layer.alpha);
        w.f64(layer.score_offset);
        for (const auto& g : layer.bank.filters()) w.f32(g.sigma);
        for (const auto& g : layer.bank.filters())
            for (double v : g.mu.values()) w.f32(v);
        w.patch_u32(length_at, static_cast<std::uint32_t>(w.position() - length_at - 4));
    }

    w.size(net.metadata.size());
    for (const auto& [key, value] : net.metadata) {
        w.text(key);
        w.text(value);
    }
    w.u32(checksum(w.bytes().data(), w.position()));
    return std::move(w.bytes());
}

Network deserialize_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kMagic.size() + 8) throw FormatError("model file is truncated");
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) throw FormatError("not a model file (bad magic)");
    Reader header(bytes.data() + kMagic.size(), 4);
    const std::uint32_t version = header.u32();
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version));
    }
    const std::size_t body = bytes.size() - 4;
    Reader tail(bytes.data() + body, 4);
    if (tail.u32() != checksum(bytes.data(), body)) throw FormatError("model file checksum mismatch");

    Reader r(bytes.data(), body);
    r.u32();  // magic
    r.u32();  // version
    Network net;
    net.input_shape.height = r.u32();
    net.input_shape.width = r.u32();
    net.input_shape.channels = r.u32();

    const std::uint32_t kind = r.u32();
    if (kind == static_cast<std::uint32_t>(PreprocessKind::normalize)) {
        const double offset = r.f64();
        const double scale = r.f64();
        net.preprocessing = Preprocessing::normalize(offset, scale);
    } else if (kind == static_cast<std::uint32_t>(PreprocessKind::zca)) {
        ZcaTransform z;
        z.height = r.u32();
        z.width = r.u32();
        const std::size_t channels = r.u32();
        z.epsilon = r.f64();
        const auto dim = static_cast<Eigen::Index>(z.height * z.width);
        for (std::size_t ch = 0; ch < channels; ++ch) {
            ZcaChannel zc{Eigen::VectorXd(dim), Eigen::MatrixXd(dim, dim), Eigen::MatrixXd(dim, dim)};
            for (Eigen::Index i = 0; i < dim; ++i) zc.mean[i] = r.f64();
            for (Eigen::Index a = 0; a < dim; ++a)
                for (Eigen::Index b = 0; b < dim; ++b) zc.whiten(a, b) = r.f64();
            for (Eigen::Index a = 0; a < dim; ++a)
                for (Eigen::Index b = 0; b < dim; ++b) zc.dewhiten(a, b) = r.f64();
            z.channels.push_back(std::move(zc));
        }
        net.preprocessing = Preprocessing::whitening(std::move(z));
    } else if (kind != static_cast<std::uint32_t>(PreprocessKind::none)) {
        throw FormatError("unknown preprocessing kind " + std::to_string(kind));
    }

    if (r.u32() != 0) {
        net.mean_image = Tensor3(net.input_shape);
        for (double& v : net.mean_image.values()) v = r.f32();
    }

    const std::size_t layers = r.u32();
    for (std::size_t k = 0; k < layers; ++k) {
        const std::size_t length = r.u32();
        const std::size_t start = r.position();
        Layer layer;
        layer.spec.patch_h = r.u32();
        layer.spec.patch_w = r.u32();
        layer.spec.stride = r.u32();
        const Shape3 patch{layer.spec.patch_h, layer.spec.patch_w, r.u32()};
        const std::size_t filters = r.u32();
        layer.alpha = r.f64();
        layer.score_offset = r.f64();
        std::vector<double> sigmas(filters);
        for (double& s : sigmas) s = r.f32();
        std::vector<GaussianFilter> bank;
        for (std::size_t j = 0; j < filters; ++j) {
            GaussianFilter g{Tensor3(patch), sigmas[j]};
            for (double& v : g.mu.values()) v = r.f32();
            bank.push_back(std::move(g));
        }
        if (r.position() - start != length) throw FormatError("layer record length mismatch");
        layer.bank = FilterBank(patch, std::move(bank));
        net.layers.push_back(std::move(layer));
    }

    const std::size_t entries = r.u32();
    for (std::size_t i = 0; i < entries; ++i) {
        std::string key = r.text();
        net.metadata[key] = r.text();
    }
    if (!r.done()) throw FormatError("trailing bytes in model file");
    try {
        net.validate();
    } catch (const ShapeError& e) {
        throw FormatError(std::string("inconsistent model file: ") + e.what());
    }
    return net;
}

void save_model(const Network& net, const std::filesystem::path& path) {
    const auto bytes = serialize_model(net);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Network load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace nsn
