#include <doctest.h>

#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "nsn/dataset.hpp"
#include "nsn/error.hpp"
#include "nsn/model_io.hpp"
#include "nsn/preprocess.hpp"
#include "test_support.hpp"

using namespace nsn;
using nsn::testing::random_network;
using nsn::testing::random_tensor;
using nsn::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double sum_u8(const Tensor3& t) {
    double s = 0.0;
    for (auto b : quantize(t)) s += b;
    return s;
}

/// Correlated Gaussian images: pixels = A g with a fixed random mixing matrix.
std::vector<Tensor3> correlated_images(Shape3 shape, std::size_t count, Rng& rng) {
    const std::size_t dim = shape.height * shape.width;
    std::vector<Eigen::MatrixXd> mix;
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
        Eigen::MatrixXd a(dim, dim);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 0.3 * rng.normal();
        a += Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        mix.push_back(a);
    }
    std::vector<Tensor3> out;
    for (std::size_t i = 0; i < count; ++i) {
        Tensor3 t(shape);
        for (std::size_t ch = 0; ch < shape.channels; ++ch) {
            Eigen::VectorXd g(dim);
            for (Eigen::Index d = 0; d < g.size(); ++d) g[d] = rng.normal();
            const Eigen::VectorXd x = mix[ch] * g;
            for (std::size_t p = 0; p < dim; ++p) t(p / shape.width, p % shape.width, ch) = 0.5 + x[static_cast<Eigen::Index>(p)];
        }
        out.push_back(std::move(t));
    }
    return out;
}

Eigen::MatrixXd channel_covariance(const std::vector<Tensor3>& images, std::size_t ch) {
    const auto dim = static_cast<Eigen::Index>(images.front().height() * images.front().width());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(images.size()), dim);
    for (std::size_t i = 0; i < images.size(); ++i)
        for (Eigen::Index p = 0; p < dim; ++p)
            x(static_cast<Eigen::Index>(i), p) =
                images[i](static_cast<std::size_t>(p) / images[i].width(), static_cast<std::size_t>(p) % images[i].width(), ch);
    x.rowwise() -= x.colwise().mean();
    return x.transpose() * x / static_cast<double>(images.size());
}

}  // namespace

TEST_CASE("load_idx reads the bundled MNIST subset") {
    const Dataset ds = load_idx(NSN_MNIST_IDX, Shape3{28, 28, 1});
    REQUIRE(ds.size() == 2500);
    CHECK(ds.shape() == Shape3{28, 28, 1});
    // Frozen from an independent Python reader of the same file.
    CHECK(sum_u8(ds.images.front()) == 31095.0);
    CHECK(sum_u8(ds.images.back()) == 36033.0);
    for (double v : ds.images.front().values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(load_idx(NSN_MNIST_IDX, std::nullopt, 10).size() == 10);
    CHECK_THROWS_AS(load_idx(NSN_MNIST_IDX, Shape3{32, 32, 1}), ShapeError);
}

TEST_CASE("load_idx error paths") {
    TempDir dir("idx");
    Rng rng(1);
    std::vector<Tensor3> images{random_tensor({5, 4, 1}, rng), random_tensor({5, 4, 1}, rng)};
    auto bytes = encode_idx(images);
    write_bytes(dir / "ok.idx", bytes);
    const Dataset ds = load_idx(dir / "ok.idx");
    REQUIRE(ds.size() == 2);
    CHECK(quantize(ds.images[1]) == quantize(images[1]));

    auto bad_magic = bytes;
    bad_magic[3] = 0x01;
    write_bytes(dir / "magic.idx", bad_magic);
    CHECK_THROWS_AS(load_idx(dir / "magic.idx"), FormatError);

    write_bytes(dir / "empty.idx", {});
    CHECK_THROWS_AS(load_idx(dir / "empty.idx"), FormatError);

    bytes.resize(bytes.size() - 1);
    write_bytes(dir / "short.idx", bytes);
    CHECK_THROWS_AS(load_idx(dir / "short.idx"), FormatError);

    CHECK_THROWS_AS(load_idx(dir / "missing.idx"), std::runtime_error);
}

TEST_CASE("load_image_dir resizes, promotes and skips") {
    TempDir dir("imgs");
    Rng rng(2);
    for (int i = 0; i < 3; ++i) write_image(dir / ("rgb" + std::to_string(i) + ".png"), random_tensor({128, 128, 3}, rng));
    const Dataset ds = load_image_dir(dir.path(), 64, 64, 3);
    REQUIRE(ds.size() == 3);
    CHECK(ds.shape() == Shape3{64, 64, 3});

    TempDir gray("gray");
    write_image(gray / "g.png", random_tensor({20, 20, 1}, rng));
    { std::ofstream(gray / "notes.txt") << "not an image"; }
    const Dataset promoted = load_image_dir(gray.path(), 20, 20, 3);
    REQUIRE(promoted.size() == 1);
    const Tensor3& t = promoted.images.front();
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c < 20; ++c) {
            CHECK(t(r, c, 0) == t(r, c, 1));
            CHECK(t(r, c, 1) == t(r, c, 2));
        }

    TempDir junk("junk");
    { std::ofstream(junk / "a.png") << "garbage"; }
    CHECK_THROWS_AS(load_image_dir(junk.path(), 8, 8, 1), std::runtime_error);
}

TEST_CASE("written rasters read back exactly at 8-bit resolution") {
    TempDir dir("raster");
    Rng rng(3);
    const Tensor3 rgb = random_tensor({9, 7, 3}, rng);
    write_image(dir / "x.png", rgb);
    CHECK(quantize(read_image(dir / "x.png", 3)) == quantize(rgb));
}

TEST_CASE("grid tiling is lossless per tile") {
    Rng rng(4);
    std::vector<Tensor3> tiles;
    for (int i = 0; i < 64; ++i) tiles.push_back(random_tensor({6, 5, 1}, rng));
    CHECK(default_grid_cols(64) == 8);
    CHECK(default_grid_cols(1) == 1);
    CHECK(default_grid_cols(10) == 4);
    const Tensor3 grid = tile_grid(tiles, 8);
    CHECK(grid.height() == 8 * 6 + 7 * 2);
    CHECK(grid.width() == 8 * 5 + 7 * 2);

    TempDir dir("grid");
    write_image(dir / "grid.png", grid);
    const Tensor3 back = read_image(dir / "grid.png", 1);
    for (std::size_t i : {0u, 9u, 63u}) CHECK(quantize(extract_tile(back, {6, 5, 1}, i, 8)) == quantize(tiles[i]));
    CHECK(tile_grid({tiles[0]}, 8) == tiles[0]);
}

TEST_CASE("ZCA whitens and inverts") {
    Rng rng(5);
    const std::vector<Tensor3> images = correlated_images({4, 4, 2}, 4000, rng);
    const ZcaTransform z = fit_zca(images, 1e-6);
    std::vector<Tensor3> white;
    for (const auto& img : images) white.push_back(apply_zca(img, z));
    for (std::size_t ch = 0; ch < 2; ++ch) {
        const Eigen::MatrixXd cov = channel_covariance(white, ch);
        CHECK((cov - Eigen::MatrixXd::Identity(16, 16)).norm() < 1e-3);
        const auto& zc = z.channels[ch];
        CHECK((zc.whiten - zc.whiten.transpose()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((zc.dewhiten - zc.dewhiten.transpose()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((zc.whiten * zc.dewhiten - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-6);
    }
    for (int i = 0; i < 20; ++i) {
        const Tensor3 back = invert_zca(apply_zca(images[static_cast<std::size_t>(i)], z), z);
        for (std::size_t d = 0; d < back.size(); ++d)
            CHECK(std::abs(back.values()[d] - images[static_cast<std::size_t>(i)].values()[d]) < 1e-6);
    }

    // The mean image maps to zero.
    Tensor3 mean(Shape3{4, 4, 2});
    for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t p = 0; p < 16; ++p) mean(p / 4, p % 4, ch) = z.channels[ch].mean[static_cast<Eigen::Index>(p)];
    const Tensor3 centered = apply_zca(mean, z);
    for (double v : centered.values()) CHECK(std::abs(v) < 1e-9);

    // Refitting on whitened data gives a near-identity whitening matrix.
    const ZcaTransform again = fit_zca(white, 1e-9);
    CHECK((again.channels[0].whiten - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-4);

    CHECK_THROWS_AS(fit_zca({images[0]}), std::invalid_argument);
    CHECK_THROWS_AS(apply_zca(Tensor3(Shape3{4, 4, 1}), z), ShapeError);
}

TEST_CASE("preprocessing round trips") {
    Rng rng(6);
    std::vector<Tensor3> images;
    for (int i = 0; i < 10; ++i) images.push_back(random_tensor({3, 3, 1}, rng));
    const Preprocessing norm = Preprocessing::fit_normalize(images);
    CHECK(norm.kind == PreprocessKind::normalize);
    const Tensor3 back = norm.invert(norm.apply(images[0]));
    for (std::size_t d = 0; d < back.size(); ++d) CHECK(back.values()[d] == doctest::Approx(images[0].values()[d]));
    CHECK(Preprocessing::none().apply(images[1]) == images[1]);
}

TEST_CASE("model files round trip bit for bit") {
    TempDir dir("model");
    Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 7);
    net.metadata["seed"] = "42";
    net.metadata["delta1"] = "1";
    Rng rng(8);
    net.mean_image = random_tensor({28, 28, 1}, rng);
    for (double& v : net.mean_image.values()) v = static_cast<double>(static_cast<float>(v));
    std::vector<Tensor3> images;
    for (int i = 0; i < 8; ++i) images.push_back(random_tensor({28, 28, 1}, rng));
    net.preprocessing = Preprocessing::whitening(fit_zca(images, 0.1));

    save_model(net, dir / "m.nsn");
    const Network loaded = load_model(dir / "m.nsn");
    CHECK(loaded == net);
    save_model(loaded, dir / "m2.nsn");
    CHECK(read_bytes(dir / "m.nsn") == read_bytes(dir / "m2.nsn"));
    for (const auto& img : images) CHECK(forward(loaded, img) == forward(net, img));
}

TEST_CASE("corrupt model files are rejected") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {3, 3, 2}, 9);
    const auto bytes = serialize_model(net);

    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(magic), FormatError);

    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_WITH_AS(deserialize_model(version), doctest::Contains("version"), FormatError);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(deserialize_model(flipped), doctest::Contains("checksum"), FormatError);

    CHECK_THROWS_AS(deserialize_model(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6)), FormatError);
    CHECK_THROWS_AS(deserialize_model(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 9)), FormatError);
}

TEST_CASE("dataset fingerprints") {
    Rng rng(10);
    const std::vector<Tensor3> a{random_tensor({4, 4, 1}, rng)};
    std::vector<Tensor3> b = a;
    CHECK(fingerprint(a) == fingerprint(b));
    b[0](0, 0, 0) = b[0](0, 0, 0) > 0.5 ? 0.0 : 1.0;
    CHECK(fingerprint(a) != fingerprint(b));
    CHECK(fingerprint(a).size() == 16);
}
