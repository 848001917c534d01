#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nsn/error.hpp"
#include "nsn/generation.hpp"
#include "test_support.hpp"

using namespace nsn;
using nsn::testing::random_bank;
using nsn::testing::random_network;
using nsn::testing::random_tensor;

namespace {

void check_weight_vector(const std::vector<double>& w, std::size_t n) {
    double sum = 0.0;
    std::size_t support = 0;
    for (double x : w) {
        CHECK(x >= 0.0);
        sum += x;
        support += x > 0.0;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(support <= n);
}

}  // namespace

TEST_CASE("softmax") {
    const std::vector<double> v{0.3, -1.0, 2.0, 0.0};
    for (double p : softmax(v, 0.0)) CHECK(p == 0.25);
    const auto p = softmax(v, 2.0);
    double total = 0.0;
    for (double x : p) total += x;
    CHECK(total == doctest::Approx(1.0));
    // Unstabilized reference.
    double z = 0.0;
    for (double x : v) z += std::exp(2.0 * x);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(p[i] == doctest::Approx(std::exp(2.0 * v[i]) / z));
    const std::vector<double> huge{1000.0, 999.0};
    CHECK(softmax(huge, 1.0)[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("weight vectors are normalized counts") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng.index(30));
        for (double& x : v) x = 5.0 * rng.normal();
        GenConfig cfg;
        cfg.delta1 = 3.0 * rng.uniform();
        cfg.n = 1 + rng.index(20);
        check_weight_vector(weight_vector(v, cfg, rng), cfg.n);
    }
}

TEST_CASE("weight vector converges to the softmax (law of large numbers)") {
    Rng rng(2);
    const std::vector<double> v{0.1, 0.7, -0.4, 0.3, 0.0};
    GenConfig cfg;
    cfg.delta1 = 1.5;
    cfg.n = 100000;
    const auto w = weight_vector(v, cfg, rng);
    const auto p = softmax(v, cfg.delta1);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(w[i] - p[i]) < 0.01);
}

TEST_CASE("softmax keeps the argmax and sharpens with delta1") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(2 + rng.index(10));
        for (double& x : v) x = rng.normal();
        const auto top = std::max_element(v.begin(), v.end()) - v.begin();
        double previous = 0.0;
        for (double d : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const auto p = softmax(v, d);
            CHECK(std::max_element(p.begin(), p.end()) - p.begin() == top);
            CHECK(p[static_cast<std::size_t>(top)] > previous);
            previous = p[static_cast<std::size_t>(top)];
        }
    }
}

TEST_CASE("one-hot noise with a large delta1 concentrates on the chosen filter") {
    Rng rng(4);
    GenConfig cfg;
    cfg.delta1 = 60.0;
    cfg.n = 50;
    for (std::size_t j = 0; j < 6; ++j) {
        const auto w = weight_vector(noise_from_filter(j, 6), cfg, rng);
        CHECK(w[j] == 1.0);
    }
}

TEST_CASE("generate_feature_map special cases") {
    Rng rng(5);
    const FilterBank bank = random_bank({2, 2, 1}, 4, rng);
    const LayerSpec spec{2, 2, 1};

    SUBCASE("delta2 = 0 with a one-hot weight reproduces the mean") {
        Tensor3 map(3, 3, 4, 0.0);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) map(r, c, 2) = 1000.0;
        GenConfig cfg;
        cfg.delta2 = 0.0;
        const Tensor3 out = generate_feature_map(map, bank, spec, {4, 4, 1}, cfg, rng);
        const Tensor3 expected = stitch_patches(
            [&] {
                PatchGrid g(3, 3, {2, 2, 1}, 1);
                for (std::size_t r = 0; r < 3; ++r)
                    for (std::size_t c = 0; c < 3; ++c)
                        std::copy(bank[2].mu.values().begin(), bank[2].mu.values().end(), g.patch(r, c).begin());
                return g;
            }(),
            4, 4);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.values()[i] == doctest::Approx(expected.values()[i]));
    }
    SUBCASE("delta3 = 0 gives zeros") {
        GenConfig cfg;
        cfg.delta3 = 0.0;
        const Tensor3 out = generate_feature_map(random_tensor({3, 3, 4}, rng), bank, spec, {4, 4, 1}, cfg, rng);
        for (double v : out.values()) CHECK(v == 0.0);
    }
    SUBCASE("a single cell is delta3 * w^T Y") {
        GenConfig cfg;
        cfg.delta2 = 0.0;
        cfg.delta3 = 0.7;
        cfg.n = 7;
        WeightMap weights;
        const Tensor3 cell = random_tensor({1, 1, 4}, rng, -1.0, 1.0);
        const Tensor3 out = generate_feature_map(cell, bank, spec, {2, 2, 1}, cfg, rng, &weights);
        for (std::size_t d = 0; d < 4; ++d) {
            double expected = 0.0;
            for (std::size_t j = 0; j < 4; ++j) expected += weights.cell(0, 0)[j] * bank[j].mu.values()[d];
            CHECK(out.values()[d] == doctest::Approx(0.7 * expected).epsilon(1e-14));
        }
    }
    SUBCASE("geometry is validated") {
        GenConfig cfg;
        CHECK_THROWS_AS(generate_feature_map(random_tensor({3, 3, 4}, rng), bank, spec, {5, 5, 1}, cfg, rng),
                        ShapeError);
        CHECK_THROWS_AS(generate_feature_map(random_tensor({3, 3, 3}, rng), bank, spec, {4, 4, 1}, cfg, rng),
                        ShapeError);
        cfg.n = 0;
        CHECK_THROWS_AS(generate_feature_map(random_tensor({3, 3, 4}, rng), bank, spec, {4, 4, 1}, cfg, rng),
                        std::invalid_argument);
    }
}

TEST_CASE("delta2 = 0 removes sampling noise from the patches") {
    Rng rng(6);
    const FilterBank bank = random_bank({2, 2, 1}, 3, rng);
    Tensor3 map(2, 2, 3, 0.0);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) map(r, c, 0) = 500.0;
    GenConfig cfg;
    cfg.delta2 = 0.0;
    Rng a(1);
    Rng b(2);
    CHECK(generate_feature_map(map, bank, {2, 2, 2}, {4, 4, 1}, cfg, a) ==
          generate_feature_map(map, bank, {2, 2, 2}, {4, 4, 1}, cfg, b));
    cfg.redraw_per_cell = true;
    CHECK(generate_feature_map(map, bank, {2, 2, 2}, {4, 4, 1}, cfg, a) ==
          generate_feature_map(map, bank, {2, 2, 2}, {4, 4, 1}, cfg, b));
}

TEST_CASE("generate inverts the published shape chains") {
    const Network mnist = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 7);
    const Network big = random_network({64, 64, 3}, architecture_64(), {4, 4, 4, 4, 3}, 8);
    Rng rng(9);
    CHECK(generate(mnist, sample_noise(4, rng), {}, rng).shape() == Shape3{28, 28, 1});
    CHECK(generate(big, sample_noise(3, rng), {}, rng).shape() == Shape3{64, 64, 3});
    CHECK_THROWS_AS(generate(mnist, sample_noise(5, rng), {}, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate(Network{}, sample_noise(5, rng), {}, rng), std::invalid_argument);
}

TEST_CASE("generation is reproducible from the seed") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 10);
    const std::vector<double> z{0.3, -1.2, 0.8, 0.1};
    Rng a(77);
    Rng b(77);
    CHECK(generate(net, z, {}, a) == generate(net, z, {}, b));
}

TEST_CASE("weight maps stay normalized through every layer") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 11);
    Rng rng(12);
    GenConfig cfg;
    cfg.n = 5;
    GenerationTrace trace;
    generate(net, sample_noise(4, rng), cfg, rng, &trace);
    REQUIRE(trace.weight_maps.size() == 3);
    CHECK(trace.weight_maps[0].rows == 1);
    CHECK(trace.weight_maps[1].rows == 6);
    CHECK(trace.weight_maps[2].rows == 13);
    for (const auto& wm : trace.weight_maps)
        for (std::size_t r = 0; r < wm.rows; ++r)
            for (std::size_t c = 0; c < wm.cols; ++c) {
                const auto w = wm.cell(r, c);
                check_weight_vector(std::vector<double>(w.begin(), w.end()), cfg.n);
            }
}

TEST_CASE("generated pixels are finite and in [0, 1] across delta settings") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {5, 4, 3}, 13);
    Rng rng(14);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            GenConfig cfg;
            cfg.delta1 = 0.25 * i * i;
            cfg.delta2 = 0.5 * j;
            cfg.delta3 = 2.0;
            const Tensor3 img = generate(net, sample_noise(3, rng), cfg, rng);
            CHECK(img.all_finite());
            for (double v : img.values()) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
}

TEST_CASE("hidden-layer samples cover the receptive field") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 15);
    CHECK(receptive_field(net, 1) == std::pair<std::size_t, std::size_t>{4, 4});
    CHECK(receptive_field(net, 2) == std::pair<std::size_t, std::size_t>{8, 8});
    CHECK(receptive_field(net, 3) == std::pair<std::size_t, std::size_t>{28, 28});
    Rng rng(16);
    CHECK(sample_hidden(net, 1, {}, rng).shape() == Shape3{4, 4, 1});
    CHECK(sample_hidden(net, 2, {}, rng).shape() == Shape3{8, 8, 1});
    CHECK_THROWS_AS(sample_hidden(net, 0, {}, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_hidden(net, 4, {}, rng), std::out_of_range);

    // The top layer is plain generation from Gaussian noise.
    Rng a(3);
    Rng b(3);
    const auto z = sample_noise(4, b);
    CHECK(sample_hidden(net, 3, {}, a) == generate(net, z, {}, b));
}

TEST_CASE("noise vectors") {
    CHECK(noise_from_filter(0, 3) == std::vector<double>{1, 0, 0});
    CHECK(noise_from_filter(2, 3) == std::vector<double>{0, 0, 1});
    CHECK_THROWS_AS(noise_from_filter(3, 3), std::out_of_range);

    const auto e1 = noise_from_filter(0, 4);
    const auto e2 = noise_from_filter(1, 4);
    CHECK(interpolate_noise(e1, e2, 0.0) == e1);
    CHECK(interpolate_noise(e1, e2, 1.0) == e2);
    CHECK(interpolate_noise(e1, e2, 0.5) == std::vector<double>{0.5, 0.5, 0, 0});
}

TEST_CASE("feature arithmetic") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 17);
    const std::vector<std::vector<double>> noises{noise_from_filter(0, 4), noise_from_filter(1, 4),
                                                  noise_from_filter(2, 4)};
    SUBCASE("a single unit coefficient is plain generation") {
        Rng a(5);
        Rng b(5);
        const std::vector<double> one{1.0};
        CHECK(feature_arithmetic(net, {noises[0]}, one, {}, a) == generate(net, noises[0], {}, b));
    }
    SUBCASE("A + B - C combines the second-to-last maps elementwise") {
        const std::vector<double> coeffs{1.0, 1.0, -1.0};
        Rng a(6);
        const Tensor3 got = feature_arithmetic(net, noises, coeffs, {}, a);

        Rng b(6);
        Tensor3 combined(net.shape_chain()[2]);
        for (std::size_t i = 0; i < 3; ++i) {
            const Tensor3 m = descend(net, Tensor3(Shape3{1, 1, 4}, noises[i]), 3, {}, b, nullptr, 2);
            for (std::size_t d = 0; d < m.size(); ++d) combined.values()[d] += coeffs[i] * m.values()[d];
        }
        CHECK(got == to_pixels(net, descend(net, combined, 2, {}, b)));
    }
    SUBCASE("zero coefficients still produce a finite image") {
        Rng a(7);
        const std::vector<double> zeros{0.0, 0.0};
        const Tensor3 img = feature_arithmetic(net, {noises[0], noises[1]}, zeros, {}, a);
        CHECK(img.all_finite());
        CHECK(img.shape() == Shape3{28, 28, 1});
    }
    SUBCASE("length mismatch") {
        Rng a(8);
        const std::vector<double> coeffs{1.0};
        CHECK_THROWS_AS(feature_arithmetic(net, noises, coeffs, {}, a), std::invalid_argument);
    }
}
