#include <doctest.h>

#include "nsn/error.hpp"
#include "nsn/network.hpp"
#include "test_support.hpp"

using namespace nsn;
using nsn::testing::random_bank;
using nsn::testing::random_network;
using nsn::testing::random_tensor;

TEST_CASE("architecture parsing") {
    CHECK(parse_architecture("4x4/2,3x3/2,6x6/2") == mnist_architecture());
    CHECK(parse_architecture("4/2,3/2,6/2") == mnist_architecture());
    CHECK(format_architecture(architecture_64()) == "4x4/2,3x3/2,3x3/2,3x3/2,3x3/1");
    CHECK_THROWS_AS(parse_architecture("4x4"), std::invalid_argument);
    CHECK_THROWS_AS(parse_architecture("4x0/2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_architecture(""), std::invalid_argument);
}

TEST_CASE("spatial chains of the published architectures") {
    using Chain = std::vector<std::pair<std::size_t, std::size_t>>;
    CHECK(spatial_chain(28, 28, mnist_architecture()) == Chain{{28, 28}, {13, 13}, {6, 6}, {1, 1}});
    CHECK(spatial_chain(64, 64, architecture_64()) == Chain{{64, 64}, {31, 31}, {15, 15}, {7, 7}, {3, 3}, {1, 1}});

    // Closed form per layer.
    std::size_t h = 64;
    for (const auto& s : architecture_64()) h = (h - s.patch_h) / s.stride + 1;
    CHECK(h == 1);

    const std::vector<LayerSpec> stops_early{{4, 4, 2}};
    CHECK_THROWS_AS(spatial_chain(28, 28, stops_early), ShapeError);
    const std::vector<LayerSpec> uncovered{{4, 4, 2}, {3, 3, 2}, {6, 6, 2}};
    CHECK_THROWS_AS(spatial_chain(29, 29, uncovered), ShapeError);
}

TEST_CASE("forward_layer output geometry and range") {
    Rng rng(1);
    const FilterBank bank = random_bank({4, 4, 1}, 5, rng);
    const Tensor3 out = forward_layer(random_tensor({28, 28, 1}, rng), {4, 4, 2}, bank);
    CHECK(out.shape() == Shape3{13, 13, 5});
    for (double v : out.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    const FilterBank single = random_bank({4, 4, 1}, 1, rng);
    CHECK(forward_layer(random_tensor({28, 28, 1}, rng), {4, 4, 2}, single).shape() == Shape3{13, 13, 1});
    CHECK_THROWS_AS(forward_layer(random_tensor({28, 28, 2}, rng), {4, 4, 2}, bank), ShapeError);
}

TEST_CASE("a patch equal to a filter mean attains that filter's peak activation") {
    Rng rng(2);
    const FilterBank bank = random_bank({2, 2, 1}, 3, rng);
    Tensor3 t = random_tensor({4, 4, 1}, rng);
    for (std::size_t pr = 0; pr < 2; ++pr)
        for (std::size_t pc = 0; pc < 2; ++pc) t(2 + pr, 0 + pc, 0) = bank[1].mu(pr, pc, 0);
    const Tensor3 out = forward_layer(t, {2, 2, 2}, bank);
    CHECK(out(1, 0, 1) == doctest::Approx(sigmoid(peak_similarity(bank[1].sigma))).epsilon(1e-14));
    for (double v : out.values()) CHECK(v <= sigmoid(peak_similarity(0.5)) + 1e-15);
}

TEST_CASE("forward produces the published feature-map chains") {
    const Network mnist = random_network({28, 28, 1}, mnist_architecture(), {7, 6, 5}, 1);
    Rng rng(3);
    const auto maps = forward(mnist, random_tensor({28, 28, 1}, rng));
    REQUIRE(maps.size() == 3);
    CHECK(maps[0].shape() == Shape3{13, 13, 7});
    CHECK(maps[1].shape() == Shape3{6, 6, 6});
    CHECK(maps[2].shape() == Shape3{1, 1, 5});

    const Network big = random_network({64, 64, 3}, architecture_64(), {4, 4, 4, 4, 3}, 2);
    const auto big_maps = forward(big, random_tensor({64, 64, 3}, rng));
    const std::vector<std::size_t> sizes{31, 15, 7, 3, 1};
    for (std::size_t k = 0; k < sizes.size(); ++k) CHECK(big_maps[k].height() == sizes[k]);
    CHECK(big_maps.back().shape() == Shape3{1, 1, 3});

    CHECK_THROWS_AS(forward(mnist, random_tensor({28, 28, 3}, rng)), ShapeError);
}

TEST_CASE("forward on a zero image is finite, in range and deterministic") {
    const Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 4);
    const Tensor3 zero(28, 28, 1);
    const auto maps = forward(net, zero);
    for (const auto& m : maps) {
        CHECK(m.all_finite());
        for (double v : m.values()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    CHECK(forward(net, zero) == maps);
}

TEST_CASE("network validation catches inconsistent banks") {
    Network net = random_network({28, 28, 1}, mnist_architecture(), {6, 5, 4}, 5);
    Rng rng(6);
    net.layers[1].bank = random_bank({3, 3, 4}, 5, rng);  // layer 0 has 6 filters, not 4
    CHECK_THROWS_AS(net.validate(), ShapeError);
}
