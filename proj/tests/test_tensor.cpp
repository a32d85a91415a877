#include <cmath>
#include <vector>

#include "doctest.h"
#include "mrasnn/tensor.hpp"
#include "testing_util.hpp"

using namespace mrasnn;
using testutil::gradcheck;
using testutil::random_tensor;

TEST_CASE("conv1d box filter by hand") {
    auto in = Tensor<float>::from({1, 1, 4}, {1, 2, 3, 4});
    auto w = Tensor<float>::from({1, 1, 3}, {1, 1, 1});
    auto out = conv1d<float>(nullptr, in, w, {}, 1, 1);
    REQUIRE(out.shape() == Shape{1, 1, 4});
    CHECK(out.data()[0] == doctest::Approx(3));
    CHECK(out.data()[1] == doctest::Approx(6));
    CHECK(out.data()[2] == doctest::Approx(9));
    CHECK(out.data()[3] == doctest::Approx(7));
}

TEST_CASE("conv1d zero weight annihilates") {
    Rng rng(3);
    auto in = random_tensor<float>(rng, {2, 3, 10});
    auto w = Tensor<float>::zeros({4, 3, 3});
    auto out = conv1d<float>(nullptr, in, w, {}, 1, 1);
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0f);
}

TEST_CASE("conv1d stride-1 kernel-1 identity weight is the identity map") {
    Rng rng(4);
    auto in = random_tensor<float>(rng, {2, 3, 8});
    auto w = Tensor<float>::zeros({3, 3, 1});
    for (int64_t i = 0; i < 3; ++i) w.data()[i * 3 + i] = 1.0f;
    auto out = conv1d<float>(nullptr, in, w, {}, 1, 0);
    REQUIRE(out.shape() == in.shape());
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == in.data()[i]);
}

TEST_CASE("conv1d shape errors name the offending axis") {
    auto in = Tensor<float>::zeros({1, 2, 8});
    auto w = Tensor<float>::zeros({4, 3, 3});
    CHECK_THROWS_AS(conv1d<float>(nullptr, in, w, {}, 1, 1), ShapeError);
    auto wide = Tensor<float>::zeros({4, 2, 11});
    CHECK_THROWS_AS(conv1d<float>(nullptr, in, wide, {}, 1, 1), ShapeError);
}

TEST_CASE("conv1d gradient matches finite differences") {
    Rng rng(5);
    auto in = random_tensor<double>(rng, {2, 3, 16}, true);
    auto w = random_tensor<double>(rng, {4, 3, 5}, true);
    auto bias = random_tensor<double>(rng, {4}, true);
    auto res = gradcheck({in, w, bias}, [&](Tape<double>* tape) {
        return sum_all(tape, conv1d(tape, in, w, bias, 2, 2));
    });
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-4);
}

TEST_CASE("batchnorm1d normalizes exactly on a two-point channel") {
    auto in = Tensor<float>::from({2, 1, 1}, {-1, 1});
    auto gamma = Tensor<float>::full({1}, 1.0f);
    auto beta = Tensor<float>::zeros({1});
    auto rm = Tensor<float>::zeros({1});
    auto rv = Tensor<float>::full({1}, 1.0f);
    auto out = batchnorm1d<float>(nullptr, in, gamma, beta, rm, rv, true, 0.0f, 0.1f);
    CHECK(out.data()[0] == doctest::Approx(-1));
    CHECK(out.data()[1] == doctest::Approx(1));
}

TEST_CASE("batchnorm1d gamma=0 yields all-beta output") {
    Rng rng(6);
    auto in = random_tensor<float>(rng, {3, 2, 5});
    auto gamma = Tensor<float>::zeros({2});
    auto beta = Tensor<float>::from({2}, {0.25f, -0.5f});
    auto rm = Tensor<float>::zeros({2});
    auto rv = Tensor<float>::full({2}, 1.0f);
    auto out = batchnorm1d<float>(nullptr, in, gamma, beta, rm, rv, true, 1e-5f, 0.1f);
    for (int64_t b = 0; b < 3; ++b)
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t s = 0; s < 5; ++s)
                CHECK(out.data()[(b * 2 + c) * 5 + s] == beta.data()[c]);
}

TEST_CASE("batchnorm1d train-mode statistics are exact") {
    Rng rng(7);
    auto in = random_tensor<float>(rng, {4, 8, 32}, false, -2.0, 3.0);
    auto gamma = Tensor<float>::full({8}, 1.0f);
    auto beta = Tensor<float>::zeros({8});
    auto rm = Tensor<float>::zeros({8});
    auto rv = Tensor<float>::full({8}, 1.0f);
    auto out = batchnorm1d<float>(nullptr, in, gamma, beta, rm, rv, true, 0.0f, 0.1f);
    const int64_t n = 4 * 32;
    for (int64_t c = 0; c < 8; ++c) {
        double mu = 0, var = 0;
        for (int64_t b = 0; b < 4; ++b)
            for (int64_t s = 0; s < 32; ++s) mu += out.data()[(b * 8 + c) * 32 + s];
        mu /= n;
        for (int64_t b = 0; b < 4; ++b)
            for (int64_t s = 0; s < 32; ++s) {
                double d = out.data()[(b * 8 + c) * 32 + s] - mu;
                var += d * d;
            }
        var /= n;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-5);
    }
}

TEST_CASE("batchnorm1d rejects degenerate train batches") {
    auto in = Tensor<float>::zeros({1, 3, 1});
    auto gamma = Tensor<float>::full({3}, 1.0f);
    auto beta = Tensor<float>::zeros({3});
    auto rm = Tensor<float>::zeros({3});
    auto rv = Tensor<float>::full({3}, 1.0f);
    CHECK_THROWS_AS(batchnorm1d<float>(nullptr, in, gamma, beta, rm, rv, true, 1e-5f, 0.1f),
                    ValueError);
    // eval mode is fine with a single value per channel
    CHECK_NOTHROW(batchnorm1d<float>(nullptr, in, gamma, beta, rm, rv, false, 1e-5f, 0.1f));
}

TEST_CASE("batchnorm1d gradient through batch statistics matches finite differences") {
    Rng rng(8);
    auto in = random_tensor<double>(rng, {3, 4, 6}, true);
    auto gamma = random_tensor<double>(rng, {4}, true, 0.5, 1.5);
    auto beta = random_tensor<double>(rng, {4}, true);
    auto res = gradcheck({in, gamma, beta}, [&](Tape<double>* tape) {
        auto rm = Tensor<double>::zeros({4});
        auto rv = Tensor<double>::full({4}, 1.0);
        auto y = batchnorm1d(tape, in, gamma, beta, rm, rv, true, 1e-5, 0.1);
        // square so the loss is sensitive to the normalization, not just beta
        return mean_all(tape, mul(tape, y, y));
    });
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-4);
}

TEST_CASE("avgpool1d window means") {
    auto in = Tensor<float>::from({1, 1, 4}, {1, 2, 3, 4});
    auto out = avgpool1d<float>(nullptr, in, 2, 2);
    REQUIRE(out.shape() == Shape{1, 1, 2});
    CHECK(out.data()[0] == doctest::Approx(1.5));
    CHECK(out.data()[1] == doctest::Approx(3.5));
}

TEST_CASE("avgpool1d constant input stays constant, oversize kernel rejected") {
    auto in = Tensor<float>::full({2, 3, 6}, 0.7f);
    auto out = avgpool1d<float>(nullptr, in, 3, 3);
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(0.7));
    CHECK_THROWS_AS(avgpool1d<float>(nullptr, in, 7, 1), ShapeError);
}

TEST_CASE("avgpool1d gradient matches finite differences") {
    Rng rng(9);
    auto in = random_tensor<double>(rng, {2, 4, 64}, true);
    auto res = gradcheck({in}, [&](Tape<double>* tape) {
        return sum_all(tape, avgpool1d(tape, in, 2, 2));
    });
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-4);
}

TEST_CASE("fully_connected identity and bias broadcast") {
    Rng rng(10);
    auto in = random_tensor<float>(rng, {3, 4});
    auto eye = Tensor<float>::zeros({4, 4});
    for (int64_t i = 0; i < 4; ++i) eye.data()[i * 4 + i] = 1.0f;
    auto zero_bias = Tensor<float>::zeros({4});
    auto out = fully_connected<float>(nullptr, in, eye, zero_bias);
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == in.data()[i]);

    auto zin = Tensor<float>::zeros({2, 4});
    auto w = random_tensor<float>(rng, {5, 4});
    auto bias = random_tensor<float>(rng, {5});
    auto out2 = fully_connected<float>(nullptr, zin, w, bias);
    for (int64_t b = 0; b < 2; ++b)
        for (int64_t m = 0; m < 5; ++m) CHECK(out2.data()[b * 5 + m] == bias.data()[m]);
}

TEST_CASE("fully_connected gradient matches finite differences") {
    Rng rng(11);
    auto in = random_tensor<double>(rng, {3, 16}, true);
    auto w = random_tensor<double>(rng, {5, 16}, true);
    auto bias = random_tensor<double>(rng, {5}, true);
    auto res = gradcheck({in, w, bias}, [&](Tape<double>* tape) {
        return sum_all(tape, fully_connected(tape, in, w, bias));
    });
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-4);
}

TEST_CASE("heaviside_surrogate forward and local gradient") {
    struct Case {
        double x, fwd, grad;
    };
    // theta = 1, a = 1: rectangle of height 1 on |x - theta| < 0.5
    const Case cases[] = {{1.3, 1, 1}, {1.51, 1, 0}, {0.2, 0, 0}, {1.0, 1, 1}, {0.5, 0, 0}, {1.5, 1, 0}};
    for (const auto& c : cases) {
        auto x = Tensor<double>::from({1}, {c.x}, true);
        Tape<double> tape;
        auto s = heaviside_surrogate(&tape, x, 1.0, 1.0);
        CHECK(s.data()[0] == c.fwd);
        tape.backward(sum_all(&tape, s));
        CHECK(x.grad()[0] == c.grad);
    }
    auto x = Tensor<double>::zeros({1});
    CHECK_THROWS_AS(heaviside_surrogate<double>(nullptr, x, 1.0, 0.0), ValueError);
}

TEST_CASE("heaviside_surrogate output is exactly binary") {
    Rng rng(12);
    auto x = random_tensor<float>(rng, {4, 8, 16}, false, -5.0, 5.0);
    auto s = heaviside_surrogate<float>(nullptr, x, 1.0f, 1.0f);
    for (int64_t i = 0; i < s.numel(); ++i) {
        CHECK((s.data()[i] == 0.0f || s.data()[i] == 1.0f));
    }
}

TEST_CASE("elementwise plumbing: sigmoid, broadcast, concat/split, means") {
    auto z = Tensor<float>::zeros({1});
    CHECK(sigmoid<float>(nullptr, z).data()[0] == doctest::Approx(0.5));

    Rng rng(13);
    auto a = random_tensor<float>(rng, {2, 64, 5});
    auto b2 = random_tensor<float>(rng, {2, 64, 5});
    auto c2 = random_tensor<float>(rng, {2, 64, 5});
    auto cat = concat_channels<float>(nullptr, {a, b2, c2});
    REQUIRE(cat.shape() == Shape{2, 192, 5});
    auto parts = split_channels<float>(nullptr, cat, {64, 64, 64});
    REQUIRE(parts.size() == 3);
    for (int64_t i = 0; i < a.numel(); ++i) {
        CHECK(parts[0].data()[i] == a.data()[i]);
        CHECK(parts[1].data()[i] == b2.data()[i]);
        CHECK(parts[2].data()[i] == c2.data()[i]);
    }

    auto ones = Tensor<float>::full({2, 3, 4}, 1.0f);
    auto m = mean_spatial<float>(nullptr, ones);
    REQUIRE(m.shape() == Shape{2, 3, 1});
    for (int64_t i = 0; i < m.numel(); ++i) CHECK(m.data()[i] == doctest::Approx(1.0));

    // [b,c,1] x [b,1,s] broadcast, the attention-weight pattern
    auto col = Tensor<float>::from({1, 2, 1}, {2, 3});
    auto row = Tensor<float>::from({1, 1, 3}, {1, 10, 100});
    auto prod = mul<float>(nullptr, col, row);
    REQUIRE(prod.shape() == Shape{1, 2, 3});
    CHECK(prod.data()[0] == 2.0f);
    CHECK(prod.data()[1] == 20.0f);
    CHECK(prod.data()[2] == 200.0f);
    CHECK(prod.data()[3] == 3.0f);
    CHECK(prod.data()[5] == 300.0f);

    auto bad = Tensor<float>::zeros({1, 3, 2});
    CHECK_THROWS_AS(add<float>(nullptr, col, bad), ShapeError);
}

TEST_CASE("broadcast ops gradient matches finite differences") {
    Rng rng(14);
    auto col = random_tensor<double>(rng, {2, 3, 1}, true);
    auto row = random_tensor<double>(rng, {2, 1, 4}, true);
    auto full = random_tensor<double>(rng, {2, 3, 4}, true);
    auto res = gradcheck({col, row, full}, [&](Tape<double>* tape) {
        auto w = sigmoid(tape, mul(tape, col, row));
        auto y = add(tape, mul(tape, w, full), scalar_mul(tape, full, 0.25));
        return mean_all(tape, y);
    });
    CHECK(res.ok);
    CHECK(res.max_rel < 1e-4);
}

TEST_CASE("transpose and reshape round trips with gradients") {
    Rng rng(15);
    auto x = random_tensor<double>(rng, {2, 3, 5}, true);
    auto res = gradcheck({x}, [&](Tape<double>* tape) {
        auto t = transpose_last2(tape, x);
        auto back = transpose_last2(tape, t);
        auto flat = reshape(tape, back, {2, 15});
        return sum_all(tape, mul(tape, flat, flat));
    });
    CHECK(res.ok);

    auto t = transpose_last2<double>(nullptr, x);
    REQUIRE(t.shape() == Shape{2, 5, 3});
    CHECK(t.data()[0 * 15 + 0 * 3 + 1] == x.data()[0 * 15 + 1 * 5 + 0]);
}

TEST_CASE("tape accumulates fan-out gradients (sum rule)") {
    auto x = Tensor<double>::from({1}, {3.0}, true);
    Tape<double> tape;
    auto y = add(&tape, x, x);  // dy/dx = 2
    auto z = add(&tape, y, x);  // dz/dx = 3
    tape.backward(sum_all(&tape, z));
    CHECK(x.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("mean reductions over named axes") {
    auto x = Tensor<float>::from({1, 2, 3}, {1, 2, 3, 4, 5, 6});
    auto ms = mean_spatial<float>(nullptr, x);
    CHECK(ms.data()[0] == doctest::Approx(2.0));
    CHECK(ms.data()[1] == doctest::Approx(5.0));
    auto mc = mean_channels<float>(nullptr, x);
    REQUIRE(mc.shape() == Shape{1, 1, 3});
    CHECK(mc.data()[0] == doctest::Approx(2.5));
    CHECK(mc.data()[2] == doctest::Approx(4.5));
}
