#include <cstring>
#include <vector>

#include "doctest.h"
#include "mrasnn/kernels.hpp"
#include "mrasnn/rng.hpp"
#include "testing_util.hpp"

// The openmp kernels must agree with the serial reference bit for bit: they
// split work across output elements but keep every per-element accumulation
// order identical.

using namespace mrasnn;

namespace {

std::vector<float> rand_vec(Rng& rng, int64_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(static_cast<size_t>(n));
    testutil::fill_uniform(rng, v.data(), n, lo, hi);
    return v;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("conv1d kernels: openmp matches reference exactly") {
    Rng rng(7);
    struct Case {
        int64_t b, c_in, s, c_out, k, stride, pad;
    };
    const Case cases[] = {
        {1, 1, 8, 1, 3, 1, 1},   {2, 3, 17, 4, 5, 2, 3}, {3, 2, 33, 5, 7, 3, 0},
        {2, 4, 16, 8, 1, 1, 0},  {1, 2, 9, 3, 9, 1, 4},  {4, 8, 64, 16, 3, 2, 1},
    };
    for (const auto& c : cases) {
        const int64_t s_out = (c.s + 2 * c.pad - c.k) / c.stride + 1;
        REQUIRE(s_out >= 1);
        auto in = rand_vec(rng, c.b * c.c_in * c.s);
        auto w = rand_vec(rng, c.c_out * c.c_in * c.k);
        auto bias = rand_vec(rng, c.c_out);
        auto gout = rand_vec(rng, c.b * c.c_out * s_out);

        std::vector<float> o_ref(static_cast<size_t>(c.b * c.c_out * s_out));
        std::vector<float> o_omp = o_ref;
        kernels::reference::conv1d_forward(in.data(), w.data(), bias.data(), o_ref.data(), c.b,
                                           c.c_in, c.s, c.c_out, c.k, c.stride, c.pad, s_out);
        kernels::openmp::conv1d_forward(in.data(), w.data(), bias.data(), o_omp.data(), c.b,
                                        c.c_in, c.s, c.c_out, c.k, c.stride, c.pad, s_out);
        CHECK(bits_equal(o_ref, o_omp));

        auto gin_ref = rand_vec(rng, c.b * c.c_in * c.s, 0.0, 0.1);
        auto gin_omp = gin_ref;
        kernels::reference::conv1d_backward_input(gout.data(), w.data(), gin_ref.data(), c.b,
                                                  c.c_in, c.s, c.c_out, c.k, c.stride, c.pad,
                                                  s_out);
        kernels::openmp::conv1d_backward_input(gout.data(), w.data(), gin_omp.data(), c.b,
                                               c.c_in, c.s, c.c_out, c.k, c.stride, c.pad,
                                               s_out);
        CHECK(bits_equal(gin_ref, gin_omp));

        auto gw_ref = rand_vec(rng, c.c_out * c.c_in * c.k, 0.0, 0.1);
        auto gw_omp = gw_ref;
        kernels::reference::conv1d_backward_weight(gout.data(), in.data(), gw_ref.data(), c.b,
                                                   c.c_in, c.s, c.c_out, c.k, c.stride, c.pad,
                                                   s_out);
        kernels::openmp::conv1d_backward_weight(gout.data(), in.data(), gw_omp.data(), c.b,
                                                c.c_in, c.s, c.c_out, c.k, c.stride, c.pad,
                                                s_out);
        CHECK(bits_equal(gw_ref, gw_omp));

        std::vector<float> gb_ref(static_cast<size_t>(c.c_out), 0.25f);
        auto gb_omp = gb_ref;
        kernels::reference::conv1d_backward_bias(gout.data(), gb_ref.data(), c.b, c.c_out,
                                                 s_out);
        kernels::openmp::conv1d_backward_bias(gout.data(), gb_omp.data(), c.b, c.c_out, s_out);
        CHECK(bits_equal(gb_ref, gb_omp));
    }
}

TEST_CASE("fc kernels: openmp matches reference exactly") {
    Rng rng(11);
    const int64_t b = 5, n = 37, m = 13;
    auto in = rand_vec(rng, b * n);
    auto w = rand_vec(rng, m * n);
    auto bias = rand_vec(rng, m);
    auto gout = rand_vec(rng, b * m);

    std::vector<float> o_ref(static_cast<size_t>(b * m)), o_omp(static_cast<size_t>(b * m));
    kernels::reference::fc_forward(in.data(), w.data(), bias.data(), o_ref.data(), b, n, m);
    kernels::openmp::fc_forward(in.data(), w.data(), bias.data(), o_omp.data(), b, n, m);
    CHECK(bits_equal(o_ref, o_omp));

    auto gin_ref = rand_vec(rng, b * n, 0.0, 0.1);
    auto gin_omp = gin_ref;
    kernels::reference::fc_backward_input(gout.data(), w.data(), gin_ref.data(), b, n, m);
    kernels::openmp::fc_backward_input(gout.data(), w.data(), gin_omp.data(), b, n, m);
    CHECK(bits_equal(gin_ref, gin_omp));

    auto gw_ref = rand_vec(rng, m * n, 0.0, 0.1);
    auto gw_omp = gw_ref;
    kernels::reference::fc_backward_weight(gout.data(), in.data(), gw_ref.data(), b, n, m);
    kernels::openmp::fc_backward_weight(gout.data(), in.data(), gw_omp.data(), b, n, m);
    CHECK(bits_equal(gw_ref, gw_omp));

    std::vector<float> gb_ref(static_cast<size_t>(m), 0.0f), gb_omp(static_cast<size_t>(m), 0.0f);
    kernels::reference::fc_backward_bias(gout.data(), gb_ref.data(), b, m);
    kernels::openmp::fc_backward_bias(gout.data(), gb_omp.data(), b, m);
    CHECK(bits_equal(gb_ref, gb_omp));
}

TEST_CASE("pool, bn and pointwise kernels: openmp matches reference exactly") {
    Rng rng(13);
    const int64_t b = 3, c = 6, s = 40, k = 2, stride = 2;
    const int64_t s_out = (s - k) / stride + 1;
    auto in = rand_vec(rng, b * c * s);
    auto gout = rand_vec(rng, b * c * s_out);

    std::vector<float> o_ref(static_cast<size_t>(b * c * s_out)), o_omp = o_ref;
    kernels::reference::avgpool1d_forward(in.data(), o_ref.data(), b, c, s, k, stride, s_out);
    kernels::openmp::avgpool1d_forward(in.data(), o_omp.data(), b, c, s, k, stride, s_out);
    CHECK(bits_equal(o_ref, o_omp));

    std::vector<float> gi_ref(static_cast<size_t>(b * c * s), 0.0f), gi_omp = gi_ref;
    kernels::reference::avgpool1d_backward(gout.data(), gi_ref.data(), b, c, s, k, stride,
                                           s_out);
    kernels::openmp::avgpool1d_backward(gout.data(), gi_omp.data(), b, c, s, k, stride, s_out);
    CHECK(bits_equal(gi_ref, gi_omp));

    std::vector<float> mean_ref(static_cast<size_t>(c)), var_ref(static_cast<size_t>(c));
    std::vector<float> mean_omp(static_cast<size_t>(c)), var_omp(static_cast<size_t>(c));
    kernels::reference::bn_stats(in.data(), mean_ref.data(), var_ref.data(), b, c, s);
    kernels::openmp::bn_stats(in.data(), mean_omp.data(), var_omp.data(), b, c, s);
    CHECK(bits_equal(mean_ref, mean_omp));
    CHECK(bits_equal(var_ref, var_omp));

    std::vector<float> invstd(static_cast<size_t>(c));
    for (int64_t i = 0; i < c; ++i) {
        invstd[static_cast<size_t>(i)] = 1.0f / std::sqrt(var_ref[static_cast<size_t>(i)] + 1e-5f);
    }
    auto gamma = rand_vec(rng, c, 0.5, 1.5);
    auto beta = rand_vec(rng, c);
    std::vector<float> bo_ref(static_cast<size_t>(b * c * s)), bo_omp = bo_ref;
    kernels::reference::bn_apply(in.data(), bo_ref.data(), mean_ref.data(), invstd.data(),
                                 gamma.data(), beta.data(), b, c, s);
    kernels::openmp::bn_apply(in.data(), bo_omp.data(), mean_ref.data(), invstd.data(),
                              gamma.data(), beta.data(), b, c, s);
    CHECK(bits_equal(bo_ref, bo_omp));

    auto gfull = rand_vec(rng, b * c * s);
    std::vector<float> gx_ref(static_cast<size_t>(b * c * s), 0.0f), gx_omp = gx_ref;
    std::vector<float> gg_ref(static_cast<size_t>(c), 0.0f), gg_omp = gg_ref;
    std::vector<float> gb_ref(static_cast<size_t>(c), 0.0f), gb_omp = gb_ref;
    kernels::reference::bn_backward(in.data(), gfull.data(), mean_ref.data(), invstd.data(),
                                    gamma.data(), gx_ref.data(), gg_ref.data(), gb_ref.data(),
                                    true, b, c, s);
    kernels::openmp::bn_backward(in.data(), gfull.data(), mean_ref.data(), invstd.data(),
                                 gamma.data(), gx_omp.data(), gg_omp.data(), gb_omp.data(), true,
                                 b, c, s);
    CHECK(bits_equal(gx_ref, gx_omp));
    CHECK(bits_equal(gg_ref, gg_omp));
    CHECK(bits_equal(gb_ref, gb_omp));

    std::vector<float> sg_ref(in.size()), sg_omp(in.size());
    kernels::reference::sigmoid_forward(in.data(), sg_ref.data(), static_cast<int64_t>(in.size()));
    kernels::openmp::sigmoid_forward(in.data(), sg_omp.data(), static_cast<int64_t>(in.size()));
    CHECK(bits_equal(sg_ref, sg_omp));

    std::vector<float> hv_ref(in.size()), hv_omp(in.size());
    kernels::reference::heaviside_forward(in.data(), hv_ref.data(),
                                          static_cast<int64_t>(in.size()), 0.1f);
    kernels::openmp::heaviside_forward(in.data(), hv_omp.data(),
                                       static_cast<int64_t>(in.size()), 0.1f);
    CHECK(bits_equal(hv_ref, hv_omp));
}

TEST_CASE("broadcast kernels: openmp matches reference exactly") {
    Rng rng(17);
    // [b,c,1] x [b,1,s] -> [b,c,s], the attention-weight pattern
    const int64_t b = 2, c = 5, s = 9;
    auto a = rand_vec(rng, b * c);
    auto bb = rand_vec(rng, b * s);
    const int64_t oshape[4] = {1, b, c, s};
    const int64_t sa[4] = {0, c, 1, 0};
    const int64_t sb[4] = {0, s, 0, 1};
    std::vector<float> o_ref(static_cast<size_t>(b * c * s)), o_omp = o_ref;
    kernels::reference::broadcast_mul(a.data(), sa, bb.data(), sb, o_ref.data(), oshape);
    kernels::openmp::broadcast_mul(a.data(), sa, bb.data(), sb, o_omp.data(), oshape);
    CHECK(bits_equal(o_ref, o_omp));

    auto gout = rand_vec(rng, b * c * s);
    const int64_t ashape[4] = {1, b, c, 1};
    std::vector<float> ga_ref(static_cast<size_t>(b * c), 0.0f), ga_omp = ga_ref;
    kernels::reference::broadcast_backward(gout.data(), bb.data(), sb, ga_ref.data(), ashape,
                                           oshape);
    kernels::openmp::broadcast_backward(gout.data(), bb.data(), sb, ga_omp.data(), ashape,
                                        oshape);
    CHECK(bits_equal(ga_ref, ga_omp));
}

TEST_CASE("execution dispatch honors the mode switch") {
    auto prev = kernels::execution();
    kernels::set_execution(kernels::Execution::serial);
    CHECK(kernels::execution() == kernels::Execution::serial);
    kernels::set_execution(kernels::Execution::parallel);
    CHECK(kernels::execution() == kernels::Execution::parallel);
    kernels::set_execution(prev);
}
