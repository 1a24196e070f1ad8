#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "lba/tensor_ops.hpp"
#include "oracles.hpp"

using namespace lba;

namespace {

Tensor random_tensor(Rng& rng, Shape4 s, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (double& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

Matrix3 random_matrix(Rng& rng, Shape3 s, double lo = -1.0, double hi = 1.0) {
    Matrix3 m(s);
    for (double& v : m.vec()) v = rng.uniform(lo, hi);
    return m;
}

void check_close(const Tensor& got, const Tensor& want, double tol) {
    REQUIRE(got.shape() == want.shape());
    for (i64 i = 0; i < got.numel(); ++i) {
        const double diff = std::fabs(got.data()[i] - want.data()[i]);
        const double scale = std::max({1.0, std::fabs(got.data()[i]), std::fabs(want.data()[i])});
        if (diff / scale > tol) {
            CAPTURE(i);
            CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(tol));
            return;
        }
    }
    CHECK(true);
}

std::vector<double> bias_vec(const Tensor& b) { return b.vec(); }

} // namespace

TEST_CASE("conv2d identity 1x1 kernel is exact") {
    Rng rng(1);
    const Tensor x = random_tensor(rng, {2, 3, 5, 4});
    Tensor k({3, 3, 1, 1});
    for (i64 o = 0; o < 3; ++o) k.at(o, o, 0, 0) = 1.0;
    const Tensor out = ops::conv2d(x, k, Tensor({3, 1, 1, 1}), 1, PadMode::zero);
    REQUIRE(out.shape() == x.shape());
    CHECK(out.vec() == x.vec());
}

TEST_CASE("conv2d zero kernel returns the bias") {
    const Tensor x = Tensor::full({1, 1, 4, 4}, 3.0);
    const Tensor k({1, 1, 3, 3});
    const Tensor b({1, 1, 1, 1}, {1.5});
    const Tensor out = ops::conv2d(x, k, b, 1, PadMode::zero);
    for (i64 i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 1.5);
}

TEST_CASE("conv2d matches the nested-loop oracle on 100 random cases") {
    Rng rng(7);
    for (int iter = 0; iter < 100; ++iter) {
        const i64 n = 1 + static_cast<i64>(rng.below(2));
        const i64 ci = 1 + static_cast<i64>(rng.below(4));
        const i64 co = 1 + static_cast<i64>(rng.below(4));
        const i64 h = 1 + static_cast<i64>(rng.below(6));
        const i64 w = 1 + static_cast<i64>(rng.below(6));
        const i64 k = rng.below(2) == 0 ? 1 : 3;
        const int stride = 1 + static_cast<int>(rng.below(2));
        const PadMode pad = rng.below(2) == 0 ? PadMode::zero : PadMode::replicate;
        const Tensor x = random_tensor(rng, {n, ci, h, w});
        const Tensor kernel = random_tensor(rng, {co, ci, k, k});
        const Tensor bias = random_tensor(rng, {co, 1, 1, 1});
        check_close(ops::conv2d(x, kernel, bias, stride, pad),
                    oracle::conv2d_naive(x, kernel, bias_vec(bias), stride, pad), 1e-12);
    }
}

TEST_CASE("conv2d rejects mismatched channels") {
    const Tensor x({1, 2, 4, 4});
    const Tensor k({1, 3, 3, 3});
    CHECK_THROWS_WITH_AS(ops::conv2d(x, k, Tensor({1, 1, 1, 1}), 1, PadMode::zero),
                         doctest::Contains("channels"), Error);
    const Tensor keven({1, 2, 2, 2});
    CHECK_THROWS_AS(ops::conv2d(x, keven, Tensor({1, 1, 1, 1}), 1, PadMode::zero), Error);
}

TEST_CASE("conv_transpose2d doubles the extent and matches the oracle") {
    Rng rng(11);
    for (int iter = 0; iter < 50; ++iter) {
        const i64 ci = 1 + static_cast<i64>(rng.below(3));
        const i64 co = 1 + static_cast<i64>(rng.below(3));
        const i64 h = 1 + static_cast<i64>(rng.below(5));
        const i64 w = 1 + static_cast<i64>(rng.below(5));
        const Tensor x = random_tensor(rng, {2, ci, h, w});
        const Tensor kernel = random_tensor(rng, {ci, co, 2, 2});
        const Tensor bias = random_tensor(rng, {co, 1, 1, 1});
        const Tensor out = ops::conv_transpose2d(x, kernel, bias, 2);
        CHECK(out.shape().h == 2 * h);
        CHECK(out.shape().w == 2 * w);
        check_close(out, oracle::conv_transpose2d_naive(x, kernel, bias_vec(bias), 2), 1e-12);
    }
}

TEST_CASE("fully_connected identity and row sum") {
    Rng rng(2);
    const Tensor x = random_tensor(rng, {3, 4, 1, 1});
    Tensor eye({4, 4, 1, 1});
    for (i64 i = 0; i < 4; ++i) eye.at(i, i, 0, 0) = 1.0;
    CHECK(ops::fully_connected(x, eye, Tensor({4, 1, 1, 1})).vec() == x.vec());

    const Tensor xs({1, 2, 1, 1}, {1.0, 2.0});
    const Tensor w({1, 2, 1, 1}, {1.0, 1.0});
    CHECK(ops::fully_connected(xs, w, Tensor({1, 1, 1, 1})).item() == 3.0);
}

TEST_CASE("fully_connected matches the double-loop oracle on 100 random cases") {
    Rng rng(3);
    for (int iter = 0; iter < 100; ++iter) {
        const i64 n = 1 + static_cast<i64>(rng.below(3));
        const i64 c = 1 + static_cast<i64>(rng.below(6));
        const i64 co = 1 + static_cast<i64>(rng.below(6));
        const Tensor x = random_tensor(rng, {n, c, 1, 1});
        const Tensor w = random_tensor(rng, {co, c, 1, 1});
        const Tensor b = random_tensor(rng, {co, 1, 1, 1});
        check_close(ops::fully_connected(x, w, b), oracle::fully_connected_naive(x, w, bias_vec(b)), 1e-12);
    }
}

TEST_CASE("elementwise neutral elements and broadcast oracle") {
    Rng rng(4);
    const Tensor a = random_tensor(rng, {2, 3, 4, 4});
    CHECK(ops::elementwise(ops::EwOp::mul, a, Tensor::full(a.shape(), 1.0)).vec() == a.vec());
    CHECK(ops::elementwise(ops::EwOp::add, a, Tensor(a.shape())).vec() == a.vec());

    for (int iter = 0; iter < 40; ++iter) {
        Shape4 bshape = {2, 3, 4, 4};
        const auto mode = rng.below(4);
        if (mode == 1) bshape = {2, 1, 4, 4};
        if (mode == 2) bshape = {2, 3, 1, 1};
        if (mode == 3) bshape = {1, 1, 4, 4};
        const Tensor b = random_tensor(rng, bshape);
        const int op = static_cast<int>(rng.below(3));
        const auto ew = op == 0 ? ops::EwOp::add : op == 1 ? ops::EwOp::sub : ops::EwOp::mul;
        check_close(ops::elementwise(ew, a, b), oracle::elementwise_expand_naive(op, a, b), 1e-15);
    }

    CHECK_THROWS_AS(ops::elementwise(ops::EwOp::add, a, Tensor({2, 2, 4, 4})), Error);
}

TEST_CASE("activations") {
    CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(ops::relu(Tensor::scalar(-3.0)).item() == 0.0);
    CHECK(ops::relu(Tensor::scalar(3.0)).item() == 3.0);

    Rng rng(5);
    const Tensor x = random_tensor(rng, {2, 3, 5, 5}, -40.0, 40.0);
    const Tensor sp = ops::sigmoid(x);
    Tensor neg(x.shape());
    for (i64 i = 0; i < x.numel(); ++i) neg.data()[i] = -x.data()[i];
    const Tensor sn = ops::sigmoid(neg);
    for (i64 i = 0; i < x.numel(); ++i) {
        CHECK(sp.data()[i] + sn.data()[i] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(sp.data()[i] > 0.0);
        CHECK(sp.data()[i] < 1.0);
    }

    // relu is idempotent
    const Tensor r1 = ops::relu(x);
    CHECK(ops::relu(r1).vec() == r1.vec());
}

TEST_CASE("channel_max basics and oracle") {
    const Tensor one({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(ops::channel_max(one).vec() == one.vec());

    Tensor three({1, 3, 1, 1});
    three.at(0, 0, 0, 0) = 1.0;
    three.at(0, 1, 0, 0) = 5.0;
    three.at(0, 2, 0, 0) = 3.0;
    CHECK(ops::channel_max(three).item() == 5.0);

    Rng rng(6);
    for (int iter = 0; iter < 30; ++iter) {
        const Tensor x = random_tensor(rng, {2, 1 + static_cast<i64>(rng.below(5)), 3, 4});
        check_close(ops::channel_max(x), oracle::channel_max_naive(x), 1e-15);
    }
}

TEST_CASE("global_avg_pool basics and oracle") {
    CHECK(ops::global_avg_pool(Tensor::full({1, 1, 3, 3}, 7.0)).item() == doctest::Approx(7.0));
    const Tensor plane({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(ops::global_avg_pool(plane).item() == doctest::Approx(2.5));

    Rng rng(8);
    for (int iter = 0; iter < 30; ++iter) {
        const Tensor x = random_tensor(rng, {2, 3, 1 + static_cast<i64>(rng.below(5)), 1 + static_cast<i64>(rng.below(5))});
        check_close(ops::global_avg_pool(x), oracle::global_avg_pool_naive(x), 1e-13);
    }
}

TEST_CASE("bilinear resize: constants, identity, oracle") {
    CHECK(ops::upsample_bilinear(Tensor::full({1, 1, 2, 2}, 2.0), 5, 7).vec() ==
          Tensor::full({1, 1, 5, 7}, 2.0).vec());

    Rng rng(9);
    const Tensor x = random_tensor(rng, {1, 2, 4, 5});
    CHECK(ops::upsample_bilinear(x, 4, 5).vec() == x.vec()); // bit-exact

    const Tensor small({1, 1, 2, 2}, {0, 1, 2, 3});
    check_close(ops::upsample_bilinear(small, 4, 4), oracle::bilinear_naive(small, 4, 4), 1e-15);

    for (int iter = 0; iter < 30; ++iter) {
        const i64 h = 1 + static_cast<i64>(rng.below(5));
        const i64 w = 1 + static_cast<i64>(rng.below(5));
        const i64 oh = h + static_cast<i64>(rng.below(6));
        const i64 ow = w + static_cast<i64>(rng.below(6));
        const Tensor t = random_tensor(rng, {2, 2, h, w});
        check_close(ops::upsample_bilinear(t, oh, ow), oracle::bilinear_naive(t, oh, ow), 1e-13);
        // downscale path used inside the attention modules
        check_close(ops::resize_bilinear(t, std::max<i64>(h - 2, 1), std::max<i64>(w - 1, 1)),
                    oracle::bilinear_naive(t, std::max<i64>(h - 2, 1), std::max<i64>(w - 1, 1)), 1e-13);
    }

    CHECK_THROWS_WITH_AS(ops::upsample_bilinear(x, 2, 5), doctest::Contains("downscale"), Error);
}

TEST_CASE("softmax rows are shift-invariant probability vectors") {
    Rng rng(10);
    const Matrix3 x = random_matrix(rng, {2, 4, 6}, -2.0, 2.0);
    const Matrix3 y = ops::softmax_lastdim(x);
    for (i64 n = 0; n < 2; ++n)
        for (i64 r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (i64 c = 0; c < 6; ++c) {
                CHECK(y.at(n, r, c) >= 0.0);
                sum += y.at(n, r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }

    // uniform row
    const Matrix3 u = ops::softmax_lastdim(Matrix3({1, 1, 5}, {3, 3, 3, 3, 3}));
    for (i64 c = 0; c < 5; ++c) CHECK(u.at(0, 0, c) == doctest::Approx(0.2).epsilon(1e-15));

    // shift invariance
    Matrix3 shifted = x;
    for (i64 n = 0; n < 2; ++n)
        for (i64 r = 0; r < 4; ++r)
            for (i64 c = 0; c < 6; ++c) shifted.at(n, r, c) += 17.5;
    const Matrix3 ys = ops::softmax_lastdim(shifted);
    for (i64 i = 0; i < y.numel(); ++i)
        CHECK(y.data()[i] == doctest::Approx(ys.data()[i]).epsilon(1e-12));

    // direct formula oracle
    const Matrix3 row({1, 1, 3}, {1, 2, 3});
    const Matrix3 want = oracle::softmax_naive(row);
    const Matrix3 got = ops::softmax_lastdim(row);
    for (i64 i = 0; i < 3; ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-14));
}

TEST_CASE("bmm identity, zero rows, oracle, associativity") {
    Rng rng(12);
    const Matrix3 a = random_matrix(rng, {2, 3, 4});
    Matrix3 eye({2, 4, 4});
    for (i64 n = 0; n < 2; ++n)
        for (i64 i = 0; i < 4; ++i) eye.at(n, i, i) = 1.0;
    CHECK(ops::bmm(a, eye).vec() == a.vec());

    Matrix3 az = a;
    for (i64 c = 0; c < 4; ++c) az.at(0, 1, c) = 0.0;
    const Matrix3 bz = random_matrix(rng, {2, 4, 5});
    const Matrix3 outz = ops::bmm(az, bz);
    for (i64 c = 0; c < 5; ++c) CHECK(outz.at(0, 1, c) == 0.0);

    for (int iter = 0; iter < 100; ++iter) {
        const i64 r = 1 + static_cast<i64>(rng.below(4));
        const i64 k = 1 + static_cast<i64>(rng.below(4));
        const i64 c = 1 + static_cast<i64>(rng.below(4));
        const Matrix3 m1 = random_matrix(rng, {2, r, k});
        const Matrix3 m2 = random_matrix(rng, {2, k, c});
        const Matrix3 got = ops::bmm(m1, m2);
        const Matrix3 want = oracle::bmm_naive(m1, m2);
        REQUIRE(got.shape() == want.shape());
        for (i64 i = 0; i < got.numel(); ++i)
            CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
    }

    // (AB)C == A(BC) against the oracle within 1e-10
    const Matrix3 m1 = random_matrix(rng, {1, 3, 3});
    const Matrix3 m2 = random_matrix(rng, {1, 3, 3});
    const Matrix3 m3 = random_matrix(rng, {1, 3, 3});
    const Matrix3 left = ops::bmm(ops::bmm(m1, m2), m3);
    const Matrix3 right = oracle::bmm_naive(m1, oracle::bmm_naive(m2, m3));
    for (i64 i = 0; i < left.numel(); ++i)
        CHECK(left.data()[i] == doctest::Approx(right.data()[i]).epsilon(1e-10));

    CHECK_THROWS_AS(ops::bmm(a, random_matrix(rng, {2, 3, 2})), Error);
}

TEST_CASE("batchnorm normalizes and matches the two-pass oracle") {
    Rng rng(13);
    const Tensor x = random_tensor(rng, {3, 2, 4, 4}, -2.0, 5.0);
    const Tensor ones = Tensor::full({2, 1, 1, 1}, 1.0);
    const Tensor zeros({2, 1, 1, 1});
    const Tensor y = ops::batchnorm(x, ones, zeros, 1e-5);
    for (i64 c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (i64 n = 0; n < 3; ++n)
            for (i64 i = 0; i < 16; ++i) mean += y.plane(n, c)[i];
        mean /= 48.0;
        for (i64 n = 0; n < 3; ++n)
            for (i64 i = 0; i < 16; ++i) var += (y.plane(n, c)[i] - mean) * (y.plane(n, c)[i] - mean);
        var /= 48.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }

    // constant channel collapses to beta
    const Tensor xc = Tensor::full({2, 1, 3, 3}, 4.2);
    const Tensor beta5 = Tensor::full({1, 1, 1, 1}, 5.0);
    const Tensor yc = ops::batchnorm(xc, Tensor::full({1, 1, 1, 1}, 1.0), beta5, 1e-5);
    for (i64 i = 0; i < yc.numel(); ++i) CHECK(yc.data()[i] == doctest::Approx(5.0).epsilon(1e-9));

    for (int iter = 0; iter < 20; ++iter) {
        const Tensor t = random_tensor(rng, {2, 3, 3, 4});
        const Tensor g = random_tensor(rng, {3, 1, 1, 1}, 0.5, 1.5);
        const Tensor b = random_tensor(rng, {3, 1, 1, 1});
        check_close(ops::batchnorm(t, g, b, 1e-5), oracle::batchnorm_naive(t, g.vec(), b.vec(), 1e-5), 1e-11);
    }
}

TEST_CASE("layout bridges are exact round trips") {
    Rng rng(14);
    const Tensor x = random_tensor(rng, {2, 3, 4, 5});
    const Matrix3 flat = ops::flatten_spatial(x);
    CHECK(flat.shape() == Shape3{2, 3, 20});
    CHECK(ops::unflatten_spatial(flat, 4, 5).vec() == x.vec()); // bit-exact

    // index law: (n,c,y,x) lands at column y*W + x
    CHECK(flat.at(1, 2, 3 * 5 + 4) == x.at(1, 2, 3, 4));

    const Matrix3 m = random_matrix(rng, {2, 3, 7});
    CHECK(ops::transpose_last(ops::transpose_last(m)).vec() == m.vec());

    CHECK_THROWS_AS(ops::unflatten_spatial(flat, 3, 5), Error);
}

TEST_CASE("sobel magnitude: constants, flips, step edge oracle") {
    // constant input -> exactly zero
    const Tensor c = Tensor::full({1, 2, 5, 6}, 3.25);
    const Tensor zero_mag = ops::sobel_magnitude(c);
    for (const double v : zero_mag.vec()) CHECK(v == 0.0);

    Rng rng(15);
    for (int iter = 0; iter < 100; ++iter) {
        const i64 h = 2 + static_cast<i64>(rng.below(5));
        const i64 w = 2 + static_cast<i64>(rng.below(5));
        const Tensor x = random_tensor(rng, {1, 2, h, w});

        Tensor hflip(x.shape()), vflip(x.shape());
        for (i64 ch = 0; ch < 2; ++ch)
            for (i64 y = 0; y < h; ++y)
                for (i64 xx = 0; xx < w; ++xx) {
                    hflip.at(0, ch, y, xx) = x.at(0, ch, y, w - 1 - xx);
                    vflip.at(0, ch, y, xx) = x.at(0, ch, h - 1 - y, xx);
                }
        const Tensor g = ops::sobel_magnitude(x);
        const Tensor gh = ops::sobel_magnitude(hflip);
        const Tensor gv = ops::sobel_magnitude(vflip);
        for (i64 y = 0; y < h; ++y)
            for (i64 xx = 0; xx < w; ++xx)
                for (i64 ch = 0; ch < 2; ++ch) {
                    CHECK(gh.at(0, ch, y, xx) == g.at(0, ch, y, w - 1 - xx)); // bit-exact
                    CHECK(gv.at(0, ch, y, xx) == g.at(0, ch, h - 1 - y, xx));
                }

        check_close(g, oracle::sobel_naive(x), 1e-12);
    }

    // vertical step edge: 0-columns then 1-columns
    Tensor step({1, 1, 4, 6});
    for (i64 y = 0; y < 4; ++y)
        for (i64 xx = 3; xx < 6; ++xx) step.at(0, 0, y, xx) = 1.0;
    check_close(ops::sobel_magnitude(step), oracle::sobel_naive(step), 1e-14);
}

TEST_CASE("bce analytic values") {
    // p = 0.5 everywhere gives ln 2 regardless of the target
    const Tensor p = Tensor::full({1, 1, 2, 2}, 0.5);
    const Tensor g({1, 1, 2, 2}, {1, 1, 0, 0});
    CHECK(ops::bce(p, g).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // perfect prediction hits the clamp floor
    const Tensor exact({1, 1, 2, 2}, {1, 1, 0, 0});
    const double floor_val = -std::log(1.0 - 1e-7);
    CHECK(ops::bce(exact, g).item() == doctest::Approx(floor_val).epsilon(1e-6));

    Rng rng(16);
    for (int iter = 0; iter < 30; ++iter) {
        const Tensor pr = random_tensor(rng, {2, 1, 3, 3}, 0.01, 0.99);
        Tensor gt({2, 1, 3, 3});
        for (double& v : gt.vec()) v = rng.below(2) == 0 ? 0.0 : 1.0;
        CHECK(ops::bce(pr, gt).item() == doctest::Approx(oracle::bce_naive(pr, gt, 1e-7)).epsilon(1e-12));
    }
}

TEST_CASE("operations are deterministic and thread-safe") {
    Rng rng(17);
    const Tensor x = random_tensor(rng, {2, 3, 8, 8});
    const Tensor k = random_tensor(rng, {4, 3, 3, 3});
    const Tensor b = random_tensor(rng, {4, 1, 1, 1});
    const Tensor r1 = ops::conv2d(x, k, b, 1, PadMode::zero);

    Tensor r2, r3;
    std::thread t1([&] { r2 = ops::conv2d(x, k, b, 1, PadMode::zero); });
    std::thread t2([&] { r3 = ops::conv2d(x, k, b, 1, PadMode::zero); });
    t1.join();
    t2.join();
    CHECK(r1.vec() == r2.vec());
    CHECK(r1.vec() == r3.vec());
}
