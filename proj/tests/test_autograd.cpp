#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lba/gradcheck.hpp"
#include "lba/layers.hpp"

using namespace lba;

namespace {

Tensor random_tensor(Rng& rng, Shape4 s, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (double& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("loss = sum(x) gives all-ones gradient") {
    Rng rng(1);
    Tape t;
    Var x = t.leaf(random_tensor(rng, {2, 3, 4, 4}));
    Var loss = ad::sum_all(t, x);
    t.backward(loss);
    const Tensor& g = t.grad_tensor(x);
    for (i64 i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == 1.0);
}

TEST_CASE("loss = sum(x*x) gives 2x") {
    Rng rng(2);
    const Tensor xv = random_tensor(rng, {1, 2, 3, 3});
    Tape t;
    Var x = t.leaf(xv);
    Var loss = ad::sum_all(t, ad::mul(t, x, x));
    t.backward(loss);
    const Tensor& g = t.grad_tensor(x);
    for (i64 i = 0; i < g.numel(); ++i)
        CHECK(g.data()[i] == doctest::Approx(2.0 * xv.data()[i]).epsilon(1e-14));
}

TEST_CASE("backward requires a recorded forward and a scalar root") {
    Tape empty;
    CHECK_THROWS_AS(empty.backward(Var{0}), Error);

    Tape t;
    Var x = t.leaf(Tensor({1, 1, 2, 2}));
    CHECK_THROWS_WITH_AS(t.backward(x), doctest::Contains("scalar"), Error);
}

TEST_CASE("backward visits each node once, newest first") {
    Rng rng(3);
    Tape t;
    Var x = t.leaf(random_tensor(rng, {1, 1, 3, 3}));
    Var a = ad::relu(t, x);
    Var b = ad::sigmoid(t, a);
    Var c = ad::mul(t, a, b);
    Var loss = ad::sum_all(t, c);
    (void)loss;
    std::vector<int> visits;
    t.backward(loss, 1.0, &visits);
    // leaves record no backward fn; every op node appears exactly once,
    // strictly descending
    CHECK(visits.size() == 4);
    for (std::size_t i = 1; i < visits.size(); ++i) CHECK(visits[i] < visits[i - 1]);
}

TEST_CASE("tape already replayed is rejected") {
    Tape t;
    Var x = t.leaf(Tensor::scalar(1.0));
    Var loss = ad::sum_all(t, x);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), Error);
}

TEST_CASE("param grads accumulate into the store") {
    ParamStore ps;
    Rng rng(4);
    ps.add("w", random_tensor(rng, {1, 1, 2, 2}));
    Tape t;
    ParamBank pb(t, ps);
    Var w1 = pb("w");
    Var w2 = pb("w"); // same node
    CHECK(w1.id == w2.id);
    Var loss = ad::sum_all(t, ad::mul(t, w1, w2));
    t.backward(loss);
    t.write_param_grads();
    const Tensor& g = ps.grad("w");
    for (i64 i = 0; i < g.numel(); ++i)
        CHECK(g.data()[i] == doctest::Approx(2.0 * ps.value("w").data()[i]).epsilon(1e-14));
}

TEST_CASE("gradcheck registry covers the expected ops") {
    for (const char* name : {"conv2d", "fully_connected", "mul", "add", "sub", "sigmoid", "relu",
                             "channel_max", "global_avg_pool", "upsample_bilinear", "softmax_lastdim",
                             "bmm", "batchnorm", "conv_transpose2d", "sobel_magnitude", "bce", "sum",
                             "concat", "se_block", "efaba", "gdal", "network"}) {
        CAPTURE(name);
        CHECK(gradcheck::has_op(name));
    }
    CHECK_THROWS_AS(gradcheck::run("nosuchop", 0), Error);
}

TEST_CASE("spec-named gradchecks pass at seed 0") {
    for (const char* name : {"sigmoid", "conv2d", "softmax_lastdim"}) {
        const auto rep = gradcheck::run(name, 0);
        CAPTURE(name);
        CAPTURE(rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("every registered op passes gradcheck on several seeds") {
    for (const std::string& name : gradcheck::op_names()) {
        if (name == "network") continue; // covered by the acceptance suite at 10 seeds
        for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
            const auto rep = gradcheck::run(name, seed);
            CAPTURE(name);
            CAPTURE(seed);
            CAPTURE(rep.max_rel_err);
            CHECK(rep.pass);
        }
    }
}

TEST_CASE("whole tiny network passes gradcheck at 1e-4") {
    const auto rep = gradcheck::run("network", 0);
    CAPTURE(rep.max_rel_err);
    CHECK(rep.pass);
    CHECK(rep.tolerance == 1e-4);
}
