#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lba/common.hpp"
#include "lba/kernels.hpp"

using namespace lba;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

} // namespace

// Elementwise kernels must agree bit-for-bit across variants; reductions may
// reassociate and get a tight tolerance instead.
TEST_CASE("kernel variants agree") {
    const auto& ref = kernels::variant(0);
    REQUIRE(std::string(ref.name) == "scalar");

    for (std::size_t vi = 1; vi < kernels::variant_count(); ++vi) {
        const auto& alt = kernels::variant(vi);
        CAPTURE(alt.name);
        Rng rng(42 + vi);
        // sizes straddle the 4-lane boundary to cover remainder handling
        for (const std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{7},
                                    std::size_t{64}, std::size_t{1001}}) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            std::vector<double> r1(n), r2(n);

            ref.add(r1.data(), a.data(), b.data(), n);
            alt.add(r2.data(), a.data(), b.data(), n);
            CHECK(r1 == r2);

            ref.sub(r1.data(), a.data(), b.data(), n);
            alt.sub(r2.data(), a.data(), b.data(), n);
            CHECK(r1 == r2);

            ref.mul(r1.data(), a.data(), b.data(), n);
            alt.mul(r2.data(), a.data(), b.data(), n);
            CHECK(r1 == r2);

            ref.add_scalar(r1.data(), a.data(), 0.37, n);
            alt.add_scalar(r2.data(), a.data(), 0.37, n);
            CHECK(r1 == r2);

            ref.mul_scalar(r1.data(), a.data(), -1.91, n);
            alt.mul_scalar(r2.data(), a.data(), -1.91, n);
            CHECK(r1 == r2);

            ref.relu(r1.data(), a.data(), n);
            alt.relu(r2.data(), a.data(), n);
            CHECK(r1 == r2);

            r1 = b;
            r2 = b;
            ref.axpy(r1.data(), a.data(), 1.234567, n);
            alt.axpy(r2.data(), a.data(), 1.234567, n);
            CHECK(r1 == r2);

            r1 = b;
            r2 = b;
            ref.maxv(r1.data(), a.data(), n);
            alt.maxv(r2.data(), a.data(), n);
            CHECK(r1 == r2);

            const double d1 = ref.dot(a.data(), b.data(), n);
            const double d2 = alt.dot(a.data(), b.data(), n);
            CHECK(d1 == doctest::Approx(d2).epsilon(1e-13));

            const double s1 = ref.sum(a.data(), n);
            const double s2 = alt.sum(a.data(), n);
            CHECK(s1 == doctest::Approx(s2).epsilon(1e-13));

            const double q1 = ref.sumsq_shift(a.data(), 0.25, n);
            const double q2 = alt.sumsq_shift(a.data(), 0.25, n);
            CHECK(q1 == doctest::Approx(q2).epsilon(1e-13));
        }
    }
}

TEST_CASE("scalar kernels compute the obvious things") {
    const auto& k = kernels::kScalar;
    const std::vector<double> a = {1.0, -2.0, 3.0};
    const std::vector<double> b = {0.5, 0.5, 0.5};
    std::vector<double> r(3);
    k.add(r.data(), a.data(), b.data(), 3);
    CHECK(r == std::vector<double>{1.5, -1.5, 3.5});
    k.relu(r.data(), a.data(), 3);
    CHECK(r == std::vector<double>{1.0, 0.0, 3.0});
    CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(1.0));
    CHECK(k.sum(a.data(), 3) == doctest::Approx(2.0));
}

TEST_CASE("active table is stable for the process") {
    const auto& first = kernels::active();
    const auto& second = kernels::active();
    CHECK(&first == &second);
}
