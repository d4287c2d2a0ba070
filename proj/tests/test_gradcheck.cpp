#include <random>

#include "doctest.h"
#include "odet/gradcheck.hpp"

using namespace odet;

TEST_CASE("gradcheck accepts an exact linear gradient") {
    Tensor x0(Dims{1, 1, 1, 1}, {0.8});
    ad::Var x = ad::Var::leaf(x0);
    const auto forward = [&] { return ad::scale(x, 3.0); };
    const ad::Var leaves[] = {x};
    GradCheckOptions opt;
    opt.seed = 11;
    const GradReport report = finite_diff_check(forward, leaves, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_err < 1e-10);
    CHECK(report.detail.size() == 1);
    CHECK(report.detail[0].numeric == doctest::Approx(report.detail[0].analytic).epsilon(1e-9));
}

TEST_CASE("gradcheck flags a deliberately doubled gradient") {
    Tensor x0(Dims{1, 1, 1, 1}, {0.4});
    ad::Var x = ad::Var::leaf(x0);
    // The first call fixes the analytic gradient (slope 3); the numeric probes
    // afterwards see slope 6, so the check must fail.
    bool first_call = true;
    const auto forward = [&]() {
        if (first_call) {
            first_call = false;
            return ad::scale(x, 3.0);
        }
        return ad::scale(x, 6.0);
    };
    const ad::Var leaves[] = {x};
    GradCheckOptions opt;
    opt.seed = 12;
    const GradReport report = finite_diff_check(forward, leaves, opt);
    CHECK_FALSE(report.passed);
}

TEST_CASE("gradcheck covers conv2d on a random (1,2,4,4) input at tol 1e-6") {
    std::mt19937_64 rng(13);
    Tensor x0(1, 2, 4, 4), k0(2, 2, 3, 3);
    fill_normal(x0, rng);
    fill_normal(k0, rng);
    ad::Var x = ad::Var::leaf(x0);
    ad::Var k = ad::Var::leaf(k0);
    ad::Var b = ad::Var::leaf(Tensor(Dims{2, 1, 1, 1}, {0.25, -0.5}));
    const auto forward = [&] { return ad::conv(x, k, b, same_spec(3, 3)); };
    const ad::Var leaves[] = {x, k, b};
    GradCheckOptions opt;
    opt.seed = 14;
    const GradReport report = finite_diff_check(forward, leaves, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck subsamples large leaves") {
    std::mt19937_64 rng(15);
    Tensor x0(1, 1, 16, 16);  // 256 coordinates
    fill_normal(x0, rng);
    ad::Var x = ad::Var::leaf(x0);
    const auto forward = [&] { return ad::scale(x, 2.0); };
    const ad::Var leaves[] = {x};
    GradCheckOptions opt;
    opt.seed = 16;
    const GradReport report = finite_diff_check(forward, leaves, opt);
    CHECK(report.passed);
    CHECK(report.detail.size() == opt.max_coords_per_leaf);
}

TEST_CASE("gradcheck validates its step size") {
    ad::Var x = ad::Var::leaf(Tensor(Dims{1, 1, 1, 1}, {1.0}));
    const ad::Var leaves[] = {x};
    GradCheckOptions opt;
    opt.step = 0.0;
    CHECK_THROWS_AS(finite_diff_check([&] { return ad::scale(x, 1.0); }, leaves, opt),
                    ValidationError);
}

TEST_CASE("gradcheck rejects a non-finite forward value") {
    Tensor x0(Dims{1, 1, 1, 1}, {std::numeric_limits<double>::quiet_NaN()});
    ad::Var x = ad::Var::leaf(x0);
    const auto forward = [&] { return ad::scale(x, 1.0); };
    const ad::Var leaves[] = {x};
    CHECK_THROWS_AS(finite_diff_check(forward, leaves, GradCheckOptions{}), ValidationError);
}
