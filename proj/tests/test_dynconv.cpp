#include <random>

#include "doctest.h"
#include "odet/dynconv.hpp"
#include "odet/gradcheck.hpp"

using namespace odet;

namespace {

Tensor random_tensor(Dims dims, std::mt19937_64& rng) {
    Tensor t(dims);
    fill_normal(t, rng);
    return t;
}

void zero_leaf(ad::Var v) {
    std::fill(v.mutable_val().vec().begin(), v.mutable_val().vec().end(), 0.0);
}

double rel_dev(const Tensor& a, const Tensor& b) {
    return max_abs_diff(a, b) / std::max({1.0, max_abs(a), max_abs(b)});
}

// Merged-kernel oracle: conv with the per-sample convex combination of experts.
Tensor merged_kernel_conv(const Tensor& x, const std::vector<ad::Var>& experts,
                          const std::optional<ad::Var>& bias, const Tensor& alpha,
                          const ConvSpec& spec) {
    Tensor out;
    for (int n = 0; n < x.n(); ++n) {
        Tensor sample(Dims{1, x.c(), x.h(), x.w()});
        std::copy(x.data() + x.offset(n, 0, 0, 0),
                  x.data() + x.offset(n, 0, 0, 0) + sample.numel(), sample.data());
        Tensor merged(experts[0].val().dims());
        for (std::size_t i = 0; i < experts.size(); ++i) {
            const double a = alpha.at(n, static_cast<int>(i), 0, 0);
            for (std::size_t j = 0; j < merged.numel(); ++j) {
                merged.vec()[j] += a * experts[i].val().vec()[j];
            }
        }
        std::vector<double> b;
        if (bias) {
            b.assign(bias->val().vec().begin(), bias->val().vec().end());
        }
        const Tensor y = conv2d(sample, merged, b, spec);
        if (!out.defined()) out = Tensor(Dims{x.n(), y.c(), y.h(), y.w()});
        std::copy(y.vec().begin(), y.vec().end(), out.data() + out.offset(n, 0, 0, 0));
    }
    return out;
}

}  // namespace

TEST_CASE("zeroed head yields uniform coefficients") {
    std::mt19937_64 rng(50);
    DynamicConvLayer layer(3, 4, 3, 4, 0, rng);
    for (ad::Var p : layer.head().params()) zero_leaf(p);
    const Tensor x = random_tensor({2, 3, 5, 5}, rng);
    const Tensor alpha = layer.coefficients(x);
    CHECK(alpha.dims() == Dims{2, 4, 1, 1});
    for (double v : alpha.vec()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("zero weights with a (0, ln 3) final bias give (0.25, 0.75)") {
    std::mt19937_64 rng(51);
    DynamicConvLayer layer(3, 3, 3, 2, 0, rng);
    for (ad::Var p : layer.head().params()) zero_leaf(p);
    layer.head().b2().mutable_val().vec() = {0.0, std::log(3.0)};
    const Tensor x = random_tensor({1, 3, 4, 4}, rng);
    const Tensor alpha = layer.coefficients(x);
    CHECK(alpha.at(0, 0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(alpha.at(0, 1, 0, 0) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("coefficient rows sum to one") {
    std::mt19937_64 rng(52);
    DynamicConvLayer layer(4, 4, 3, 5, 0, rng);
    const Tensor x = random_tensor({3, 4, 6, 6}, rng);
    const Tensor alpha = layer.coefficients(x);
    for (int n = 0; n < alpha.n(); ++n) {
        double total = 0.0;
        for (int i = 0; i < alpha.c(); ++i) total += alpha.at(n, i, 0, 0);
        CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("a single expert behaves like a plain convolution") {
    std::mt19937_64 rng(53);
    DynamicConvLayer layer(3, 4, 3, 1, 0, rng);
    const Tensor x = random_tensor({2, 3, 5, 5}, rng);
    std::vector<double> bias(layer.bias()->val().vec());
    const Tensor direct = conv2d(x, layer.expert_kernels()[0].val(), bias, same_spec(3, 3));
    CHECK(rel_dev(layer.forward(x), direct) <= 1e-12);
}

TEST_CASE("identical experts make the output independent of the coefficients") {
    std::mt19937_64 rng(54);
    DynamicConvLayer layer(3, 4, 3, 4, 0, rng);
    for (int i = 1; i < 4; ++i) {
        layer.expert_kernels()[i].mutable_val() = layer.expert_kernels()[0].val();
    }
    const Tensor x = random_tensor({2, 3, 5, 5}, rng);
    Tensor baseline;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> logits(4);
        for (double& v : logits) v = std::normal_distribution<double>(0.0, 2.0)(rng);
        const auto probs = softmax(logits);
        Tensor alpha(Dims{2, 4, 1, 1});
        for (int n = 0; n < 2; ++n) {
            for (int i = 0; i < 4; ++i) alpha.at(n, i, 0, 0) = probs[i];
        }
        const Tensor y = layer.apply_with(ad::Var::constant(x), ad::Var::constant(alpha)).val();
        if (!baseline.defined()) {
            baseline = y;
        } else {
            CHECK(rel_dev(y, baseline) <= 1e-12);
        }
    }
}

TEST_CASE("mixture equals the merged-kernel oracle") {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 5);
        DynamicConvLayer layer(3, 4, 3, m, 0, rng);
        const Tensor x = random_tensor({2, 3, 5, 5}, rng);
        const Tensor alpha = layer.coefficients(x);
        const Tensor direct = layer.forward(x);
        const Tensor merged = merged_kernel_conv(x, layer.expert_kernels(), layer.bias(), alpha,
                                                 same_spec(3, 3));
        CHECK(rel_dev(direct, merged) <= 1e-12);
    }
}

TEST_CASE("the coefficient head rejects a mismatched pooled width") {
    std::mt19937_64 rng(49);
    CoeffHead head(6, 4, 3, rng);
    const ad::Var pooled = ad::Var::constant(Tensor(Dims{1, 5, 1, 1}));
    CHECK_THROWS_AS(head.apply(pooled), ShapeError);
}

TEST_CASE("expert count mismatch raises a shape error") {
    std::mt19937_64 rng(56);
    DynamicConvLayer layer(3, 4, 3, 3, 0, rng);
    const Tensor x = random_tensor({1, 3, 4, 4}, rng);
    Tensor alpha(Dims{1, 2, 1, 1}, {0.5, 0.5});
    CHECK_THROWS_AS(layer.apply_with(ad::Var::constant(x), ad::Var::constant(alpha)),
                    ShapeError);
}

TEST_CASE("dynamic_conv gradients pass the finite-difference check") {
    std::mt19937_64 rng(57);
    DynamicConvLayer layer(3, 4, 3, 3, 0, rng);
    Tensor x0 = random_tensor({2, 3, 5, 5}, rng);
    ad::Var x = ad::Var::leaf(x0);
    auto leaves = layer.params();
    leaves.push_back(x);
    GradCheckOptions opt;
    opt.seed = 58;
    const GradReport report =
        finite_diff_check([&] { return layer.apply(x); }, leaves, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("ghost module doubles the primary width") {
    std::mt19937_64 rng(59);
    GhostModule ghost(3, 8, 1, rng);
    const Tensor x = random_tensor({2, 3, 6, 6}, rng);
    const Tensor y = ghost.forward(x);
    CHECK(y.dims() == Dims{2, 8, 6, 6});
    CHECK_THROWS_AS(GhostModule(3, 7, 1, rng), ConfigError);
}

TEST_CASE("a delta cheap kernel duplicates the primary half") {
    std::mt19937_64 rng(60);
    GhostModule ghost(3, 8, 1, rng);
    Tensor& cheap = ghost.cheap_weight().mutable_val();
    std::fill(cheap.vec().begin(), cheap.vec().end(), 0.0);
    for (int n = 0; n < cheap.n(); ++n) cheap.at(n, 0, 1, 1) = 1.0;
    zero_leaf(ghost.cheap_bias());

    const Tensor x = random_tensor({1, 3, 5, 5}, rng);
    const Tensor y = ghost.forward(x);
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 25; ++i) {
            CHECK(y.vec()[y.offset(0, c, 0, 0) + i] ==
                  doctest::Approx(y.vec()[y.offset(0, c + 4, 0, 0) + i]).epsilon(1e-15));
        }
    }
}

TEST_CASE("ghost is cheaper than the dense convolution it replaces") {
    CHECK(ghost_param_count(64, 64, 3) <
          static_cast<std::size_t>(64) * 64 * 9 + 64);
}

TEST_CASE("ghost gradients pass the finite-difference check") {
    std::mt19937_64 rng(61);
    GhostModule ghost(3, 8, 1, rng);
    Tensor x0 = random_tensor({1, 3, 6, 6}, rng);
    ad::Var x = ad::Var::leaf(x0);
    auto leaves = ghost.params();
    leaves.push_back(x);
    GradCheckOptions opt;
    opt.seed = 62;
    const GradReport report = finite_diff_check([&] { return ghost.apply(x); }, leaves, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("ghost with a dynamic primary matches its closed-form count") {
    std::mt19937_64 rng(63);
    GhostModule ghost(4, 8, 3, rng, true, 3);
    std::size_t total = 0;
    for (const ad::Var& p : ghost.params()) total += p.val().numel();
    CHECK(total == ghost_param_count(4, 8, 3, true, 3));
    const Tensor x = random_tensor({1, 4, 6, 6}, rng);
    CHECK(ghost.forward(x).dims() == Dims{1, 8, 6, 6});
}

TEST_CASE("a zero-weight bottleneck passes the input through both residuals") {
    std::mt19937_64 rng(64);
    // y = conv(dyn(x) + x) + x with every convolution weight zeroed
    DynamicConvLayer dyn(4, 4, 3, 3, 0, rng);
    for (ad::Var p : dyn.expert_kernels()) zero_leaf(p);
    zero_leaf(*dyn.bias());
    ad::Var outer_w = ad::Var::leaf(Tensor(Dims{4, 4, 3, 3}));
    ad::Var outer_b = ad::Var::leaf(Tensor(Dims{4, 1, 1, 1}));

    const Tensor x0 = random_tensor({1, 4, 6, 6}, rng);
    ad::Var x = ad::Var::constant(x0);
    ad::Var z = ad::add(dyn.apply(x), x);
    ad::Var y = ad::add(ad::conv(z, outer_w, outer_b, same_spec(3, 3)), x);
    CHECK(max_abs_diff(y.val(), x0) == 0.0);
}

TEST_CASE("c2f_gdc keeps dims and validates the residual width") {
    std::mt19937_64 rng(65);
    C2fGdcConfig cfg;
    cfg.in_channels = 6;
    cfg.out_channels = 8;
    cfg.experts = 2;
    C2fGdcBlock block(cfg, rng);
    const Tensor x = random_tensor({2, 6, 6, 6}, rng);
    CHECK(block.forward(x).dims() == Dims{2, 8, 6, 6});
    CHECK_THROWS_AS(block.forward(random_tensor({1, 4, 6, 6}, rng)), ShapeError);
}

TEST_CASE("c2f_gdc gradients pass the finite-difference check") {
    std::mt19937_64 rng(66);
    C2fGdcConfig cfg;
    cfg.in_channels = 4;
    cfg.out_channels = 8;
    cfg.experts = 2;
    C2fGdcBlock block(cfg, rng);
    Tensor x0 = random_tensor({1, 4, 6, 6}, rng);
    ad::Var x = ad::Var::leaf(x0);
    auto leaves = block.params();
    leaves.push_back(x);
    GradCheckOptions opt;
    opt.seed = 67;
    opt.max_coords_per_leaf = 24;
    const GradReport report = finite_diff_check([&] { return block.apply(x); }, leaves, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("parameter counts: affine in the expert count, closed forms exact") {
    // head contribution: C*h + h + h*M + M
    CHECK(coeff_head_param_count(16, 8, 4) == 16 * 8 + 8 + 8 * 4 + 4);

    // expert bank contribution for M=4 kernels of dims (32, 32, 3, 3)
    CHECK(dynamic_conv_param_count(32, 32, 3, 4, 8).expert_bank == 4ull * 32 * 32 * 9);

    // affine in M with the hidden width pinned
    C2fGdcConfig cfg;
    cfg.in_channels = 16;
    cfg.out_channels = 16;
    cfg.hidden = 8;
    std::vector<std::size_t> counts;
    for (int m = 1; m <= 4; ++m) {
        cfg.experts = m;
        counts.push_back(c2f_gdc_param_count(cfg));
    }
    const std::size_t step = counts[1] - counts[0];
    CHECK(counts[2] - counts[1] == step);
    CHECK(counts[3] - counts[2] == step);

    // the per-expert kernel elements dominate the slope
    const std::size_t kernel_elems = 8ull * 8 * 3 * 3;  // half width is 8
    CHECK(step == kernel_elems + 8 + 1);  // plus the head's per-expert logit row

    // enumeration agrees with the closed form
    std::mt19937_64 rng(68);
    cfg.experts = 3;
    C2fGdcBlock block(cfg, rng);
    std::size_t total = 0;
    for (const ad::Var& p : block.params()) total += p.val().numel();
    CHECK(total == c2f_gdc_param_count(cfg));
}
