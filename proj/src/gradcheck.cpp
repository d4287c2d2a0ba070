#include "odet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace odet {

double grad_rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

GradReport finite_diff_check(const std::function<ad::Var()>& forward,
                             std::span<const ad::Var> leaves, const GradCheckOptions& opt) {
    if (opt.step <= 0.0) throw ValidationError("finite_diff_check: step must be positive");

    ad::Var out = forward();
    require_finite(out.val(), "finite_diff_check forward");

    std::mt19937_64 rng(opt.seed);
    Tensor probe(out.val().dims());
    fill_normal(probe, rng, 0.0, 1.0);

    ad::backward(out, probe);

    std::vector<Tensor> analytic;
    analytic.reserve(leaves.size());
    for (const ad::Var& leaf : leaves) {
        analytic.push_back(leaf.grad().defined() ? leaf.grad() : Tensor(leaf.val().dims()));
    }

    const auto loss = [&]() { return inner(probe, forward().val()); };

    GradReport report;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor& storage = const_cast<ad::Var&>(leaves[li]).mutable_val();
        std::vector<std::size_t> coords;
        if (storage.numel() <= opt.max_coords_per_leaf) {
            coords.resize(storage.numel());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, storage.numel() - 1);
            while (coords.size() < opt.max_coords_per_leaf) {
                std::size_t c = pick(rng);
                if (std::find(coords.begin(), coords.end(), c) == coords.end()) {
                    coords.push_back(c);
                }
            }
        }
        for (std::size_t coord : coords) {
            const double saved = storage.vec()[coord];
            storage.vec()[coord] = saved + opt.step;
            const double f_plus = loss();
            storage.vec()[coord] = saved - opt.step;
            const double f_minus = loss();
            storage.vec()[coord] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * opt.step);
            const double a = analytic[li].vec()[coord];
            report.detail.push_back(GradEntry{li, coord, a, numeric});
            report.max_abs_err = std::max(report.max_abs_err, std::fabs(a - numeric));
            report.max_rel_err = std::max(report.max_rel_err, grad_rel_err(a, numeric));
        }
    }
    report.passed = report.max_rel_err <= opt.tol;
    return report;
}

}  // namespace odet
