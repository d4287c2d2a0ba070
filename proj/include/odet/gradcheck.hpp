#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "odet/autodiff.hpp"
#include "odet/tensor.hpp"

namespace odet {

struct GradCheckOptions {
    double step = 1e-5;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    // Leaves with more elements than this get a seeded random subsample.
    std::size_t max_coords_per_leaf = 64;
};

struct GradEntry {
    std::size_t leaf;
    std::size_t coord;
    double analytic;
    double numeric;
};

struct GradReport {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    bool passed = false;
    std::vector<GradEntry> detail;
};

// Central-difference check of the tape gradients. `forward` must rebuild the
// graph from the current leaf values on every call; the loss is the inner
// product of the output with a fixed random probe. Relative error is guarded
// by scale 1 so near-zero gradients compare absolutely.
GradReport finite_diff_check(const std::function<ad::Var()>& forward,
                             std::span<const ad::Var> leaves, const GradCheckOptions& opt);

double grad_rel_err(double analytic, double numeric);

}  // namespace odet
