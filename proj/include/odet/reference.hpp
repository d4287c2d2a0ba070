#pragma once

#include "odet/kernels.hpp"
#include "odet/tensor.hpp"

// Plain serial implementations of the hot kernels. These are the ground truth
// the parallel kernels must match bit-for-bit; tests and the benchmark target
// compare against them.
namespace odet::reference {

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const ConvSpec& spec);
ConvVjp conv2d_vjp(const Tensor& input, const Tensor& kernel, const ConvSpec& spec,
                   const Tensor& upstream);
Tensor haar_analysis_packed(const Tensor& input);
Tensor haar_synthesis_packed(const Tensor& packed);

}  // namespace odet::reference
