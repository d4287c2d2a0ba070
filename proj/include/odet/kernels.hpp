#pragma once

#include <optional>
#include <span>
#include <vector>

#include "odet/tensor.hpp"

namespace odet {

struct ConvSpec {
    int stride = 1;
    int pad_h = 0;  // zero padding, same count above and below
    int pad_w = 0;  // zero padding, same count left and right
    int dilation = 1;
    int groups = 1;
};

inline ConvSpec pointwise_spec() { return ConvSpec{1, 0, 0, 1, 1}; }
ConvSpec same_spec(int kh, int kw, int groups = 1, int dilation = 1);

// pad = dilation * (k - 1) / 2, defined for odd k only.
int same_padding(int kernel, int dilation = 1);

Dims conv2d_output_dims(const Dims& input, const Dims& kernel, const ConvSpec& spec);

// Cross-correlation (no kernel flip). Kernel dims (Cout, Cin/groups, kh, kw).
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const ConvSpec& spec);
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
    return conv2d(input, kernel, {}, spec);
}

struct ConvVjp {
    Tensor dinput;
    Tensor dkernel;
    std::vector<double> dbias;
};

// Exact vector-Jacobian products of conv2d with respect to input, kernel and bias.
ConvVjp conv2d_vjp(const Tensor& input, const Tensor& kernel, const ConvSpec& spec,
                   const Tensor& upstream);

Tensor conv2d_vjp_input(const Tensor& kernel, const ConvSpec& spec, const Tensor& upstream,
                        const Dims& input_dims);
Tensor conv2d_vjp_kernel(const Tensor& input, const ConvSpec& spec, const Tensor& upstream,
                         const Dims& kernel_dims);
std::vector<double> conv2d_vjp_bias(const Tensor& upstream);

Tensor global_avg_pool(const Tensor& input);

std::vector<double> softmax(std::span<const double> logits);

// Per-sample softmax across the channel axis of an (N, C, 1, 1) tensor.
Tensor softmax_channels(const Tensor& logits);

// Orthonormal 2x2 Haar analysis on even-dimension planes. Output packs the four
// sub-bands along channels as (N, 4C, H/2, W/2) in LL, LH, HL, HH order.
Tensor haar_analysis_packed(const Tensor& input);
Tensor haar_synthesis_packed(const Tensor& packed);

// Pads by replicating the last row/column (0 or 1 each). Adjoint folds the
// padded positions back onto their sources.
Tensor replicate_pad_rb(const Tensor& input, int pad_h, int pad_w);
Tensor replicate_pad_rb_adjoint(const Tensor& upstream, int pad_h, int pad_w);
Tensor crop_hw(const Tensor& input, int out_h, int out_w);
Tensor crop_hw_adjoint(const Tensor& upstream, int in_h, int in_w);

// Space-to-depth: output channel (c*s^2 + dy*s + dx) at (h, w) reads input
// channel c at (h*s + dy, w*s + dx).
Tensor space_to_depth(const Tensor& input, int scale);
Tensor depth_to_space(const Tensor& input, int scale);

// Unitary 2D DFT over each (n, c) plane; outputs real and imaginary parts.
struct Dft2 {
    Tensor re;
    Tensor im;
};
Dft2 dft2(const Tensor& input);
// Real part of the unitary inverse DFT of (re, im).
Tensor idft2_real(const Tensor& re, const Tensor& im);

// Frequency-gated filter: Re(IDFT(gate .* DFT(x))) with a real per-frequency
// gate shared across batch and channels. Gate dims (1, 1, H, W). The operator
// is linear in x and symmetric, so it is its own adjoint in x.
Tensor fsam_filter(const Tensor& input, const Tensor& gate);
Tensor fsam_filter_vjp_gate(const Tensor& input, const Tensor& gate, const Tensor& upstream);

// Per-channel descriptor (N, 2C, 1, 1): spatial mean followed by the magnitude
// of the lowest non-DC frequency shell (the (0,1) and (1,0) DFT components).
Tensor dcam_descriptor(const Tensor& input);
Tensor dcam_descriptor_vjp(const Tensor& input, const Tensor& upstream);

}  // namespace odet
