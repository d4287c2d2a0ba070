#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "odet/autodiff.hpp"
#include "odet/tensor.hpp"

namespace odet {

// One level of 2D Haar analysis. All four bands share dims (N, C, H/2, W/2).
struct SubBands {
    Tensor ll, lh, hl, hh;
};

// Orthonormal analysis: for a 2x2 block [[a,b],[c,d]],
//   LL=(a+b+c+d)/2, LH=(a-b+c-d)/2, HL=(a+b-c-d)/2, HH=(a-b-c+d)/2.
// Odd spatial dims require pad_odd (replicate right/bottom by one).
SubBands haar_wt(const Tensor& x, bool pad_odd = false);
Tensor haar_iwt(const SubBands& bands);

Tensor pack_bands(const SubBands& bands);
SubBands unpack_bands(const Tensor& packed);
double subbands_sum_squares(const SubBands& bands);

struct WaveletPyramid {
    int levels = 0;
    std::vector<SubBands> bands;  // bands[i] decomposes the level-i low band
    Tensor residual_ll;           // deepest low-frequency band; equals input when levels == 0
    // Pre-pad spatial dims of each level's input; the inverse cascade crops to these.
    std::vector<std::array<int, 2>> level_input_hw;
};

WaveletPyramid wt_cascade(const Tensor& x, int levels, bool pad_odd = false);
Tensor wt_cascade_inverse(const WaveletPyramid& pyramid);

// Depthwise filters of the wavelet convolution: one spatial-domain base kernel
// plus four kernels per cascade level, stored packed as (4C, 1, k, k).
struct WtConvWeights {
    Tensor base;                      // (C, 1, k, k)
    std::vector<Tensor> band_kernels; // levels entries, each (4C, 1, k, k)
};

WtConvWeights make_wtconv_weights(int channels, int kernel, int levels, std::mt19937_64& rng);

// y = dwconv(base, x) + hierarchical reconstruction of the cascade with every
// sub-band convolved by its own depthwise kernel (same padding). Output dims
// equal input dims for any spatial size.
Tensor wtconv(const Tensor& x, const WtConvWeights& weights);
ad::Var wtconv_apply(const ad::Var& x, const ad::Var& base, std::span<const ad::Var> band_kernels);

std::size_t wtconv_param_count(int channels, int kernel, int levels);
std::uint64_t wtconv_flops(int channels, int kernel, int levels, const Dims& input);
// Input extent influencing one output element: kernel * 2^levels per axis.
int wtconv_receptive_field(int kernel, int levels);

class WtConvLayer {
  public:
    WtConvLayer(int channels, int kernel, int levels, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;

    int channels() const { return channels_; }
    int kernel() const { return kernel_; }
    int levels() const { return levels_; }
    ad::Var& base() { return base_; }
    std::vector<ad::Var>& band_kernels() { return band_kernels_; }

  private:
    int channels_, kernel_, levels_;
    ad::Var base_;
    std::vector<ad::Var> band_kernels_;
};

// Cross-stage-partial block with wavelet-convolution bottlenecks: a 1x1 entry
// conv producing two equal halves, n bottlenecks (1x1 reduce -> wtconv ->
// 1x1 expand -> residual add) applied sequentially to the second half, then a
// 1x1 fuse conv over all concatenated intermediate outputs.
struct C2fWtcConfig {
    int in_channels = 0;
    int out_channels = 0;
    int bottlenecks = 1;
    int levels = 2;
    int kernel = 3;
    double reduction = 0.5;
};

class C2fWtcBlock {
  public:
    C2fWtcBlock(const C2fWtcConfig& cfg, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;
    const C2fWtcConfig& config() const { return cfg_; }
    int half_width() const { return half_; }

  private:
    struct Bottleneck {
        ad::Var reduce_w, reduce_b;
        WtConvLayer wt;
        ad::Var expand_w, expand_b;
    };
    C2fWtcConfig cfg_;
    int half_ = 0;
    int mid_ = 0;
    ad::Var entry_w_, entry_b_;
    std::vector<Bottleneck> bottlenecks_;
    ad::Var fuse_w_, fuse_b_;
};

std::size_t c2f_wtc_param_count(const C2fWtcConfig& cfg);
std::uint64_t c2f_wtc_flops(const C2fWtcConfig& cfg, const Dims& input);

}  // namespace odet
