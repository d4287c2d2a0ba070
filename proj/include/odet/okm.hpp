#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "odet/autodiff.hpp"
#include "odet/tensor.hpp"

namespace odet {

// Channel partition driven by the split ratio e: the first floor(C*e) channels
// feed the heavy branch, the remainder passes through untouched.
int okm_branch_width(int channels, double e);
std::pair<Tensor, Tensor> okm_split(const Tensor& x, double e);
Tensor channel_concat(const Tensor& a, const Tensor& b);

// Dual-domain channel attention: the per-channel descriptor concatenates the
// spatial mean with the magnitude of the lowest non-DC frequency shell, runs
// through a two-layer head, and gates channels through a sigmoid.
class DcamModule {
  public:
    DcamModule(int channels, std::mt19937_64& rng);
    ad::Var apply(const ad::Var& x) const;
    std::vector<ad::Var> params() const;

  private:
    int channels_;
    ad::Var w1_, b1_, w2_, b2_;
};

// Frequency-gated spatial attention: a learnable real gate per frequency bin,
// applied in the unitary DFT domain. Gate resolution is fixed at construction.
class FsamModule {
  public:
    FsamModule(int height, int width, std::mt19937_64& rng);
    ad::Var apply(const ad::Var& x) const;
    std::vector<ad::Var> params() const;
    ad::Var& gate() { return gate_; }

  private:
    ad::Var gate_;
};

// Three parallel branches over the split channels:
//   Global: DCAM -> FSAM -> 1x1 conv
//   Large:  depthwise k_L x k_L plus 1 x k_L and k_L x 1 strips, summed
//   Local:  depthwise 3x3
// concatenated (Global, Large, Local) and merged back by a 1x1 conv.
class OmniKernelModule {
  public:
    OmniKernelModule(int channels, int k_large, int height, int width, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;

    int channels() const { return channels_; }
    ad::Var& local_weight() { return local_w_; }
    ad::Var& merge_weight() { return merge_w_; }
    ad::Var& merge_bias() { return merge_b_; }

  private:
    int channels_, k_large_;
    DcamModule dcam_;
    FsamModule fsam_;
    ad::Var global_w_, global_b_;
    ad::Var large_square_, large_row_, large_col_;
    ad::Var local_w_;
    ad::Var merge_w_, merge_b_;
};

struct OkmCspConfig {
    int channels = 0;
    int out_channels = 0;  // 0 = same as channels
    double e = 0.25;
    int k_large = 7;
    int height = 0;  // spatial dims the FSAM gate is built for
    int width = 0;
};

class OkmCspBlock {
  public:
    OkmCspBlock(const OkmCspConfig& cfg, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;

    const OkmCspConfig& config() const { return cfg_; }
    int branch_width() const { return branch_; }
    OmniKernelModule& omni() { return omni_; }
    ad::Var& fuse_weight() { return fuse_w_; }
    ad::Var& fuse_bias() { return fuse_b_; }

  private:
    OkmCspConfig cfg_;
    int branch_;
    OmniKernelModule omni_;
    ad::Var fuse_w_, fuse_b_;
};

// Space-to-depth rearrangement followed by a stride-1 convolution.
struct SpdConvConfig {
    int in_channels = 0;
    int out_channels = 0;
    int scale = 2;
    int kernel = 3;
};

class SpdConvLayer {
  public:
    SpdConvLayer(const SpdConvConfig& cfg, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;
    const SpdConvConfig& config() const { return cfg_; }

  private:
    SpdConvConfig cfg_;
    ad::Var w_, b_;
};

// Fuses high-resolution P2 features into the P3 path: SPD-downsample P2,
// concatenate with P3, and run the result through an OKM-CSP block.
struct AsfpConfig {
    int p2_channels = 0;
    int p3_channels = 0;
    int spd_channels = 0;  // 0 = same as p3_channels
    int out_channels = 0;
    double e = 0.25;
    int k_large = 7;
    int p3_height = 0;
    int p3_width = 0;
};

class AsfpFuseBlock {
  public:
    AsfpFuseBlock(const AsfpConfig& cfg, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& p2, const ad::Var& p3) const;
    Tensor forward(const Tensor& p2, const Tensor& p3) const;
    std::vector<ad::Var> params() const;
    const AsfpConfig& config() const { return cfg_; }

  private:
    AsfpConfig cfg_;
    SpdConvLayer spd_;
    OkmCspBlock okm_;
};

std::size_t dcam_param_count(int channels);
std::size_t fsam_param_count(int height, int width);
std::size_t omni_kernel_param_count(int channels, int k_large, int height, int width);
std::size_t okm_csp_param_count(const OkmCspConfig& cfg);
std::size_t spd_conv_param_count(const SpdConvConfig& cfg);
std::size_t asfp_param_count(const AsfpConfig& cfg);

std::uint64_t omni_kernel_flops(int channels, int k_large, const Dims& input);
std::uint64_t okm_csp_flops(const OkmCspConfig& cfg, const Dims& input);
std::uint64_t spd_conv_flops(const SpdConvConfig& cfg, const Dims& input);
std::uint64_t asfp_flops(const AsfpConfig& cfg, const Dims& p2_input);

}  // namespace odet
