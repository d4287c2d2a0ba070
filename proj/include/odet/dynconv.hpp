#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "odet/autodiff.hpp"
#include "odet/tensor.hpp"

namespace odet {

// Two affine layers with a ReLU between, mapping a pooled channel vector of
// length `in` to `experts` logits. Layers are realized as 1x1 convolutions.
class CoeffHead {
  public:
    CoeffHead(int in, int hidden, int experts, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& pooled) const;  // (N, in, 1, 1) -> (N, M, 1, 1)
    std::vector<ad::Var> params() const;

    int in() const { return in_; }
    int hidden() const { return hidden_; }
    int experts() const { return experts_; }
    ad::Var& w1() { return w1_; }
    ad::Var& b1() { return b1_; }
    ad::Var& w2() { return w2_; }
    ad::Var& b2() { return b2_; }

  private:
    int in_, hidden_, experts_;
    ad::Var w1_, b1_, w2_, b2_;
};

int default_coeff_hidden(int channels, int experts);
std::size_t coeff_head_param_count(int in, int hidden, int experts);

// M expert kernels with identical dims plus an optional shared bias.
class DynamicConvLayer {
  public:
    DynamicConvLayer(int in_ch, int out_ch, int kernel, int experts, int hidden,
                     std::mt19937_64& rng, bool with_bias = true);

    // alpha = softmax(head(pool(x))), one row per sample.
    ad::Var coefficients(const ad::Var& x) const;
    Tensor coefficients(const Tensor& x) const;

    ad::Var apply(const ad::Var& x) const;
    // Mixture with caller-supplied coefficients (N, M, 1, 1).
    ad::Var apply_with(const ad::Var& x, const ad::Var& alpha) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }
    int kernel() const { return kernel_; }
    int experts() const { return static_cast<int>(experts_.size()); }
    std::vector<ad::Var>& expert_kernels() { return experts_; }
    const std::vector<ad::Var>& expert_kernels() const { return experts_; }
    CoeffHead& head() { return head_; }
    std::optional<ad::Var>& bias() { return bias_; }

  private:
    int in_ch_, out_ch_, kernel_;
    std::vector<ad::Var> experts_;
    std::optional<ad::Var> bias_;
    CoeffHead head_;
};

struct DynamicConvCounts {
    std::size_t expert_bank = 0;
    std::size_t shared_bias = 0;
    std::size_t head = 0;
    std::size_t total() const { return expert_bank + shared_bias + head; }
};
DynamicConvCounts dynamic_conv_param_count(int in_ch, int out_ch, int kernel, int experts,
                                           int hidden, bool with_bias = true);
std::uint64_t dynamic_conv_flops(int in_ch, int out_ch, int kernel, int experts, int hidden,
                                 const Dims& input);

// Half the output channels from a primary convolution, the other half from a
// cheap depthwise 3x3 over the primary half.
class GhostModule {
  public:
    GhostModule(int in_ch, int out_ch, int primary_kernel, std::mt19937_64& rng,
                bool dynamic_primary = false, int experts = 4);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;

    int out_channels() const { return out_ch_; }
    ad::Var& cheap_weight() { return cheap_w_; }
    ad::Var& cheap_bias() { return cheap_b_; }

  private:
    int in_ch_, out_ch_, primary_kernel_;
    std::optional<ad::Var> primary_w_, primary_b_;     // plain primary
    std::optional<DynamicConvLayer> primary_dynamic_;  // dynamic primary
    ad::Var cheap_w_, cheap_b_;
};

std::size_t ghost_param_count(int in_ch, int out_ch, int primary_kernel,
                              bool dynamic_primary = false, int experts = 4, int hidden = 0);
std::uint64_t ghost_flops(int in_ch, int out_ch, int primary_kernel, const Dims& input);

// Cross-stage-partial block whose bottlenecks mix expert convolutions:
//   y = conv(dyn1(x) + x) + x, per bottleneck, inside the usual split /
//   concat / fuse wrapper. A second dynamic convolution before the outer conv
//   is available behind a switch and disabled by default.
struct C2fGdcConfig {
    int in_channels = 0;
    int out_channels = 0;
    int bottlenecks = 1;
    int experts = 4;
    int kernel = 3;
    int hidden = 0;  // 0 = derived default
    bool second_dynamic = false;
};

class C2fGdcBlock {
  public:
    C2fGdcBlock(const C2fGdcConfig& cfg, std::mt19937_64& rng);

    ad::Var apply(const ad::Var& x) const;
    Tensor forward(const Tensor& x) const;
    std::vector<ad::Var> params() const;
    const C2fGdcConfig& config() const { return cfg_; }

  private:
    struct Bottleneck {
        DynamicConvLayer dyn1;
        std::optional<DynamicConvLayer> dyn2;
        ad::Var outer_w, outer_b;
    };
    C2fGdcConfig cfg_;
    int half_ = 0;
    ad::Var entry_w_, entry_b_;
    std::vector<Bottleneck> bottlenecks_;
    ad::Var fuse_w_, fuse_b_;
};

std::size_t c2f_gdc_param_count(const C2fGdcConfig& cfg);
std::uint64_t c2f_gdc_flops(const C2fGdcConfig& cfg, const Dims& input);

}  // namespace odet
