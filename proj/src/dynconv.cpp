#include "odet/dynconv.hpp"

#include <cmath>


namespace odet {

namespace {
const ConvSpec kPointwise = pointwise_spec();
}

int default_coeff_hidden(int channels, int experts) {
    return std::max(experts, (channels + 3) / 4);
}

CoeffHead::CoeffHead(int in, int hidden, int experts, std::mt19937_64& rng)
    : in_(in), hidden_(hidden), experts_(experts) {
    if (in < 1 || hidden < 1 || experts < 1) throw ConfigError("CoeffHead: invalid widths");
    w1_ = make_conv_weight(hidden, in, 1, rng);
    b1_ = make_bias(hidden, rng);
    w2_ = make_conv_weight(experts, hidden, 1, rng);
    b2_ = make_bias(experts, rng);
}

ad::Var CoeffHead::apply(const ad::Var& pooled) const {
    if (pooled.val().c() != in_) {
        throw ShapeError("CoeffHead: pooled vector has " + std::to_string(pooled.val().c()) +
                         " channels, head expects " + std::to_string(in_));
    }
    ad::Var h = ad::relu(ad::conv(pooled, w1_, b1_, kPointwise));
    return ad::conv(h, w2_, b2_, kPointwise);
}

std::vector<ad::Var> CoeffHead::params() const { return {w1_, b1_, w2_, b2_}; }

std::size_t coeff_head_param_count(int in, int hidden, int experts) {
    return static_cast<std::size_t>(in) * hidden + hidden +
           static_cast<std::size_t>(hidden) * experts + experts;
}

DynamicConvLayer::DynamicConvLayer(int in_ch, int out_ch, int kernel, int experts, int hidden,
                                   std::mt19937_64& rng, bool with_bias)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      head_(in_ch, hidden > 0 ? hidden : default_coeff_hidden(in_ch, experts), experts, rng) {
    if (experts < 1) throw ConfigError("DynamicConvLayer: expert count must be >= 1");
    for (int i = 0; i < experts; ++i) {
        experts_.push_back(make_conv_weight(out_ch, in_ch, kernel, rng));
    }
    if (with_bias) bias_ = make_bias(out_ch, rng);
}

ad::Var DynamicConvLayer::coefficients(const ad::Var& x) const {
    return ad::softmax_channels(head_.apply(ad::global_avg_pool(x)));
}

Tensor DynamicConvLayer::coefficients(const Tensor& x) const {
    return coefficients(ad::Var::constant(x)).val();
}

ad::Var DynamicConvLayer::apply_with(const ad::Var& x, const ad::Var& alpha) const {
    const ConvSpec spec = same_spec(kernel_, kernel_);
    return ad::dynamic_conv(x, experts_, bias_, alpha, spec);
}

ad::Var DynamicConvLayer::apply(const ad::Var& x) const {
    return apply_with(x, coefficients(x));
}

Tensor DynamicConvLayer::forward(const Tensor& x) const {
    return apply(ad::Var::constant(x)).val();
}

std::vector<ad::Var> DynamicConvLayer::params() const {
    std::vector<ad::Var> out = experts_;
    if (bias_) out.push_back(*bias_);
    auto h = head_.params();
    out.insert(out.end(), h.begin(), h.end());
    return out;
}

DynamicConvCounts dynamic_conv_param_count(int in_ch, int out_ch, int kernel, int experts,
                                           int hidden, bool with_bias) {
    if (hidden <= 0) hidden = default_coeff_hidden(in_ch, experts);
    DynamicConvCounts c;
    c.expert_bank = static_cast<std::size_t>(experts) * out_ch * in_ch * kernel * kernel;
    c.shared_bias = with_bias ? static_cast<std::size_t>(out_ch) : 0;
    c.head = coeff_head_param_count(in_ch, hidden, experts);
    return c;
}

std::uint64_t dynamic_conv_flops(int in_ch, int out_ch, int kernel, int experts, int hidden,
                                 const Dims& input) {
    if (hidden <= 0) hidden = default_coeff_hidden(in_ch, experts);
    const std::uint64_t n = input[0], h = input[2], w = input[3];
    const std::uint64_t k2 = static_cast<std::uint64_t>(kernel) * kernel;
    std::uint64_t total = 2 * k2 * static_cast<std::uint64_t>(in_ch) * out_ch * h * w * n *
                          static_cast<std::uint64_t>(experts);
    total += static_cast<std::uint64_t>(experts) * out_ch * h * w * n;  // mixture accumulate
    total += n * static_cast<std::uint64_t>(in_ch) * h * w;             // pooling
    total += 2 * n * (static_cast<std::uint64_t>(in_ch) * hidden +
                      static_cast<std::uint64_t>(hidden) * experts);    // head
    total += 4 * n * static_cast<std::uint64_t>(experts);               // softmax
    return total;
}

GhostModule::GhostModule(int in_ch, int out_ch, int primary_kernel, std::mt19937_64& rng,
                         bool dynamic_primary, int experts)
    : in_ch_(in_ch), out_ch_(out_ch), primary_kernel_(primary_kernel) {
    if (out_ch % 2 != 0) throw ConfigError("ghost_module: output width must be even");
    const int half = out_ch / 2;
    if (dynamic_primary) {
        primary_dynamic_.emplace(in_ch, half, primary_kernel, experts, 0, rng);
    } else {
        primary_w_ = make_conv_weight(half, in_ch, primary_kernel, rng);
        primary_b_ = make_bias(half, rng);
    }
    cheap_w_ = make_conv_weight(half, 1, 3, rng);
    cheap_b_ = make_bias(half, rng);
}

ad::Var GhostModule::apply(const ad::Var& x) const {
    const int half = out_ch_ / 2;
    ad::Var primary;
    if (primary_dynamic_) {
        primary = primary_dynamic_->apply(x);
    } else {
        primary = ad::conv(x, *primary_w_, primary_b_,
                           same_spec(primary_kernel_, primary_kernel_));
    }
    ad::Var cheap = ad::conv(primary, cheap_w_, cheap_b_, same_spec(3, 3, half));
    std::array<ad::Var, 2> parts{primary, cheap};
    return ad::concat_channels(parts);
}

Tensor GhostModule::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> GhostModule::params() const {
    std::vector<ad::Var> out;
    if (primary_dynamic_) {
        out = primary_dynamic_->params();
    } else {
        out = {*primary_w_, *primary_b_};
    }
    out.push_back(cheap_w_);
    out.push_back(cheap_b_);
    return out;
}

std::size_t ghost_param_count(int in_ch, int out_ch, int primary_kernel, bool dynamic_primary,
                              int experts, int hidden) {
    const std::size_t half = out_ch / 2;
    std::size_t total;
    if (dynamic_primary) {
        total = dynamic_conv_param_count(in_ch, static_cast<int>(half), primary_kernel, experts,
                                         hidden)
                    .total();
    } else {
        total = half * in_ch * primary_kernel * primary_kernel + half;
    }
    total += half * 9 + half;  // cheap depthwise 3x3 with bias
    return total;
}

std::uint64_t ghost_flops(int in_ch, int out_ch, int primary_kernel, const Dims& input) {
    const std::uint64_t n = input[0], h = input[2], w = input[3];
    const std::uint64_t half = out_ch / 2;
    std::uint64_t total = 2 * static_cast<std::uint64_t>(primary_kernel) * primary_kernel *
                          in_ch * half * h * w * n;
    total += 2 * 9 * half * h * w * n;  // depthwise 3x3
    return total;
}

C2fGdcBlock::C2fGdcBlock(const C2fGdcConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.out_channels % 2 != 0) {
        throw ConfigError("c2f_gdc: output width must be even for the channel split");
    }
    half_ = cfg.out_channels / 2;
    entry_w_ = make_conv_weight(2 * half_, cfg.in_channels, 1, rng);
    entry_b_ = make_bias(2 * half_, rng);
    for (int i = 0; i < cfg.bottlenecks; ++i) {
        Bottleneck b{
            DynamicConvLayer(half_, half_, cfg.kernel, cfg.experts, cfg.hidden, rng),
            std::nullopt,
            make_conv_weight(half_, half_, cfg.kernel, rng),
            make_bias(half_, rng)};
        if (cfg.second_dynamic) {
            b.dyn2.emplace(half_, half_, cfg.kernel, cfg.experts, cfg.hidden, rng);
        }
        bottlenecks_.push_back(std::move(b));
    }
    fuse_w_ = make_conv_weight(cfg.out_channels, (2 + cfg.bottlenecks) * half_, 1, rng);
    fuse_b_ = make_bias(cfg.out_channels, rng);
}

ad::Var C2fGdcBlock::apply(const ad::Var& x) const {
    if (x.val().c() != cfg_.in_channels) {
        throw ShapeError("c2f_gdc: input has " + std::to_string(x.val().c()) +
                         " channels, block expects " + std::to_string(cfg_.in_channels));
    }
    ad::Var t = ad::conv(x, entry_w_, entry_b_, kPointwise);
    std::vector<ad::Var> parts{ad::slice_channels(t, 0, half_),
                               ad::slice_channels(t, half_, half_)};
    ad::Var cur = parts[1];
    const ConvSpec outer = same_spec(cfg_.kernel, cfg_.kernel);
    for (const Bottleneck& b : bottlenecks_) {
        ad::Var z = ad::add(b.dyn1.apply(cur), cur);
        if (b.dyn2) z = b.dyn2->apply(z);
        cur = ad::add(ad::conv(z, b.outer_w, b.outer_b, outer), cur);
        parts.push_back(cur);
    }
    return ad::conv(ad::concat_channels(parts), fuse_w_, fuse_b_, kPointwise);
}

Tensor C2fGdcBlock::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> C2fGdcBlock::params() const {
    std::vector<ad::Var> out{entry_w_, entry_b_};
    for (const Bottleneck& b : bottlenecks_) {
        auto d = b.dyn1.params();
        out.insert(out.end(), d.begin(), d.end());
        if (b.dyn2) {
            auto d2 = b.dyn2->params();
            out.insert(out.end(), d2.begin(), d2.end());
        }
        out.push_back(b.outer_w);
        out.push_back(b.outer_b);
    }
    out.push_back(fuse_w_);
    out.push_back(fuse_b_);
    return out;
}

std::size_t c2f_gdc_param_count(const C2fGdcConfig& cfg) {
    const std::size_t half = cfg.out_channels / 2;
    std::size_t total = static_cast<std::size_t>(cfg.in_channels) * 2 * half + 2 * half;
    const std::size_t dyn = dynamic_conv_param_count(static_cast<int>(half),
                                                     static_cast<int>(half), cfg.kernel,
                                                     cfg.experts, cfg.hidden)
                                .total();
    for (int i = 0; i < cfg.bottlenecks; ++i) {
        total += dyn;
        if (cfg.second_dynamic) total += dyn;
        total += half * half * cfg.kernel * cfg.kernel + half;  // outer conv
    }
    total += (2 + cfg.bottlenecks) * half * cfg.out_channels + cfg.out_channels;
    return total;
}

std::uint64_t c2f_gdc_flops(const C2fGdcConfig& cfg, const Dims& input) {
    const std::uint64_t n = input[0], h = input[2], w = input[3];
    const std::uint64_t half = cfg.out_channels / 2;
    const std::uint64_t hw = h * w * n;
    const Dims half_dims{input[0], static_cast<int>(half), input[2], input[3]};
    std::uint64_t total = 2 * static_cast<std::uint64_t>(cfg.in_channels) * 2 * half * hw;
    const std::uint64_t dyn = dynamic_conv_flops(static_cast<int>(half), static_cast<int>(half),
                                                 cfg.kernel, cfg.experts, cfg.hidden, half_dims);
    for (int i = 0; i < cfg.bottlenecks; ++i) {
        total += dyn + half * hw;  // dyn1 + residual add
        if (cfg.second_dynamic) total += dyn;
        total += 2 * static_cast<std::uint64_t>(cfg.kernel) * cfg.kernel * half * half * hw;
        total += half * hw;  // outer residual add
    }
    total += 2 * (2 + cfg.bottlenecks) * half * cfg.out_channels * hw;
    return total;
}

}  // namespace odet
