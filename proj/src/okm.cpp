#include "odet/okm.hpp"

#include <cmath>


namespace odet {

int okm_branch_width(int channels, double e) {
    if (!(e > 0.0) || e > 1.0) {
        throw ValidationError("okm split ratio must lie in (0, 1], got " + std::to_string(e));
    }
    const int width = static_cast<int>(std::floor(channels * e));
    if (width < 1) {
        throw ValidationError("okm split of " + std::to_string(channels) + " channels at e=" +
                              std::to_string(e) + " leaves an empty branch");
    }
    return width;
}

std::pair<Tensor, Tensor> okm_split(const Tensor& x, double e) {
    const int branch = okm_branch_width(x.c(), e);
    if (branch >= x.c()) {
        throw ValidationError("okm split leaves no identity channels");
    }
    ad::Var v = ad::Var::constant(x);
    return {ad::slice_channels(v, 0, branch).val(),
            ad::slice_channels(v, branch, x.c() - branch).val()};
}

Tensor channel_concat(const Tensor& a, const Tensor& b) {
    std::array<ad::Var, 2> parts{ad::Var::constant(a), ad::Var::constant(b)};
    return ad::concat_channels(parts).val();
}

DcamModule::DcamModule(int channels, std::mt19937_64& rng) : channels_(channels) {
    w1_ = make_conv_weight(channels, 2 * channels, 1, rng);
    b1_ = make_bias(channels, rng);
    w2_ = make_conv_weight(channels, channels, 1, rng);
    b2_ = make_bias(channels, rng);
}

ad::Var DcamModule::apply(const ad::Var& x) const {
    if (x.val().c() != channels_) throw ShapeError("dcam: channel mismatch");
    ad::Var desc = ad::dcam_descriptor(x);
    ad::Var h = ad::relu(ad::conv(desc, w1_, b1_, pointwise_spec()));
    ad::Var gates = ad::sigmoid(ad::conv(h, w2_, b2_, pointwise_spec()));
    return ad::scale_channels(x, gates);
}

std::vector<ad::Var> DcamModule::params() const { return {w1_, b1_, w2_, b2_}; }

FsamModule::FsamModule(int height, int width, std::mt19937_64& rng) {
    Tensor g(Dims{1, 1, height, width});
    fill_normal(g, rng, 1.0, 0.1);
    gate_ = ad::Var::leaf(std::move(g));
}

ad::Var FsamModule::apply(const ad::Var& x) const { return ad::fsam_filter(x, gate_); }

std::vector<ad::Var> FsamModule::params() const { return {gate_}; }

OmniKernelModule::OmniKernelModule(int channels, int k_large, int height, int width,
                                   std::mt19937_64& rng)
    : channels_(channels), k_large_(k_large), dcam_(channels, rng), fsam_(height, width, rng) {
    if (k_large % 2 == 0) throw ConfigError("omni kernel: k_large must be odd");
    global_w_ = make_conv_weight(channels, channels, 1, rng);
    global_b_ = make_bias(channels, rng);
    large_square_ = make_conv_weight(channels, 1, k_large, rng);
    large_row_ = make_leaf_normal(Dims{channels, 1, 1, k_large}, 1.0 / k_large, rng);
    large_col_ = make_leaf_normal(Dims{channels, 1, k_large, 1}, 1.0 / k_large, rng);
    local_w_ = make_conv_weight(channels, 1, 3, rng);
    merge_w_ = make_conv_weight(channels, 3 * channels, 1, rng);
    merge_b_ = make_bias(channels, rng);
}

ad::Var OmniKernelModule::apply(const ad::Var& x) const {
    if (x.val().c() != channels_) {
        throw ShapeError("omni kernel: input has " + std::to_string(x.val().c()) +
                         " channels, module expects " + std::to_string(channels_));
    }
    ad::Var global = dcam_.apply(x);
    global = fsam_.apply(global);
    global = ad::conv(global, global_w_, global_b_, pointwise_spec());

    ad::Var large = ad::conv(x, large_square_, std::nullopt,
                             same_spec(k_large_, k_large_, channels_));
    large = ad::add(large, ad::conv(x, large_row_, std::nullopt,
                                    same_spec(1, k_large_, channels_)));
    large = ad::add(large, ad::conv(x, large_col_, std::nullopt,
                                    same_spec(k_large_, 1, channels_)));

    ad::Var local = ad::conv(x, local_w_, std::nullopt, same_spec(3, 3, channels_));

    std::array<ad::Var, 3> branches{global, large, local};
    return ad::conv(ad::concat_channels(branches), merge_w_, merge_b_, pointwise_spec());
}

Tensor OmniKernelModule::forward(const Tensor& x) const {
    return apply(ad::Var::constant(x)).val();
}

std::vector<ad::Var> OmniKernelModule::params() const {
    std::vector<ad::Var> out = dcam_.params();
    auto f = fsam_.params();
    out.insert(out.end(), f.begin(), f.end());
    out.push_back(global_w_);
    out.push_back(global_b_);
    out.push_back(large_square_);
    out.push_back(large_row_);
    out.push_back(large_col_);
    out.push_back(local_w_);
    out.push_back(merge_w_);
    out.push_back(merge_b_);
    return out;
}

OkmCspBlock::OkmCspBlock(const OkmCspConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      branch_(okm_branch_width(cfg.channels, cfg.e)),
      omni_(branch_, cfg.k_large, cfg.height, cfg.width, rng) {
    if (cfg.channels < 2) throw ConfigError("okm_csp: needs at least two channels");
    if (branch_ >= cfg.channels) throw ConfigError("okm_csp: split consumes all channels");
    const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.channels;
    cfg_.out_channels = out;
    fuse_w_ = make_conv_weight(out, cfg.channels, 1, rng);
    fuse_b_ = make_bias(out, rng);
}

ad::Var OkmCspBlock::apply(const ad::Var& x) const {
    if (x.val().c() != cfg_.channels) {
        throw ShapeError("okm_csp: input has " + std::to_string(x.val().c()) +
                         " channels, block expects " + std::to_string(cfg_.channels));
    }
    ad::Var heavy = ad::slice_channels(x, 0, branch_);
    ad::Var identity = ad::slice_channels(x, branch_, cfg_.channels - branch_);
    std::array<ad::Var, 2> parts{omni_.apply(heavy), identity};
    return ad::conv(ad::concat_channels(parts), fuse_w_, fuse_b_, pointwise_spec());
}

Tensor OkmCspBlock::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> OkmCspBlock::params() const {
    std::vector<ad::Var> out = omni_.params();
    out.push_back(fuse_w_);
    out.push_back(fuse_b_);
    return out;
}

SpdConvLayer::SpdConvLayer(const SpdConvConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.scale < 1) throw ConfigError("spd_conv: scale must be positive");
    w_ = make_conv_weight(cfg.out_channels, cfg.in_channels * cfg.scale * cfg.scale, cfg.kernel,
                          rng);
    b_ = make_bias(cfg.out_channels, rng);
}

ad::Var SpdConvLayer::apply(const ad::Var& x) const {
    if (x.val().c() != cfg_.in_channels) throw ShapeError("spd_conv: channel mismatch");
    ad::Var packed = ad::space_to_depth(x, cfg_.scale);
    return ad::conv(packed, w_, b_, same_spec(cfg_.kernel, cfg_.kernel));
}

Tensor SpdConvLayer::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> SpdConvLayer::params() const { return {w_, b_}; }

AsfpFuseBlock::AsfpFuseBlock(const AsfpConfig& cfg, std::mt19937_64& rng)
    : cfg_([&] {
          AsfpConfig c = cfg;
          if (c.spd_channels <= 0) c.spd_channels = c.p3_channels;
          if (c.out_channels <= 0) c.out_channels = c.p3_channels;
          return c;
      }()),
      spd_(SpdConvConfig{cfg_.p2_channels, cfg_.spd_channels, 2, 3}, rng),
      okm_(OkmCspConfig{cfg_.spd_channels + cfg_.p3_channels, cfg_.out_channels, cfg_.e,
                        cfg_.k_large, cfg_.p3_height, cfg_.p3_width},
           rng) {}

ad::Var AsfpFuseBlock::apply(const ad::Var& p2, const ad::Var& p3) const {
    if (p2.val().h() != 2 * p3.val().h() || p2.val().w() != 2 * p3.val().w()) {
        throw ShapeError("asfp_fuse: P2 spatial dims must be twice P3's, got " +
                         dims_to_string(p2.val().dims()) + " vs " +
                         dims_to_string(p3.val().dims()));
    }
    ad::Var distilled = spd_.apply(p2);
    std::array<ad::Var, 2> parts{distilled, p3};
    return okm_.apply(ad::concat_channels(parts));
}

Tensor AsfpFuseBlock::forward(const Tensor& p2, const Tensor& p3) const {
    return apply(ad::Var::constant(p2), ad::Var::constant(p3)).val();
}

std::vector<ad::Var> AsfpFuseBlock::params() const {
    std::vector<ad::Var> out = spd_.params();
    auto o = okm_.params();
    out.insert(out.end(), o.begin(), o.end());
    return out;
}

std::size_t dcam_param_count(int channels) {
    const std::size_t c = channels;
    return 2 * c * c + c + c * c + c;
}

std::size_t fsam_param_count(int height, int width) {
    return static_cast<std::size_t>(height) * width;
}

std::size_t omni_kernel_param_count(int channels, int k_large, int height, int width) {
    const std::size_t c = channels;
    std::size_t total = dcam_param_count(channels) + fsam_param_count(height, width);
    total += c * c + c;                                      // global 1x1
    total += c * k_large * k_large + c * k_large * 2;        // large square + strips
    total += c * 9;                                          // local depthwise 3x3
    total += 3 * c * c + c;                                  // merge 1x1
    return total;
}

std::size_t okm_csp_param_count(const OkmCspConfig& cfg) {
    const int branch = okm_branch_width(cfg.channels, cfg.e);
    const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.channels;
    return omni_kernel_param_count(branch, cfg.k_large, cfg.height, cfg.width) +
           static_cast<std::size_t>(cfg.channels) * out + out;
}

std::size_t spd_conv_param_count(const SpdConvConfig& cfg) {
    return static_cast<std::size_t>(cfg.out_channels) * cfg.in_channels * cfg.scale * cfg.scale *
               cfg.kernel * cfg.kernel +
           cfg.out_channels;
}

std::size_t asfp_param_count(const AsfpConfig& cfg) {
    const int spd_out = cfg.spd_channels > 0 ? cfg.spd_channels : cfg.p3_channels;
    const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.p3_channels;
    return spd_conv_param_count(SpdConvConfig{cfg.p2_channels, spd_out, 2, 3}) +
           okm_csp_param_count(OkmCspConfig{spd_out + cfg.p3_channels, out, cfg.e, cfg.k_large,
                                            cfg.p3_height, cfg.p3_width});
}

std::uint64_t omni_kernel_flops(int channels, int k_large, const Dims& input) {
    const std::uint64_t n = input[0], c = channels, h = input[2], w = input[3];
    const std::uint64_t hw = h * w * n;
    std::uint64_t total = 0;
    total += 9 * c * hw;                               // dcam descriptor
    total += 2 * n * (2 * c * c + c * c) + 4 * n * c;  // dcam head + sigmoid
    total += c * hw;                                   // dcam gating
    total += 2 * 8 * hw * c * (h + w) + 2 * hw * c;    // fsam dft passes + gate
    total += 2 * c * c * hw;                           // global 1x1
    total += 2 * static_cast<std::uint64_t>(k_large) * k_large * c * hw;
    total += 2 * static_cast<std::uint64_t>(k_large) * c * hw * 2;   // strips
    total += 2 * c * hw;                               // strip adds
    total += 2 * 9 * c * hw;                           // local 3x3
    total += 2 * 3 * c * c * hw;                       // merge 1x1
    return total;
}

std::uint64_t okm_csp_flops(const OkmCspConfig& cfg, const Dims& input) {
    const int branch = okm_branch_width(cfg.channels, cfg.e);
    const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.channels;
    const Dims branch_dims{input[0], branch, input[2], input[3]};
    const std::uint64_t hw =
        static_cast<std::uint64_t>(input[0]) * input[2] * input[3];
    return omni_kernel_flops(branch, cfg.k_large, branch_dims) +
           2 * static_cast<std::uint64_t>(cfg.channels) * out * hw;
}

std::uint64_t spd_conv_flops(const SpdConvConfig& cfg, const Dims& input) {
    const std::uint64_t n = input[0];
    const std::uint64_t oh = input[2] / cfg.scale, ow = input[3] / cfg.scale;
    return 2 * static_cast<std::uint64_t>(cfg.kernel) * cfg.kernel * cfg.in_channels *
           cfg.scale * cfg.scale * cfg.out_channels * oh * ow * n;
}

std::uint64_t asfp_flops(const AsfpConfig& cfg, const Dims& p2_input) {
    const int spd_out = cfg.spd_channels > 0 ? cfg.spd_channels : cfg.p3_channels;
    const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.p3_channels;
    const Dims p3_dims{p2_input[0], spd_out + cfg.p3_channels, p2_input[2] / 2,
                       p2_input[3] / 2};
    return spd_conv_flops(SpdConvConfig{cfg.p2_channels, spd_out, 2, 3}, p2_input) +
           okm_csp_flops(OkmCspConfig{spd_out + cfg.p3_channels, out, cfg.e, cfg.k_large,
                                      cfg.p3_height, cfg.p3_width},
                         p3_dims);
}

}  // namespace odet
