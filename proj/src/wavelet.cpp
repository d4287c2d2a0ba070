#include "odet/wavelet.hpp"

#include <cmath>

namespace odet {

namespace {

Tensor slice_band(const Tensor& packed, int band) {
    const int c = packed.c() / 4;
    Tensor out(Dims{packed.n(), c, packed.h(), packed.w()});
    for (int n = 0; n < packed.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < packed.h(); ++y) {
                for (int x = 0; x < packed.w(); ++x) {
                    out.at(n, ch, y, x) = packed.at(n, band * c + ch, y, x);
                }
            }
        }
    }
    return out;
}

}  // namespace

SubBands haar_wt(const Tensor& x, bool pad_odd) {
    Tensor src = x;
    if (x.h() % 2 != 0 || x.w() % 2 != 0) {
        if (!pad_odd) {
            throw ShapeError("haar_wt: odd spatial dims " + dims_to_string(x.dims()) +
                             " need pad_odd");
        }
        src = replicate_pad_rb(x, x.h() % 2, x.w() % 2);
    }
    Tensor packed = haar_analysis_packed(src);
    return unpack_bands(packed);
}

Tensor haar_iwt(const SubBands& bands) {
    require_same_dims(bands.ll, bands.lh, "haar_iwt");
    require_same_dims(bands.ll, bands.hl, "haar_iwt");
    require_same_dims(bands.ll, bands.hh, "haar_iwt");
    return haar_synthesis_packed(pack_bands(bands));
}

Tensor pack_bands(const SubBands& bands) {
    const Dims d = bands.ll.dims();
    Tensor packed(Dims{d[0], 4 * d[1], d[2], d[3]});
    const Tensor* srcs[4] = {&bands.ll, &bands.lh, &bands.hl, &bands.hh};
    for (int band = 0; band < 4; ++band) {
        for (int n = 0; n < d[0]; ++n) {
            for (int c = 0; c < d[1]; ++c) {
                for (int y = 0; y < d[2]; ++y) {
                    for (int x = 0; x < d[3]; ++x) {
                        packed.at(n, band * d[1] + c, y, x) = srcs[band]->at(n, c, y, x);
                    }
                }
            }
        }
    }
    return packed;
}

SubBands unpack_bands(const Tensor& packed) {
    if (packed.c() % 4 != 0) throw ShapeError("unpack_bands: channels not divisible by 4");
    return SubBands{slice_band(packed, 0), slice_band(packed, 1), slice_band(packed, 2),
                    slice_band(packed, 3)};
}

double subbands_sum_squares(const SubBands& bands) {
    return sum_squares(bands.ll) + sum_squares(bands.lh) + sum_squares(bands.hl) +
           sum_squares(bands.hh);
}

WaveletPyramid wt_cascade(const Tensor& x, int levels, bool pad_odd) {
    if (levels < 0) throw ValidationError("wt_cascade: negative level count");
    WaveletPyramid p;
    p.levels = levels;
    p.residual_ll = x;
    Tensor cur = x;
    for (int i = 0; i < levels; ++i) {
        p.level_input_hw.push_back({cur.h(), cur.w()});
        SubBands bands = haar_wt(cur, pad_odd);
        cur = bands.ll;
        p.residual_ll = bands.ll;
        p.bands.push_back(std::move(bands));
    }
    return p;
}

Tensor wt_cascade_inverse(const WaveletPyramid& pyramid) {
    Tensor cur = pyramid.residual_ll;
    for (int i = pyramid.levels - 1; i >= 0; --i) {
        const SubBands& b = pyramid.bands[i];
        Tensor rec = haar_iwt(SubBands{cur, b.lh, b.hl, b.hh});
        const auto [oh, ow] = pyramid.level_input_hw[i];
        if (rec.h() != oh || rec.w() != ow) rec = crop_hw(rec, oh, ow);
        cur = std::move(rec);
    }
    return cur;
}

WtConvWeights make_wtconv_weights(int channels, int kernel, int levels, std::mt19937_64& rng) {
    WtConvWeights w;
    w.base = Tensor(Dims{channels, 1, kernel, kernel});
    fill_normal(w.base, rng, 0.0, 1.0 / kernel);
    for (int i = 0; i < levels; ++i) {
        Tensor bk(Dims{4 * channels, 1, kernel, kernel});
        fill_normal(bk, rng, 0.0, 1.0 / kernel);
        w.band_kernels.push_back(std::move(bk));
    }
    return w;
}

ad::Var wtconv_apply(const ad::Var& x, const ad::Var& base,
                     std::span<const ad::Var> band_kernels) {
    const int channels = x.val().c();
    const int kernel = base.val().h();
    if (base.val().n() != channels || base.val().c() != 1) {
        throw ShapeError("wtconv: base kernel must be depthwise (C, 1, k, k)");
    }
    for (const ad::Var& bk : band_kernels) {
        if (bk.val().n() != 4 * channels || bk.val().c() != 1 || bk.val().h() != kernel) {
            throw ShapeError("wtconv: band kernels must be (4C, 1, k, k)");
        }
    }
    const int levels = static_cast<int>(band_kernels.size());
    const ConvSpec dw_base = same_spec(kernel, kernel, channels);
    const ConvSpec dw_band = same_spec(kernel, kernel, 4 * channels);

    ad::Var base_out = ad::conv(x, base, std::nullopt, dw_base);
    if (levels == 0) return base_out;

    // Analysis: decompose the (unconvolved) low band, convolving all four
    // sub-bands of every level with their own kernels.
    ad::Var cur = x;
    std::vector<ad::Var> conved;
    std::vector<std::array<int, 2>> input_hw;
    for (int i = 0; i < levels; ++i) {
        input_hw.push_back({cur.val().h(), cur.val().w()});
        if (cur.val().h() % 2 != 0 || cur.val().w() % 2 != 0) {
            cur = ad::replicate_pad_rb(cur, cur.val().h() % 2, cur.val().w() % 2);
        }
        ad::Var packed = ad::haar_wt_packed(cur);
        conved.push_back(ad::conv(packed, band_kernels[i], std::nullopt, dw_band));
        cur = ad::slice_channels(packed, 0, channels);
    }

    // Synthesis: deeper reconstructions feed into the low band one level up.
    ad::Var acc;
    for (int i = levels - 1; i >= 0; --i) {
        ad::Var ll = ad::slice_channels(conved[i], 0, channels);
        if (acc.defined()) ll = ad::add(ll, acc);
        ad::Var detail = ad::slice_channels(conved[i], channels, 3 * channels);
        std::array<ad::Var, 2> parts{ll, detail};
        ad::Var rec = ad::haar_iwt_packed(ad::concat_channels(parts));
        const auto [oh, ow] = input_hw[i];
        if (rec.val().h() != oh || rec.val().w() != ow) rec = ad::crop_hw(rec, oh, ow);
        acc = rec;
    }
    return ad::add(base_out, acc);
}

Tensor wtconv(const Tensor& x, const WtConvWeights& weights) {
    ad::Var base = ad::Var::constant(weights.base);
    std::vector<ad::Var> bands;
    bands.reserve(weights.band_kernels.size());
    for (const Tensor& bk : weights.band_kernels) bands.push_back(ad::Var::constant(bk));
    return wtconv_apply(ad::Var::constant(x), base, bands).val();
}

std::size_t wtconv_param_count(int channels, int kernel, int levels) {
    const std::size_t k2 = static_cast<std::size_t>(kernel) * kernel;
    return static_cast<std::size_t>(channels) * k2 +
           static_cast<std::size_t>(levels) * 4 * channels * k2;
}

int wtconv_receptive_field(int kernel, int levels) { return kernel << levels; }

std::uint64_t wtconv_flops(int channels, int kernel, int levels, const Dims& input) {
    const std::uint64_t n = input[0], c = channels;
    const std::uint64_t k2 = static_cast<std::uint64_t>(kernel) * kernel;
    std::uint64_t h = input[2], w = input[3];
    std::uint64_t total = 2 * k2 * c * h * w * n;  // depthwise base conv
    for (int i = 0; i < levels; ++i) {
        const std::uint64_t ph = (h + 1) / 2, pw = (w + 1) / 2;
        total += 8 * n * c * (2 * ph) * (2 * pw);   // analysis
        total += 2 * k2 * 4 * c * ph * pw * n;      // band convolutions
        total += 8 * n * c * (2 * ph) * (2 * pw);   // synthesis
        total += n * c * ph * pw;                   // low-band accumulate
        h = ph;
        w = pw;
    }
    total += n * c * static_cast<std::uint64_t>(input[2]) * input[3];  // base + cascade add
    return total;
}

WtConvLayer::WtConvLayer(int channels, int kernel, int levels, std::mt19937_64& rng)
    : channels_(channels), kernel_(kernel), levels_(levels) {
    if (channels < 1 || kernel < 1 || levels < 0) {
        throw ConfigError("WtConvLayer: invalid configuration");
    }
    WtConvWeights w = make_wtconv_weights(channels, kernel, levels, rng);
    base_ = ad::Var::leaf(std::move(w.base));
    for (Tensor& bk : w.band_kernels) band_kernels_.push_back(ad::Var::leaf(std::move(bk)));
}

ad::Var WtConvLayer::apply(const ad::Var& x) const {
    return wtconv_apply(x, base_, band_kernels_);
}

Tensor WtConvLayer::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> WtConvLayer::params() const {
    std::vector<ad::Var> out{base_};
    out.insert(out.end(), band_kernels_.begin(), band_kernels_.end());
    return out;
}

C2fWtcBlock::C2fWtcBlock(const C2fWtcConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.out_channels % 2 != 0) {
        throw ConfigError("c2f_wtc: output width must be even for the channel split");
    }
    half_ = cfg.out_channels / 2;
    mid_ = static_cast<int>(half_ * cfg.reduction);
    if (mid_ < 1 || half_ % 2 != 0) {
        throw ConfigError("c2f_wtc: bottleneck reduce width collapses; widen the block");
    }
    entry_w_ = make_conv_weight(2 * half_, cfg.in_channels, 1, rng);
    entry_b_ = make_bias(2 * half_, rng);
    for (int i = 0; i < cfg.bottlenecks; ++i) {
        bottlenecks_.push_back(Bottleneck{
            make_conv_weight(mid_, half_, 1, rng), make_bias(mid_, rng),
            WtConvLayer(mid_, cfg.kernel, cfg.levels, rng),
            make_conv_weight(half_, mid_, 1, rng), make_bias(half_, rng)});
    }
    fuse_w_ = make_conv_weight(cfg.out_channels, (2 + cfg.bottlenecks) * half_, 1, rng);
    fuse_b_ = make_bias(cfg.out_channels, rng);
}

ad::Var C2fWtcBlock::apply(const ad::Var& x) const {
    if (x.val().c() != cfg_.in_channels) {
        throw ShapeError("c2f_wtc: input has " + std::to_string(x.val().c()) +
                         " channels, block expects " + std::to_string(cfg_.in_channels));
    }
    const ConvSpec pw = pointwise_spec();
    ad::Var t = ad::conv(x, entry_w_, entry_b_, pw);
    std::vector<ad::Var> parts{ad::slice_channels(t, 0, half_),
                               ad::slice_channels(t, half_, half_)};
    ad::Var cur = parts[1];
    for (const Bottleneck& b : bottlenecks_) {
        ad::Var h = ad::conv(cur, b.reduce_w, b.reduce_b, pw);
        h = b.wt.apply(h);
        h = ad::conv(h, b.expand_w, b.expand_b, pw);
        cur = ad::add(cur, h);
        parts.push_back(cur);
    }
    return ad::conv(ad::concat_channels(parts), fuse_w_, fuse_b_, pw);
}

Tensor C2fWtcBlock::forward(const Tensor& x) const { return apply(ad::Var::constant(x)).val(); }

std::vector<ad::Var> C2fWtcBlock::params() const {
    std::vector<ad::Var> out{entry_w_, entry_b_};
    for (const Bottleneck& b : bottlenecks_) {
        out.push_back(b.reduce_w);
        out.push_back(b.reduce_b);
        auto wt = b.wt.params();
        out.insert(out.end(), wt.begin(), wt.end());
        out.push_back(b.expand_w);
        out.push_back(b.expand_b);
    }
    out.push_back(fuse_w_);
    out.push_back(fuse_b_);
    return out;
}

std::size_t c2f_wtc_param_count(const C2fWtcConfig& cfg) {
    const std::size_t half = cfg.out_channels / 2;
    const std::size_t mid = static_cast<std::size_t>(half * cfg.reduction);
    std::size_t total = static_cast<std::size_t>(cfg.in_channels) * 2 * half + 2 * half;
    total += cfg.bottlenecks * (half * mid + mid +
                                wtconv_param_count(static_cast<int>(mid), cfg.kernel, cfg.levels) +
                                mid * half + half);
    total += (2 + cfg.bottlenecks) * half * cfg.out_channels + cfg.out_channels;
    return total;
}

std::uint64_t c2f_wtc_flops(const C2fWtcConfig& cfg, const Dims& input) {
    const std::uint64_t n = input[0], h = input[2], w = input[3];
    const std::uint64_t half = cfg.out_channels / 2;
    const std::uint64_t mid = static_cast<std::uint64_t>(half * cfg.reduction);
    const std::uint64_t hw = h * w * n;
    std::uint64_t total = 2 * static_cast<std::uint64_t>(cfg.in_channels) * 2 * half * hw;
    const Dims mid_dims{input[0], static_cast<int>(mid), input[2], input[3]};
    for (int i = 0; i < cfg.bottlenecks; ++i) {
        total += 2 * half * mid * hw;                                              // reduce
        total += wtconv_flops(static_cast<int>(mid), cfg.kernel, cfg.levels, mid_dims);
        total += 2 * mid * half * hw;                                              // expand
        total += half * hw;                                                        // residual
    }
    total += 2 * (2 + cfg.bottlenecks) * half * cfg.out_channels * hw;             // fuse
    return total;
}

}  // namespace odet
