#include "odet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace odet {

int same_padding(int kernel, int dilation) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("same padding requires an odd kernel, got " + std::to_string(kernel));
    }
    return dilation * (kernel - 1) / 2;
}

ConvSpec same_spec(int kh, int kw, int groups, int dilation) {
    return ConvSpec{1, same_padding(kh, dilation), same_padding(kw, dilation), dilation, groups};
}

namespace {

void validate_conv_args(const Dims& in, const Dims& k, std::span<const double> bias,
                        const ConvSpec& spec) {
    if (spec.stride < 1 || spec.dilation < 1 || spec.groups < 1 || spec.pad_h < 0 ||
        spec.pad_w < 0) {
        throw ValidationError("conv2d: invalid spec");
    }
    if (in[1] % spec.groups != 0 || k[0] % spec.groups != 0) {
        throw ShapeError("conv2d: groups must divide input and output channels");
    }
    if (k[1] != in[1] / spec.groups) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(k[1]) +
                         " channels per group, input provides " +
                         std::to_string(in[1] / spec.groups));
    }
    if (!bias.empty() && static_cast<int>(bias.size()) != k[0]) {
        throw ShapeError("conv2d: bias length must equal output channels");
    }
}

}  // namespace

Dims conv2d_output_dims(const Dims& input, const Dims& kernel, const ConvSpec& spec) {
    const int hout =
        (input[2] + 2 * spec.pad_h - spec.dilation * (kernel[2] - 1) - 1) / spec.stride + 1;
    const int wout =
        (input[3] + 2 * spec.pad_w - spec.dilation * (kernel[3] - 1) - 1) / spec.stride + 1;
    if (hout < 1 || wout < 1) {
        throw ShapeError("conv2d: output spatial dims collapse to zero for input " +
                         dims_to_string(input));
    }
    return Dims{input[0], kernel[0], hout, wout};
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const ConvSpec& spec) {
    validate_conv_args(input.dims(), kernel.dims(), bias, spec);
    require_finite(input, "conv2d input");
    require_finite(kernel, "conv2d kernel");
    if (!bias.empty()) require_finite(bias, "conv2d bias");

    const Dims out_dims = conv2d_output_dims(input.dims(), kernel.dims(), spec);
    Tensor out(out_dims);
    const int cout_per_group = out_dims[1] / spec.groups;
    const int cin_per_group = kernel.dims()[1];
    const int kh = kernel.h(), kw = kernel.w();
    const int hin = input.h(), win = input.w();
    const int hout = out_dims[2], wout = out_dims[3];
    const int stride = spec.stride, dil = spec.dilation;

    // First output index whose tap q*dil - pad stays inside [0, dim).
    const auto lo = [stride](int pad, int q, int dil_) {
        const int shift = pad - q * dil_;
        return shift <= 0 ? 0 : (shift + stride - 1) / stride;
    };
    // One past the last valid output index for that tap.
    const auto hi = [stride](int pad, int q, int dil_, int in_dim, int out_dim) {
        const int reach = in_dim - 1 + pad - q * dil_;
        return reach < 0 ? 0 : std::min(out_dim, reach / stride + 1);
    };

    const std::size_t in_plane = static_cast<std::size_t>(hin) * win;
    const std::size_t out_plane = static_cast<std::size_t>(hout) * wout;

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < out_dims[0]; ++n) {
        for (int co = 0; co < out_dims[1]; ++co) {
            const int ci_base = (co / cout_per_group) * cin_per_group;
            double* o = out.data() + (static_cast<std::size_t>(n) * out_dims[1] + co) * out_plane;
            const double b = bias.empty() ? 0.0 : bias[co];
            for (std::size_t i = 0; i < out_plane; ++i) o[i] = b;

            // Weight-outer accumulation keeps the x loop contiguous.
            const double* kbase =
                kernel.data() + static_cast<std::size_t>(co) * cin_per_group * kh * kw;
            for (int ci = 0; ci < cin_per_group; ++ci) {
                const double* in_base =
                    input.data() +
                    (static_cast<std::size_t>(n) * input.c() + ci_base + ci) * in_plane;
                for (int ky = 0; ky < kh; ++ky) {
                    const int y0 = lo(spec.pad_h, ky, dil);
                    const int y1 = hi(spec.pad_h, ky, dil, hin, hout);
                    for (int kx = 0; kx < kw; ++kx) {
                        const double w = kbase[(ci * kh + ky) * kw + kx];
                        const int x0 = lo(spec.pad_w, kx, dil);
                        const int x1 = hi(spec.pad_w, kx, dil, win, wout);
                        const int x_shift = kx * dil - spec.pad_w;
                        for (int y = y0; y < y1; ++y) {
                            const int iy = y * stride - spec.pad_h + ky * dil;
                            const double* row = in_base + static_cast<std::size_t>(iy) * win;
                            double* orow = o + static_cast<std::size_t>(y) * wout;
                            for (int x = x0; x < x1; ++x) {
                                orow[x] += w * row[x * stride + x_shift];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_vjp_input(const Tensor& kernel, const ConvSpec& spec, const Tensor& upstream,
                        const Dims& input_dims) {
    const int cout_per_group = upstream.c() / spec.groups;
    const int cin_per_group = kernel.dims()[1];
    Tensor dinput(input_dims);

    // Gather form: each input coordinate sums the outputs it feeds, which keeps
    // the parallel loop free of write conflicts.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < input_dims[0]; ++n) {
        for (int ci = 0; ci < input_dims[1]; ++ci) {
            const int group = ci / cin_per_group;
            const int ci_in_group = ci % cin_per_group;
            const int co_base = group * cout_per_group;
            for (int iy = 0; iy < input_dims[2]; ++iy) {
                for (int ix = 0; ix < input_dims[3]; ++ix) {
                    double acc = 0.0;
                    for (int ky = 0; ky < kernel.h(); ++ky) {
                        const int ny = iy + spec.pad_h - ky * spec.dilation;
                        if (ny < 0 || ny % spec.stride != 0) continue;
                        const int y = ny / spec.stride;
                        if (y >= upstream.h()) continue;
                        for (int kx = 0; kx < kernel.w(); ++kx) {
                            const int nx = ix + spec.pad_w - kx * spec.dilation;
                            if (nx < 0 || nx % spec.stride != 0) continue;
                            const int x = nx / spec.stride;
                            if (x >= upstream.w()) continue;
                            for (int co = 0; co < cout_per_group; ++co) {
                                acc += upstream.at(n, co_base + co, y, x) *
                                       kernel.at(co_base + co, ci_in_group, ky, kx);
                            }
                        }
                    }
                    dinput.at(n, ci, iy, ix) = acc;
                }
            }
        }
    }
    return dinput;
}

Tensor conv2d_vjp_kernel(const Tensor& input, const ConvSpec& spec, const Tensor& upstream,
                         const Dims& kernel_dims) {
    const int cout_per_group = upstream.c() / spec.groups;
    const int cin_per_group = kernel_dims[1];
    Tensor dkernel(kernel_dims);

#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < kernel_dims[0]; ++co) {
        for (int ci = 0; ci < cin_per_group; ++ci) {
            const int ci_abs = (co / cout_per_group) * cin_per_group + ci;
            for (int ky = 0; ky < kernel_dims[2]; ++ky) {
                for (int kx = 0; kx < kernel_dims[3]; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < upstream.n(); ++n) {
                        for (int y = 0; y < upstream.h(); ++y) {
                            const int iy = y * spec.stride - spec.pad_h + ky * spec.dilation;
                            if (iy < 0 || iy >= input.h()) continue;
                            for (int x = 0; x < upstream.w(); ++x) {
                                const int ix =
                                    x * spec.stride - spec.pad_w + kx * spec.dilation;
                                if (ix < 0 || ix >= input.w()) continue;
                                acc += upstream.at(n, co, y, x) * input.at(n, ci_abs, iy, ix);
                            }
                        }
                    }
                    dkernel.at(co, ci, ky, kx) = acc;
                }
            }
        }
    }
    return dkernel;
}

std::vector<double> conv2d_vjp_bias(const Tensor& upstream) {
    std::vector<double> dbias(static_cast<std::size_t>(upstream.c()), 0.0);
    for (int n = 0; n < upstream.n(); ++n) {
        for (int co = 0; co < upstream.c(); ++co) {
            double acc = 0.0;
            for (int y = 0; y < upstream.h(); ++y) {
                for (int x = 0; x < upstream.w(); ++x) acc += upstream.at(n, co, y, x);
            }
            dbias[co] += acc;
        }
    }
    return dbias;
}

ConvVjp conv2d_vjp(const Tensor& input, const Tensor& kernel, const ConvSpec& spec,
                   const Tensor& upstream) {
    validate_conv_args(input.dims(), kernel.dims(), {}, spec);
    const Dims out_dims = conv2d_output_dims(input.dims(), kernel.dims(), spec);
    if (upstream.dims() != out_dims) {
        throw ShapeError("conv2d_vjp: upstream dims " + dims_to_string(upstream.dims()) +
                         " do not match output dims " + dims_to_string(out_dims));
    }
    ConvVjp vjp;
    vjp.dinput = conv2d_vjp_input(kernel, spec, upstream, input.dims());
    vjp.dkernel = conv2d_vjp_kernel(input, spec, upstream, kernel.dims());
    vjp.dbias = conv2d_vjp_bias(upstream);
    return vjp;
}

Tensor global_avg_pool(const Tensor& input) {
    Tensor out(Dims{input.n(), input.c(), 1, 1});
    const double inv = 1.0 / (static_cast<double>(input.h()) * input.w());
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            double acc = 0.0;
            for (int y = 0; y < input.h(); ++y) {
                for (int x = 0; x < input.w(); ++x) acc += input.at(n, c, y, x);
            }
            out.at(n, c, 0, 0) = acc * inv;
        }
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValidationError("softmax: empty input");
    require_finite(logits, "softmax");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

Tensor softmax_channels(const Tensor& logits) {
    if (logits.h() != 1 || logits.w() != 1) {
        throw ShapeError("softmax_channels expects (N, C, 1, 1)");
    }
    Tensor out(logits.dims());
    for (int n = 0; n < logits.n(); ++n) {
        std::span<const double> row(logits.data() + logits.offset(n, 0, 0, 0),
                                    static_cast<std::size_t>(logits.c()));
        auto probs = softmax(row);
        std::copy(probs.begin(), probs.end(), out.data() + out.offset(n, 0, 0, 0));
    }
    return out;
}

Tensor haar_analysis_packed(const Tensor& input) {
    if (input.h() % 2 != 0 || input.w() % 2 != 0) {
        throw ShapeError("haar analysis requires even spatial dims, got " +
                         dims_to_string(input.dims()));
    }
    const int hh = input.h() / 2, hw = input.w() / 2;
    const int c = input.c();
    Tensor out(Dims{input.n(), 4 * c, hh, hw});

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < input.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < hh; ++y) {
                for (int x = 0; x < hw; ++x) {
                    const double a = input.at(n, ch, 2 * y, 2 * x);
                    const double b = input.at(n, ch, 2 * y, 2 * x + 1);
                    const double cc = input.at(n, ch, 2 * y + 1, 2 * x);
                    const double d = input.at(n, ch, 2 * y + 1, 2 * x + 1);
                    out.at(n, ch, y, x) = 0.5 * (a + b + cc + d);           // LL
                    out.at(n, c + ch, y, x) = 0.5 * (a - b + cc - d);       // LH
                    out.at(n, 2 * c + ch, y, x) = 0.5 * (a + b - cc - d);   // HL
                    out.at(n, 3 * c + ch, y, x) = 0.5 * (a - b - cc + d);   // HH
                }
            }
        }
    }
    return out;
}

Tensor haar_synthesis_packed(const Tensor& packed) {
    if (packed.c() % 4 != 0) {
        throw ShapeError("haar synthesis expects 4k packed channels, got " +
                         dims_to_string(packed.dims()));
    }
    const int c = packed.c() / 4;
    Tensor out(Dims{packed.n(), c, packed.h() * 2, packed.w() * 2});

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < packed.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < packed.h(); ++y) {
                for (int x = 0; x < packed.w(); ++x) {
                    const double ll = packed.at(n, ch, y, x);
                    const double lh = packed.at(n, c + ch, y, x);
                    const double hl = packed.at(n, 2 * c + ch, y, x);
                    const double hh = packed.at(n, 3 * c + ch, y, x);
                    out.at(n, ch, 2 * y, 2 * x) = 0.5 * (ll + lh + hl + hh);
                    out.at(n, ch, 2 * y, 2 * x + 1) = 0.5 * (ll - lh + hl - hh);
                    out.at(n, ch, 2 * y + 1, 2 * x) = 0.5 * (ll + lh - hl - hh);
                    out.at(n, ch, 2 * y + 1, 2 * x + 1) = 0.5 * (ll - lh - hl + hh);
                }
            }
        }
    }
    return out;
}

Tensor replicate_pad_rb(const Tensor& input, int pad_h, int pad_w) {
    if (pad_h < 0 || pad_h > 1 || pad_w < 0 || pad_w > 1) {
        throw ValidationError("replicate_pad_rb supports pads of 0 or 1");
    }
    Tensor out(Dims{input.n(), input.c(), input.h() + pad_h, input.w() + pad_w});
    for (int n = 0; n < out.n(); ++n) {
        for (int c = 0; c < out.c(); ++c) {
            for (int y = 0; y < out.h(); ++y) {
                const int sy = std::min(y, input.h() - 1);
                for (int x = 0; x < out.w(); ++x) {
                    const int sx = std::min(x, input.w() - 1);
                    out.at(n, c, y, x) = input.at(n, c, sy, sx);
                }
            }
        }
    }
    return out;
}

Tensor replicate_pad_rb_adjoint(const Tensor& upstream, int pad_h, int pad_w) {
    Tensor out(Dims{upstream.n(), upstream.c(), upstream.h() - pad_h, upstream.w() - pad_w});
    for (int n = 0; n < upstream.n(); ++n) {
        for (int c = 0; c < upstream.c(); ++c) {
            for (int y = 0; y < upstream.h(); ++y) {
                const int sy = std::min(y, out.h() - 1);
                for (int x = 0; x < upstream.w(); ++x) {
                    const int sx = std::min(x, out.w() - 1);
                    out.at(n, c, sy, sx) += upstream.at(n, c, y, x);
                }
            }
        }
    }
    return out;
}

Tensor crop_hw(const Tensor& input, int out_h, int out_w) {
    if (out_h > input.h() || out_w > input.w() || out_h < 1 || out_w < 1) {
        throw ShapeError("crop_hw: invalid crop");
    }
    Tensor out(Dims{input.n(), input.c(), out_h, out_w});
    for (int n = 0; n < out.n(); ++n) {
        for (int c = 0; c < out.c(); ++c) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) out.at(n, c, y, x) = input.at(n, c, y, x);
            }
        }
    }
    return out;
}

Tensor crop_hw_adjoint(const Tensor& upstream, int in_h, int in_w) {
    Tensor out(Dims{upstream.n(), upstream.c(), in_h, in_w});
    for (int n = 0; n < upstream.n(); ++n) {
        for (int c = 0; c < upstream.c(); ++c) {
            for (int y = 0; y < upstream.h(); ++y) {
                for (int x = 0; x < upstream.w(); ++x) out.at(n, c, y, x) = upstream.at(n, c, y, x);
            }
        }
    }
    return out;
}

Tensor space_to_depth(const Tensor& input, int scale) {
    if (scale < 1) throw ValidationError("space_to_depth: scale must be positive");
    if (input.h() % scale != 0 || input.w() % scale != 0) {
        throw ShapeError("space_to_depth: spatial dims " + dims_to_string(input.dims()) +
                         " not divisible by scale " + std::to_string(scale));
    }
    Tensor out(Dims{input.n(), input.c() * scale * scale, input.h() / scale, input.w() / scale});
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int dy = 0; dy < scale; ++dy) {
                for (int dx = 0; dx < scale; ++dx) {
                    const int oc = c * scale * scale + dy * scale + dx;
                    for (int y = 0; y < out.h(); ++y) {
                        for (int x = 0; x < out.w(); ++x) {
                            out.at(n, oc, y, x) = input.at(n, c, y * scale + dy, x * scale + dx);
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor depth_to_space(const Tensor& input, int scale) {
    if (input.c() % (scale * scale) != 0) {
        throw ShapeError("depth_to_space: channels not divisible by scale^2");
    }
    Tensor out(
        Dims{input.n(), input.c() / (scale * scale), input.h() * scale, input.w() * scale});
    for (int n = 0; n < out.n(); ++n) {
        for (int c = 0; c < out.c(); ++c) {
            for (int dy = 0; dy < scale; ++dy) {
                for (int dx = 0; dx < scale; ++dx) {
                    const int ic = c * scale * scale + dy * scale + dx;
                    for (int y = 0; y < input.h(); ++y) {
                        for (int x = 0; x < input.w(); ++x) {
                            out.at(n, c, y * scale + dy, x * scale + dx) = input.at(n, ic, y, x);
                        }
                    }
                }
            }
        }
    }
    return out;
}

namespace {

// Separable unitary DFT of one plane. dir = -1 forward, +1 inverse.
void dft2_plane(const double* re_in, const double* im_in, double* re_out, double* im_out, int h,
                int w, int dir) {
    std::vector<double> row_re(static_cast<std::size_t>(h) * w), row_im(row_re.size());
    const double wh = 2.0 * std::numbers::pi / w;
    for (int y = 0; y < h; ++y) {
        for (int v = 0; v < w; ++v) {
            double ar = 0.0, ai = 0.0;
            for (int x = 0; x < w; ++x) {
                const double ang = dir * wh * v * x;
                const double cs = std::cos(ang), sn = std::sin(ang);
                const double xr = re_in[y * w + x];
                const double xi = im_in ? im_in[y * w + x] : 0.0;
                ar += xr * cs - xi * sn;
                ai += xr * sn + xi * cs;
            }
            row_re[y * w + v] = ar;
            row_im[y * w + v] = ai;
        }
    }
    const double whh = 2.0 * std::numbers::pi / h;
    const double norm = 1.0 / std::sqrt(static_cast<double>(h) * w);
    for (int v = 0; v < w; ++v) {
        for (int u = 0; u < h; ++u) {
            double ar = 0.0, ai = 0.0;
            for (int y = 0; y < h; ++y) {
                const double ang = dir * whh * u * y;
                const double cs = std::cos(ang), sn = std::sin(ang);
                ar += row_re[y * w + v] * cs - row_im[y * w + v] * sn;
                ai += row_re[y * w + v] * sn + row_im[y * w + v] * cs;
            }
            re_out[u * w + v] = ar * norm;
            im_out[u * w + v] = ai * norm;
        }
    }
}

}  // namespace

Dft2 dft2(const Tensor& input) {
    Dft2 out{Tensor(input.dims()), Tensor(input.dims())};
    const int planes = input.n() * input.c();
    const std::size_t plane = static_cast<std::size_t>(input.h()) * input.w();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        dft2_plane(input.data() + p * plane, nullptr, out.re.data() + p * plane,
                   out.im.data() + p * plane, input.h(), input.w(), -1);
    }
    return out;
}

Tensor idft2_real(const Tensor& re, const Tensor& im) {
    require_same_dims(re, im, "idft2_real");
    Tensor out(re.dims());
    Tensor scratch_im(re.dims());
    const int planes = re.n() * re.c();
    const std::size_t plane = static_cast<std::size_t>(re.h()) * re.w();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        dft2_plane(re.data() + p * plane, im.data() + p * plane, out.data() + p * plane,
                   scratch_im.data() + p * plane, re.h(), re.w(), +1);
    }
    return out;
}

namespace {

void validate_gate(const Tensor& input, const Tensor& gate) {
    if (gate.n() != 1 || gate.c() != 1 || gate.h() != input.h() || gate.w() != input.w()) {
        throw ShapeError("fsam gate dims " + dims_to_string(gate.dims()) +
                         " do not match input " + dims_to_string(input.dims()));
    }
}

}  // namespace

Tensor fsam_filter(const Tensor& input, const Tensor& gate) {
    validate_gate(input, gate);
    Dft2 f = dft2(input);
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < input.h(); ++y) {
                for (int x = 0; x < input.w(); ++x) {
                    const double g = gate.at(0, 0, y, x);
                    f.re.at(n, c, y, x) *= g;
                    f.im.at(n, c, y, x) *= g;
                }
            }
        }
    }
    return idft2_real(f.re, f.im);
}

Tensor fsam_filter_vjp_gate(const Tensor& input, const Tensor& gate, const Tensor& upstream) {
    validate_gate(input, gate);
    require_same_dims(input, upstream, "fsam_filter_vjp_gate");
    Dft2 fx = dft2(input);
    Dft2 fu = dft2(upstream);
    Tensor dgate(gate.dims());
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < input.h(); ++y) {
                for (int x = 0; x < input.w(); ++x) {
                    // d<u, Y>/dg(k) = Re(conj(U_k) X_k)
                    dgate.at(0, 0, y, x) += fu.re.at(n, c, y, x) * fx.re.at(n, c, y, x) +
                                            fu.im.at(n, c, y, x) * fx.im.at(n, c, y, x);
                }
            }
        }
    }
    return dgate;
}

namespace {

struct LowFreq {
    double re01, im01, re10, im10;
};

LowFreq low_freq_components(const Tensor& input, int n, int c) {
    const int h = input.h(), w = input.w();
    const double norm = 1.0 / std::sqrt(static_cast<double>(h) * w);
    LowFreq f{0, 0, 0, 0};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = input.at(n, c, y, x);
            const double ax = 2.0 * std::numbers::pi * x / w;
            const double ay = 2.0 * std::numbers::pi * y / h;
            f.re01 += v * std::cos(ax);
            f.im01 -= v * std::sin(ax);
            f.re10 += v * std::cos(ay);
            f.im10 -= v * std::sin(ay);
        }
    }
    f.re01 *= norm;
    f.im01 *= norm;
    f.re10 *= norm;
    f.im10 *= norm;
    return f;
}

}  // namespace

Tensor dcam_descriptor(const Tensor& input) {
    const int c = input.c();
    Tensor out(Dims{input.n(), 2 * c, 1, 1});
    const double inv = 1.0 / (static_cast<double>(input.h()) * input.w());
    for (int n = 0; n < input.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            double mean = 0.0;
            for (int y = 0; y < input.h(); ++y) {
                for (int x = 0; x < input.w(); ++x) mean += input.at(n, ch, y, x);
            }
            out.at(n, ch, 0, 0) = mean * inv;
            const LowFreq f = low_freq_components(input, n, ch);
            out.at(n, c + ch, 0, 0) =
                std::sqrt(f.re01 * f.re01 + f.im01 * f.im01 + f.re10 * f.re10 + f.im10 * f.im10);
        }
    }
    return out;
}

Tensor dcam_descriptor_vjp(const Tensor& input, const Tensor& upstream) {
    const int c = input.c();
    if (upstream.c() != 2 * c || upstream.h() != 1 || upstream.w() != 1) {
        throw ShapeError("dcam_descriptor_vjp: upstream dims mismatch");
    }
    Tensor dinput(input.dims());
    const int h = input.h(), w = input.w();
    const double inv = 1.0 / (static_cast<double>(h) * w);
    const double norm = 1.0 / std::sqrt(static_cast<double>(h) * w);
    for (int n = 0; n < input.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const double g_mean = upstream.at(n, ch, 0, 0);
            const double g_mag = upstream.at(n, c + ch, 0, 0);
            const LowFreq f = low_freq_components(input, n, ch);
            const double mag =
                std::sqrt(f.re01 * f.re01 + f.im01 * f.im01 + f.re10 * f.re10 + f.im10 * f.im10);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double g = g_mean * inv;
                    if (mag > 0.0) {
                        const double ax = 2.0 * std::numbers::pi * x / w;
                        const double ay = 2.0 * std::numbers::pi * y / h;
                        const double dmag = (f.re01 * std::cos(ax) - f.im01 * std::sin(ax) +
                                             f.re10 * std::cos(ay) - f.im10 * std::sin(ay)) *
                                            norm / mag;
                        g += g_mag * dmag;
                    }
                    dinput.at(n, ch, y, x) += g;
                }
            }
        }
    }
    return dinput;
}

}  // namespace odet
