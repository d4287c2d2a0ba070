#include "odet/reference.hpp"

namespace odet::reference {

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const ConvSpec& spec) {
    const Dims out_dims = conv2d_output_dims(input.dims(), kernel.dims(), spec);
    Tensor out(out_dims);
    const int cout_per_group = out_dims[1] / spec.groups;
    const int cin_per_group = kernel.dims()[1];
    for (int n = 0; n < out_dims[0]; ++n) {
        for (int co = 0; co < out_dims[1]; ++co) {
            const int ci_base = (co / cout_per_group) * cin_per_group;
            const double b = bias.empty() ? 0.0 : bias[co];
            for (int y = 0; y < out_dims[2]; ++y) {
                for (int x = 0; x < out_dims[3]; ++x) {
                    double acc = b;
                    for (int ci = 0; ci < cin_per_group; ++ci) {
                        for (int ky = 0; ky < kernel.h(); ++ky) {
                            const int iy = y * spec.stride - spec.pad_h + ky * spec.dilation;
                            if (iy < 0 || iy >= input.h()) continue;
                            for (int kx = 0; kx < kernel.w(); ++kx) {
                                const int ix =
                                    x * spec.stride - spec.pad_w + kx * spec.dilation;
                                if (ix < 0 || ix >= input.w()) continue;
                                acc += input.at(n, ci_base + ci, iy, ix) *
                                       kernel.at(co, ci, ky, kx);
                            }
                        }
                    }
                    out.at(n, co, y, x) = acc;
                }
            }
        }
    }
    return out;
}

ConvVjp conv2d_vjp(const Tensor& input, const Tensor& kernel, const ConvSpec& spec,
                   const Tensor& upstream) {
    ConvVjp vjp;
    vjp.dinput = Tensor(input.dims());
    vjp.dkernel = Tensor(kernel.dims());
    vjp.dbias.assign(static_cast<std::size_t>(kernel.n()), 0.0);

    const int cout_per_group = upstream.c() / spec.groups;
    const int cin_per_group = kernel.dims()[1];
    // Scatter form: walk the forward loop once and push contributions back.
    for (int n = 0; n < upstream.n(); ++n) {
        for (int co = 0; co < upstream.c(); ++co) {
            const int ci_base = (co / cout_per_group) * cin_per_group;
            for (int y = 0; y < upstream.h(); ++y) {
                for (int x = 0; x < upstream.w(); ++x) {
                    const double up = upstream.at(n, co, y, x);
                    vjp.dbias[co] += up;
                    for (int ci = 0; ci < cin_per_group; ++ci) {
                        for (int ky = 0; ky < kernel.h(); ++ky) {
                            const int iy = y * spec.stride - spec.pad_h + ky * spec.dilation;
                            if (iy < 0 || iy >= input.h()) continue;
                            for (int kx = 0; kx < kernel.w(); ++kx) {
                                const int ix =
                                    x * spec.stride - spec.pad_w + kx * spec.dilation;
                                if (ix < 0 || ix >= input.w()) continue;
                                vjp.dinput.at(n, ci_base + ci, iy, ix) +=
                                    up * kernel.at(co, ci, ky, kx);
                                vjp.dkernel.at(co, ci, ky, kx) +=
                                    up * input.at(n, ci_base + ci, iy, ix);
                            }
                        }
                    }
                }
            }
        }
    }
    return vjp;
}

Tensor haar_analysis_packed(const Tensor& input) {
    const int hh = input.h() / 2, hw = input.w() / 2;
    const int c = input.c();
    Tensor out(Dims{input.n(), 4 * c, hh, hw});
    for (int n = 0; n < input.n(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < hh; ++y) {
                for (int x = 0; x < hw; ++x) {
                    const double a = input.at(n, ch, 2 * y, 2 * x);
                    const double b = input.at(n, ch, 2 * y, 2 * x + 1);
                    const double cc = input.at(n, ch, 2 * y + 1, 2 * x);
                    const double d = input.at(n, ch, 2 * y + 1, 2 * x + 1);
                    out.at(n, ch, y, x) = 0.5 * (a + b + cc + d);
                    out.at(n, c + ch, y, x) = 0.5 * (a - b + cc - d);
                    out.at(n, 2 * c + ch, y, x) = 0.5 * (a + b - cc - d);
                    out.at(n, 3 * c + ch, y, x) = 0.5 * (a - b - cc + d);
                }
            }
        }
    }
    return out;
}

Tensor haar_synthesis_packed(const Tensor& packed) {
    const int c = packed.c() / 4;
    Tensor out(Dims{packed.n(), c, packed.h() * 2, packed.w() * 2});
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

}  // namespace odet::reference
