#include "odet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace odet::ad {

namespace {

Var make_node(Tensor value, std::vector<NodePtr> parents,
              std::function<std::vector<Tensor>(const Tensor&)> backprop) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->parents = std::move(parents);
    for (const auto& p : node->parents) {
        if (p->requires_grad) {
            node->requires_grad = true;
            break;
        }
    }
    if (node->requires_grad) node->backprop = std::move(backprop);
    return Var(node);
}

void accumulate(Tensor& dst, const Tensor& src) {
    if (!src.defined()) return;
    if (!dst.defined()) {
        dst = src;
        return;
    }
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.vec()[i] += src.vec()[i];
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(node);
}

void backward(const Var& root, const Tensor& upstream) {
    require_same_dims(root.val(), upstream, "backward seed");
    if (!root.requires_grad()) return;

    // Iterative DFS postorder; reversing it puts every node before its parents.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* node : order) node->grad = Tensor();
    root.node()->grad = upstream;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backprop || !node->grad.defined()) continue;
        auto grads = node->backprop(node->grad);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            if (node->parents[i]->requires_grad) accumulate(node->parents[i]->grad, grads[i]);
        }
    }
}

Var conv(const Var& x, const Var& kernel, const std::optional<Var>& bias, const ConvSpec& spec) {
    std::span<const double> bias_span;
    if (bias) bias_span = std::span<const double>(bias->val().vec());
    Tensor out = conv2d(x.val(), kernel.val(), bias_span, spec);

    std::vector<NodePtr> parents{x.node(), kernel.node()};
    if (bias) parents.push_back(bias->node());
    auto xn = x.node();
    auto kn = kernel.node();
    const bool has_bias = bias.has_value();
    return make_node(std::move(out), std::move(parents),
                     [xn, kn, spec, has_bias](const Tensor& up) {
                         std::vector<Tensor> grads(has_bias ? 3 : 2);
                         if (xn->requires_grad) {
                             grads[0] = conv2d_vjp_input(kn->value, spec, up, xn->value.dims());
                         }
                         if (kn->requires_grad) {
                             grads[1] = conv2d_vjp_kernel(xn->value, spec, up, kn->value.dims());
                         }
                         if (has_bias) {
                             auto db = conv2d_vjp_bias(up);
                             const int cout = static_cast<int>(db.size());
                             grads[2] = Tensor(Dims{cout, 1, 1, 1}, std::move(db));
                         }
                         return grads;
                     });
}

Var add(const Var& a, const Var& b) {
    Tensor out = odet::add(a.val(), b.val());
    return make_node(std::move(out), {a.node(), b.node()},
                     [](const Tensor& up) { return std::vector<Tensor>{up, up}; });
}

Var sub(const Var& a, const Var& b) {
    Tensor out = odet::sub(a.val(), b.val());
    return make_node(std::move(out), {a.node(), b.node()}, [](const Tensor& up) {
        return std::vector<Tensor>{up, odet::scale(up, -1.0)};
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_dims(a.val(), b.val(), "mul");
    Tensor out(a.val().dims());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.vec()[i] = a.val().vec()[i] * b.val().vec()[i];
    }
    auto an = a.node(), bn = b.node();
    return make_node(std::move(out), {an, bn}, [an, bn](const Tensor& up) {
        Tensor da(up.dims()), db(up.dims());
        for (std::size_t i = 0; i < up.numel(); ++i) {
            da.vec()[i] = up.vec()[i] * bn->value.vec()[i];
            db.vec()[i] = up.vec()[i] * an->value.vec()[i];
        }
        return std::vector<Tensor>{std::move(da), std::move(db)};
    });
}

Var scale(const Var& a, double factor) {
    return make_node(odet::scale(a.val(), factor), {a.node()}, [factor](const Tensor& up) {
        return std::vector<Tensor>{odet::scale(up, factor)};
    });
}

Var relu(const Var& a) {
    Tensor out(a.val().dims());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.vec()[i] = std::max(0.0, a.val().vec()[i]);
    }
    auto an = a.node();
    return make_node(std::move(out), {an}, [an](const Tensor& up) {
        Tensor da(up.dims());
        for (std::size_t i = 0; i < up.numel(); ++i) {
            da.vec()[i] = an->value.vec()[i] > 0.0 ? up.vec()[i] : 0.0;
        }
        return std::vector<Tensor>{std::move(da)};
    });
}

Var sigmoid(const Var& a) {
    Tensor out(a.val().dims());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.vec()[i] = 1.0 / (1.0 + std::exp(-a.val().vec()[i]));
    }
    Tensor cached = out;
    return make_node(std::move(out), {a.node()}, [cached](const Tensor& up) {
        Tensor da(up.dims());
        for (std::size_t i = 0; i < up.numel(); ++i) {
            const double s = cached.vec()[i];
            da.vec()[i] = up.vec()[i] * s * (1.0 - s);
        }
        return std::vector<Tensor>{std::move(da)};
    });
}

Var softmax_channels(const Var& logits) {
    Tensor out = odet::softmax_channels(logits.val());
    Tensor cached = out;
    return make_node(std::move(out), {logits.node()}, [cached](const Tensor& up) {
        Tensor da(up.dims());
        for (int n = 0; n < up.n(); ++n) {
            double dot = 0.0;
            for (int c = 0; c < up.c(); ++c) {
                dot += up.at(n, c, 0, 0) * cached.at(n, c, 0, 0);
            }
            for (int c = 0; c < up.c(); ++c) {
                da.at(n, c, 0, 0) = cached.at(n, c, 0, 0) * (up.at(n, c, 0, 0) - dot);
            }
        }
        return std::vector<Tensor>{std::move(da)};
    });
}

Var global_avg_pool(const Var& x) {
    Tensor out = odet::global_avg_pool(x.val());
    const Dims in_dims = x.val().dims();
    return make_node(std::move(out), {x.node()}, [in_dims](const Tensor& up) {
        Tensor da(in_dims);
        const double inv = 1.0 / (static_cast<double>(in_dims[2]) * in_dims[3]);
        for (int n = 0; n < in_dims[0]; ++n) {
            for (int c = 0; c < in_dims[1]; ++c) {
                const double g = up.at(n, c, 0, 0) * inv;
                for (int y = 0; y < in_dims[2]; ++y) {
                    for (int xx = 0; xx < in_dims[3]; ++xx) da.at(n, c, y, xx) = g;
                }
            }
        }
        return std::vector<Tensor>{std::move(da)};
    });
}

Var concat_channels(std::span<const Var> parts) {
    if (parts.empty()) throw ValidationError("concat_channels: no parts");
    int channels = 0;
    for (const Var& p : parts) {
        if (p.val().n() != parts[0].val().n() || p.val().h() != parts[0].val().h() ||
            p.val().w() != parts[0].val().w()) {
            throw ShapeError("concat_channels: incompatible part dims");
        }
        channels += p.val().c();
    }
    const Dims d0 = parts[0].val().dims();
    Tensor out(Dims{d0[0], channels, d0[2], d0[3]});
    std::vector<int> widths;
    int base = 0;
    for (const Var& p : parts) {
        for (int n = 0; n < d0[0]; ++n) {
            for (int c = 0; c < p.val().c(); ++c) {
                for (int y = 0; y < d0[2]; ++y) {
                    for (int x = 0; x < d0[3]; ++x) {
                        out.at(n, base + c, y, x) = p.val().at(n, c, y, x);
                    }
                }
            }
        }
        widths.push_back(p.val().c());
        base += p.val().c();
    }
    std::vector<NodePtr> parents;
    for (const Var& p : parts) parents.push_back(p.node());
    return make_node(std::move(out), std::move(parents), [widths, d0](const Tensor& up) {
        std::vector<Tensor> grads;
        int from = 0;
        for (int wdt : widths) {
            Tensor g(Dims{d0[0], wdt, d0[2], d0[3]});
            for (int n = 0; n < d0[0]; ++n) {
                for (int c = 0; c < wdt; ++c) {
                    for (int y = 0; y < d0[2]; ++y) {
                        for (int x = 0; x < d0[3]; ++x) g.at(n, c, y, x) = up.at(n, from + c, y, x);
                    }
                }
            }
            grads.push_back(std::move(g));
            from += wdt;
        }
        return grads;
    });
}

Var slice_channels(const Var& x, int from, int count) {
    if (from < 0 || count < 1 || from + count > x.val().c()) {
        throw ShapeError("slice_channels: range out of bounds");
    }
    const Dims in_dims = x.val().dims();
    Tensor out(Dims{in_dims[0], count, in_dims[2], in_dims[3]});
    for (int n = 0; n < out.n(); ++n) {
        for (int c = 0; c < count; ++c) {
            for (int y = 0; y < out.h(); ++y) {
                for (int xx = 0; xx < out.w(); ++xx) {
                    out.at(n, c, y, xx) = x.val().at(n, from + c, y, xx);
                }
            }
        }
    }
    return make_node(std::move(out), {x.node()}, [in_dims, from, count](const Tensor& up) {
        Tensor g(in_dims);
        for (int n = 0; n < up.n(); ++n) {
            for (int c = 0; c < count; ++c) {
                for (int y = 0; y < up.h(); ++y) {
                    for (int xx = 0; xx < up.w(); ++xx) {
                        g.at(n, from + c, y, xx) = up.at(n, c, y, xx);
                    }
                }
            }
        }
        return std::vector<Tensor>{std::move(g)};
    });
}

Var haar_wt_packed(const Var& x) {
    // Orthonormal transform: the adjoint is the inverse.
    return make_node(odet::haar_analysis_packed(x.val()), {x.node()}, [](const Tensor& up) {
        return std::vector<Tensor>{odet::haar_synthesis_packed(up)};
    });
}

Var haar_iwt_packed(const Var& packed) {
    return make_node(odet::haar_synthesis_packed(packed.val()), {packed.node()},
                     [](const Tensor& up) {
                         return std::vector<Tensor>{odet::haar_analysis_packed(up)};
                     });
}

Var replicate_pad_rb(const Var& x, int pad_h, int pad_w) {
    return make_node(odet::replicate_pad_rb(x.val(), pad_h, pad_w), {x.node()},
                     [pad_h, pad_w](const Tensor& up) {
                         return std::vector<Tensor>{
                             odet::replicate_pad_rb_adjoint(up, pad_h, pad_w)};
                     });
}

Var crop_hw(const Var& x, int out_h, int out_w) {
    const int in_h = x.val().h(), in_w = x.val().w();
    return make_node(odet::crop_hw(x.val(), out_h, out_w), {x.node()},
                     [in_h, in_w](const Tensor& up) {
                         return std::vector<Tensor>{odet::crop_hw_adjoint(up, in_h, in_w)};
                     });
}

Var space_to_depth(const Var& x, int scale) {
    return make_node(odet::space_to_depth(x.val(), scale), {x.node()},
                     [scale](const Tensor& up) {
                         return std::vector<Tensor>{odet::depth_to_space(up, scale)};
                     });
}

Var scale_channels(const Var& x, const Var& gates) {
    if (gates.val().n() != x.val().n() || gates.val().c() != x.val().c() ||
        gates.val().h() != 1 || gates.val().w() != 1) {
        throw ShapeError("scale_channels: gate dims must be (N, C, 1, 1)");
    }
    Tensor out(x.val().dims());
    for (int n = 0; n < out.n(); ++n) {
        for (int c = 0; c < out.c(); ++c) {
            const double g = gates.val().at(n, c, 0, 0);
            for (int y = 0; y < out.h(); ++y) {
                for (int xx = 0; xx < out.w(); ++xx) {
                    out.at(n, c, y, xx) = x.val().at(n, c, y, xx) * g;
                }
            }
        }
    }
    auto xn = x.node(), gn = gates.node();
    return make_node(std::move(out), {xn, gn}, [xn, gn](const Tensor& up) {
        Tensor dx(xn->value.dims());
        Tensor dg(gn->value.dims());
        for (int n = 0; n < up.n(); ++n) {
            for (int c = 0; c < up.c(); ++c) {
                const double g = gn->value.at(n, c, 0, 0);
                double acc = 0.0;
                for (int y = 0; y < up.h(); ++y) {
                    for (int xx = 0; xx < up.w(); ++xx) {
                        dx.at(n, c, y, xx) = up.at(n, c, y, xx) * g;
                        acc += up.at(n, c, y, xx) * xn->value.at(n, c, y, xx);
                    }
                }
                dg.at(n, c, 0, 0) = acc;
            }
        }
        return std::vector<Tensor>{std::move(dx), std::move(dg)};
    });
}

Var fsam_filter(const Var& x, const Var& gate) {
    auto xn = x.node(), gn = gate.node();
    return make_node(odet::fsam_filter(x.val(), gate.val()), {xn, gn},
                     [xn, gn](const Tensor& up) {
                         std::vector<Tensor> grads(2);
                         if (xn->requires_grad) {
                             // The gated filter is a symmetric linear map in x.
                             grads[0] = odet::fsam_filter(up, gn->value);
                         }
                         if (gn->requires_grad) {
                             grads[1] = odet::fsam_filter_vjp_gate(xn->value, gn->value, up);
                         }
                         return grads;
                     });
}

Var dcam_descriptor(const Var& x) {
    auto xn = x.node();
    return make_node(odet::dcam_descriptor(x.val()), {xn}, [xn](const Tensor& up) {
        return std::vector<Tensor>{odet::dcam_descriptor_vjp(xn->value, up)};
    });
}

Var dynamic_conv(const Var& x, std::span<const Var> experts, const std::optional<Var>& bias,
                 const Var& alpha, const ConvSpec& spec) {
    if (experts.empty()) throw ValidationError("dynamic_conv: expert bank is empty");
    const int m = static_cast<int>(experts.size());
    if (alpha.val().c() != m || alpha.val().n() != x.val().n() || alpha.val().h() != 1 ||
        alpha.val().w() != 1) {
        throw ShapeError("dynamic_conv: alpha dims must be (N, M, 1, 1) with M = expert count");
    }
    for (const Var& e : experts) {
        if (e.val().dims() != experts[0].val().dims()) {
            throw ShapeError("dynamic_conv: experts must share dims");
        }
    }

    // Direct route per the contract: convolve with each expert, then take the
    // per-sample convex combination. Per-expert outputs are kept for backward.
    auto expert_outs = std::make_shared<std::vector<Tensor>>();
    expert_outs->reserve(experts.size());
    for (const Var& e : experts) {
        expert_outs->push_back(conv2d(x.val(), e.val(), {}, spec));
    }
    const Dims out_dims = (*expert_outs)[0].dims();
    Tensor out(out_dims);
    for (int n = 0; n < out_dims[0]; ++n) {
        for (int i = 0; i < m; ++i) {
            const double a = alpha.val().at(n, i, 0, 0);
            const std::size_t plane =
                static_cast<std::size_t>(out_dims[1]) * out_dims[2] * out_dims[3];
            const double* src = (*expert_outs)[i].data() + n * plane;
            double* dst = out.data() + n * plane;
            for (std::size_t j = 0; j < plane; ++j) dst[j] += a * src[j];
        }
    }
    if (bias) {
        for (int n = 0; n < out_dims[0]; ++n) {
            for (int c = 0; c < out_dims[1]; ++c) {
                const double b = bias->val().at(c, 0, 0, 0);
                for (int y = 0; y < out_dims[2]; ++y) {
                    for (int xx = 0; xx < out_dims[3]; ++xx) out.at(n, c, y, xx) += b;
                }
            }
        }
    }

    std::vector<NodePtr> parents{x.node()};
    for (const Var& e : experts) parents.push_back(e.node());
    parents.push_back(alpha.node());
    const bool has_bias = bias.has_value();
    if (bias) parents.push_back(bias->node());

    auto xn = x.node();
    auto an = alpha.node();
    std::vector<NodePtr> expert_nodes;
    for (const Var& e : experts) expert_nodes.push_back(e.node());

    return make_node(
        std::move(out), std::move(parents),
        [xn, an, expert_nodes, expert_outs, spec, has_bias, m](const Tensor& up) {
            std::vector<Tensor> grads(1 + m + 1 + (has_bias ? 1 : 0));
            const Dims out_dims = up.dims();
            const std::size_t plane =
                static_cast<std::size_t>(out_dims[1]) * out_dims[2] * out_dims[3];

            if (an->requires_grad) {
                Tensor dalpha(an->value.dims());
                for (int n = 0; n < out_dims[0]; ++n) {
                    for (int i = 0; i < m; ++i) {
                        const double* u = up.data() + n * plane;
                        const double* y = (*expert_outs)[i].data() + n * plane;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < plane; ++j) acc += u[j] * y[j];
                        dalpha.at(n, i, 0, 0) = acc;
                    }
                }
                grads[1 + m] = std::move(dalpha);
            }

            const bool need_dx = xn->requires_grad;
            bool need_dk = false;
            for (const auto& en : expert_nodes) need_dk = need_dk || en->requires_grad;
            if (need_dx || need_dk) {
                Tensor dx;
                for (int i = 0; i < m; ++i) {
                    Tensor scaled(up.dims());
                    for (int n = 0; n < out_dims[0]; ++n) {
                        const double a = an->value.at(n, i, 0, 0);
                        const double* u = up.data() + n * plane;
                        double* s = scaled.data() + n * plane;
                        for (std::size_t j = 0; j < plane; ++j) s[j] = a * u[j];
                    }
                    if (expert_nodes[i]->requires_grad) {
                        grads[1 + i] = conv2d_vjp_kernel(xn->value, spec, scaled,
                                                         expert_nodes[i]->value.dims());
                    }
                    if (need_dx) {
                        Tensor part = conv2d_vjp_input(expert_nodes[i]->value, spec, scaled,
                                                       xn->value.dims());
                        if (!dx.defined()) {
                            dx = std::move(part);
                        } else {
                            for (std::size_t j = 0; j < dx.numel(); ++j) {
                                dx.vec()[j] += part.vec()[j];
                            }
                        }
                    }
                }
                if (need_dx) grads[0] = std::move(dx);
            }

            if (has_bias) {
                auto db = conv2d_vjp_bias(up);
                const int cout = static_cast<int>(db.size());
                grads[1 + m + 1] = Tensor(Dims{cout, 1, 1, 1}, std::move(db));
            }
            return grads;
        });
}

}  // namespace odet::ad

namespace odet {

ad::Var make_leaf_normal(Dims dims, double stddev, std::mt19937_64& rng) {
    Tensor t(dims);
    fill_normal(t, rng, 0.0, stddev);
    return ad::Var::leaf(std::move(t));
}

ad::Var make_conv_weight(int out_ch, int in_ch_per_group, int kernel, std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_ch_per_group) * kernel * kernel;
    return make_leaf_normal(Dims{out_ch, in_ch_per_group, kernel, kernel},
                            1.0 / std::sqrt(fan_in), rng);
}

ad::Var make_bias(int out_ch, std::mt19937_64& rng) {
    return make_leaf_normal(Dims{out_ch, 1, 1, 1}, 0.1, rng);
}

}  // namespace odet
