#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "odet/kernels.hpp"
#include "odet/tensor.hpp"

// Eager reverse-mode tape over Tensor values. Ops compute their result
// immediately and record a closure producing per-parent gradients; backward()
// walks the recorded graph once in reverse topological order.
namespace odet::ad {

class Node {
  public:
    Tensor value;
    Tensor grad;  // allocated by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Maps the node's accumulated gradient to one gradient per parent. Entries
    // for parents that do not require gradients may be left undefined.
    std::function<std::vector<Tensor>(const Tensor& upstream)> backprop;
};

using NodePtr = std::shared_ptr<Node>;

class Var {
  public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    static Var leaf(Tensor value, bool requires_grad = true);
    static Var constant(Tensor value) { return leaf(std::move(value), false); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& val() const { return node_->value; }
    Tensor& mutable_val() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    const NodePtr& node() const { return node_; }

  private:
    NodePtr node_;
};

// Seeds root with `upstream` and accumulates gradients into every reachable
// node that requires them. Gradients are reset at the start of each call.
void backward(const Var& root, const Tensor& upstream);

Var conv(const Var& x, const Var& kernel, const std::optional<Var>& bias, const ConvSpec& spec);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softmax_channels(const Var& logits);
Var global_avg_pool(const Var& x);
Var concat_channels(std::span<const Var> parts);
Var slice_channels(const Var& x, int from, int count);
Var haar_wt_packed(const Var& x);
Var haar_iwt_packed(const Var& packed);
Var replicate_pad_rb(const Var& x, int pad_h, int pad_w);
Var crop_hw(const Var& x, int out_h, int out_w);
Var space_to_depth(const Var& x, int scale);
// Broadcast multiply of (N, C, H, W) by per-channel gates (N, C, 1, 1).
Var scale_channels(const Var& x, const Var& gates);
Var fsam_filter(const Var& x, const Var& gate);
Var dcam_descriptor(const Var& x);

// Input-conditioned expert mixture: out_n = sum_i alpha[n,i] conv(x_n, W_i),
// plus an optional shared bias. alpha dims (N, M, 1, 1).
Var dynamic_conv(const Var& x, std::span<const Var> experts, const std::optional<Var>& bias,
                 const Var& alpha, const ConvSpec& spec);

}  // namespace odet::ad

namespace odet {

// Seeded leaf factories shared by the block modules.
ad::Var make_leaf_normal(Dims dims, double stddev, std::mt19937_64& rng);
ad::Var make_conv_weight(int out_ch, int in_ch_per_group, int kernel, std::mt19937_64& rng);
ad::Var make_bias(int out_ch, std::mt19937_64& rng);

}  // namespace odet
