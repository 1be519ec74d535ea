// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "compactnet/autograd/param_store.hpp"
#include "compactnet/tensor.hpp"

namespace compactnet::autograd {

struct NodeId {
    std::size_t index = 0;
    bool operator==(const NodeId&) const = default;
};

struct TapeOptions {
    /// Keep backward closures. Off for inference and benchmarking.
    bool record_backward = true;
    /// Hash every nonsmooth decision (ReLU masks, argmax choices) so a
    /// gradient checker can tell when a perturbation crossed a kink.
    bool track_patterns = false;
};

/// Reverse-mode record. Nodes are appended in execution order, which is a
/// topological order; `backward` visits them once each in reverse and
/// accumulates gradients additively, so fan-out is handled for free.
template <typename Scalar>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor<Scalar>& grad_out)>;

    explicit Tape(TapeOptions options = {}) : options_(options) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const TapeOptions& options() const { return options_; }

    NodeId constant(Tensor<Scalar> value)
    {
        Node& n = push("constant");
        n.value = std::move(value);
        return last();
    }

    /// Input whose gradient is collected on the tape itself.
    NodeId leaf(Tensor<Scalar> value)
    {
        Node& n = push("leaf");
        n.value = std::move(value);
        n.requires_grad = options_.record_backward;
        return last();
    }

    /// Binds a stored parameter. The value is read in place; during backward
    /// the gradient is added straight into `param.grad`.
    NodeId param(Param<Scalar>& p)
    {
        Node& n = push("param");
        n.external = &p.value;
        if (p.trainable && options_.record_backward) {
            n.requires_grad = true;
            n.grad_sink = &p.grad;
        }
        return last();
    }

    NodeId record(const char* op, Tensor<Scalar> value, std::initializer_list<NodeId> inputs, BackwardFn fn)
    {
        bool needs = false;
        for (NodeId in : inputs) needs = needs || nodes_[in.index].requires_grad;
        Node& n = push(op);
        n.value = std::move(value);
        n.requires_grad = needs && options_.record_backward;
        if (n.requires_grad) n.backward = std::move(fn);
        return last();
    }

    const Tensor<Scalar>& value(NodeId id) const
    {
        const Node& n = nodes_[id.index];
        return n.external ? *n.external : n.value;
    }

    bool requires_grad(NodeId id) const { return nodes_[id.index].requires_grad; }

    /// Gradient collected for a leaf (empty when nothing flowed into it).
    const Tensor<Scalar>& grad(NodeId id) const { return nodes_[id.index].grad; }

    void accumulate(NodeId id, Tensor<Scalar> g)
    {
        Node& n = nodes_[id.index];
        if (!n.requires_grad) return;
        if (n.grad_sink) {
            compactnet::accumulate(*n.grad_sink, g);
        } else if (n.grad.empty()) {
            require_same_shape(value(id).shape(), g.shape(), n.op);
            n.grad = std::move(g);
        } else {
            compactnet::accumulate(n.grad, g);
        }
    }

    void backward(NodeId root)
    {
        if (!options_.record_backward) throw ArgumentError("backward on a tape that does not record");
        if (value(root).size() != 1) throw ArgumentError("backward root must be a scalar");
        if (!nodes_[root.index].requires_grad) return;
        Tensor<Scalar> seed(value(root).shape(), Scalar(1));
        accumulate(root, std::move(seed));
        for (std::size_t i = root.index + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            Tensor<Scalar> g = std::move(n.grad);
            n.grad = Tensor<Scalar>();
            n.backward(*this, g);
            n.backward = nullptr;
        }
    }

    void mark_pattern(std::uint64_t h)
    {
        pattern_ ^= h + 0x9E3779B97F4A7C15ull + (pattern_ << 6) + (pattern_ >> 2);
    }
    std::uint64_t pattern() const { return pattern_; }

    std::vector<std::string_view> op_sequence() const
    {
        std::vector<std::string_view> ops;
        ops.reserve(nodes_.size());
        for (const Node& n : nodes_) ops.emplace_back(n.op);
        return ops;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        const char* op = "";
        Tensor<Scalar> value;
        const Tensor<Scalar>* external = nullptr;
        Tensor<Scalar> grad;
        Tensor<Scalar>* grad_sink = nullptr;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Node& push(const char* op)
    {
        nodes_.emplace_back();
        nodes_.back().op = op;
        return nodes_.back();
    }

    NodeId last() const { return NodeId{nodes_.size() - 1}; }

    TapeOptions options_;
    std::deque<Node> nodes_;
    std::uint64_t pattern_ = 0;
};

/// FNV-1a over a span of trivially copyable values.
template <typename T>
std::uint64_t fnv1a(std::span<const T> values)
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size_bytes(); ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace compactnet::autograd
