// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "compactnet/tensor.hpp"

namespace compactnet::autograd {

/// A named tensor owned by a model. Non-trainable entries (batch-norm
/// running statistics) are counted as parameters but never updated by the
/// optimizer.
template <typename Scalar>
struct Param {
    std::string name;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    Tensor<Scalar> m; // Adam first moment, allocated on first step
    Tensor<Scalar> v; // Adam second moment
    bool trainable = true;
};

template <typename Scalar>
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    Param<Scalar>& add(std::string name, Tensor<Scalar> value, bool trainable = true)
    {
        if (index_.count(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
        auto p = std::make_unique<Param<Scalar>>();
        p->name = name;
        p->trainable = trainable;
        if (trainable) p->grad = Tensor<Scalar>(value.shape());
        p->value = std::move(value);
        index_.emplace(std::move(name), params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Param<Scalar>* find(const std::string& name)
    {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }

    Param<Scalar>& at(const std::string& name)
    {
        if (auto* p = find(name)) return *p;
        throw ArgumentError("no parameter named '" + name + "'");
    }

    std::size_t size() const { return params_.size(); }
    Param<Scalar>& operator[](std::size_t i) { return *params_[i]; }
    const Param<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

    Index total_elements() const
    {
        Index total = 0;
        for (const auto& p : params_) total += p->value.size();
        return total;
    }

    Index trainable_elements() const
    {
        Index total = 0;
        for (const auto& p : params_)
            if (p->trainable) total += p->value.size();
        return total;
    }

    void zero_grad()
    {
        for (auto& p : params_)
            if (p->trainable) p->grad.fill(Scalar(0));
    }

    std::int64_t step_count() const { return step_; }
    void set_step_count(std::int64_t s) { step_ = s; }

    std::vector<Tensor<Scalar>> snapshot() const
    {
        std::vector<Tensor<Scalar>> values;
        values.reserve(params_.size());
        for (const auto& p : params_) values.push_back(p->value);
        return values;
    }

    void restore(const std::vector<Tensor<Scalar>>& values)
    {
        if (values.size() != params_.size()) throw ArgumentError("snapshot does not match parameter store");
        for (std::size_t i = 0; i < values.size(); ++i) {
            require_same_shape(params_[i]->value.shape(), values[i].shape(), "ParamStore::restore");
            params_[i]->value = values[i];
        }
    }

private:
    std::vector<std::unique_ptr<Param<Scalar>>> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::int64_t step_ = 0;
};

} // namespace compactnet::autograd
