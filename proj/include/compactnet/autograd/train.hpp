// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "compactnet/autograd/adam.hpp"
#include "compactnet/autograd/functional.hpp"
#include "compactnet/data/dataset.hpp"
#include "compactnet/prng.hpp"
#include "compactnet/zoo/model.hpp"

namespace compactnet::autograd {

struct StepResult {
    double loss = 0.0;
    Index correct = 0;
    Index samples = 0;
};

/// Forward in training mode, cross-entropy, backward. Gradients are added to
/// the model's store; callers clear them (adam_step does).
template <typename Scalar>
StepResult forward_backward(zoo::Model<Scalar>& model, const Tensor<Scalar>& x, std::span<const int> y)
{
    if (x.empty() || y.empty()) throw ArgumentError("forward_backward: empty batch");
    if (x.shape().rank() != 4 || x.shape().n() != static_cast<Index>(y.size()))
        throw ShapeError("forward_backward: batch " + x.shape().str() + " does not match " +
                         std::to_string(y.size()) + " labels");
    Tape<Scalar> tape;
    NodeId in = tape.constant(x);
    NodeId logits = model.forward(tape, in, Mode::train);
    LossNode loss = softmax_xent(tape, logits, std::vector<int>(y.begin(), y.end()));
    const double value = static_cast<double>(tape.value(loss.loss)[0]);
    if (!std::isfinite(value)) {
        const auto& z = tape.value(logits).array();
        throw DivergenceError("non-finite loss " + std::to_string(value) + " at optimizer step " +
                              std::to_string(model.params().step_count()) + " (logit range [" +
                              std::to_string(static_cast<double>(z.minCoeff())) + ", " +
                              std::to_string(static_cast<double>(z.maxCoeff())) + "])");
    }
    tape.backward(loss.loss);
    return {value, loss.correct, static_cast<Index>(y.size())};
}

/// Inference-mode mean loss and accuracy over a split, in fixed batches.
template <typename Scalar>
StepResult evaluate(const zoo::Model<Scalar>& model, const data::Split& split, Index batch_size)
{
    if (split.size() == 0) throw ArgumentError("evaluate: empty split");
    if (batch_size < 1) throw ArgumentError("evaluate: batch_size must be >= 1");
    StepResult total;
    double loss_sum = 0.0;
    std::vector<Index> idx;
    for (Index start = 0; start < split.size(); start += batch_size) {
        const Index end = std::min(split.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const data::Split b = data::gather(split, idx);
        Tape<Scalar> tape(TapeOptions{false, false});
        NodeId in = tape.constant(b.x.template cast<Scalar>());
        NodeId logits = model.forward(tape, in, Mode::infer);
        const auto r = nn::softmax_xent_fwd(tape.value(logits), std::span<const int>(b.y));
        loss_sum += static_cast<double>(r.loss) * static_cast<double>(b.size());
        total.correct += r.correct;
        total.samples += b.size();
    }
    total.loss = loss_sum / static_cast<double>(total.samples);
    return total;
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct History {
    std::vector<EpochRecord> rows;

    /// Values are printed with 17 significant digits so reruns compare
    /// bitwise through the text.
    void write_csv(std::ostream& os) const
    {
        os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.train_acc,
                          r.val_loss, r.val_acc);
            os << buf;
        }
    }
};

template <typename Scalar>
struct TrainResult {
    History history;
    /// Parameter values of the epoch with the best validation accuracy
    /// (earliest on ties), in store order.
    std::vector<Tensor<Scalar>> best_params;
    int best_epoch = 0;
    bool diverged = false;
    std::string diagnostic;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam over per-epoch Fisher-Yates shuffles of the training split. On a
/// non-finite loss training stops, the parameters are rolled back to the
/// start of the failing epoch and the result is flagged as diverged.
template <typename Scalar>
TrainResult<Scalar> train(zoo::Model<Scalar>& model, const data::Dataset& ds, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {})
{
    cfg.validate();
    ds.validate();
    if (!(ds.train.sample_shape() == model.input_shape()))
        throw ShapeError("dataset samples are " + ds.train.sample_shape().str() + ", model " + model.name() +
                         " expects " + model.input_shape().str());
    if (model.output_shape().c != ds.classes)
        throw ShapeError("model has " + std::to_string(model.output_shape().c) + " outputs, dataset has " +
                         std::to_string(ds.classes) + " classes");

    TrainResult<Scalar> result;
    auto& store = model.params();
    Prng shuffle(cfg.seed);
    shuffle = shuffle.split();
    std::vector<Index> order(ds.train.size());
    std::iota(order.begin(), order.end(), Index(0));
    double best_acc = -1.0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto epoch_start = store.snapshot();
        const auto step_start = store.step_count();
        for (Index i = static_cast<Index>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[shuffle.below(static_cast<std::uint64_t>(i) + 1)]);

        double loss_sum = 0.0;
        Index correct = 0, seen = 0;
        try {
            for (Index start = 0; start < ds.train.size(); start += cfg.batch_size) {
                const Index end = std::min(ds.train.size(), start + cfg.batch_size);
                const data::Split b =
                    data::gather(ds.train, std::span<const Index>(order.data() + start, end - start));
                store.zero_grad();
                const StepResult r = forward_backward(model, b.x.template cast<Scalar>(), b.y);
                adam_step(store, cfg);
                loss_sum += r.loss * static_cast<double>(r.samples);
                correct += r.correct;
                seen += r.samples;
            }
        } catch (const DivergenceError& e) {
            store.restore(epoch_start);
            store.set_step_count(step_start);
            result.diverged = true;
            result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }

        const StepResult val = evaluate(model, ds.val, cfg.batch_size);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen),
                        static_cast<double>(correct) / static_cast<double>(seen), val.loss,
                        static_cast<double>(val.correct) / static_cast<double>(val.samples)};
        result.history.rows.push_back(rec);
        if (rec.val_acc > best_acc) {
            best_acc = rec.val_acc;
            result.best_epoch = epoch;
            result.best_params = store.snapshot();
        }
        if (on_epoch) on_epoch(rec);
    }
    if (result.best_params.empty()) result.best_params = store.snapshot();
    return result;
}

} // namespace compactnet::autograd
