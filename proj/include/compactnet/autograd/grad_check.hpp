// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "compactnet/autograd/param_store.hpp"
#include "compactnet/autograd/tape.hpp"

namespace compactnet::autograd {

struct GradCheckOptions {
    double step = 1e-4;
    double tolerance = 1e-5;
    /// Gradients smaller than this are compared on an absolute scale, i.e.
    /// |numeric - analytic| < tolerance * magnitude_floor. Without it,
    /// elements that are near zero by chance fail on the O(step^2)
    /// truncation term alone.
    double magnitude_floor = 1e-4;
};

struct GradCheckEntry {
    std::string name;
    Index checked = 0;
    Index skipped = 0;
    double max_rel_error = 0.0;
    Index worst_index = -1;
    double worst_numeric = 0.0;
    double worst_analytic = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;

    bool passed() const
    {
        return std::all_of(entries.begin(), entries.end(),
                           [&](const GradCheckEntry& e) { return e.max_rel_error < tolerance; });
    }
    double max_rel_error() const
    {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_rel_error);
        return m;
    }
    Index skipped() const
    {
        Index s = 0;
        for (const auto& e : entries) s += e.skipped;
        return s;
    }
    Index checked() const
    {
        Index s = 0;
        for (const auto& e : entries) s += e.checked;
        return s;
    }
};

using LossBuilder = std::function<NodeId(Tape<double>&)>;

/// Central-difference check of every trainable entry of `store` against the
/// reverse-mode gradient of `build_loss`. An element is skipped when either
/// perturbed evaluation changes a nonsmooth decision (ReLU mask or argmax)
/// relative to the unperturbed point, since the difference quotient then
/// straddles a kink.
inline GradCheckReport grad_check(ParamStore<double>& store, const LossBuilder& build_loss,
                                  const GradCheckOptions& opt = {})
{
    store.zero_grad();
    std::uint64_t base_pattern;
    {
        Tape<double> tape(TapeOptions{true, true});
        NodeId loss = build_loss(tape);
        base_pattern = tape.pattern();
        tape.backward(loss);
    }

    auto evaluate = [&](std::uint64_t& pattern) {
        Tape<double> tape(TapeOptions{false, true});
        NodeId loss = build_loss(tape);
        pattern = tape.pattern();
        return tape.value(loss)[0];
    };

    GradCheckReport report;
    report.tolerance = opt.tolerance;
    for (std::size_t pi = 0; pi < store.size(); ++pi) {
        Param<double>& p = store[pi];
        if (!p.trainable) continue;
        GradCheckEntry entry{p.name};
        for (Index i = 0; i < p.value.size(); ++i) {
            const double original = p.value[i];
            std::uint64_t pat_plus, pat_minus;
            p.value[i] = original + opt.step;
            const double f_plus = evaluate(pat_plus);
            p.value[i] = original - opt.step;
            const double f_minus = evaluate(pat_minus);
            p.value[i] = original;
            if (pat_plus != base_pattern || pat_minus != base_pattern) {
                ++entry.skipped;
                continue;
            }
            const double numeric = (f_plus - f_minus) / (2.0 * opt.step);
            const double analytic = p.grad[i];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), opt.magnitude_floor});
            const double rel = std::abs(numeric - analytic) / denom;
            ++entry.checked;
            if (rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.worst_numeric = numeric;
                entry.worst_analytic = analytic;
            }
        }
        report.entries.push_back(std::move(entry));
    }
    store.zero_grad();
    return report;
}

} // namespace compactnet::autograd
