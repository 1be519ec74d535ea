// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "compactnet/tensor.hpp"

// Self-contained verification suites behind `compactnet gradcheck` and
// `compactnet selftest`.

namespace compactnet::checks {

struct SuiteOptions {
    std::uint64_t seed = 0;
    /// Gradient suite: the channel-pool backward is scaled by 2.
    /// Self-test suite: the optimized outputs are nudged by one ulp.
    bool inject_fault = false;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    /// Max relative error (gradients) or count of mismatching draws (oracles).
    double metric = 0.0;
    Index checked = 0;
    Index skipped = 0;
    std::string detail;
};

/// Central differences in double precision: channel pooling (every variant,
/// C in {1, 2, 4, 8}), every convolution kind, batch norm, dense, softmax
/// cross-entropy, the spatial ops, the fused compact convolution and a
/// two-block compact network. Tolerance 1e-5, step 1e-4.
std::vector<CheckResult> run_gradcheck_suite(const SuiteOptions& opt);

/// Bitwise oracle equivalence: optimized convolution against a naive loop
/// (100 draws), fused compact convolution against the three-stage
/// composition (200 draws), avg pool against sum pool / C (100 draws), plus
/// pooling and serialization invariants.
std::vector<CheckResult> run_selftest_suite(const SuiteOptions& opt);

bool all_passed(const std::vector<CheckResult>& results);

/// check,passed,metric,checked,skipped,detail
void write_check_csv(std::ostream& os, const std::vector<CheckResult>& results);

} // namespace compactnet::checks
