// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS / FAIL / SKIP line per criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "compactnet/autograd/train.hpp"
#include "compactnet/checks.hpp"
#include "compactnet/complexity.hpp"
#include "compactnet/data/bench.hpp"
#include "compactnet/data/dataset.hpp"
#include "compactnet/zoo/builders.hpp"

using namespace compactnet;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::fail;
    std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// --- 1 -------------------------------------------------------------------------

Outcome exact_parameters()
{
    struct Case {
        zoo::Family family;
        Index c;
        double wm;
        Index expected;
    };
    const std::vector<Case> cases{
        {zoo::Family::vgg8, 1, 1.0, 4'697'034},           {zoo::Family::xvgg8, 1, 1.0, 580'362},
        {zoo::Family::vgg_compact, 2, 1.0, 329'034},      {zoo::Family::vgg_compact, 4, 1.0, 200'010},
        {zoo::Family::vgg_compact, 8, 1.0, 135'498},      {zoo::Family::mobilenet_v1, 1, 1.0, 3'238'538},
        {zoo::Family::mobilenet_v1, 1, 0.5, 834'378},     {zoo::Family::mobilenet_v1, 1, 0.25, 220'970},
        {zoo::Family::mobilenet_compact, 2, 1.0, 1'668'746}, {zoo::Family::mobilenet_compact, 4, 1.0, 883'850},
        {zoo::Family::mobilenet_compact, 8, 1.0, 491'402},
    };
    const auto t0 = Clock::now();
    std::string bad;
    for (const auto& c : cases) {
        zoo::ModelSpec s;
        s.family = c.family;
        s.compact_factor = c.c;
        s.width_multiplier = c.wm;
        auto m = zoo::build_model<float>(s);
        const Index analytic = complexity::count_params(m);
        m.materialize(nullptr);
        const Index allocated = m.params().total_elements();
        if (analytic != c.expected || allocated != c.expected)
            bad += " " + std::string(zoo::to_string(c.family)) + "(C=" + std::to_string(c.c) +
                   ",wm=" + fmt("%g", c.wm) + "): analyzer " + std::to_string(analytic) + " allocated " +
                   std::to_string(allocated);
    }
    const double elapsed = seconds_since(t0);

    zoo::ModelSpec rs;
    rs.family = zoo::Family::resnet_like;
    auto resnet = zoo::build_model<float>(rs);
    const Index rn = complexity::count_params(resnet);
    resnet.materialize(nullptr);
    const double delta = (static_cast<double>(rn) - 23'601'930.0) / 23'601'930.0;
    const bool resnet_ok = std::abs(delta) <= 0.02 && resnet.params().total_elements() == rn;

    return pass_if(bad.empty() && elapsed < 1.0 && resnet_ok,
                   std::to_string(cases.size()) + " presets exact in " + fmt("%.3f", elapsed) + " s (< 1 s)" +
                       bad + "; resnet_like " + std::to_string(rn) + " (" + fmt("%+.3f", 100 * delta) +
                       " % of 23,601,930, limit 2 %)");
}

// --- 2 -------------------------------------------------------------------------

Outcome formula_consistency()
{
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (Index k : {1, 3, 5})
        for (Index cout = 8; cout <= 512; ++cout)
            for (Index m : {1, 2}) {
                const nn::PoolSpec pool(m == 1 ? nn::PoolVariant::sum : nn::PoolVariant::avg, 2);
                const double ratio = static_cast<double>(complexity::flops_compact(k, 64, cout, 16, 16, pool)) /
                                     static_cast<double>(complexity::flops_standard(k, 64, cout, 16, 16));
                worst = std::max(worst, std::abs(ratio - complexity::compression_rate(k, cout, m)));
            }
    bool band = true, monotone = true;
    double prev = 0.0, lo = 1e9, hi = 0.0;
    for (Index cout = 40; cout <= 1'000'000; ++cout) {
        const double r = 1.0 / complexity::compression_rate(3, cout, 1);
        band = band && r >= 12.0 && r < 18.0;
        monotone = monotone && r > prev;
        prev = r;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    const double elapsed = seconds_since(t0);
    return pass_if(worst <= 1e-12 && band && monotone && hi > 17.999 && elapsed < 1.0,
                   "max |ratio - alpha| " + fmt("%.2e", worst) + " (<= 1e-12); reduction over C_out 40..1e6 in [" +
                       fmt("%.4f", lo) + ", " + fmt("%.6f", hi) + "] monotone=" + (monotone ? "yes" : "no") +
                       "; " + fmt("%.3f", elapsed) + " s");
}

// --- 3 -------------------------------------------------------------------------

Outcome gradient_suite()
{
    const auto t0 = Clock::now();
    const auto results = checks::run_gradcheck_suite({0, false});
    const double elapsed = seconds_since(t0);
    const std::vector<std::string> required{
        "grad/pool/max/C1",      "grad/pool/max/C8",       "grad/pool/sum/C1",         "grad/pool/sum/C8",
        "grad/pool/avg/C1",      "grad/pool/avg/C8",       "grad/conv/standard/",      "grad/conv/depthwise/",
        "grad/conv/pointwise/",  "grad/batchnorm/train",   "grad/dense",               "grad/softmax_xent",
        "grad/network/compact_2block/max", "grad/network/compact_2block/sum", "grad/network/compact_2block/avg"};
    std::string missing, failed;
    for (const auto& r : required) {
        bool found = false;
        for (const auto& c : results) found = found || c.name.rfind(r, 0) == 0;
        if (!found) missing += " " + r;
    }
    double worst = 0.0;
    Index checked = 0;
    for (const auto& c : results) {
        worst = std::max(worst, c.metric);
        checked += c.checked;
        if (!c.passed || c.metric >= 1e-5) failed += " " + c.name;
    }
    return pass_if(missing.empty() && failed.empty() && elapsed < 120.0,
                   std::to_string(results.size()) + " checks, " + std::to_string(checked) +
                       " elements, max rel err " + fmt("%.2e", worst) + " (< 1e-5), " + fmt("%.1f", elapsed) +
                       " s (< 120 s)" + (missing.empty() ? "" : "; missing:" + missing) +
                       (failed.empty() ? "" : "; failed:" + failed));
}

// --- 4, 5 ----------------------------------------------------------------------

const checks::CheckResult* find(const std::vector<checks::CheckResult>& rs, const std::string& name)
{
    for (const auto& r : rs)
        if (r.name == name) return &r;
    return nullptr;
}

Outcome oracle_equivalence(const std::vector<checks::CheckResult>& rs, double elapsed)
{
    const auto* conv = find(rs, "oracle/conv_vs_naive");
    const auto* compact = find(rs, "oracle/compact_vs_composition");
    if (!conv || !compact) return {Verdict::fail, "oracle checks missing from the self-test suite"};
    const bool ok = conv->passed && conv->checked == 100 && compact->passed && compact->checked == 200;
    return pass_if(ok && elapsed < 120.0, "conv vs naive loop: " + std::to_string(conv->checked) + " draws, " +
                                              fmt("%.0f", conv->metric) + " mismatches; fused vs composition: " +
                                              std::to_string(compact->checked) + " draws, " +
                                              fmt("%.0f", compact->metric) + " mismatches; bitwise; " +
                                              fmt("%.2f", elapsed) + " s");
}

Outcome linear_identity(const std::vector<checks::CheckResult>& rs)
{
    const auto* r = find(rs, "oracle/avg_equals_sum_over_C");
    if (!r) return {Verdict::fail, "check missing from the self-test suite"};
    return pass_if(r->passed && r->checked == 100, "avg == sum / C bitwise on " + std::to_string(r->checked) +
                                                       " draws, " + fmt("%.0f", r->metric) + " mismatches");
}

// --- 6 -------------------------------------------------------------------------

Outcome synthetic_training()
{
    const auto t0 = Clock::now();
    const auto ds = data::synth_dataset(10, 200, 50, zoo::FeatureShape{1, 32, 32}, 1);
    zoo::ModelSpec spec;
    spec.family = zoo::Family::vgg_compact;
    spec.compact_factor = 2;
    spec.pool = nn::PoolVariant::max;
    spec.width_divisor = 4;
    spec.input = {1, 32, 32};
    auto model = zoo::build_model<float>(spec);
    Prng init(0);
    model.materialize(&init);
    autograd::TrainConfig cfg;
    cfg.epochs = 15;
    const auto r = autograd::train(model, ds, cfg, [](const autograd::EpochRecord& e) {
        std::printf("    [6a] epoch %2d train_acc %.4f val_acc %.4f\n", e.epoch, e.train_acc, e.val_acc);
        std::fflush(stdout);
    });
    const double elapsed = seconds_since(t0);
    if (r.diverged) return {Verdict::fail, "diverged: " + r.diagnostic};
    const double final_acc = r.history.rows.back().val_acc;
    return pass_if(final_acc >= 0.90 && elapsed < 600.0,
                   std::to_string(ds.train.size()) + "/" + std::to_string(ds.val.size()) +
                       " synthetic, vgg_compact C=2 max widths/4, " + std::to_string(r.history.rows.size()) +
                       " epochs: final val acc " + fmt("%.4f", final_acc) + " (>= 0.90), " +
                       fmt("%.1f", elapsed) + " s (< 600 s)");
}

Outcome cifar_training()
{
    const char* dir = std::getenv("CIFAR10_DIR");
    if (!dir || !fs::is_directory(dir))
        return {Verdict::skip, "CIFAR-10 binaries unavailable (set CIFAR10_DIR to the cifar-10-batches-bin "
                               "directory to run); not evaluated"};
    const auto t0 = Clock::now();
    const auto ds = data::load_cifar10(dir, 0.1, 0);
    zoo::ModelSpec spec;
    spec.family = zoo::Family::vgg_compact;
    spec.compact_factor = 2;
    spec.input = {3, 32, 32};
    auto model = zoo::build_model<float>(spec);
    Prng init(0);
    model.materialize(&init);
    autograd::TrainConfig cfg;
    cfg.epochs = 30;
    const auto r = autograd::train(model, ds, cfg, [](const autograd::EpochRecord& e) {
        std::printf("    [6b] epoch %2d train_acc %.4f val_acc %.4f\n", e.epoch, e.train_acc, e.val_acc);
        std::fflush(stdout);
    });
    const double elapsed = seconds_since(t0);
    if (r.diverged) return {Verdict::fail, "diverged: " + r.diagnostic};
    double best = 0.0;
    for (const auto& row : r.history.rows) best = std::max(best, row.val_acc);
    return pass_if(best >= 0.40 && elapsed < 2700.0,
                   std::to_string(ds.train.size()) + "/" + std::to_string(ds.val.size()) +
                       " CIFAR-10 subset, best test acc within 30 epochs " + fmt("%.4f", best) + " (>= 0.40), " +
                       fmt("%.0f", elapsed) + " s (< 2700 s)");
}

// --- 7 -------------------------------------------------------------------------

Outcome directional_speed()
{
    const auto t0 = Clock::now();
    auto build = [](zoo::Family f, Index c) {
        zoo::ModelSpec s;
        s.family = f;
        s.compact_factor = c;
        auto m = zoo::build_model<float>(s);
        Prng p(0);
        m.materialize(&p);
        return m;
    };
    bench::BenchConfig cfg;
    cfg.warmup = 1;
    cfg.timed = 5;
    const auto standard = bench::bench_throughput(build(zoo::Family::vgg8, 1), cfg);
    const auto compact = bench::bench_throughput(build(zoo::Family::vgg_compact, 8), cfg);
    const double model_speedup = compact.samples_per_sec / standard.samples_per_sec;
    const auto layer = bench::compare_compact_vs_standard(128, 128, 32, 32, 3, nn::PoolSpec(nn::PoolVariant::max, 2),
                                                          2, 9);
    const double elapsed = seconds_since(t0);
    return pass_if(model_speedup >= 1.5 && layer.speedup() >= 1.5 && elapsed < 300.0,
                   "1x1x128x512 single thread: vgg8 " + fmt("%.3f", standard.samples_per_sec) +
                       " samples/s, vgg_compact C=8 " + fmt("%.3f", compact.samples_per_sec) + " samples/s (" +
                       fmt("%.2f", model_speedup) + "x, >= 1.5x); layer 128->128 32x32 C=2: " +
                       fmt("%.2f", layer.speedup()) + "x (>= 1.5x); " + fmt("%.0f", elapsed) + " s (< 300 s)");
}

// --- 8 -------------------------------------------------------------------------

Outcome determinism()
{
    const fs::path dir = fs::temp_directory_path() / "compactnet_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::vector<std::pair<std::string, std::string>> jobs{
        {"gradcheck", "gradcheck --seed 7"},
        {"selftest", "selftest --seed 7"},
        {"train", "train --arch vgg_compact --C 2 --pool avg --width-divisor 4 --input 1x32x32 --data synthetic "
                  "--train-per-class 20 --val-per-class 10 --epochs 3 --seed 7"},
    };
    std::string detail, bad;
    for (const auto& [name, args] : jobs) {
        std::string outputs[2];
        for (int i = 0; i < 2; ++i) {
            const std::string path = (dir / (name + std::to_string(i) + ".csv")).string();
            const auto r = cli::run(args + " --out " + path);
            if (r.rc != 0) bad += " " + name + " exited " + std::to_string(r.rc);
            outputs[i] = cli::slurp(path);
        }
        const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
        if (!same) bad += " " + name + " differs";
        detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(outputs[0].size()) + " bytes " +
                  (same ? "identical" : "DIFFERENT");
    }
    fs::remove_all(dir);
    return pass_if(bad.empty(), detail + (bad.empty() ? "" : ";" + bad));
}

} // namespace

int main()
{
    int failures = 0;
    auto report = [&](const char* id, const char* title, const Outcome& o) {
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::skip ? "SKIP" : "FAIL";
        if (o.verdict == Verdict::fail) ++failures;
        std::printf("%s [%s] %s: %s\n", tag, id, title, o.detail.c_str());
        std::fflush(stdout);
    };
    auto guarded = [](const std::function<Outcome()>& fn) {
        try {
            return fn();
        } catch (const std::exception& e) {
            return Outcome{Verdict::fail, std::string("exception: ") + e.what()};
        }
    };

    report("1", "exact parameter reproduction", guarded(exact_parameters));
    report("2", "formula consistency", guarded(formula_consistency));
    report("3", "gradient correctness", guarded(gradient_suite));

    const auto t0 = Clock::now();
    std::vector<checks::CheckResult> selftest;
    std::string selftest_error;
    try {
        selftest = checks::run_selftest_suite({0, false});
    } catch (const std::exception& e) {
        selftest_error = e.what();
    }
    const double selftest_seconds = seconds_since(t0);
    if (!selftest_error.empty()) {
        report("4", "oracle equivalence", {Verdict::fail, "exception: " + selftest_error});
        report("5", "avg equals sum over C", {Verdict::fail, "exception: " + selftest_error});
    } else {
        report("4", "oracle equivalence", oracle_equivalence(selftest, selftest_seconds));
        report("5", "avg equals sum over C", linear_identity(selftest));
    }

    report("6a", "desk-scale training, synthetic", guarded(synthetic_training));
    report("6b", "desk-scale training, CIFAR-10 subset", guarded(cifar_training));
    report("7", "directional speed", guarded(directional_speed));
    report("8", "determinism", guarded(determinism));

    std::printf("acceptance: %s\n", failures == 0 ? "all evaluated criteria passed" : "FAILED");
    return failures == 0 ? 0 : 1;
}
