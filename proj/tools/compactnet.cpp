// SPDX-License-Identifier: Apache-2.0
// compactnet: analyze | gradcheck | selftest | train | bench

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "compactnet/autograd/train.hpp"
#include "compactnet/checks.hpp"
#include "compactnet/complexity.hpp"
#include "compactnet/data/bench.hpp"
#include "compactnet/data/dataset.hpp"
#include "compactnet/data/tensor_io.hpp"
#include "compactnet/zoo/builders.hpp"

namespace cn = compactnet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kCheckFailed = 2, kDiverged = 3 };

/// Resolved settings: config file entries overridden by explicit flags.
struct Settings {
    cn::zoo::ModelSpec model;
    cn::autograd::TrainConfig train;
    std::string data = "synthetic";
    double subset = 1.0;
    cn::Index train_per_class = 200;
    cn::Index val_per_class = 50;
    std::string out;
    std::string checkpoint;
    cn::bench::BenchConfig bench;
    bool inject_fault = false;
};

long long to_int(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    long long r = 0;
    try {
        r = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw cn::ArgumentError(key + " expects an integer, got '" + v + "'");
    return r;
}

double to_double(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    double r = 0;
    try {
        r = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw cn::ArgumentError(key + " expects a number, got '" + v + "'");
    return r;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw cn::ArgumentError(key + " expects true/false, got '" + v + "'");
}

void apply(Settings& s, const std::string& key, const std::string& v)
{
    if (cn::zoo::apply_model_key(s.model, key, v)) return;
    if (key == "epochs") s.train.epochs = static_cast<int>(to_int(key, v));
    else if (key == "lr" || key == "learning_rate") s.train.learning_rate = to_double(key, v);
    else if (key == "batch" || key == "batch_size") {
        s.train.batch_size = to_int(key, v);
        s.bench.batch = s.train.batch_size;
    }
    else if (key == "seed") s.train.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "data") s.data = v;
    else if (key == "subset") s.subset = to_double(key, v);
    else if (key == "train_per_class") s.train_per_class = to_int(key, v);
    else if (key == "val_per_class") s.val_per_class = to_int(key, v);
    else if (key == "out") s.out = v;
    else if (key == "checkpoint") s.checkpoint = v;
    else if (key == "threads") s.bench.threads = static_cast<int>(to_int(key, v));
    else if (key == "warmup") s.bench.warmup = static_cast<int>(to_int(key, v));
    else if (key == "iters") s.bench.timed = static_cast<int>(to_int(key, v));
    else if (key == "inject_fault") s.inject_fault = to_bool(key, v);
    else throw cn::ArgumentError("unknown setting '" + key + "'");
}

/// Flags of one subcommand, keyed like the config file; unset flags stay empty.
struct FlagSet {
    std::map<std::string, std::string> values;
    std::string config;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help)
    {
        app->add_option(flag, values[key], help);
    }

    Settings resolve(cn::Index default_batch) const
    {
        Settings s;
        s.train.batch_size = default_batch;
        s.bench.batch = default_batch;
        if (!config.empty())
            for (const auto& [k, v] : cn::zoo::load_key_values(config)) apply(s, k, v);
        for (const auto& [k, v] : values)
            if (!v.empty()) apply(s, k, v);
        if (inject_fault) s.inject_fault = true;
        s.model.validate();
        return s;
    }

    bool inject_fault = false;
};

void add_model_flags(CLI::App* app, FlagSet& f)
{
    f.add(app, "--arch", "arch",
          "vgg8 | xvgg8 | vgg_compact | resnet_like | resnet_compact | mobilenet_v1 | mobilenet_compact");
    f.add(app, "--C", "C", "compact factor (compact families)");
    f.add(app, "--pool", "pool", "max | sum | avg");
    f.add(app, "--input", "input", "input shape CxHxW (default 1x128x512)");
    f.add(app, "--classes", "classes", "number of classes (default 10)");
    f.add(app, "--width-multiplier", "width_multiplier", "MobileNet v1 width multiplier");
    f.add(app, "--width-divisor", "width_divisor", "divide VGG-family widths");
    app->add_option("--config", f.config, "key = value settings file (flags override it)");
}

void add_seed_flags(CLI::App* app, FlagSet& f)
{
    f.add(app, "--seed", "seed", "PRNG seed (default 0)");
    f.add(app, "--out", "out", "output CSV path");
}

std::string header(const std::string& cmd, const std::string& fields)
{
    return "# compactnet " + cmd + " " + fields + "\n";
}

std::string train_fields(const Settings& s)
{
    const cn::nn::BatchNormOptions bn;
    std::ostringstream os;
    os << s.model.describe() << " data=" << s.data << " subset=" << s.subset
       << " train_per_class=" << s.train_per_class << " val_per_class=" << s.val_per_class
       << " epochs=" << s.train.epochs << " lr=" << s.train.learning_rate << " batch=" << s.train.batch_size
       << " beta1=" << s.train.beta1 << " beta2=" << s.train.beta2 << " adam_eps=" << s.train.adam_eps
       << " bn_momentum=" << bn.momentum << " bn_eps=" << bn.eps << " seed=" << s.train.seed;
    return os.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw cn::ArgumentError("cannot write '" + path + "'");
    os << content;
}

int cmd_analyze(const Settings& s)
{
    auto model = cn::zoo::build_model<float>(s.model);
    const auto report = cn::complexity::analyze(model);
    std::cout << report.table();
    if (!s.out.empty()) {
        std::ostringstream csv;
        csv << header("analyze", s.model.describe() + " seed=" + std::to_string(s.train.seed));
        report.write_csv(csv);
        write_file(s.out, csv.str());
    }
    return kOk;
}

int cmd_checks(const Settings& s, const char* cmd, bool gradient)
{
    const cn::checks::SuiteOptions opt{s.train.seed, s.inject_fault};
    const auto results = gradient ? cn::checks::run_gradcheck_suite(opt) : cn::checks::run_selftest_suite(opt);
    for (const auto& r : results)
        std::printf("%-4s %-48s metric=%.3e checked=%lld skipped=%lld %s\n", r.passed ? "PASS" : "FAIL",
                    r.name.c_str(), r.metric, static_cast<long long>(r.checked), static_cast<long long>(r.skipped),
                    r.detail.c_str());
    const bool ok = cn::checks::all_passed(results);
    std::printf("%s: %s\n", cmd, ok ? "all checks passed" : "FAILED");
    if (!s.out.empty()) {
        std::ostringstream csv;
        csv << header(cmd, "seed=" + std::to_string(s.train.seed) +
                               " inject_fault=" + (s.inject_fault ? "1" : "0") + " tolerance=1e-05 step=1e-04");
        cn::checks::write_check_csv(csv, results);
        write_file(s.out, csv.str());
    }
    return ok ? kOk : kCheckFailed;
}

int cmd_train(const Settings& s)
{
    cn::Prng root(s.train.seed);
    cn::Prng init = root.split();
    const std::uint64_t data_seed = root.split().next_u64();
    cn::data::Dataset ds = s.data == "synthetic"
                               ? cn::data::synth_dataset(s.model.classes, s.train_per_class, s.val_per_class,
                                                         s.model.input, data_seed)
                               : cn::data::load_cifar10(s.data, s.subset, data_seed);
    auto model = cn::zoo::build_model<float>(s.model);
    model.materialize(&init);
    std::printf("train %s: %lld params, %lld train / %lld val samples\n", model.name().c_str(),
                static_cast<long long>(model.params().total_elements()), static_cast<long long>(ds.train.size()),
                static_cast<long long>(ds.val.size()));
    auto result = cn::autograd::train(model, ds, s.train, [](const cn::autograd::EpochRecord& r) {
        std::printf("epoch %3d  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f\n", r.epoch,
                    r.train_loss, r.train_acc, r.val_loss, r.val_acc);
        std::fflush(stdout);
    });
    if (!s.out.empty()) {
        std::ostringstream csv;
        csv << header("train", train_fields(s));
        result.history.write_csv(csv);
        write_file(s.out, csv.str());
    }
    if (!s.checkpoint.empty()) {
        model.params().restore(result.best_params);
        cn::io::save_params(s.checkpoint, model.params());
        write_file(s.checkpoint + ".cfg", header("train", train_fields(s)) + "family = " +
                                              cn::zoo::to_string(s.model.family) + "\nC = " +
                                              std::to_string(s.model.compact_factor) + "\npool = " +
                                              cn::nn::to_string(s.model.pool) + "\nwidth_multiplier = " +
                                              std::to_string(s.model.width_multiplier) + "\nwidth_divisor = " +
                                              std::to_string(s.model.width_divisor) + "\nclasses = " +
                                              std::to_string(s.model.classes) + "\ninput = " +
                                              s.model.input.str() + "\n");
        std::printf("checkpoint (best val, epoch %d) -> %s\n", result.best_epoch, s.checkpoint.c_str());
    }
    if (result.diverged) {
        std::fprintf(stderr, "training diverged: %s\n", result.diagnostic.c_str());
        return kDiverged;
    }
    return kOk;
}

int cmd_bench(const Settings& s)
{
    auto model = cn::zoo::build_model<float>(s.model);
    cn::Prng init(s.train.seed);
    model.materialize(&init);
    const auto report = cn::complexity::analyze(model);
    const auto r = cn::bench::bench_throughput(model, s.bench, s.train.seed);
    std::printf("%s: %.4f samples/sec (median %.6f s over %d iterations, batch %lld, threads 1)\n",
                model.name().c_str(), r.samples_per_sec, r.median_seconds, s.bench.timed,
                static_cast<long long>(r.batch));
    for (const auto& l : r.breakdown) std::printf("  %-32s %10.6f s\n", l.layer.c_str(), l.seconds);
    if (!s.out.empty()) {
        std::ostringstream csv;
        csv << header("bench", s.model.describe() + " batch=" + std::to_string(s.bench.batch) +
                                   " warmup=" + std::to_string(s.bench.warmup) +
                                   " iters=" + std::to_string(s.bench.timed) + " threads=1 seed=" +
                                   std::to_string(s.train.seed));
        cn::bench::write_bench_csv(csv, {{model.name(), s.model.compact_factor, cn::nn::to_string(s.model.pool),
                                          report.total_params, report.mflops(), r.samples_per_sec}});
        write_file(s.out, csv.str());
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Compact convolution networks: analysis, verification, training and benchmarks"};
    app.require_subcommand(1);

    FlagSet analyze_f, grad_f, self_f, train_f, bench_f;

    auto* analyze = app.add_subcommand("analyze", "parameter and FLOP report");
    add_model_flags(analyze, analyze_f);
    add_seed_flags(analyze, analyze_f);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite (64-bit)");
    add_seed_flags(gradcheck, grad_f);
    gradcheck->add_flag("--inject-fault", grad_f.inject_fault, "corrupt the channel-pool backward");

    auto* selftest = app.add_subcommand("selftest", "oracle-equivalence suite");
    add_seed_flags(selftest, self_f);
    selftest->add_flag("--inject-fault", self_f.inject_fault, "perturb the optimized kernels");

    auto* train = app.add_subcommand("train", "train on synthetic data or a CIFAR-10 directory");
    add_model_flags(train, train_f);
    add_seed_flags(train, train_f);
    train_f.add(train, "--data", "data", "'synthetic' or a CIFAR-10 binary directory");
    train_f.add(train, "--subset", "subset", "CIFAR-10 subset fraction");
    train_f.add(train, "--train-per-class", "train_per_class", "synthetic training samples per class");
    train_f.add(train, "--val-per-class", "val_per_class", "synthetic validation samples per class");
    train_f.add(train, "--epochs", "epochs", "epochs");
    train_f.add(train, "--lr", "lr", "Adam learning rate");
    train_f.add(train, "--batch", "batch", "batch size");
    train_f.add(train, "--checkpoint", "checkpoint", "CTM checkpoint of the best-val parameters");

    auto* bench = app.add_subcommand("bench", "single-thread forward throughput");
    add_model_flags(bench, bench_f);
    add_seed_flags(bench, bench_f);
    bench_f.add(bench, "--threads", "threads", "must be 1");
    bench_f.add(bench, "--warmup", "warmup", "warmup iterations");
    bench_f.add(bench, "--iters", "iters", "timed iterations");
    bench_f.add(bench, "--batch", "batch", "batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*analyze) return cmd_analyze(analyze_f.resolve(32));
        if (*gradcheck) return cmd_checks(grad_f.resolve(32), "gradcheck", true);
        if (*selftest) return cmd_checks(self_f.resolve(32), "selftest", false);
        if (*train) return cmd_train(train_f.resolve(32));
        if (*bench) return cmd_bench(bench_f.resolve(1));
    } catch (const cn::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDiverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kUsage;
}
