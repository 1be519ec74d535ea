// SPDX-License-Identifier: Apache-2.0
#include "compactnet/checks.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "compactnet/autograd/grad_check.hpp"
#include "compactnet/complexity.hpp"
#include "compactnet/data/tensor_io.hpp"
#include "compactnet/prng.hpp"
#include "compactnet/zoo/model.hpp"

namespace compactnet::checks {

namespace {

using autograd::NodeId;
using autograd::ParamStore;
using autograd::Tape;
using nn::ConvKind;
using nn::ConvSpec;
using nn::Padding;
using nn::PoolSpec;
using nn::PoolVariant;

constexpr PoolVariant kVariants[] = {PoolVariant::max, PoolVariant::sum, PoolVariant::avg};

// ---------------------------------------------------------------------------
// Gradient suite

CheckResult from_report(std::string name, const autograd::GradCheckReport& r)
{
    CheckResult c{std::move(name), r.passed() && r.checked() > 0, r.max_rel_error(), r.checked(), r.skipped(), ""};
    if (r.checked() == 0) c.detail = "no element checked";
    for (const auto& e : r.entries)
        if (e.max_rel_error >= r.tolerance) {
            char buf[96];
            std::snprintf(buf, sizeof buf, " (numeric %.9e, analytic %.9e)", e.worst_numeric, e.worst_analytic);
            c.detail = "worst in " + e.name + " at " + std::to_string(e.worst_index) + buf;
            break;
        }
    return c;
}

/// Channel pool whose backward is off by a factor of two.
NodeId faulty_channel_pool(Tape<double>& t, NodeId x, const PoolSpec& spec)
{
    auto [y, cache] = nn::channel_group_pool_fwd(t.value(x), spec);
    autograd::mark_argmax(t, cache.argmax);
    return t.record("channel_pool", std::move(y), {x},
                    [x, spec, cache = std::move(cache)](Tape<double>& tp, const TensorD& g) {
                        tp.accumulate(x, nn::channel_group_pool_bwd(g, cache, spec) * 2.0);
                    });
}

NodeId pool_node(Tape<double>& t, NodeId x, const PoolSpec& spec, bool fault)
{
    return fault ? faulty_channel_pool(t, x, spec) : autograd::channel_pool(t, x, spec);
}

CheckResult check_pool(Prng& prng, PoolVariant v, Index c, bool tie, bool fault)
{
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, Shape{2, 8, 3, 3}));
    if (tie) x.value(0, 1, 0, 0) = x.value(0, 0, 0, 0);
    const PoolSpec spec(v, c);
    TensorD wts = uniform_tensor<double>(prng, Shape{2, 8 / c, 3, 3});
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        return autograd::weighted_sum(t, pool_node(t, t.param(x), spec, fault), wts);
    });
    std::string name = std::string("grad/pool/") + nn::to_string(v) + "/C" + std::to_string(c) + (tie ? "/tie" : "");
    CheckResult r = from_report(name, report);
    if (tie && r.skipped == 0) {
        r.passed = false;
        r.detail = "tied element was not skipped";
    }
    return r;
}

CheckResult check_conv(Prng& prng, ConvKind kind, Index stride, Padding padding)
{
    const Index k = kind == ConvKind::pointwise ? 1 : 3;
    const Index c_in = 3;
    const Index c_out = kind == ConvKind::depthwise ? c_in : 4;
    const ConvSpec spec{kind, k, c_in, c_out, stride, padding, true};
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, Shape{2, c_in, 5, 5}));
    auto& w = store.add("w", uniform_tensor<double>(prng, spec.weight_shape()));
    auto& b = store.add("b", uniform_tensor<double>(prng, Shape{c_out}));
    const Index ho = nn::conv_output_extent(5, k, stride, padding);
    TensorD wts = uniform_tensor<double>(prng, Shape{2, c_out, ho, ho});
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        return autograd::weighted_sum(t, autograd::conv2d(t, t.param(x), t.param(w), t.param(b), spec), wts);
    });
    return from_report(std::string("grad/conv/") + nn::to_string(kind) + "/s" + std::to_string(stride) + "/" +
                           (padding == Padding::same ? "same" : "valid"),
                       report);
}

CheckResult check_batchnorm(Prng& prng, nn::Mode mode)
{
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, Shape{4, 3, 2, 2}));
    auto& gamma = store.add("gamma", uniform_tensor<double>(prng, Shape{3}, 0.5, 1.5));
    auto& beta = store.add("beta", uniform_tensor<double>(prng, Shape{3}, -0.5, 0.5));
    auto& mean = store.add("running_mean", uniform_tensor<double>(prng, Shape{3}, -0.5, 0.5), false);
    auto& var = store.add("running_var", uniform_tensor<double>(prng, Shape{3}, 0.5, 2.0), false);
    TensorD wts = uniform_tensor<double>(prng, Shape{4, 3, 2, 2});
    const TensorD mean0 = mean.value, var0 = var.value;
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        mean.value = mean0;
        var.value = var0;
        NodeId y = autograd::batchnorm(t, t.param(x), t.param(gamma), t.param(beta), mean, var, mode, {});
        return autograd::weighted_sum(t, y, wts);
    });
    return from_report(mode == nn::Mode::train ? "grad/batchnorm/train" : "grad/batchnorm/infer", report);
}

CheckResult check_dense(Prng& prng)
{
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, Shape{3, 4, 2, 2}));
    auto& w = store.add("w", uniform_tensor<double>(prng, Shape{5, 16}));
    auto& b = store.add("b", uniform_tensor<double>(prng, Shape{5}));
    TensorD wts = uniform_tensor<double>(prng, Shape{3, 5, 1, 1});
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        return autograd::weighted_sum(t, autograd::dense(t, t.param(x), t.param(w), t.param(b)), wts);
    });
    return from_report("grad/dense", report);
}

CheckResult check_softmax_xent(Prng& prng)
{
    ParamStore<double> store;
    auto& z = store.add("logits", uniform_tensor<double>(prng, Shape{4, 5, 1, 1}, -2.0, 2.0));
    const std::vector<int> labels{0, 3, 1, 4};
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        return autograd::softmax_xent(t, t.param(z), labels).loss;
    });
    return from_report("grad/softmax_xent", report);
}

template <typename Op>
CheckResult check_unary(Prng& prng, const std::string& name, const Shape& in, Op op)
{
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, in));
    Tape<double> probe(autograd::TapeOptions{false, false});
    const Shape out = probe.value(op(probe, probe.constant(x.value))).shape();
    TensorD wts = uniform_tensor<double>(prng, out);
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        return autograd::weighted_sum(t, op(t, t.param(x)), wts);
    });
    return from_report(name, report);
}

CheckResult check_compact(Prng& prng, PoolVariant v, Index c, Index stride, bool fault)
{
    const ConvSpec conv{ConvKind::standard, 3, 8, 6, stride, Padding::same, false};
    const PoolSpec pool(v, c);
    ParamStore<double> store;
    auto& x = store.add("x", uniform_tensor<double>(prng, Shape{2, 8, 5, 5}));
    auto& w_dw = store.add("w_dw", uniform_tensor<double>(prng, Shape{8, 1, 3, 3}));
    auto& b_dw = store.add("b_dw", uniform_tensor<double>(prng, Shape{8}));
    auto& w_pw = store.add("w_pw", uniform_tensor<double>(prng, Shape{6, 8 / c, 1, 1}));
    auto& b_pw = store.add("b_pw", uniform_tensor<double>(prng, Shape{6}));
    const Index ho = nn::conv_output_extent(5, 3, stride, Padding::same);
    TensorD wts = uniform_tensor<double>(prng, Shape{2, 6, ho, ho});
    auto report = autograd::grad_check(store, [&](Tape<double>& t) {
        NodeId y;
        if (fault) {
            // Unfused path so the faulty pool backward is exercised.
            const ConvSpec dw = nn::compact_depthwise_spec(conv, true);
            const ConvSpec pw = nn::compact_pointwise_spec(conv, pool, true);
            NodeId d = autograd::conv2d(t, t.param(x), t.param(w_dw), t.param(b_dw), dw);
            y = autograd::conv2d(t, faulty_channel_pool(t, d, pool), t.param(w_pw), t.param(b_pw), pw);
        } else {
            y = autograd::compact_conv(t, t.param(x), t.param(w_dw), t.param(b_dw), t.param(w_pw), t.param(b_pw),
                                       pool, conv);
        }
        return autograd::weighted_sum(t, y, wts);
    });
    return from_report(std::string("grad/compact_conv/") + nn::to_string(v) + "/C" + std::to_string(c) + "/s" +
                           std::to_string(stride),
                       report);
}

/// Network-level layer that routes its channel pool through the faulty backward.
class FaultyPoolLayer final : public zoo::Layer<double> {
public:
    FaultyPoolLayer(std::string name, PoolSpec spec) : zoo::Layer<double>(std::move(name)), spec_(spec) {}
    zoo::FeatureShape resolve(const zoo::FeatureShape& in) override
    {
        return {spec_.output_channels(in.c), in.h, in.w};
    }
    void describe(std::vector<zoo::LayerSpec>&) const override {}
    void create_params(ParamStore<double>&, Prng*) override {}
    NodeId forward(Tape<double>& t, NodeId x, nn::Mode) const override { return faulty_channel_pool(t, x, spec_); }

private:
    PoolSpec spec_;
};

CheckResult check_network(Prng& prng, PoolVariant v, bool fault)
{
    using namespace zoo;
    const PoolSpec pool(v, 2);
    std::vector<LayerPtr<double>> layers;
    // Block 1: depthwise with bias, BN and ReLU (unfused path).
    layers.push_back(std::make_unique<DepthwiseUnitLayer<double>>("block1.compact", 3, 8, 1,
                                                                  DepthwiseConvention{true, true, true}, true, pool));
    layers.push_back(std::make_unique<BatchNormLayer<double>>("block1.bn"));
    layers.push_back(std::make_unique<ReluLayer<double>>("block1.relu"));
    // Block 2: plain depthwise bias (fused compact kernel).
    if (fault) {
        layers.push_back(std::make_unique<Conv2dLayer<double>>("block2.dw", ConvKind::depthwise, 3, 0, 1, true));
        layers.push_back(std::make_unique<FaultyPoolLayer>("block2.pool", pool));
        layers.push_back(std::make_unique<Conv2dLayer<double>>("block2.pw", ConvKind::pointwise, 1, 8, 1, true));
    } else {
        layers.push_back(std::make_unique<DepthwiseUnitLayer<double>>(
            "block2.compact", 3, 8, 1, DepthwiseConvention{true, false, false}, true, pool));
    }
    layers.push_back(std::make_unique<BatchNormLayer<double>>("block2.bn"));
    layers.push_back(std::make_unique<ReluLayer<double>>("block2.relu"));
    layers.push_back(std::make_unique<GlobalAvgPoolLayer<double>>("head.gap"));
    layers.push_back(std::make_unique<DenseLayer<double>>("head.dense", 3));
    // Pooled widths of 4 keep the 1x1 stages ahead of each batch norm well
    // conditioned; a 1-channel 1x1 before BN has a vanishing weight gradient.
    Model<double> model("compact_2block", FeatureShape{8, 8, 8}, std::move(layers));
    Prng init = prng.split();
    model.materialize(&init);
    const TensorD x = uniform_tensor<double>(prng, Shape{8, 8, 8, 8});
    const std::vector<int> labels{0, 2, 1, 2, 1, 0, 0, 2};
    auto report = autograd::grad_check(model.params(), [&](Tape<double>& t) {
        NodeId logits = model.forward(t, t.constant(x), nn::Mode::train);
        return autograd::softmax_xent(t, logits, labels).loss;
    });
    return from_report(std::string("grad/network/compact_2block/") + nn::to_string(v), report);
}

// ---------------------------------------------------------------------------
// Oracle suite

/// Same-padding offset, written out independently of the kernel geometry.
Index naive_pad(Index in, Index k, Index s, Padding p)
{
    if (p == Padding::valid) return 0;
    const Index out = (in + s - 1) / s;
    const Index total = (out - 1) * s + k - in;
    return total > 0 ? total / 2 : 0;
}

Index naive_extent(Index in, Index k, Index s, Padding p)
{
    return p == Padding::same ? (in + s - 1) / s : (in - k) / s + 1;
}

/// Direct loop: per output element, input channel, then kernel row, then
/// kernel column, from zero; the bias is added last.
TensorF naive_conv(const TensorF& x, const TensorF& w, const TensorF* b, const ConvSpec& s)
{
    const Index n = x.shape().n(), h = x.shape().h(), wd = x.shape().w();
    const Index ho = naive_extent(h, s.kernel, s.stride, s.padding);
    const Index wo = naive_extent(wd, s.kernel, s.stride, s.padding);
    const Index pt = naive_pad(h, s.kernel, s.stride, s.padding);
    const Index pl = naive_pad(wd, s.kernel, s.stride, s.padding);
    TensorF y(Shape{n, s.c_out, ho, wo});
    for (Index in = 0; in < n; ++in)
        for (Index co = 0; co < s.c_out; ++co)
            for (Index oy = 0; oy < ho; ++oy)
                for (Index ox = 0; ox < wo; ++ox) {
                    float acc = 0.0f;
                    const Index ci0 = s.kind == ConvKind::depthwise ? co : 0;
                    const Index ci1 = s.kind == ConvKind::depthwise ? co + 1 : s.c_in;
                    for (Index ci = ci0; ci < ci1; ++ci)
                        for (Index ky = 0; ky < s.kernel; ++ky)
                            for (Index kx = 0; kx < s.kernel; ++kx) {
                                const Index iy = oy * s.stride + ky - pt;
                                const Index ix = ox * s.stride + kx - pl;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                const Index wi = s.kind == ConvKind::depthwise
                                                     ? (co * s.kernel + ky) * s.kernel + kx
                                                     : ((co * s.c_in + ci) * s.kernel + ky) * s.kernel + kx;
                                acc += x(in, ci, iy, ix) * w[wi];
                            }
                    if (b) acc += (*b)[co];
                    y(in, co, oy, ox) = acc;
                }
    return y;
}

void nudge(TensorF& t) { t[0] = std::nextafter(t[0], std::numeric_limits<float>::infinity()); }

struct DrawCounter {
    Index draws = 0;
    Index mismatches = 0;
    std::string first;

    void record(bool ok, const std::string& what)
    {
        ++draws;
        if (!ok && mismatches++ == 0) first = what;
    }
    CheckResult result(std::string name) const
    {
        return {std::move(name), mismatches == 0, static_cast<double>(mismatches), draws, 0,
                mismatches ? "first mismatch: " + first : ""};
    }
};

Index pick(Prng& p, Index lo, Index hi) { return lo + static_cast<Index>(p.below(static_cast<std::uint64_t>(hi - lo + 1))); }

ConvSpec random_conv(Prng& p)
{
    ConvSpec s;
    s.kind = static_cast<ConvKind>(p.below(3));
    s.kernel = s.kind == ConvKind::pointwise ? 1 : (p.below(2) ? 3 : 5);
    s.c_in = pick(p, 1, 6);
    s.c_out = s.kind == ConvKind::depthwise ? s.c_in : pick(p, 1, 6);
    s.stride = pick(p, 1, 2);
    s.padding = p.below(2) ? Padding::same : Padding::valid;
    s.has_bias = p.below(2) == 1;
    return s;
}

std::string describe(const ConvSpec& s, const Shape& x)
{
    return std::string(nn::to_string(s.kind)) + " K" + std::to_string(s.kernel) + " s" + std::to_string(s.stride) +
           " x" + x.str();
}

CheckResult check_naive_conv(Prng& prng, bool fault)
{
    DrawCounter dc;
    for (int d = 0; d < 100; ++d) {
        const ConvSpec s = random_conv(prng);
        const Index lo = s.padding == Padding::valid ? s.kernel : 1;
        const Shape xs{pick(prng, 1, 2), s.c_in, pick(prng, lo, 12), pick(prng, lo, 12)};
        const TensorF x = uniform_tensor<float>(prng, xs);
        const TensorF w = uniform_tensor<float>(prng, s.weight_shape());
        const TensorF b = uniform_tensor<float>(prng, Shape{s.c_out});
        TensorF fast = nn::conv2d_fwd(x, w, s.has_bias ? &b : nullptr, s);
        if (fault) nudge(fast);
        dc.record(fast.bitwise_equal(naive_conv(x, w, s.has_bias ? &b : nullptr, s)), describe(s, xs));
    }
    return dc.result("oracle/conv_vs_naive");
}

CheckResult check_composition(Prng& prng, bool fault)
{
    constexpr Index kFactors[] = {1, 2, 4, 8};
    DrawCounter dc;
    for (int d = 0; d < 200; ++d) {
        const Index c = kFactors[prng.below(4)];
        const PoolSpec pool(kVariants[prng.below(3)], c);
        ConvSpec conv{ConvKind::standard, prng.below(3) == 0 ? 1 : (prng.below(2) ? 3 : 5), c * pick(prng, 1, 4),
                      pick(prng, 1, 8), pick(prng, 1, 2), prng.below(2) ? Padding::same : Padding::valid, false};
        const bool dw_bias = prng.below(2) == 1, pw_bias = prng.below(2) == 1;
        const Index lo = conv.padding == Padding::valid ? conv.kernel : 1;
        const Shape xs{pick(prng, 1, 2), conv.c_in, pick(prng, lo, 10), pick(prng, lo, 10)};
        const ConvSpec dw = nn::compact_depthwise_spec(conv, dw_bias);
        const ConvSpec pw = nn::compact_pointwise_spec(conv, pool, pw_bias);
        const TensorF x = uniform_tensor<float>(prng, xs);
        const TensorF w_dw = uniform_tensor<float>(prng, dw.weight_shape());
        const TensorF b_dw = uniform_tensor<float>(prng, Shape{conv.c_in});
        const TensorF w_pw = uniform_tensor<float>(prng, pw.weight_shape());
        const TensorF b_pw = uniform_tensor<float>(prng, Shape{conv.c_out});

        auto fused = nn::compact_conv_fwd(x, w_dw, dw_bias ? &b_dw : nullptr, w_pw, pw_bias ? &b_pw : nullptr, pool,
                                          conv);
        if (fault) nudge(fused.out);
        const TensorF stage1 = nn::conv2d_fwd(x, w_dw, dw_bias ? &b_dw : nullptr, dw);
        const TensorF stage2 = nn::channel_group_pool_fwd(stage1, pool).first;
        const TensorF stage3 = nn::conv2d_fwd(stage2, w_pw, pw_bias ? &b_pw : nullptr, pw);
        dc.record(fused.out.bitwise_equal(stage3) && fused.cache.pooled.bitwise_equal(stage2),
                  describe(conv, xs) + " C" + std::to_string(c) + " " + nn::to_string(pool.variant));
    }
    return dc.result("oracle/compact_vs_composition");
}

CheckResult check_avg_is_sum_over_c(Prng& prng, bool fault)
{
    constexpr Index kFactors[] = {1, 2, 4, 8};
    DrawCounter dc;
    for (int d = 0; d < 100; ++d) {
        const Index c = kFactors[prng.below(4)];
        const Shape xs{pick(prng, 1, 3), c * pick(prng, 1, 4), pick(prng, 1, 9), pick(prng, 1, 9)};
        const TensorF x = normal_tensor<float>(prng, xs);
        TensorF avg = nn::channel_group_pool_fwd(x, PoolSpec(PoolVariant::avg, c)).first;
        if (fault) nudge(avg);
        const TensorF sum = nn::channel_group_pool_fwd(x, PoolSpec(PoolVariant::sum, c)).first;
        TensorF scaled(sum.shape());
        for (Index i = 0; i < sum.size(); ++i) scaled[i] = sum[i] / static_cast<float>(c);
        dc.record(avg.bitwise_equal(scaled), "x" + xs.str() + " C" + std::to_string(c));
    }
    return dc.result("oracle/avg_equals_sum_over_C");
}

CheckResult check_max_properties(Prng& prng)
{
    DrawCounter dc;
    for (int d = 0; d < 50; ++d) {
        const Index c = Index(1) << prng.below(4);
        const Shape xs{pick(prng, 1, 2), c * pick(prng, 1, 3), pick(prng, 1, 5), pick(prng, 1, 5)};
        TensorF x = normal_tensor<float>(prng, xs);
        if (c > 1) x(0, 1, 0, 0) = x(0, 0, 0, 0); // exact tie
        auto [y, cache] = nn::channel_group_pool_fwd(x, PoolSpec(PoolVariant::max, c));
        bool ok = true;
        const Index groups = xs.c() / c;
        for (Index n = 0; n < xs.n(); ++n)
            for (Index g = 0; g < groups; ++g)
                for (Index i = 0; i < xs.h(); ++i)
                    for (Index j = 0; j < xs.w(); ++j) {
                        const float m = y(n, g, i, j);
                        const auto am = cache.argmax[((n * groups + g) * xs.h() + i) * xs.w() + j];
                        Index first = -1;
                        for (Index k = 0; k < c; ++k) {
                            const float v = x(n, g * c + k, i, j);
                            ok = ok && v <= m;
                            if (first < 0 && v == m) first = g * c + k;
                        }
                        ok = ok && first == am;
                    }
        dc.record(ok, "x" + xs.str() + " C" + std::to_string(c));
    }
    return dc.result("oracle/max_dominates_lowest_argmax");
}

CheckResult check_identity_at_c1(Prng& prng)
{
    DrawCounter dc;
    for (PoolVariant v : kVariants)
        for (int d = 0; d < 10; ++d) {
            const TensorF x = normal_tensor<float>(prng, Shape{2, pick(prng, 1, 5), 3, 4});
            dc.record(nn::channel_group_pool_fwd(x, PoolSpec(v, 1)).first.bitwise_equal(x), nn::to_string(v));
        }
    return dc.result("oracle/pool_identity_C1");
}

CheckResult check_serialization(Prng& prng)
{
    DrawCounter dc;
    for (int rank = 1; rank <= 4; ++rank)
        for (int d = 0; d < 5; ++d) {
            std::vector<Index> ext;
            for (int r = 0; r < rank; ++r) ext.push_back(pick(prng, 1, 5));
            const Shape s = Shape::from_span(ext);
            const TensorF f = normal_tensor<float>(prng, s);
            const TensorD g = normal_tensor<double>(prng, s);
            std::stringstream buf;
            io::write_tensor(buf, f);
            io::write_tensor(buf, g);
            const auto rf = io::read_tensor(buf);
            const auto rg = io::read_tensor(buf);
            dc.record(std::holds_alternative<TensorF>(rf) && std::get<TensorF>(rf).bitwise_equal(f) &&
                          std::holds_alternative<TensorD>(rg) && std::get<TensorD>(rg).bitwise_equal(g),
                      "shape " + s.str());
        }
    return dc.result("oracle/ctf_roundtrip");
}

CheckResult check_compression_rate()
{
    DrawCounter dc;
    for (Index k : {1, 3, 5})
        for (Index c_out = 8; c_out <= 512; c_out *= 2)
            for (Index m : {1, 2}) {
                const PoolSpec pool(m == 1 ? PoolVariant::sum : PoolVariant::avg, 2);
                const double ratio = static_cast<double>(complexity::flops_compact(k, 64, c_out, 16, 16, pool)) /
                                     static_cast<double>(complexity::flops_standard(k, 64, c_out, 16, 16));
                dc.record(std::abs(ratio - complexity::compression_rate(k, c_out, m)) <= 1e-12,
                          "K" + std::to_string(k) + " C_out " + std::to_string(c_out) + " m" + std::to_string(m));
            }
    return dc.result("oracle/flops_ratio_equals_compression_rate");
}

} // namespace

std::vector<CheckResult> run_gradcheck_suite(const SuiteOptions& opt)
{
    Prng prng(opt.seed);
    std::vector<CheckResult> out;
    for (PoolVariant v : kVariants)
        for (Index c : {1, 2, 4, 8}) out.push_back(check_pool(prng, v, c, false, opt.inject_fault));
    out.push_back(check_pool(prng, PoolVariant::max, 2, true, opt.inject_fault));
    for (ConvKind k : {ConvKind::standard, ConvKind::depthwise, ConvKind::pointwise})
        for (Index s : {1, 2})
            for (Padding p : {Padding::same, Padding::valid}) out.push_back(check_conv(prng, k, s, p));
    out.push_back(check_batchnorm(prng, nn::Mode::train));
    out.push_back(check_batchnorm(prng, nn::Mode::infer));
    out.push_back(check_dense(prng));
    out.push_back(check_softmax_xent(prng));
    out.push_back(check_unary(prng, "grad/relu", Shape{2, 3, 4, 4},
                              [](Tape<double>& t, NodeId x) { return autograd::relu(t, x); }));
    out.push_back(check_unary(prng, "grad/maxpool2d/k2s2", Shape{2, 2, 5, 5}, [](Tape<double>& t, NodeId x) {
        return autograd::maxpool2d(t, x, nn::MaxPoolSpec{2, 2, Padding::valid});
    }));
    out.push_back(check_unary(prng, "grad/maxpool2d/k3s2same", Shape{2, 2, 5, 5}, [](Tape<double>& t, NodeId x) {
        return autograd::maxpool2d(t, x, nn::MaxPoolSpec{3, 2, Padding::same});
    }));
    out.push_back(check_unary(prng, "grad/global_avg_pool", Shape{2, 3, 4, 4},
                              [](Tape<double>& t, NodeId x) { return autograd::global_avg_pool(t, x); }));
    out.push_back(check_unary(prng, "grad/add_fanout", Shape{2, 3, 2, 2},
                              [](Tape<double>& t, NodeId x) { return autograd::add(t, x, x); }));
    for (PoolVariant v : kVariants)
        for (Index c : {2, 4})
            for (Index s : {1, 2}) out.push_back(check_compact(prng, v, c, s, opt.inject_fault));
    for (PoolVariant v : kVariants) out.push_back(check_network(prng, v, opt.inject_fault));
    return out;
}

std::vector<CheckResult> run_selftest_suite(const SuiteOptions& opt)
{
    Prng prng(opt.seed);
    std::vector<CheckResult> out;
    out.push_back(check_naive_conv(prng, opt.inject_fault));
    out.push_back(check_composition(prng, opt.inject_fault));
    out.push_back(check_avg_is_sum_over_c(prng, opt.inject_fault));
    out.push_back(check_max_properties(prng));
    out.push_back(check_identity_at_c1(prng));
    out.push_back(check_serialization(prng));
    out.push_back(check_compression_rate());
    return out;
}

bool all_passed(const std::vector<CheckResult>& results)
{
    for (const auto& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

void write_check_csv(std::ostream& os, const std::vector<CheckResult>& results)
{
    os << "check,passed,metric,checked,skipped,detail\n";
    char buf[64];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%.6e", r.metric);
        os << r.name << ',' << (r.passed ? 1 : 0) << ',' << buf << ',' << r.checked << ',' << r.skipped << ",\""
           << r.detail << "\"\n";
    }
}

} // namespace compactnet::checks
