#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lstmcov/errors.hpp"
#include "lstmcov/forecaster.hpp"
#include "lstmcov/gradient_check.hpp"
#include "support.hpp"

using namespace lstmcov;

namespace {

WindowBatch scaled_windows(std::size_t k, std::size_t C, std::size_t H, std::size_t B = 6, std::uint64_t seed = 1) {
    const auto ds = k == 0 ? testing::univariate("r", testing::random_records(B, C + 3 * H + 10, C + 3 * H + 30, seed))
                           : testing::augmented("r", testing::random_records(B, C + 3 * H + 10, C + 3 * H + 30, seed),
                                                k, 0.4, seed);
    return scale_batch(evaluation_windows(ds, C, H, Split::test).batch);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Loop-based LSTM over one sequence [S x F], gate blocks (i, f, g, o).
std::vector<std::vector<double>> lstm_oracle(const ParameterStore& store, const LstmStack& stack,
                                             const std::vector<std::vector<double>>& xs) {
    const std::size_t h = stack.hidden;
    std::vector<std::vector<double>> hs(stack.layers.size(), std::vector<double>(h, 0.0));
    std::vector<std::vector<double>> cs = hs;
    std::vector<std::vector<double>> top;
    for (const auto& x0 : xs) {
        std::vector<double> x = x0;
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            const auto& L = stack.layers[l];
            const Tensor& wih = store.value(L.w_ih);
            const Tensor& whh = store.value(L.w_hh);
            const Tensor& bih = store.value(L.b_ih);
            const Tensor& bhh = store.value(L.b_hh);
            std::vector<double> pre(4 * h);
            for (std::size_t r = 0; r < 4 * h; ++r) {
                double s = bih[r] + bhh[r];
                for (std::size_t j = 0; j < x.size(); ++j) s += wih.at(r, j) * x[j];
                for (std::size_t j = 0; j < h; ++j) s += whh.at(r, j) * hs[l][j];
                pre[r] = s;
            }
            for (std::size_t j = 0; j < h; ++j) {
                const double i = sigmoid(pre[j]), f = sigmoid(pre[h + j]), g = std::tanh(pre[2 * h + j]),
                             o = sigmoid(pre[3 * h + j]);
                cs[l][j] = f * cs[l][j] + i * g;
                hs[l][j] = o * std::tanh(cs[l][j]);
            }
            x = hs[l];
        }
        top.push_back(x);
    }
    return top;
}

// relu(h fc^T + b) out^T + b, written out by hand.
std::vector<double> head_oracle(const ParameterStore& store, const std::vector<double>& hidden) {
    const Tensor& fw = store.value(store.index_of("head.fc.w"));
    const Tensor& fb = store.value(store.index_of("head.fc.b"));
    const Tensor& ow = store.value(store.index_of("head.out.w"));
    const Tensor& ob = store.value(store.index_of("head.out.b"));
    std::vector<double> a(fw.dim(0));
    for (std::size_t r = 0; r < a.size(); ++r) {
        double s = fb[r];
        for (std::size_t j = 0; j < hidden.size(); ++j) s += fw.at(r, j) * hidden[j];
        a[r] = std::max(0.0, s);
    }
    std::vector<double> out(ow.dim(0));
    for (std::size_t r = 0; r < out.size(); ++r) {
        double s = ob[r];
        for (std::size_t j = 0; j < a.size(); ++j) s += ow.at(r, j) * a[j];
        out[r] = s;
    }
    return out;
}

} // namespace

TEST_SUITE("recurrent_models") {

TEST_CASE("model config") {
    const auto b = ModelConfig::base(2);
    CHECK(b.hidden == 40);
    CHECK(b.layers == 2);
    CHECK(b.dropout == 0.1);
    CHECK(b.include_log_scale_feature);
    CHECK(b.input_features() == 4);
    CHECK(b.output_width() == 3);
    const auto s = ModelConfig::seg(1, 12);
    CHECK_FALSE(s.include_log_scale_feature);
    CHECK(s.input_features() == 24);
    CHECK_NOTHROW(s.validate(24));
    CHECK_THROWS_AS(s.validate(30), ConfigError);
    auto bad = s;
    bad.include_log_scale_feature = true;
    CHECK_THROWS_AS(bad.validate(24), ConfigError);
    CHECK(parse_model_kind("seg-lstm") == ModelKind::seg_lstm);
    CHECK(to_string(ModelKind::base_lstm) == "base_lstm");
    CHECK_THROWS_AS(parse_model_kind("gru"), ConfigError);
}

TEST_CASE("lstm parameter layout and initialisation") {
    Rng rng(3);
    ParameterStore store;
    const auto stack = LstmStack::create(store, "lstm", 5, 40, 2, rng);
    REQUIRE(stack.layers.size() == 2);
    CHECK(store.value(stack.layers[0].w_ih).shape() == Shape{160, 5});
    CHECK(store.value(stack.layers[0].w_hh).shape() == Shape{160, 40});
    CHECK(store.value(stack.layers[1].w_ih).shape() == Shape{160, 40});
    CHECK(store.value(stack.layers[1].b_hh).shape() == Shape{160});
    const double bound = 1.0 / std::sqrt(40.0);
    const Tensor& b = store.value(stack.layers[0].b_ih);
    for (std::size_t r = 0; r < 160; ++r) {
        const bool forget = r >= 40 && r < 80;
        const double v = forget ? b[r] - 1.0 : b[r];
        CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("lstm forward matches a loop-based recurrence") {
    Rng rng(4);
    ParameterStore store;
    const auto stack = LstmStack::create(store, "lstm", 3, 7, 2, rng);
    Tensor inputs({2, 5, 3});
    for (auto& v : inputs.values()) v = rng.uniform(-1, 1);
    ad::Tape tape(false);
    const auto out = lstm_forward(tape, store, stack, inputs);
    REQUIRE(out.outputs.size() == 5);
    for (std::size_t b = 0; b < 2; ++b) {
        std::vector<std::vector<double>> xs;
        for (std::size_t t = 0; t < 5; ++t) xs.push_back({inputs.at(b, t, 0), inputs.at(b, t, 1), inputs.at(b, t, 2)});
        const auto expected = lstm_oracle(store, stack, xs);
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(out.outputs[t].value().at(b, j) - expected[t][j]) < 1e-13);
    }
}

TEST_CASE("zero weights give zero outputs") {
    Rng rng(1);
    ParameterStore store;
    const auto stack = LstmStack::create(store, "lstm", 3, 40, 2, rng);
    for (std::size_t i = 0; i < store.count(); ++i) store.value(i).fill(0.0);
    Tensor inputs({2, 4, 3});
    for (auto& v : inputs.values()) v = rng.uniform(-5, 5);
    ad::Tape tape(false);
    const auto out = lstm_forward(tape, store, stack, inputs);
    for (const auto& o : out.outputs)
        for (double v : o.value().values()) CHECK(v == 0.0);

    ad::Tape t1(false);
    const auto one = lstm_forward(t1, store, stack, Tensor({1, 1, 3}));
    CHECK(one.outputs.size() == 1);
    CHECK(one.outputs[0].shape() == Shape{1, 40});
    ad::Tape t2(false);
    CHECK_THROWS_AS(lstm_forward(t2, store, stack, Tensor({1, 2, 4})), DimensionError);
}

TEST_CASE("lstm recurrent weight gradients match finite differences") {
    Rng rng(6);
    ParameterStore store;
    const auto stack = LstmStack::create(store, "lstm", 2, 4, 2, rng);
    Tensor inputs({3, 6, 2});
    for (auto& v : inputs.values()) v = rng.uniform(-1, 1);
    Tensor target({3, 4});
    for (auto& v : target.values()) v = rng.uniform(-0.5, 0.5);
    const auto report = gradient_check(
        [&](ad::Tape& tape, ParameterStore& s) {
            const auto out = lstm_forward(tape, s, stack, inputs);
            ad::Var acc = ad::smooth_l1(out.outputs[0], target);
            for (std::size_t t = 1; t < out.outputs.size(); ++t) acc = ad::add(acc, ad::smooth_l1(out.outputs[t], target));
            return acc;
        },
        store);
    CHECK(report.max_relative_error < 1e-4);
    double worst_hh = 0;
    for (const auto& e : report.entries)
        if (e.name.find("w_hh") != std::string::npos) worst_hh = std::max(worst_hh, e.relative_error);
    CHECK(worst_hh < 1e-4);
}

TEST_CASE("forecaster loss gradients match finite differences for both models") {
    for (auto kind : {ModelKind::base_lstm, ModelKind::seg_lstm}) {
        CAPTURE(to_string(kind));
        Rng rng(9);
        Forecaster model(testing::tiny_config(kind, 1, 2, 4), rng);
        const auto batch = scaled_windows(1, 6, 3, 3);
        GradCheckOptions opts;
        opts.sample_size = 150;
        opts.seed = 2;
        const auto report = gradient_check(
            [&](ad::Tape& tape, ParameterStore&) {
                const auto tf = model.forward(tape, batch);
                return ad::smooth_l1(tf.predictions, tf.targets, tf.mask);
            },
            model.parameters(), opts);
        CHECK(report.max_relative_error < 1e-4);
    }
}

TEST_CASE("output width is one plus active covariates") {
    for (std::size_t k : {0u, 1u, 3u}) {
        Rng rng(2);
        Forecaster base(testing::tiny_config(ModelKind::base_lstm, k), rng);
        const auto batch = scaled_windows(k, 8, 4);
        const auto p = base.predict_teacher_forced(batch);
        CHECK(p.shape() == Shape{batch.batch_size(), 11, k + 1});
        Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, k, 4), rng);
        CHECK(seg.predict_teacher_forced(batch).dim(2) == k + 1);
    }
}

TEST_CASE("forward rejects unscaled or mismatched batches") {
    Rng rng(2);
    Forecaster model(testing::tiny_config(ModelKind::base_lstm, 1), rng);
    auto batch = scaled_windows(1, 8, 4);
    auto unscaled = batch;
    unscaled.scaled = false;
    ad::Tape tape;
    CHECK_THROWS_AS(model.forward(tape, unscaled), ContractError);
    CHECK_THROWS_AS(model.forward(tape, scaled_windows(2, 8, 4)), DimensionError);
    Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, 1, 3), rng);
    CHECK_THROWS_AS(seg.forward(tape, batch), ConfigError);
}

TEST_CASE("inverse scaling is the identity for unit scales") {
    Rng rng(5);
    Forecaster model(testing::tiny_config(ModelKind::base_lstm, 0), rng);
    auto batch = scaled_windows(0, 8, 4);
    batch.scales.fill(1.0);
    ad::Tape tape(false);
    const auto tf = model.forward(tape, batch);
    const auto p = model.predict_teacher_forced(batch);
    const std::size_t B = batch.batch_size();
    for (std::size_t pos = 0; pos < tf.positions.size(); ++pos)
        for (std::size_t b = 0; b < B; ++b) CHECK(p.at(b, pos, 0) == tf.predictions.value().at(pos * B + b, 0));
}

TEST_CASE("scale equivariance with the log-scale channel pinned") {
    Rng rng(7);
    Forecaster model(testing::tiny_config(ModelKind::base_lstm, 1), rng);
    const auto records = testing::random_records(5, 60, 70, 3);
    auto doubled = records;
    for (auto& r : doubled)
        for (auto& v : r.values) v *= 2.0;
    const auto a = scale_batch(evaluation_windows(testing::augmented("a", records, 1, 0.0, 1), 10, 4, Split::test).batch);
    const auto b = scale_batch(evaluation_windows(testing::augmented("a", doubled, 1, 0.0, 1), 10, 4, Split::test).batch);
    for (std::size_t i = 0; i < a.batch_size(); ++i) REQUIRE(a.scales[i] > 1.0);
    ForwardOptions pin;
    pin.pinned_log_scale = 0.5;
    const auto pa = model.predict_teacher_forced(a, pin);
    const auto pb = model.predict_teacher_forced(b, pin);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pb[i] == 2.0 * pa[i]);
    // unpinned, the log channel differs and only approximate equivariance is expected
    const auto ua = model.predict_teacher_forced(a);
    const auto ub = model.predict_teacher_forced(b);
    CHECK_FALSE(ub == inverse_scale(ua, Tensor({ua.dim(0)}, 2.0)));
}

TEST_CASE("segment reshape layout") {
    Tensor w({2, 6, 2});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i);
    const auto r = segment_reshape(w, 3);
    CHECK(r.shape() == Shape{2, 2, 6});
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t j = 0; j < 3; ++j)
                for (std::size_t c = 0; c < 2; ++c) CHECK(r.at(b, s, j * 2 + c) == w.at(b, s * 3 + j, c));
    const auto id = segment_reshape(w, 1);
    CHECK(id.shape() == Shape{2, 6, 2});
    CHECK(id.values().size() == w.values().size());
    CHECK(std::equal(id.values().begin(), id.values().end(), w.values().begin()));
    CHECK_THROWS_AS(segment_reshape(w, 4), ConfigError);
}

TEST_CASE("supervised positions") {
    Rng rng(1);
    Forecaster base(testing::tiny_config(ModelKind::base_lstm, 0), rng);
    CHECK(base.supervised_positions(5) == std::vector<std::size_t>{0, 1, 2, 3});
    Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, 0, 12), rng);
    // context alone: C=24, d=12 gives two predictions
    CHECK(seg.supervised_positions(24 + 1) == std::vector<std::size_t>{11, 23});
    // horizon steps extend the stream
    CHECK(seg.supervised_positions(24 + 24 + 1) == std::vector<std::size_t>{11, 23, 35, 47});
}

TEST_CASE("seg-lstm targets are the step after each segment") {
    Rng rng(1);
    Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, 1, 4), rng);
    const auto batch = scaled_windows(1, 8, 4);
    ad::Tape tape(false);
    const auto tf = seg.forward(tape, batch);
    REQUIRE(tf.positions == std::vector<std::size_t>{3, 7});
    const std::size_t B = batch.batch_size();
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t b = 0; b < B; ++b)
            CHECK(tf.targets.at(p * B + b, 0) == batch.inputs.at(b, tf.positions[p] + 1, 0));
}

TEST_CASE("teacher-forced predictions are causal") {
    for (auto kind : {ModelKind::base_lstm, ModelKind::seg_lstm}) {
        Rng rng(11);
        Forecaster model(testing::tiny_config(kind, 2, 4, 8), rng);
        const auto batch = scaled_windows(2, 12, 8);
        auto changed = batch;
        Rng noise(3);
        for (std::size_t b = 0; b < batch.batch_size(); ++b)
            for (std::size_t t = 12; t < 20; ++t)
                for (std::size_t c = 0; c < 3; ++c) changed.inputs.at(b, t, c) = noise.uniform(-9, 9);
        const auto pa = model.predict_teacher_forced(batch);
        const auto pb = model.predict_teacher_forced(changed);
        const auto positions = model.supervised_positions(20);
        bool same = true;
        for (std::size_t p = 0; p < positions.size(); ++p) {
            if (positions[p] >= 12) continue;
            for (std::size_t b = 0; b < batch.batch_size(); ++b)
                for (std::size_t c = 0; c < 3; ++c) same = same && pa.at(b, p, c) == pb.at(b, p, c);
        }
        CHECK(same);
    }
}

TEST_CASE("seg-lstm with d=1 reduces to base-lstm without the log-scale channel") {
    auto base_cfg = testing::tiny_config(ModelKind::base_lstm, 1);
    base_cfg.include_log_scale_feature = false;
    const auto seg_cfg = testing::tiny_config(ModelKind::seg_lstm, 1, 1);
    Rng ra(5), rb(5);
    Forecaster base(base_cfg, ra);
    Forecaster seg(seg_cfg, rb);
    CHECK(base.supervised_positions(17) == seg.supervised_positions(17));
    const auto batch = scaled_windows(1, 9, 4);
    CHECK(base.predict_teacher_forced(batch) == seg.predict_teacher_forced(batch));
    CHECK(base.forecast(batch, 4).scaled == seg.forecast(batch, 4).scaled);
}

TEST_CASE("free run with H=1 equals the teacher-forced prediction at the context boundary") {
    for (auto kind : {ModelKind::base_lstm, ModelKind::seg_lstm}) {
        Rng rng(13);
        Forecaster model(testing::tiny_config(kind, 1, 3, 8), rng);
        const auto batch = scaled_windows(1, 12, 5);
        const auto positions = model.supervised_positions(batch.steps());
        const auto at = static_cast<std::size_t>(std::find(positions.begin(), positions.end(), 11) - positions.begin());
        REQUIRE(at < positions.size());
        const auto tf = model.predict_teacher_forced(batch);
        const auto fr = model.forecast(batch, 1);
        for (std::size_t b = 0; b < batch.batch_size(); ++b)
            for (std::size_t c = 0; c < 2; ++c) CHECK(fr.original.at(b, 0, c) == doctest::Approx(tf.at(b, at, c)).epsilon(1e-12));
        CHECK_THROWS_AS(model.forecast(batch, 0), ArgumentError);
    }
}

TEST_CASE("free run step counts and ground-truth isolation") {
    Rng rng(17);
    Forecaster base(testing::tiny_config(ModelKind::base_lstm, 1), rng);
    Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, 1, 4), rng);
    const auto batch = scaled_windows(1, 12, 6);
    auto changed = batch;
    for (std::size_t b = 0; b < batch.batch_size(); ++b)
        for (std::size_t t = 12; t < 18; ++t) changed.inputs.at(b, t, 0) = 1e6;
    const auto fb = base.forecast(batch, 6);
    CHECK(fb.recurrent_steps == 12 + 6 - 1);
    CHECK(fb.original.shape() == Shape{batch.batch_size(), 6, 2});
    CHECK(base.forecast(changed, 6).original == fb.original);
    const auto fs = seg.forecast(batch, 6);
    CHECK(fs.recurrent_steps == 12 / 4 + 6 - 1);
    CHECK(seg.forecast(changed, 6).original == fs.original);
}

TEST_CASE("seg-lstm free run slides a one-step segment window") {
    Rng rng(19);
    const std::size_t d = 3, C = 6, F = 2, h = 5;
    Forecaster seg(testing::tiny_config(ModelKind::seg_lstm, 1, d, h), rng);
    const auto batch = scaled_windows(1, C, 3, 1);
    const auto fr = seg.forecast(batch, 3);

    // replay with the raw stack and a hand-written head
    auto& store = seg.parameters();
    const auto stack = LstmStack::bind(store, "lstm", d * F, h, 2);
    std::vector<std::vector<double>> stream;
    for (std::size_t s = 0; s < C / d; ++s) {
        std::vector<double> x;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t c = 0; c < F; ++c) x.push_back(batch.inputs.at(0, s * d + j, c));
        stream.push_back(x);
    }
    std::vector<std::vector<double>> z;  // z_0 .. z_{C-1}, then predictions
    for (std::size_t t = 0; t < C; ++t) z.push_back({batch.inputs.at(0, t, 0), batch.inputs.at(0, t, 1)});
    for (std::size_t i = 0; i < 3; ++i) {
        const auto hidden = lstm_oracle(store, stack, stream).back();
        const auto pred = head_oracle(store, hidden);
        for (std::size_t c = 0; c < F; ++c) CHECK(std::abs(fr.scaled.at(0, i, c) - pred[c]) < 1e-12);
        z.push_back(pred);
        // next input: the d most recent vectors, ending with the new prediction
        std::vector<double> x;
        for (std::size_t j = z.size() - d; j < z.size(); ++j) x.insert(x.end(), z[j].begin(), z[j].end());
        stream.push_back(x);
    }
}

TEST_CASE("free_run_forecast on a single context") {
    Rng rng(23);
    Forecaster model(testing::tiny_config(ModelKind::base_lstm, 1), rng);
    const auto batch = evaluation_windows(testing::augmented("a", testing::random_records(1, 40, 40, 2), 1, 0.2, 1), 10,
                                          4, Split::test)
                           .batch;
    Tensor context({10, 2});
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t c = 0; c < 2; ++c) context.at(t, c) = batch.inputs.at(0, t, c);
    const auto single = free_run_forecast(model, context, 4);
    const auto batched = model.forecast(scale_batch(batch), 4).original;
    CHECK(single.shape() == Shape{4, 2});
    for (std::size_t i = 0; i < 8; ++i) CHECK(single[i] == batched[i]);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    for (auto kind : {ModelKind::base_lstm, ModelKind::seg_lstm}) {
        Rng rng(29);
        auto cfg = testing::tiny_config(kind, 2, 2, 5, 0.25);
        Forecaster model(cfg, rng);
        std::stringstream ss;
        model.save(ss);
        auto loaded = Forecaster::load(ss);
        CHECK(loaded.parameters().same_values(model.parameters()));
        CHECK(loaded.config().dropout == 0.25);
        CHECK(loaded.config().kind == kind);
        CHECK(loaded.config().segment_length == cfg.segment_length);
        const auto batch = scaled_windows(2, 8, 4);
        CHECK(loaded.forecast(batch, 4).scaled == model.forecast(batch, 4).scaled);
    }
    std::stringstream junk("not a checkpoint\n");
    CHECK_THROWS_AS(Forecaster::load(junk), ParseError);
}

}
