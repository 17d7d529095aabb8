// Block and whole-model behavior: config validation, the declaration-order
// weight walk and its PRNG trace, residual identities with zeroed mixers,
// degeneracies between block variants, and white-box oracles for each mixer's
// model loop.

#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "resdual/attention.hpp"
#include "resdual/blocks.hpp"
#include "resdual/errors.hpp"
#include "resdual/ops.hpp"
#include "resdual/rng.hpp"
#include "resdual/tensor.hpp"
#include "test_support.hpp"

using namespace resdual;
using testsup::contains;
using testsup::rand_tensor;

namespace {

ModelConfig make_cfg(std::int64_t L, std::int64_t T, std::int64_t d, Mixer m,
                     std::int64_t window = kFullWindow, std::uint64_t seed = 0) {
    ModelConfig cfg;
    cfg.L = L;
    cfg.T = T;
    cfg.d = d;
    cfg.mixer.kind = m;
    cfg.mixer.window = window;
    cfg.seed = seed;
    return cfg;
}

void zero_drawn_weights(ModelWeights& w, const ModelConfig& cfg) {
    for_each_weight(w, cfg, [](const std::string&, Tensor& slot, Shape shape, WeightInit init) {
        if (init == WeightInit::drawn) slot = Tensor::zeros(shape);
    });
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    CHECK_NOTHROW(validate_config(make_cfg(2, 3, 4, Mixer::standard)));

    const auto expect = [](ModelConfig cfg, const std::string& field) {
        try {
            validate_config(cfg);
            FAIL(("expected config_error naming " + field));
        } catch (const config_error& e) {
            CHECK(contains(e.what(), field));
        }
    };
    expect(make_cfg(0, 3, 4, Mixer::standard), "L");
    expect(make_cfg(2, 0, 4, Mixer::standard), "T");
    expect(make_cfg(2, 3, 0, Mixer::standard), "d");
    expect(make_cfg(2, 4, 4, Mixer::seq_shortswa, 0), "w");
    expect(make_cfg(2, 4, 4, Mixer::seq_shortswa, 5), "w");
    expect(make_cfg(2, 4, 4, Mixer::depth_attn, 4), "K");

    ModelConfig bad_hidden = make_cfg(1, 1, 2, Mixer::standard);
    bad_hidden.mlp_hidden = -1;
    expect(bad_hidden, "mlp_hidden");

    CHECK(make_cfg(1, 1, 3, Mixer::standard).hidden() == 12);
    ModelConfig explicit_hidden = make_cfg(1, 1, 3, Mixer::standard);
    explicit_hidden.mlp_hidden = 5;
    CHECK(explicit_hidden.hidden() == 5);
}

TEST_CASE("mixer names are stable strings") {
    CHECK(std::string(mixer_name(Mixer::standard)) == "standard");
    CHECK(std::string(mixer_name(Mixer::seq_shortswa)) == "seq-swa");
    CHECK(std::string(mixer_name(Mixer::depth_attn)) == "depth-attn");
    CHECK(std::string(mixer_name(Mixer::elc)) == "elc");
    CHECK(std::string(mixer_name(Mixer::denseformer)) == "denseformer");
}

TEST_CASE("weight walk: declaration order and shapes for each mixer") {
    const auto names_of = [](const ModelConfig& cfg) {
        ModelWeights w = init_weights(cfg);
        std::vector<std::string> names;
        for_each_weight(w, cfg, [&](const std::string& n, const Tensor& slot, Shape shape,
                                    WeightInit) {
            CHECK(slot.shape() == shape);
            names.push_back(n);
        });
        return names;
    };

    // a standard block walks 8 tensors: attn wq/wk/wv/wo, attn_gain, mlp_w1/w2/gain
    std::vector<std::string> std_names = names_of(make_cfg(2, 2, 4, Mixer::standard));
    CHECK(std_names.size() == 16);
    CHECK(std_names[0] == "block0.attn.wq");
    CHECK(std_names[7] == "block0.mlp_gain");
    CHECK(std_names[8] == "block1.attn.wq");

    std::vector<std::string> seq_names = names_of(make_cfg(1, 4, 4, Mixer::seq_shortswa, 2));
    CHECK(seq_names.size() == 13);
    CHECK(seq_names[0] == "block0.swa.wq");
    CHECK(seq_names[4] == "block0.swa_gain");
    CHECK(seq_names[5] == "block0.attn.wq");

    std::vector<std::string> shared = names_of(make_cfg(2, 2, 4, Mixer::depth_attn, 2));
    CHECK(shared.size() == 20);
    CHECK(shared.back() == "depth_shared.wo");

    ModelConfig per_block = make_cfg(2, 2, 4, Mixer::depth_attn, 2);
    per_block.mixer.depth_params_shared = false;
    std::vector<std::string> per = names_of(per_block);
    CHECK(per.size() == 24);
    CHECK(per[8] == "block0.depth.wq");

    std::vector<std::string> elc_names = names_of(make_cfg(2, 2, 4, Mixer::elc));
    CHECK(elc_names[8] == "block0.elc_logits");
    std::vector<std::string> dwa_names = names_of(make_cfg(2, 2, 4, Mixer::denseformer));
    CHECK(dwa_names[8] == "block0.dwa_coeffs");

    ModelWeights w = init_weights(make_cfg(2, 2, 4, Mixer::elc));
    CHECK(w.blocks[0].elc_logits.shape() == Shape(1, 1));
    CHECK(w.blocks[1].elc_logits.shape() == Shape(1, 2));
    ModelWeights w2 = init_weights(make_cfg(2, 2, 4, Mixer::denseformer));
    CHECK(w2.blocks[1].dwa_coeffs.shape() == Shape(1, 3));
}

TEST_CASE("init: deterministic in the seed, gains start at one, draws bounded") {
    ModelConfig cfg = make_cfg(2, 3, 4, Mixer::seq_shortswa, 2, 5);
    ModelWeights a = init_weights(cfg);
    ModelWeights b = init_weights(cfg);
    ModelConfig other = cfg;
    other.seed = 6;
    ModelWeights c = init_weights(other);

    bool any_differ = false;
    auto na = named_weight_tensors(a, cfg);
    auto nb = named_weight_tensors(b, cfg);
    auto nc = named_weight_tensors(c, other);
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(*na[i].second == *nb[i].second);
        any_differ = any_differ || !(*na[i].second == *nc[i].second);
    }
    CHECK(any_differ);

    for_each_weight(a, cfg, [](const std::string&, const Tensor& slot, Shape, WeightInit init) {
        if (init == WeightInit::ones) {
            for (std::int64_t i = 0; i < slot.numel(); ++i) CHECK(slot.data()[i] == 1.0);
        } else {
            for (std::int64_t i = 0; i < slot.numel(); ++i) {
                CHECK(slot.data()[i] >= kInitLo);
                CHECK(slot.data()[i] < kInitHi);
            }
        }
    });
}

TEST_CASE("init: first draw matches the raw PRNG stream (gains consume none)") {
    ModelConfig cfg = make_cfg(1, 2, 4, Mixer::standard, kFullWindow, 42);
    ModelWeights w = init_weights(cfg);

    Rng rng(42);
    Tensor wq = rng.uniform_tensor(Shape(4, 4), kInitLo, kInitHi);
    CHECK(w.blocks[0].attn.wq == wq);  // first enumerated weight
    // gains drew nothing: the next drawn tensor continues the same stream
    rng.uniform_tensor(Shape(4, 4), kInitLo, kInitHi);  // wk
    rng.uniform_tensor(Shape(4, 4), kInitLo, kInitHi);  // wv
    rng.uniform_tensor(Shape(4, 4), kInitLo, kInitHi);  // wo
    CHECK(w.blocks[0].mlp_w1 == rng.uniform_tensor(Shape(4, 16), kInitLo, kInitHi));
}

TEST_CASE("zeroed mixers: residual blocks pass the input through bit-exactly") {
    Tensor x = rand_tensor(Shape(3, 4), 40);
    for (Mixer m : {Mixer::standard, Mixer::seq_shortswa, Mixer::depth_attn}) {
        ModelConfig cfg = make_cfg(3, 3, 4, m, m == Mixer::standard ? kFullWindow : 2, 41);
        ModelWeights w = init_weights(cfg);
        zero_drawn_weights(w, cfg);
        HiddenStackT<Tensor> h = forward_model(cfg, w, x);
        for (const Tensor& slice : h.layers) CHECK(max_abs_diff(slice, x) == 0.0);
    }

    // elc with zero logits averages identical states: equal up to coefficient rounding
    ModelConfig elc_cfg = make_cfg(3, 3, 4, Mixer::elc, kFullWindow, 41);
    ModelWeights we = init_weights(elc_cfg);
    zero_drawn_weights(we, elc_cfg);
    for (const Tensor& slice : forward_model(elc_cfg, we, x).layers)
        CHECK(max_abs_diff(slice, x) <= 1e-15);

    // denseformer's aggregation coefficients multiply the states directly, so
    // zeroing them zeroes every slice after the input — not an identity
    ModelConfig dwa_cfg = make_cfg(2, 3, 4, Mixer::denseformer, kFullWindow, 41);
    ModelWeights wd = init_weights(dwa_cfg);
    zero_drawn_weights(wd, dwa_cfg);
    HiddenStackT<Tensor> hd = forward_model(dwa_cfg, wd, x);
    CHECK(max_abs_diff(hd.layers[0], x) == 0.0);
    CHECK(max_abs_diff(hd.layers[1], Tensor::zeros(Shape(3, 4))) == 0.0);
    CHECK(max_abs_diff(hd.layers[2], Tensor::zeros(Shape(3, 4))) == 0.0);
}

TEST_CASE("standard block: equals its hand-composed sublayer chain") {
    ModelConfig cfg = make_cfg(1, 3, 4, Mixer::standard, kFullWindow, 42);
    BlockWeightsT<Tensor> bw = init_weights(cfg).blocks[0];
    Tensor h = rand_tensor(Shape(3, 4), 43);

    Tensor u = add(h, causal_swa(rms_norm(h, bw.attn_gain, kRmsEps), bw.attn,
                                 WindowSpec::full(Axis::sequence)));
    Tensor want = add(u, matmul(silu(matmul(rms_norm(u, bw.mlp_gain, kRmsEps), bw.mlp_w1)),
                                bw.mlp_w2));
    CHECK(forward_block_standard(h, bw) == want);
}

TEST_CASE("recommended block: w=T degenerates to two full-attention sublayers") {
    ModelConfig cfg = make_cfg(1, 4, 4, Mixer::seq_shortswa, 4, 44);
    BlockWeightsT<Tensor> bw = init_weights(cfg).blocks[0];
    Tensor h = rand_tensor(Shape(4, 4), 45);

    Tensor s = add(h, causal_swa(rms_norm(h, bw.swa_gain, kRmsEps), bw.swa,
                                 WindowSpec::full(Axis::sequence)));
    Tensor a = add(s, causal_swa(rms_norm(s, bw.attn_gain, kRmsEps), bw.attn,
                                 WindowSpec::full(Axis::sequence)));
    Tensor want = add(a, matmul(silu(matmul(rms_norm(a, bw.mlp_gain, kRmsEps), bw.mlp_w1)),
                                bw.mlp_w2));
    CHECK(forward_block_recommended(h, bw, 4) == want);
    CHECK(forward_block_recommended(h, bw, kFullWindow) == want);
}

TEST_CASE("recommended block: zero short-window weights collapse to the standard block") {
    ModelConfig cfg = make_cfg(1, 4, 4, Mixer::seq_shortswa, 2, 46);
    BlockWeightsT<Tensor> bw = init_weights(cfg).blocks[0];
    bw.swa = testsup::zero_params(4);
    Tensor h = rand_tensor(Shape(4, 4), 47);
    CHECK(forward_block_recommended(h, bw, 2) == forward_block_standard(h, bw));
}

TEST_CASE("recommended block: window validation names w") {
    ModelConfig cfg = make_cfg(1, 3, 4, Mixer::seq_shortswa, 2, 48);
    BlockWeightsT<Tensor> bw = init_weights(cfg).blocks[0];
    Tensor h = rand_tensor(Shape(3, 4), 49);
    try {
        forward_block_recommended(h, bw, 9);
        FAIL("expected parameter_error");
    } catch (const parameter_error& e) {
        CHECK(contains(e.what(), "w must be"));
    }
    CHECK_THROWS_AS(forward_block_recommended(h, bw, 0), parameter_error);
}

TEST_CASE("depth block: zeroed read head collapses to the standard block") {
    ModelConfig cfg = make_cfg(2, 3, 4, Mixer::depth_attn, 2, 50);
    ModelWeights w = init_weights(cfg);
    HiddenStackT<Tensor> h;
    h.layers = {rand_tensor(Shape(3, 4), 51), rand_tensor(Shape(3, 4), 52)};
    CHECK(forward_block_depth_attn(h, 1, w.blocks[1], testsup::zero_params(4), 2) ==
          forward_block_standard(h.layers[1], w.blocks[1]));
}

TEST_CASE("forward_model: slice zero is the input; L=1 stack is [input, block(input)]") {
    for (Mixer m : {Mixer::standard, Mixer::seq_shortswa, Mixer::depth_attn, Mixer::elc,
                    Mixer::denseformer}) {
        ModelConfig cfg = make_cfg(1, 3, 4, m, m == Mixer::standard ? kFullWindow : 1, 53);
        ModelWeights w = init_weights(cfg);
        Tensor x = rand_tensor(Shape(3, 4), 54);
        HiddenStackT<Tensor> h = forward_model(cfg, w, x);
        CHECK(h.layers.size() == 2);
        CHECK(h.layers[0] == x);
    }
    ModelConfig cfg = make_cfg(1, 3, 4, Mixer::standard, kFullWindow, 53);
    ModelWeights w = init_weights(cfg);
    Tensor x = rand_tensor(Shape(3, 4), 54);
    CHECK(forward_model(cfg, w, x).layers[1] == forward_block_standard(x, w.blocks[0]));
}

TEST_CASE("forward_model: rejects inputs that disagree with the config") {
    ModelConfig cfg = make_cfg(1, 3, 4, Mixer::standard);
    ModelWeights w = init_weights(cfg);
    CHECK_THROWS_AS(forward_model(cfg, w, rand_tensor(Shape(2, 4), 55)), dimension_error);
    CHECK_THROWS_AS(forward_model(cfg, w, rand_tensor(Shape(3, 5), 56)), dimension_error);
}

TEST_CASE("forward_model: every mixer matches a hand-run loop of its block rule") {
    Tensor x = rand_tensor(Shape(3, 4), 57);

    // standard / seq-swa: plain per-slice recurrence
    ModelConfig std_cfg = make_cfg(3, 3, 4, Mixer::standard, kFullWindow, 58);
    ModelWeights ws = init_weights(std_cfg);
    HiddenStackT<Tensor> hs = forward_model(std_cfg, ws, x);
    Tensor cur = x;
    for (std::int64_t b = 0; b < 3; ++b) {
        cur = forward_block_standard(cur, ws.blocks[b]);
        CHECK(hs.layers[b + 1] == cur);
    }

    ModelConfig seq_cfg = make_cfg(3, 3, 4, Mixer::seq_shortswa, 2, 59);
    ModelWeights wq = init_weights(seq_cfg);
    HiddenStackT<Tensor> hq = forward_model(seq_cfg, wq, x);
    cur = x;
    for (std::int64_t b = 0; b < 3; ++b) {
        cur = forward_block_recommended(cur, wq.blocks[b], 2);
        CHECK(hq.layers[b + 1] == cur);
    }

    // depth-attn: each block reads the growing stack through the shared head
    ModelConfig dep_cfg = make_cfg(3, 3, 4, Mixer::depth_attn, 2, 60);
    ModelWeights wd = init_weights(dep_cfg);
    HiddenStackT<Tensor> hd = forward_model(dep_cfg, wd, x);
    HiddenStackT<Tensor> partial;
    partial.layers = {x};
    for (std::int64_t b = 0; b < 3; ++b) {
        partial.layers.push_back(
            forward_block_depth_attn(partial, b, wd.blocks[b], wd.depth_shared, 2));
        CHECK(hd.layers[b + 1] == partial.layers[b + 1]);
    }

    // elc: convex combination of all earlier slices feeds the standard block
    ModelConfig elc_cfg = make_cfg(3, 3, 4, Mixer::elc, kFullWindow, 61);
    ModelWeights we = init_weights(elc_cfg);
    HiddenStackT<Tensor> he = forward_model(elc_cfg, we, x);
    partial.layers = {x};
    for (std::int64_t b = 0; b < 3; ++b) {
        Tensor coeffs = softmax_rows(we.blocks[b].elc_logits);
        Tensor mixed = depth_weighted_sum(partial.layers, coeffs);
        partial.layers.push_back(forward_block_standard(mixed, we.blocks[b]));
        CHECK(he.layers[b + 1] == partial.layers[b + 1]);
    }

    // denseformer: fresh block output enters an unconstrained average
    ModelConfig dwa_cfg = make_cfg(3, 3, 4, Mixer::denseformer, kFullWindow, 62);
    ModelWeights wv = init_weights(dwa_cfg);
    HiddenStackT<Tensor> hv = forward_model(dwa_cfg, wv, x);
    partial.layers = {x};
    for (std::int64_t b = 0; b < 3; ++b) {
        std::vector<Tensor> states = partial.layers;
        states.push_back(forward_block_standard(partial.layers[b], wv.blocks[b]));
        partial.layers.push_back(depth_weighted_sum(states, wv.blocks[b].dwa_coeffs));
        CHECK(hv.layers[b + 1] == partial.layers[b + 1]);
    }
}

TEST_CASE("forward_model: sequence causality holds for every mixer") {
    for (Mixer m : {Mixer::standard, Mixer::seq_shortswa, Mixer::depth_attn, Mixer::elc,
                    Mixer::denseformer}) {
        ModelConfig cfg = make_cfg(2, 4, 4, m, m == Mixer::standard ? kFullWindow : 2, 63);
        ModelWeights w = init_weights(cfg);
        Tensor x = rand_tensor(Shape(4, 4), 64);
        HiddenStackT<Tensor> base = forward_model(cfg, w, x);
        Tensor y = x;
        y.at(2, 1) += 0.75;  // perturb token 2
        HiddenStackT<Tensor> bumped = forward_model(cfg, w, y);
        for (std::size_t ell = 0; ell < base.layers.size(); ++ell)
            CHECK(rows(bumped.layers[ell], 0, 2) == rows(base.layers[ell], 0, 2));
    }
}

TEST_CASE("depth model: K=FULL and K=L+1 produce bit-identical stacks") {
    ModelConfig full_cfg = make_cfg(3, 2, 4, Mixer::depth_attn, kFullWindow, 65);
    ModelConfig kmax_cfg = make_cfg(3, 2, 4, Mixer::depth_attn, 4, 65);
    Tensor x = rand_tensor(Shape(2, 4), 66);
    HiddenStackT<Tensor> a = forward_model(full_cfg, init_weights(full_cfg), x);
    HiddenStackT<Tensor> b = forward_model(kmax_cfg, init_weights(kmax_cfg), x);
    for (std::size_t ell = 0; ell < a.layers.size(); ++ell)
        CHECK(a.layers[ell] == b.layers[ell]);
}

TEST_CASE("lift_weights: leaves appear in declaration order with exact values") {
    ModelConfig cfg = make_cfg(2, 2, 4, Mixer::elc, kFullWindow, 67);
    ModelWeights w = init_weights(cfg);
    ad::Tape tape;
    ModelWeightsT<ad::Var> lifted = lift_weights(tape, w, cfg);

    std::vector<const Tensor*> flat;
    for_each_weight(w, cfg, [&](const std::string&, const Tensor& slot, Shape, WeightInit) {
        flat.push_back(&slot);
    });
    std::size_t i = 0;
    for_each_weight(lifted, cfg, [&](const std::string&, const ad::Var& slot, Shape, WeightInit) {
        CHECK(slot.id() == static_cast<int>(i));
        CHECK(slot.value() == *flat[i]);
        ++i;
    });
    CHECK(tape.size() == flat.size());
}

TEST_CASE("cast_weights: elementwise float conversion in the same order") {
    ModelConfig cfg = make_cfg(1, 2, 4, Mixer::seq_shortswa, 2, 68);
    ModelWeights w = init_weights(cfg);
    ModelWeightsT<Tensor32> cast = cast_weights(w, cfg);
    CHECK(cast.blocks[0].swa.wq == to_standard(w.blocks[0].swa.wq));
    CHECK(cast.blocks[0].mlp_w2 == to_standard(w.blocks[0].mlp_w2));
}

TEST_CASE("static_depth_weights: realized tables and kind guards") {
    ModelConfig elc_cfg = make_cfg(3, 2, 4, Mixer::elc, kFullWindow, 69);
    ModelWeights we = init_weights(elc_cfg);
    StaticDepthWeights table = static_depth_weights(elc_cfg, we);
    CHECK(table.kind == DepthWeightKind::elc_convex);
    CHECK(table.rows.size() == 3);
    for (std::int64_t b = 0; b < 3; ++b) {
        CHECK_NOTHROW(table.validate_row(b));
        Tensor want = softmax_rows(we.blocks[b].elc_logits);
        for (std::int64_t j = 0; j <= b; ++j) CHECK(table.rows[b][j] == want.at(0, j));
    }

    ModelConfig dwa_cfg = make_cfg(2, 2, 4, Mixer::denseformer, kFullWindow, 70);
    ModelWeights wd = init_weights(dwa_cfg);
    StaticDepthWeights avg = static_depth_weights(dwa_cfg, wd);
    CHECK(avg.kind == DepthWeightKind::denseformer_avg);
    CHECK(avg.rows[1].size() == 3);

    CHECK_THROWS_AS(static_depth_weights(make_cfg(1, 1, 2, Mixer::standard), ModelWeights{}),
                    parameter_error);
}
