#pragma once

// Pre-norm transformer blocks and the five mixer variants:
//
//   standard     H' = U + MLP(norm(U)),  U = H + Attn(norm(H))        [full causal]
//   seq_shortswa S  = H + ShortSWA(norm(H); w)                        [the recommended block]
//                A  = S + Attn(norm(S));  H' = A + MLP(norm(A))
//   depth_attn   X  = H + Z, Z[t] = depth read over the token's last K layer
//                states (additive pre-block injection); then the standard block on X
//   elc          block input = convex combination of layers 0..ell
//   denseformer  after the block, the new state is an unconstrained weighted
//                average over layers 0..ell+1 (including the fresh output)
//
// MLP is two matrices around x*sigmoid(x); norms are RMS with learnable gain.
// All compositions are templated over the tensor type so the autodiff Var
// instantiation records exactly the computation the plain tensors execute.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "resdual/attention.hpp"
#include "resdual/autograd.hpp"
#include "resdual/errors.hpp"
#include "resdual/ops.hpp"
#include "resdual/rng.hpp"
#include "resdual/stack.hpp"
#include "resdual/tensor.hpp"

namespace resdual {

inline constexpr double kRmsEps = 1e-6;
inline constexpr double kInitLo = -0.1;
inline constexpr double kInitHi = 0.1;

enum class Mixer { standard, seq_shortswa, depth_attn, elc, denseformer };

inline const char* mixer_name(Mixer m) {
    switch (m) {
        case Mixer::standard: return "standard";
        case Mixer::seq_shortswa: return "seq-swa";
        case Mixer::depth_attn: return "depth-attn";
        case Mixer::elc: return "elc";
        case Mixer::denseformer: return "denseformer";
    }
    return "?";
}

struct MixerSpec {
    Mixer kind = Mixer::standard;
    // seq_shortswa: w along the sequence; depth_attn: K along depth; kFullWindow allowed
    std::int64_t window = kFullWindow;
    // depth_attn: one read head shared by all blocks (default) or one per block
    bool depth_params_shared = true;
};

struct ModelConfig {
    std::int64_t L = 1;
    std::int64_t T = 1;
    std::int64_t d = 1;
    std::int64_t mlp_hidden = 0;  // 0 -> 4*d
    MixerSpec mixer;
    std::uint64_t seed = 0;

    std::int64_t hidden() const { return mlp_hidden > 0 ? mlp_hidden : 4 * d; }
};

inline void validate_config(const ModelConfig& cfg) {
    if (cfg.L < 1) throw config_error("config: L must be >= 1, got " + std::to_string(cfg.L));
    if (cfg.T < 1) throw config_error("config: T must be >= 1, got " + std::to_string(cfg.T));
    if (cfg.d < 1) throw config_error("config: d must be >= 1, got " + std::to_string(cfg.d));
    if (cfg.mlp_hidden < 0)
        throw config_error("config: mlp_hidden must be >= 0, got " + std::to_string(cfg.mlp_hidden));
    const std::int64_t w = cfg.mixer.window;
    if (cfg.mixer.kind == Mixer::seq_shortswa && w != kFullWindow && (w < 1 || w > cfg.T))
        throw config_error("config: w must be in [1," + std::to_string(cfg.T) + "] or full, got " +
                           std::to_string(w));
    if (cfg.mixer.kind == Mixer::depth_attn && w != kFullWindow && (w < 1 || w > cfg.L + 1))
        throw config_error("config: K must be in [1," + std::to_string(cfg.L + 1) +
                           "] or full, got " + std::to_string(w));
}

template <typename TT>
struct BlockWeightsT {
    AttentionParamsT<TT> swa;   // seq_shortswa only
    TT swa_gain;                // seq_shortswa only
    AttentionParamsT<TT> attn;
    TT attn_gain;
    TT mlp_w1;                  // d x hidden
    TT mlp_w2;                  // hidden x d
    TT mlp_gain;
    AttentionParamsT<TT> depth;  // depth_attn with per-block read heads
    TT elc_logits;               // elc: 1 x (ell+1), softmaxed into convex coefficients
    TT dwa_coeffs;               // denseformer: 1 x (ell+2), used as-is
};

template <typename TT>
struct ModelWeightsT {
    std::vector<BlockWeightsT<TT>> blocks;
    AttentionParamsT<TT> depth_shared;  // depth_attn with the shared read head
};

using ModelWeights = ModelWeightsT<Tensor>;

enum class WeightInit { drawn, ones };

// Enumerates every weight tensor active under cfg, in the one declaration
// order the whole artifact agrees on (PRNG draw order, serialization order,
// autodiff leaf order, finite-difference order). Gains are initialized to
// ones and consume no draws.
template <typename TT, typename F>
void for_each_weight(ModelWeightsT<TT>& w, const ModelConfig& cfg, F&& f) {
    validate_config(cfg);
    const std::int64_t d = cfg.d, h = cfg.hidden();
    w.blocks.resize(cfg.L);
    const auto attn4 = [&](AttentionParamsT<TT>& p, const std::string& prefix) {
        f(prefix + ".wq", p.wq, Shape(d, d), WeightInit::drawn);
        f(prefix + ".wk", p.wk, Shape(d, d), WeightInit::drawn);
        f(prefix + ".wv", p.wv, Shape(d, d), WeightInit::drawn);
        f(prefix + ".wo", p.wo, Shape(d, d), WeightInit::drawn);
    };
    for (std::int64_t b = 0; b < cfg.L; ++b) {
        BlockWeightsT<TT>& bw = w.blocks[b];
        const std::string base = "block" + std::to_string(b);
        if (cfg.mixer.kind == Mixer::seq_shortswa) {
            attn4(bw.swa, base + ".swa");
            f(base + ".swa_gain", bw.swa_gain, Shape(d), WeightInit::ones);
        }
        attn4(bw.attn, base + ".attn");
        f(base + ".attn_gain", bw.attn_gain, Shape(d), WeightInit::ones);
        f(base + ".mlp_w1", bw.mlp_w1, Shape(d, h), WeightInit::drawn);
        f(base + ".mlp_w2", bw.mlp_w2, Shape(h, d), WeightInit::drawn);
        f(base + ".mlp_gain", bw.mlp_gain, Shape(d), WeightInit::ones);
        if (cfg.mixer.kind == Mixer::depth_attn && !cfg.mixer.depth_params_shared)
            attn4(bw.depth, base + ".depth");
        if (cfg.mixer.kind == Mixer::elc)
            f(base + ".elc_logits", bw.elc_logits, Shape(1, b + 1), WeightInit::drawn);
        if (cfg.mixer.kind == Mixer::denseformer)
            f(base + ".dwa_coeffs", bw.dwa_coeffs, Shape(1, b + 2), WeightInit::drawn);
    }
    if (cfg.mixer.kind == Mixer::depth_attn && cfg.mixer.depth_params_shared)
        attn4(w.depth_shared, "depth_shared");
}

// read-only walk over an already-populated weight set, same order
template <typename TT, typename F>
void for_each_weight(const ModelWeightsT<TT>& w, const ModelConfig& cfg, F&& f) {
    validate_config(cfg);
    if (std::int64_t(w.blocks.size()) != cfg.L)
        throw dimension_error("weights: expected " + std::to_string(cfg.L) + " blocks, got " +
                              std::to_string(w.blocks.size()));
    for_each_weight(const_cast<ModelWeightsT<TT>&>(w), cfg,
                    [&](const std::string& name, TT& slot, Shape shape, WeightInit init) {
                        f(name, static_cast<const TT&>(slot), shape, init);
                    });
}

// All projection/aggregation matrices i.i.d. uniform in [-0.1, 0.1], drawn in
// declaration order from PCG32(seed); norm gains start at one.
inline ModelWeights init_weights(const ModelConfig& cfg) {
    ModelWeights w;
    Rng rng(cfg.seed);
    for_each_weight(w, cfg, [&](const std::string&, Tensor& slot, Shape shape, WeightInit init) {
        slot = init == WeightInit::drawn ? rng.uniform_tensor(shape, kInitLo, kInitHi)
                                         : Tensor::full(shape, 1.0);
    });
    return w;
}

inline std::vector<std::pair<std::string, Tensor*>> named_weight_tensors(ModelWeights& w,
                                                                         const ModelConfig& cfg) {
    std::vector<std::pair<std::string, Tensor*>> out;
    for_each_weight(w, cfg, [&](const std::string& name, Tensor& slot, Shape, WeightInit) {
        out.emplace_back(name, &slot);
    });
    return out;
}

// tape leaves in declaration order, for gradient checks through full models
inline ModelWeightsT<ad::Var> lift_weights(ad::Tape& tape, const ModelWeights& w,
                                           const ModelConfig& cfg) {
    std::vector<const Tensor*> flat;
    for_each_weight(w, cfg, [&](const std::string&, const Tensor& slot, Shape, WeightInit) {
        flat.push_back(&slot);
    });
    ModelWeightsT<ad::Var> lifted;
    std::size_t i = 0;
    for_each_weight(lifted, cfg, [&](const std::string&, ad::Var& slot, Shape, WeightInit) {
        slot = tape.leaf(*flat[i++]);
    });
    return lifted;
}

inline ModelWeightsT<Tensor32> cast_weights(const ModelWeights& w, const ModelConfig& cfg) {
    std::vector<const Tensor*> flat;
    for_each_weight(w, cfg, [&](const std::string&, const Tensor& slot, Shape, WeightInit) {
        flat.push_back(&slot);
    });
    ModelWeightsT<Tensor32> cast;
    std::size_t i = 0;
    for_each_weight(cast, cfg, [&](const std::string&, Tensor32& slot, Shape, WeightInit) {
        slot = to_standard(*flat[i++]);
    });
    return cast;
}

// ---- block forwards ----

template <typename TT>
TT mlp_forward(const TT& x, const TT& w1, const TT& w2) {
    return matmul(silu(matmul(x, w1)), w2);
}

template <typename TT>
TT forward_block_standard(const TT& h, const BlockWeightsT<TT>& w) {
    TT u = add(h, causal_swa(rms_norm(h, w.attn_gain, kRmsEps), w.attn,
                             WindowSpec::full(Axis::sequence)));
    return add(u, mlp_forward(rms_norm(u, w.mlp_gain, kRmsEps), w.mlp_w1, w.mlp_w2));
}

template <typename TT>
TT forward_block_recommended(const TT& h, const BlockWeightsT<TT>& w, std::int64_t swa_window) {
    if (swa_window != kFullWindow && (swa_window < 1 || swa_window > h.rows()))
        throw parameter_error("recommended block: w must be in [1," + std::to_string(h.rows()) +
                              "] or full, got " + std::to_string(swa_window));
    TT s = add(h, causal_swa(rms_norm(h, w.swa_gain, kRmsEps), w.swa,
                             WindowSpec(swa_window, Axis::sequence)));
    TT a = add(s, causal_swa(rms_norm(s, w.attn_gain, kRmsEps), w.attn,
                             WindowSpec::full(Axis::sequence)));
    return add(a, mlp_forward(rms_norm(a, w.mlp_gain, kRmsEps), w.mlp_w1, w.mlp_w2));
}

// depth read of the last K layer states, injected additively before the block
template <typename TT>
TT forward_block_depth_attn(const HiddenStackT<TT>& h, std::int64_t ell,
                            const BlockWeightsT<TT>& w, const AttentionParamsT<TT>& depth_params,
                            std::int64_t k_window) {
    const TT& x = h.layers.at(ell);
    std::vector<TT> zrows;
    zrows.reserve(x.rows());
    for (std::int64_t t = 0; t < x.rows(); ++t)
        zrows.push_back(
            depth_residual_read(h, t, ell, WindowSpec(k_window, Axis::depth), depth_params));
    return forward_block_standard(add(x, vstack(zrows)), w);
}

// Runs cfg.L blocks, returning all L+1 layer slices; slice 0 is the input,
// bit-for-bit.
template <typename TT>
HiddenStackT<TT> forward_model(const ModelConfig& cfg, const ModelWeightsT<TT>& w,
                               const TT& input) {
    validate_config(cfg);
    if (input.rank() != 2 || input.rows() != cfg.T || input.cols() != cfg.d)
        throw dimension_error("forward_model: input " + input.shape().str() + " does not match T=" +
                              std::to_string(cfg.T) + ", d=" + std::to_string(cfg.d));
    HiddenStackT<TT> h;
    h.layers.reserve(cfg.L + 1);
    h.layers.push_back(input);
    for (std::int64_t b = 0; b < cfg.L; ++b) {
        const BlockWeightsT<TT>& bw = w.blocks.at(b);
        switch (cfg.mixer.kind) {
            case Mixer::standard:
                h.layers.push_back(forward_block_standard(h.layers[b], bw));
                break;
            case Mixer::seq_shortswa:
                h.layers.push_back(forward_block_recommended(h.layers[b], bw, cfg.mixer.window));
                break;
            case Mixer::depth_attn:
                h.layers.push_back(forward_block_depth_attn(
                    h, b, bw, cfg.mixer.depth_params_shared ? w.depth_shared : bw.depth,
                    cfg.mixer.window));
                break;
            case Mixer::elc: {
                TT coeffs = softmax_rows(bw.elc_logits);  // convex by construction
                std::vector<TT> states(h.layers.begin(), h.layers.end());
                h.layers.push_back(forward_block_standard(depth_weighted_sum(states, coeffs), bw));
                break;
            }
            case Mixer::denseformer: {
                TT fresh = forward_block_standard(h.layers[b], bw);
                std::vector<TT> states(h.layers.begin(), h.layers.end());
                states.push_back(fresh);
                h.layers.push_back(depth_weighted_sum(states, bw.dwa_coeffs));
                break;
            }
        }
    }
    return h;
}

// The realized aggregation table of an elc/denseformer model (elc logits
// softmaxed into their convex rows).
inline StaticDepthWeights static_depth_weights(const ModelConfig& cfg, const ModelWeights& w) {
    StaticDepthWeights out;
    if (cfg.mixer.kind == Mixer::elc) {
        out.kind = DepthWeightKind::elc_convex;
        for (std::int64_t b = 0; b < cfg.L; ++b) {
            Tensor row = softmax_rows(w.blocks[b].elc_logits);
            out.rows.emplace_back(row.data(), row.data() + row.numel());
        }
    } else if (cfg.mixer.kind == Mixer::denseformer) {
        out.kind = DepthWeightKind::denseformer_avg;
        for (std::int64_t b = 0; b < cfg.L; ++b) {
            const Tensor& row = w.blocks[b].dwa_coeffs;
            out.rows.emplace_back(row.data(), row.data() + row.numel());
        }
    } else {
        throw parameter_error("static_depth_weights: mixer has no aggregation table");
    }
    return out;
}

}  // namespace resdual
