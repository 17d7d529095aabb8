#include "resdual/cost.hpp"

#include <algorithm>
#include <numeric>

#include "resdual/attention.hpp"
#include "resdual/rng.hpp"
#include "resdual/stack.hpp"
#include "resdual/version.hpp"

namespace resdual {

namespace {

void check_dims(std::int64_t T, std::int64_t d, std::int64_t dk, std::int64_t dv) {
    if (T < 1) throw parameter_error("flops: T must be >= 1, got " + std::to_string(T));
    if (d < 1) throw parameter_error("flops: d must be >= 1, got " + std::to_string(d));
    if (dk < 1) throw parameter_error("flops: d_k must be >= 1, got " + std::to_string(dk));
    if (dv < 1) throw parameter_error("flops: d_v must be >= 1, got " + std::to_string(dv));
}

// sum over rows i = 0..T-1 of the window length min(w, i+1)
std::int64_t window_row_sum(std::int64_t T, std::int64_t w) {
    if (w >= T) return T * (T + 1) / 2;
    return w * (w + 1) / 2 + w * (T - w);
}

AttentionParams random_params(Rng& rng, std::int64_t d, std::int64_t dk, std::int64_t dv) {
    AttentionParams p;
    p.wq = rng.uniform_tensor(Shape(d, dk), kInitLo, kInitHi);
    p.wk = rng.uniform_tensor(Shape(d, dk), kInitLo, kInitHi);
    p.wv = rng.uniform_tensor(Shape(d, dv), kInitLo, kInitHi);
    p.wo = rng.uniform_tensor(Shape(dv, d), kInitLo, kInitHi);
    return p;
}

ordered_json flops_json(const AttnFlops& f) {
    ordered_json j;
    j["qkv_proj"] = f.qkv_proj;
    j["scores"] = f.scores;
    j["scale"] = f.scale;
    j["softmax"] = f.softmax;
    j["weighted_sum"] = f.weighted_sum;
    j["out_proj"] = f.out_proj;
    j["score_value"] = f.score_value();
    j["total"] = f.total();
    return j;
}

// every flop report carries the conventions its numbers assume
ordered_json flop_constants_json() {
    ordered_json j;
    j["flops_per_mac"] = 2;
    j["softmax_row_flops"] = "4n-1";
    j["scale_flops_per_element"] = 1;
    j["data_movement_flops"] = 0;
    return j;
}

}  // namespace

AttnFlops AttnFlops::from_breakdown(const meter::Breakdown& b) {
    if (b[meter::Cat::other] != 0)
        throw invariant_error("flops: counter recorded " + std::to_string(b[meter::Cat::other]) +
                              " flops outside the attention categories");
    AttnFlops f;
    f.qkv_proj = b[meter::Cat::qkv_proj];
    f.scores = b[meter::Cat::scores];
    f.scale = b[meter::Cat::scale];
    f.softmax = b[meter::Cat::softmax];
    f.weighted_sum = b[meter::Cat::weighted_sum];
    f.out_proj = b[meter::Cat::out_proj];
    return f;
}

AttnFlops flops_seq_shortswa(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                             std::int64_t dv) {
    check_dims(T, d, dk, dv);
    if (w == kFullWindow) w = T;
    if (w < 1) throw parameter_error("flops: w must be >= 1 or full, got " + std::to_string(w));
    if (w > T)
        throw parameter_error("flops: w = " + std::to_string(w) + " exceeds T = " +
                              std::to_string(T));
    const std::int64_t s = window_row_sum(T, w);
    AttnFlops f;
    f.qkv_proj = 2 * T * d * (2 * dk + dv);
    f.scores = 2 * dk * s;
    f.scale = s;
    f.softmax = 4 * s - T;
    f.weighted_sum = 2 * dv * s;
    f.out_proj = 2 * T * dv * d;
    return f;
}

AttnFlops flops_depth_attn(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                           std::int64_t dk, std::int64_t dv) {
    check_dims(T, d, dk, dv);
    if (L < 1) throw parameter_error("flops: L must be >= 1, got " + std::to_string(L));
    if (K != kFullWindow && K < 1)
        throw parameter_error("flops: K must be >= 1 or full, got " + std::to_string(K));
    AttnFlops f;
    for (std::int64_t ell = 0; ell < L; ++ell) {
        const std::int64_t kl = K == kFullWindow ? ell + 1 : std::min(K, ell + 1);
        f.qkv_proj += T * (2 * d * dk + 2 * kl * d * (dk + dv));
        f.scores += T * 2 * kl * dk;
        f.scale += T * kl;
        f.softmax += T * (4 * kl - 1);
        f.weighted_sum += T * 2 * kl * dv;
        f.out_proj += T * 2 * dv * d;
    }
    return f;
}

AttnFlops count_seq_shortswa(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                             std::int64_t dv, std::uint64_t seed) {
    check_dims(T, d, dk, dv);
    if (w != kFullWindow && (w < 1 || w > T))
        throw parameter_error("flops: w must be in [1," + std::to_string(T) + "] or full, got " +
                              std::to_string(w));
    Rng rng(seed);
    const Tensor x = rng.uniform_tensor(Shape(T, d), -1.0, 1.0);
    const AttentionParams p = random_params(rng, d, dk, dv);
    meter::Breakdown b;
    {
        meter::Scope scope(b);
        (void)causal_swa(x, p, WindowSpec(w, Axis::sequence));
    }
    return AttnFlops::from_breakdown(b);
}

AttnFlops count_depth_attn(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                           std::int64_t dk, std::int64_t dv, std::uint64_t seed) {
    check_dims(T, d, dk, dv);
    if (L < 1) throw parameter_error("flops: L must be >= 1, got " + std::to_string(L));
    if (K != kFullWindow && K < 1)
        throw parameter_error("flops: K must be >= 1 or full, got " + std::to_string(K));
    Rng rng(seed);
    HiddenStack h;
    h.layers.reserve(L + 1);
    for (std::int64_t ell = 0; ell <= L; ++ell)
        h.layers.push_back(rng.uniform_tensor(Shape(T, d), -1.0, 1.0));
    const AttentionParams p = random_params(rng, d, dk, dv);
    const WindowSpec window(K, Axis::depth);
    meter::Breakdown b;
    {
        meter::Scope scope(b);
        for (std::int64_t ell = 0; ell < L; ++ell)
            for (std::int64_t t = 0; t < T; ++t) (void)depth_residual_read(h, t, ell, window, p);
    }
    return AttnFlops::from_breakdown(b);
}

FlopReport flop_report_seq(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                           std::int64_t dv, std::uint64_t seed) {
    FlopReport r;
    r.mixer = mixer_name(Mixer::seq_shortswa);
    r.T = T;
    r.window = w;
    r.L = 0;
    r.d = d;
    r.dk = dk;
    r.dv = dv;
    r.formula = flops_seq_shortswa(T, w, d, dk, dv);
    r.counter = count_seq_shortswa(T, w, d, dk, dv, seed);
    r.match = r.formula == r.counter;
    return r;
}

FlopReport flop_report_depth(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                             std::int64_t dk, std::int64_t dv, std::uint64_t seed) {
    FlopReport r;
    r.mixer = mixer_name(Mixer::depth_attn);
    r.T = T;
    r.window = K;
    r.L = L;
    r.d = d;
    r.dk = dk;
    r.dv = dv;
    r.formula = flops_depth_attn(T, K, L, d, dk, dv);
    r.counter = count_depth_attn(T, K, L, d, dk, dv, seed);
    r.match = r.formula == r.counter;
    return r;
}

ordered_json flop_report_json(const FlopReport& r) {
    ordered_json j;
    j["report"] = "flops";
    j["version"] = kVersion;
    ordered_json cfg;
    cfg["mixer"] = r.mixer;
    cfg["T"] = r.T;
    cfg["window"] = window_json(r.window);
    cfg["L"] = r.L;
    cfg["d"] = r.d;
    cfg["d_k"] = r.dk;
    cfg["d_v"] = r.dv;
    j["config"] = std::move(cfg);
    j["constants"] = flop_constants_json();
    j["formula"] = flops_json(r.formula);
    j["counter"] = flops_json(r.counter);
    j["match"] = r.match;
    j["passed"] = r.match;
    return j;
}

std::string flop_report_csv(const FlopReport& r) {
    std::string out =
        "mixer,T,window,L,d,d_k,d_v,side,qkv_proj,scores,scale,softmax,weighted_sum,out_proj,"
        "score_value,total,match\n";
    const auto line = [&](const char* side, const AttnFlops& f) {
        out += r.mixer + "," + std::to_string(r.T) + "," + window_str(r.window) + "," +
               std::to_string(r.L) + "," + std::to_string(r.d) + "," + std::to_string(r.dk) + "," +
               std::to_string(r.dv) + "," + side + "," + std::to_string(f.qkv_proj) + "," +
               std::to_string(f.scores) + "," + std::to_string(f.scale) + "," +
               std::to_string(f.softmax) + "," + std::to_string(f.weighted_sum) + "," +
               std::to_string(f.out_proj) + "," + std::to_string(f.score_value()) + "," +
               std::to_string(f.total()) + "," + (r.match ? "true" : "false") + "\n";
    };
    line("formula", r.formula);
    line("counter", r.counter);
    return out;
}

CacheLedger simulate_decode(Mixer mixer, std::int64_t L, std::int64_t window, std::int64_t d,
                            std::int64_t dk, std::int64_t dv, std::int64_t steps,
                            std::int64_t bytes_per_scalar) {
    if (L < 1) throw parameter_error("decode: L must be >= 1, got " + std::to_string(L));
    if (steps < 1)
        throw parameter_error("decode: steps must be >= 1, got " + std::to_string(steps));
    if (bytes_per_scalar < 1)
        throw parameter_error("decode: bytes_per_scalar must be >= 1, got " +
                              std::to_string(bytes_per_scalar));
    check_dims(1, d, dk, dv);
    if (window != kFullWindow && window < 1)
        throw parameter_error("decode: window must be >= 1 or full, got " +
                              std::to_string(window));

    CacheLedger c;
    c.mixer = mixer_name(mixer);
    c.L = L;
    c.window = window;
    c.d = d;
    c.dk = dk;
    c.dv = dv;
    c.steps = steps;
    c.bytes_per_scalar = bytes_per_scalar;
    c.step_log.reserve(steps);

    // depth residency does not depend on the step: block ell holds the states
    // its own read window touches
    std::vector<std::int64_t> residents;
    for (std::int64_t ell = 0; ell < L; ++ell) {
        switch (mixer) {
            case Mixer::depth_attn:
                residents.push_back(window == kFullWindow ? ell + 1
                                                          : std::min(window, ell + 1));
                break;
            case Mixer::elc:
                residents.push_back(ell + 1);  // aggregates layers 0..ell
                break;
            case Mixer::denseformer:
                residents.push_back(ell + 2);  // aggregates 0..ell plus the fresh output
                break;
            default:
                residents.push_back(0);
                break;
        }
    }
    const std::int64_t depth_peak =
        residents.empty() ? 0 : *std::max_element(residents.begin(), residents.end());
    const std::int64_t depth_loads = std::accumulate(residents.begin(), residents.end(),
                                                     std::int64_t{0});

    for (std::int64_t t = 0; t < steps; ++t) {
        DecodeStep s;
        s.t = t;
        s.swa_rows_per_layer =
            mixer == Mixer::seq_shortswa
                ? (window == kFullWindow ? t + 1 : std::min(window, t + 1))
                : 0;
        s.attn_rows_per_layer = t + 1;  // every block variant keeps a full-attention sublayer
        s.kv_scalars = L * (s.swa_rows_per_layer + s.attn_rows_per_layer) * (dk + dv);
        s.depth_states_per_block = residents;
        s.depth_states_peak = depth_peak;
        s.depth_state_loads = depth_loads;
        s.depth_state_scalars = depth_peak * d;
        c.peak_kv_scalars = std::max(c.peak_kv_scalars, s.kv_scalars);
        c.peak_depth_states = std::max(c.peak_depth_states, s.depth_states_peak);
        c.peak_depth_state_scalars = std::max(c.peak_depth_state_scalars, s.depth_state_scalars);
        c.step_log.push_back(std::move(s));
    }
    return c;
}

ordered_json cache_ledger_json(const CacheLedger& c) {
    ordered_json j;
    j["report"] = "decode-cache";
    j["version"] = kVersion;
    ordered_json cfg;
    cfg["mixer"] = c.mixer;
    cfg["L"] = c.L;
    cfg["window"] = window_json(c.window);
    cfg["d"] = c.d;
    cfg["d_k"] = c.dk;
    cfg["d_v"] = c.dv;
    cfg["steps"] = c.steps;
    cfg["bytes_per_scalar"] = c.bytes_per_scalar;
    j["config"] = std::move(cfg);
    j["units"] = "scalars";
    j["peak_kv_scalars"] = c.peak_kv_scalars;
    j["peak_kv_bytes"] = c.peak_kv_scalars * c.bytes_per_scalar;
    j["peak_depth_states"] = c.peak_depth_states;
    j["peak_depth_state_scalars"] = c.peak_depth_state_scalars;
    j["peak_depth_state_bytes"] = c.peak_depth_state_scalars * c.bytes_per_scalar;
    ordered_json steps = ordered_json::array();
    for (const DecodeStep& s : c.step_log) {
        ordered_json e;
        e["t"] = s.t;
        e["swa_rows_per_layer"] = s.swa_rows_per_layer;
        e["attn_rows_per_layer"] = s.attn_rows_per_layer;
        e["kv_scalars"] = s.kv_scalars;
        e["depth_states_per_block"] = s.depth_states_per_block;
        e["depth_states_peak"] = s.depth_states_peak;
        e["depth_state_loads"] = s.depth_state_loads;
        e["depth_state_scalars"] = s.depth_state_scalars;
        steps.push_back(std::move(e));
    }
    j["step_log"] = std::move(steps);
    return j;
}

std::string cache_ledger_csv(const CacheLedger& c) {
    std::string out =
        "t,swa_rows_per_layer,attn_rows_per_layer,kv_scalars,depth_states_peak,"
        "depth_state_loads,depth_state_scalars\n";
    for (const DecodeStep& s : c.step_log)
        out += std::to_string(s.t) + "," + std::to_string(s.swa_rows_per_layer) + "," +
               std::to_string(s.attn_rows_per_layer) + "," + std::to_string(s.kv_scalars) + "," +
               std::to_string(s.depth_states_peak) + "," + std::to_string(s.depth_state_loads) +
               "," + std::to_string(s.depth_state_scalars) + "\n";
    return out;
}

PipelinePlan pipeline_transfers(Mixer mixer, std::int64_t L, std::int64_t P,
                                const std::vector<std::int64_t>& stage_sizes, std::int64_t K) {
    if (L < 1) throw config_error("pipeline: L must be >= 1, got " + std::to_string(L));
    if (P < 1 || P > L)
        throw config_error("pipeline: P must be in [1," + std::to_string(L) + "], got " +
                           std::to_string(P));
    if (K != kFullWindow && K < 1)
        throw config_error("pipeline: K must be >= 1 or full, got " + std::to_string(K));

    PipelinePlan plan;
    plan.mixer = mixer_name(mixer);
    plan.L = L;
    plan.P = P;
    plan.K = K;
    if (stage_sizes.empty()) {
        // near-even split; earlier stages absorb the remainder
        const std::int64_t base = L / P, rem = L % P;
        for (std::int64_t i = 0; i < P; ++i) plan.stage_sizes.push_back(base + (i < rem ? 1 : 0));
    } else {
        if (std::int64_t(stage_sizes.size()) != P)
            throw config_error("pipeline: partition has " + std::to_string(stage_sizes.size()) +
                               " stages, P = " + std::to_string(P));
        std::int64_t sum = 0;
        for (std::int64_t s : stage_sizes) {
            if (s < 1)
                throw config_error("pipeline: stage size must be >= 1, got " + std::to_string(s));
            sum += s;
        }
        if (sum != L)
            throw config_error("pipeline: partition covers " + std::to_string(sum) +
                               " layers, L = " + std::to_string(L));
        plan.stage_sizes = stage_sizes;
    }

    // the read window of block b, as an inclusive state range; empty = no
    // cross-layer reads beyond the block's own input
    const auto window_of = [&](std::int64_t b) -> std::pair<std::int64_t, std::int64_t> {
        switch (mixer) {
            case Mixer::depth_attn: {
                const std::int64_t k = K == kFullWindow ? b + 2 : K;
                return {std::max<std::int64_t>(0, b - k + 2), b + 1};
            }
            case Mixer::elc:
                return {0, b};
            case Mixer::denseformer:
                return {0, b + 1};
            default:
                return {b, b};  // the baseline input, nothing else
        }
    };
    const auto in_window = [&](std::int64_t j, std::int64_t b) {
        const auto [lo, hi] = window_of(b);
        return j >= lo && j <= hi;
    };

    std::int64_t e = 0;
    for (std::int64_t bi = 0; bi + 1 < P; ++bi) {
        e += plan.stage_sizes[bi];
        StageBoundary sb;
        sb.index = bi;
        sb.first_downstream_layer = e;
        for (std::int64_t j = 0; j < e; ++j)
            for (std::int64_t b = e; b < L; ++b)
                if (in_window(j, b)) {
                    sb.extra_upstream_states.push_back(j);
                    break;
                }
        for (std::int64_t b = e + 1; b < L && !sb.input_must_persist; ++b)
            if (in_window(e, b)) sb.input_must_persist = true;
        sb.extra_count = std::int64_t(sb.extra_upstream_states.size()) +
                         (sb.input_must_persist ? 1 : 0);
        sb.recompute_block_forwards = sb.extra_count > 0 ? e : 0;
        plan.total_extra += sb.extra_count;
        plan.total_recompute_forwards += sb.recompute_block_forwards;
        plan.boundaries.push_back(std::move(sb));
    }
    return plan;
}

ordered_json pipeline_plan_json(const PipelinePlan& p) {
    ordered_json j;
    j["report"] = "pipeline-transfers";
    j["version"] = kVersion;
    ordered_json cfg;
    cfg["mixer"] = p.mixer;
    cfg["L"] = p.L;
    cfg["P"] = p.P;
    cfg["K"] = window_json(p.K);
    cfg["stage_sizes"] = p.stage_sizes;
    j["config"] = std::move(cfg);
    ordered_json bs = ordered_json::array();
    for (const StageBoundary& b : p.boundaries) {
        ordered_json e;
        e["index"] = b.index;
        e["first_downstream_layer"] = b.first_downstream_layer;
        e["extra_upstream_states"] = b.extra_upstream_states;
        e["input_must_persist"] = b.input_must_persist;
        e["extra_count"] = b.extra_count;
        e["recompute_block_forwards"] = b.recompute_block_forwards;
        bs.push_back(std::move(e));
    }
    j["boundaries"] = std::move(bs);
    j["total_extra_per_token"] = p.total_extra;
    j["total_recompute_block_forwards"] = p.total_recompute_forwards;
    return j;
}

std::string pipeline_plan_csv(const PipelinePlan& p) {
    std::string out =
        "index,first_downstream_layer,extra_upstream_states,input_must_persist,extra_count,"
        "recompute_block_forwards\n";
    for (const StageBoundary& b : p.boundaries) {
        std::string states;
        for (std::size_t i = 0; i < b.extra_upstream_states.size(); ++i)
            states += (i ? ";" : "") + std::to_string(b.extra_upstream_states[i]);
        out += std::to_string(b.index) + "," + std::to_string(b.first_downstream_layer) + "," +
               states + "," + (b.input_must_persist ? "true" : "false") + "," +
               std::to_string(b.extra_count) + "," + std::to_string(b.recompute_block_forwards) +
               "\n";
    }
    return out;
}

}  // namespace resdual
