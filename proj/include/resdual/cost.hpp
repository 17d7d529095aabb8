#pragma once

// Cost accounting in three parts, each a closed-form model cross-checked by a
// mechanical twin:
//   - attention FLOP formulas vs meters wrapping the real kernels,
//   - a token-by-token decode-cache simulator (KV rows along the sequence,
//     resident layer states along depth),
//   - a pipeline-stage transfer accountant for depth windows that cross
//     stage boundaries.
//
// FLOP conventions match meter.hpp (1 multiply-add = 2 flops, softmax row of
// n costs 4n-1, data movement is free); headline "score_value" is the
// score + weighted-sum term only.
//
// The transfer accountant fixes this read-window convention: block b may read
// the last K states ending at its own output, i.e. H^(j) for
// max(0, b-K+2) <= j <= b+1. The baseline pipeline forwards exactly one
// activation per boundary (the downstream stage's input); extras count
// states beyond that one, plus a flag when the forwarded input itself must
// outlive its first consumer. Aggregators that read all earlier layers
// (elc reads 0..b, denseformer 0..b+1) are modeled with those exact windows;
// sequence-axis mixers read nothing across layers and always cost zero extra.

#include <cstdint>
#include <string>
#include <vector>

#include "resdual/blocks.hpp"
#include "resdual/meter.hpp"
#include "resdual/reports.hpp"

namespace resdual {

struct AttnFlops {
    std::uint64_t qkv_proj = 0;
    std::uint64_t scores = 0;
    std::uint64_t scale = 0;
    std::uint64_t softmax = 0;
    std::uint64_t weighted_sum = 0;
    std::uint64_t out_proj = 0;

    std::uint64_t score_value() const { return scores + weighted_sum; }
    std::uint64_t total() const {
        return qkv_proj + scores + scale + softmax + weighted_sum + out_proj;
    }
    bool operator==(const AttnFlops&) const = default;

    // rejects a breakdown with flops outside the attention categories
    static AttnFlops from_breakdown(const meter::Breakdown& b);
};

// closed forms; window kFullWindow means the whole prefix
AttnFlops flops_seq_shortswa(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                             std::int64_t dv);
AttnFlops flops_depth_attn(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                           std::int64_t dk, std::int64_t dv);

// counted twins: meter a real kernel run on seeded random inputs
AttnFlops count_seq_shortswa(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                             std::int64_t dv, std::uint64_t seed = 0);
AttnFlops count_depth_attn(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                           std::int64_t dk, std::int64_t dv, std::uint64_t seed = 0);

struct FlopReport {
    std::string mixer;  // "seq-swa" | "depth-attn"
    std::int64_t T = 0, window = 0, L = 0, d = 0, dk = 0, dv = 0;  // L = 0 on the seq side
    AttnFlops formula;
    AttnFlops counter;
    bool match = false;  // exact integer equality
};

FlopReport flop_report_seq(std::int64_t T, std::int64_t w, std::int64_t d, std::int64_t dk,
                           std::int64_t dv, std::uint64_t seed = 0);
FlopReport flop_report_depth(std::int64_t T, std::int64_t K, std::int64_t L, std::int64_t d,
                             std::int64_t dk, std::int64_t dv, std::uint64_t seed = 0);
ordered_json flop_report_json(const FlopReport& r);
std::string flop_report_csv(const FlopReport& r);

// ---- decode-time cache ----

struct DecodeStep {
    std::int64_t t = 0;
    std::int64_t swa_rows_per_layer = 0;   // windowed sublayer KV rows (0 when absent)
    std::int64_t attn_rows_per_layer = 0;  // full-attention sublayer KV rows (0 when absent)
    std::int64_t kv_scalars = 0;           // L * (swa + attn rows) * (dk + dv)
    std::vector<std::int64_t> depth_states_per_block;  // resident earlier-layer states
    std::int64_t depth_states_peak = 0;    // max simultaneous residency across blocks
    std::int64_t depth_state_loads = 0;    // sum across blocks
    std::int64_t depth_state_scalars = 0;  // peak * d
};

struct CacheLedger {
    std::string mixer;
    std::int64_t L = 0, window = 0, d = 0, dk = 0, dv = 0, steps = 0;
    std::int64_t bytes_per_scalar = 8;
    std::vector<DecodeStep> step_log;
    std::int64_t peak_kv_scalars = 0;
    std::int64_t peak_depth_states = 0;
    std::int64_t peak_depth_state_scalars = 0;
};

CacheLedger simulate_decode(Mixer mixer, std::int64_t L, std::int64_t window, std::int64_t d,
                            std::int64_t dk, std::int64_t dv, std::int64_t steps,
                            std::int64_t bytes_per_scalar = 8);
ordered_json cache_ledger_json(const CacheLedger& c);
std::string cache_ledger_csv(const CacheLedger& c);

// ---- pipeline-stage transfers ----

struct StageBoundary {
    std::int64_t index = 0;                   // between stage index and index+1
    std::int64_t first_downstream_layer = 0;  // e: downstream stage runs blocks e..
    std::vector<std::int64_t> extra_upstream_states;  // H^(j), j < e, needed downstream
    bool input_must_persist = false;  // H^(e) read again after block e consumes it
    std::int64_t extra_count = 0;     // |extra_upstream_states| + input_must_persist
    std::int64_t recompute_block_forwards = 0;  // alternative: rerun blocks 0..e-1 downstream
};

struct PipelinePlan {
    std::string mixer;
    std::int64_t L = 0, P = 0, K = 0;  // K = kFullWindow echoes as "full"
    std::vector<std::int64_t> stage_sizes;
    std::vector<StageBoundary> boundaries;
    std::int64_t total_extra = 0;  // per token
    std::int64_t total_recompute_forwards = 0;
};

// stage_sizes empty -> near-even default split (earlier stages take the remainder)
PipelinePlan pipeline_transfers(Mixer mixer, std::int64_t L, std::int64_t P,
                                const std::vector<std::int64_t>& stage_sizes, std::int64_t K);
ordered_json pipeline_plan_json(const PipelinePlan& p);
std::string pipeline_plan_csv(const PipelinePlan& p);

}  // namespace resdual
