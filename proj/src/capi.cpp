#include "resdual.h"

#include <exception>
#include <new>
#include <string>
#include <vector>

#include "resdual/blocks.hpp"
#include "resdual/cost.hpp"
#include "resdual/duality.hpp"
#include "resdual/errors.hpp"
#include "resdual/version.hpp"
#include "resdual/weights_io.hpp"

struct rd_model {
    resdual::ModelConfig cfg;
    resdual::ModelWeights weights;
};

struct rd_report {
    std::string json;
    std::string csv;
    std::string summary;
    bool passed = false;
};

namespace {

using namespace resdual;

thread_local std::string g_last_error;

template <typename F>
rd_status wrap(F&& f) noexcept {
    try {
        return f();
    } catch (const dimension_error& e) {
        g_last_error = e.what();
        return RD_ERR_DIMENSION;
    } catch (const bounds_error& e) {
        g_last_error = e.what();
        return RD_ERR_BOUNDS;
    } catch (const parameter_error& e) {
        g_last_error = e.what();
        return RD_ERR_PARAMETER;
    } catch (const config_error& e) {
        g_last_error = e.what();
        return RD_ERR_CONFIG;
    } catch (const invariant_error& e) {
        g_last_error = e.what();
        return RD_ERR_INVARIANT;
    } catch (const contract_error& e) {
        g_last_error = e.what();
        return RD_ERR_CONTRACT;
    } catch (const io_error& e) {
        g_last_error = e.what();
        return RD_ERR_IO;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return RD_ERR_UNKNOWN;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RD_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return RD_ERR_UNKNOWN;
    }
}

rd_status null_arg(const char* name) {
    g_last_error = std::string(name) + " must not be null";
    return RD_ERR_NULL_ARGUMENT;
}

Mixer to_mixer(rd_mixer m) {
    if (m < RD_MIXER_STANDARD || m > RD_MIXER_DENSEFORMER)
        throw parameter_error("mixer: unknown tag " + std::to_string(int(m)));
    return static_cast<Mixer>(m);
}

ModelConfig to_config(const rd_model_config& c) {
    ModelConfig cfg;
    cfg.L = c.L;
    cfg.T = c.T;
    cfg.d = c.d;
    cfg.mlp_hidden = c.mlp_hidden;
    cfg.mixer.kind = to_mixer(c.mixer);
    cfg.mixer.window = c.window;
    cfg.mixer.depth_params_shared = c.depth_params_shared != 0;
    cfg.seed = c.seed;
    validate_config(cfg);
    return cfg;
}

DualityJob to_job(const rd_duality_opts& o) {
    DualityJob job;
    job.config.L = o.L;
    job.config.T = o.T;
    job.config.d = o.d;
    job.config.seed = o.seed;
    job.config.mixer.kind = to_mixer(o.mixer);
    job.config.mixer.window = o.mixer_window;
    if (o.stack < RD_STACK_FORWARD || o.stack > RD_STACK_RANDOM)
        throw parameter_error("stack: unknown tag " + std::to_string(int(o.stack)));
    job.stack = o.stack == RD_STACK_FORWARD ? StackRecipe::forward_pass : StackRecipe::random;
    job.K = o.K;
    if (o.mode < RD_CHECK_BIT_EXACT || o.mode > RD_CHECK_TOLERANCE)
        throw parameter_error("mode: unknown tag " + std::to_string(int(o.mode)));
    job.mode = o.mode == RD_CHECK_BIT_EXACT ? CheckMode::bit_exact : CheckMode::tolerance;
    if (o.dtype < RD_DTYPE_F64 || o.dtype > RD_DTYPE_F32)
        throw parameter_error("dtype: unknown tag " + std::to_string(int(o.dtype)));
    job.dtype = o.dtype == RD_DTYPE_F64 ? Dtype::f64 : Dtype::f32;
    job.tolerance = o.tolerance;
    return job;
}

std::string yesno(bool b) { return b ? "yes" : "no"; }

std::string duality_summary(const DualityReport& r) {
    std::int64_t wt = 0, wl = 0;
    double wv = -1.0;
    for (std::int64_t t = 0; t < r.T; ++t)
        for (std::int64_t ell = 0; ell <= r.L; ++ell)
            if (r.diff.at(t, ell) > wv) {
                wv = r.diff.at(t, ell);
                wt = t;
                wl = ell;
            }
    std::string s = "duality: L=" + std::to_string(r.L) + " T=" + std::to_string(r.T) +
                    " d=" + std::to_string(r.d) + " seed=" + std::to_string(r.seed) + " stack=" +
                    r.stack + " mixer=" + r.mixer + " K=" + std::to_string(r.K) + " mode=" +
                    check_mode_name(r.mode) + " dtype=" + dtype_name(r.dtype) + "\n";
    s += "  max_abs_diff=" + fmt_double(r.max_diff) + " tolerance=" + fmt_double(r.tolerance) +
         " exact=" + yesno(r.exact) + " passed=" + yesno(r.passed) + "\n";
    s += "  worst cell: t=" + std::to_string(wt) + " layer=" + std::to_string(wl) +
         " diff=" + fmt_double(wv < 0 ? 0.0 : wv) + "\n";
    return s;
}

std::string flops_summary(const FlopReport& r) {
    std::string s = "flops " + r.mixer + ": T=" + std::to_string(r.T) + " window=" +
                    window_str(r.window) + " L=" + std::to_string(r.L) + " d=" +
                    std::to_string(r.d) + " d_k=" + std::to_string(r.dk) + " d_v=" +
                    std::to_string(r.dv) + "\n";
    const auto line = [](const char* side, const AttnFlops& f) {
        return std::string("  ") + side + ": qkv_proj=" + std::to_string(f.qkv_proj) +
               " scores=" + std::to_string(f.scores) + " scale=" + std::to_string(f.scale) +
               " softmax=" + std::to_string(f.softmax) + " weighted_sum=" +
               std::to_string(f.weighted_sum) + " out_proj=" + std::to_string(f.out_proj) +
               " score_value=" + std::to_string(f.score_value()) + " total=" +
               std::to_string(f.total()) + "\n";
    };
    s += line("formula", r.formula);
    s += line("counter", r.counter);
    s += "  match=" + yesno(r.match) + "\n";
    return s;
}

std::string decode_summary(const CacheLedger& c) {
    std::string s = "decode-cache " + c.mixer + ": L=" + std::to_string(c.L) + " window=" +
                    window_str(c.window) + " d=" + std::to_string(c.d) + " d_k=" +
                    std::to_string(c.dk) + " d_v=" + std::to_string(c.dv) + " steps=" +
                    std::to_string(c.steps) + "\n";
    s += "  peak kv scalars=" + std::to_string(c.peak_kv_scalars) + " (bytes=" +
         std::to_string(c.peak_kv_scalars * c.bytes_per_scalar) + ")\n";
    s += "  peak resident depth states=" + std::to_string(c.peak_depth_states) + " (scalars=" +
         std::to_string(c.peak_depth_state_scalars) + ")\n";
    if (!c.step_log.empty()) {
        const DecodeStep& last = c.step_log.back();
        s += "  final step t=" + std::to_string(last.t) + ": swa_rows_per_layer=" +
             std::to_string(last.swa_rows_per_layer) + " attn_rows_per_layer=" +
             std::to_string(last.attn_rows_per_layer) + " kv_scalars=" +
             std::to_string(last.kv_scalars) + "\n";
    }
    return s;
}

std::string pipeline_summary(const PipelinePlan& p) {
    std::string sizes;
    for (std::size_t i = 0; i < p.stage_sizes.size(); ++i)
        sizes += (i ? "," : "") + std::to_string(p.stage_sizes[i]);
    std::string s = "pipeline-transfers " + p.mixer + ": L=" + std::to_string(p.L) + " P=" +
                    std::to_string(p.P) + " K=" + window_str(p.K) + " stages=[" + sizes + "]\n";
    for (const StageBoundary& b : p.boundaries) {
        std::string states;
        for (std::size_t i = 0; i < b.extra_upstream_states.size(); ++i)
            states += (i ? "," : "") + std::to_string(b.extra_upstream_states[i]);
        s += "  boundary " + std::to_string(b.index) + " at layer " +
             std::to_string(b.first_downstream_layer) + ": extra upstream states [" + states +
             "] input_persists=" + yesno(b.input_must_persist) + " extra=" +
             std::to_string(b.extra_count) + " recompute_forwards=" +
             std::to_string(b.recompute_block_forwards) + "\n";
    }
    s += "  total extra per token=" + std::to_string(p.total_extra) +
         " total recompute block forwards=" + std::to_string(p.total_recompute_forwards) + "\n";
    return s;
}

rd_report* make_report(std::string json, std::string csv, std::string summary, bool passed) {
    auto* r = new rd_report;
    r->json = std::move(json);
    r->csv = std::move(csv);
    r->summary = std::move(summary);
    r->passed = passed;
    return r;
}

rd_report* make_duality_report(const DualityReport& r, bool include_timing) {
    return make_report(duality_report_json(r, include_timing).dump(2) + "\n",
                       duality_report_csv(r), duality_summary(r), r.passed);
}

}  // namespace

extern "C" {

const char* rd_version(void) { return kVersion; }

const char* rd_last_error(void) { return g_last_error.c_str(); }

rd_status rd_model_create(const rd_model_config* config, rd_model** out) {
    if (!config) return null_arg("config");
    if (!out) return null_arg("out");
    return wrap([&] {
        const ModelConfig cfg = to_config(*config);
        *out = new rd_model{cfg, init_weights(cfg)};
        return RD_OK;
    });
}

rd_status rd_model_config_get(const rd_model* model, rd_model_config* out) {
    if (!model) return null_arg("model");
    if (!out) return null_arg("out");
    out->L = model->cfg.L;
    out->T = model->cfg.T;
    out->d = model->cfg.d;
    out->mlp_hidden = model->cfg.mlp_hidden;
    out->mixer = static_cast<rd_mixer>(model->cfg.mixer.kind);
    out->window = model->cfg.mixer.window;
    out->depth_params_shared = model->cfg.mixer.depth_params_shared ? 1 : 0;
    out->seed = model->cfg.seed;
    return RD_OK;
}

rd_status rd_model_forward(const rd_model* model, const double* input, double* output) {
    if (!model) return null_arg("model");
    if (!input) return null_arg("input");
    if (!output) return null_arg("output");
    return wrap([&] {
        const ModelConfig& cfg = model->cfg;
        const std::int64_t slice = cfg.T * cfg.d;
        const Tensor x =
            Tensor::from_data(Shape(cfg.T, cfg.d), std::vector<double>(input, input + slice));
        const HiddenStack h = forward_model(cfg, model->weights, x);
        for (std::int64_t ell = 0; ell < h.depth(); ++ell)
            for (std::int64_t i = 0; i < slice; ++i)
                output[ell * slice + i] = h.layers[ell].data()[i];
        return RD_OK;
    });
}

rd_status rd_model_save(const rd_model* model, const char* path) {
    if (!model) return null_arg("model");
    if (!path) return null_arg("path");
    return wrap([&] {
        save_weights(path, model->cfg, model->weights);
        return RD_OK;
    });
}

rd_status rd_model_load(const char* path, rd_model** out) {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    return wrap([&] {
        auto [cfg, w] = load_weights(path);
        *out = new rd_model{std::move(cfg), std::move(w)};
        return RD_OK;
    });
}

void rd_model_release(rd_model* model) { delete model; }

rd_status rd_duality_check(const rd_duality_opts* opts, rd_report** out) {
    if (!opts) return null_arg("opts");
    if (!out) return null_arg("out");
    return wrap([&] {
        const DualityReport r = run_duality_job(to_job(*opts));
        *out = make_duality_report(r, opts->include_timing != 0);
        return RD_OK;
    });
}

rd_status rd_duality_full_window(const rd_duality_opts* opts, rd_report** out) {
    if (!opts) return null_arg("opts");
    if (!out) return null_arg("out");
    return wrap([&] {
        DualityJob job = to_job(*opts);
        job.K = kFullWindow;
        job.mode = CheckMode::tolerance;  // against the independent dense oracle
        const DualityReport r = run_duality_job(job);
        *out = make_duality_report(r, opts->include_timing != 0);
        return RD_OK;
    });
}

rd_status rd_duality_sweep(const rd_duality_opts* cells, size_t n, rd_report** out) {
    if (!cells) return null_arg("cells");
    if (!out) return null_arg("out");
    return wrap([&] {
        if (n == 0) throw parameter_error("sweep: no cells");
        std::vector<DualityReport> rs;
        rs.reserve(n);
        bool include_timing = false;
        for (size_t i = 0; i < n; ++i) {
            include_timing = include_timing || cells[i].include_timing != 0;
            try {
                rs.push_back(run_duality_job(to_job(cells[i])));
            } catch (const config_error& e) {
                throw config_error("sweep: cell " + std::to_string(i) + ": " + e.what());
            } catch (const parameter_error& e) {
                throw parameter_error("sweep: cell " + std::to_string(i) + ": " + e.what());
            }
        }
        bool passed = true;
        std::string summary;
        for (const DualityReport& r : rs) {
            passed = passed && r.passed;
            summary += duality_summary(r);
        }
        summary += "sweep: cells=" + std::to_string(rs.size()) + " passed=" + yesno(passed) + "\n";
        *out = make_report(duality_reports_json(rs, include_timing).dump(2) + "\n",
                           duality_reports_csv(rs), std::move(summary), passed);
        return RD_OK;
    });
}

rd_status rd_cost_flops_seq(int64_t T, int64_t w, int64_t d, int64_t dk, int64_t dv,
                            uint64_t seed, rd_report** out) {
    if (!out) return null_arg("out");
    return wrap([&] {
        const FlopReport r = flop_report_seq(T, w, d, dk, dv, seed);
        *out = make_report(flop_report_json(r).dump(2) + "\n", flop_report_csv(r),
                           flops_summary(r), r.match);
        return RD_OK;
    });
}

rd_status rd_cost_flops_depth(int64_t T, int64_t K, int64_t L, int64_t d, int64_t dk, int64_t dv,
                              uint64_t seed, rd_report** out) {
    if (!out) return null_arg("out");
    return wrap([&] {
        const FlopReport r = flop_report_depth(T, K, L, d, dk, dv, seed);
        *out = make_report(flop_report_json(r).dump(2) + "\n", flop_report_csv(r),
                           flops_summary(r), r.match);
        return RD_OK;
    });
}

rd_status rd_simulate_decode(rd_mixer mixer, int64_t L, int64_t window, int64_t d, int64_t dk,
                             int64_t dv, int64_t steps, int64_t bytes_per_scalar,
                             rd_report** out) {
    if (!out) return null_arg("out");
    return wrap([&] {
        const CacheLedger c =
            simulate_decode(to_mixer(mixer), L, window, d, dk, dv, steps, bytes_per_scalar);
        *out = make_report(cache_ledger_json(c).dump(2) + "\n", cache_ledger_csv(c),
                           decode_summary(c), true);
        return RD_OK;
    });
}

rd_status rd_pipeline_transfers(rd_mixer mixer, int64_t L, int64_t P, const int64_t* stage_sizes,
                                size_t n_stages, int64_t K, rd_report** out) {
    if (!out) return null_arg("out");
    return wrap([&] {
        std::vector<std::int64_t> sizes;
        if (stage_sizes) sizes.assign(stage_sizes, stage_sizes + n_stages);
        const PipelinePlan p = pipeline_transfers(to_mixer(mixer), L, P, sizes, K);
        *out = make_report(pipeline_plan_json(p).dump(2) + "\n", pipeline_plan_csv(p),
                           pipeline_summary(p), true);
        return RD_OK;
    });
}

int rd_report_passed(const rd_report* report) { return report && report->passed ? 1 : 0; }

const char* rd_report_json(const rd_report* report) {
    return report ? report->json.c_str() : nullptr;
}

const char* rd_report_csv(const rd_report* report) { return report ? report->csv.c_str() : nullptr; }

const char* rd_report_summary(const rd_report* report) {
    return report ? report->summary.c_str() : nullptr;
}

void rd_report_release(rd_report* report) { delete report; }

}  // extern "C"
