#include "resdual/duality.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "resdual/rng.hpp"
#include "resdual/version.hpp"

namespace resdual {

namespace {

template <typename S>
Dtype dtype_of();
template <>
Dtype dtype_of<double>() {
    return Dtype::f64;
}
template <>
Dtype dtype_of<float>() {
    return Dtype::f32;
}

AttentionParams draw_read_params(std::int64_t d, std::uint64_t seed) {
    Rng rng(seed + kReadParamsSeedOffset);
    AttentionParams p;
    p.wq = rng.uniform_tensor(Shape(d, d), kInitLo, kInitHi);
    p.wk = rng.uniform_tensor(Shape(d, d), kInitLo, kInitHi);
    p.wv = rng.uniform_tensor(Shape(d, d), kInitLo, kInitHi);
    p.wo = rng.uniform_tensor(Shape(d, d), kInitLo, kInitHi);
    return p;
}

AttentionParams32 to_standard(const AttentionParams& p) {
    return {to_standard(p.wq), to_standard(p.wk), to_standard(p.wv), to_standard(p.wo)};
}

HiddenStack32 to_standard(const HiddenStack& h) {
    HiddenStack32 out;
    out.layers.reserve(h.layers.size());
    for (const Tensor& layer : h.layers) out.layers.push_back(to_standard(layer));
    return out;
}

}  // namespace

template <typename S>
TensorT<S> dense_windowed_attention(const TensorT<S>& x, const AttentionParamsT<TensorT<S>>& p,
                                    WindowSpec window) {
    window.validate();
    validate_params(p);
    if (x.rank() != 2)
        throw dimension_error("dense_windowed_attention: x must be rank-2, got " +
                              x.shape().str());
    if (x.cols() != p.wq.rows())
        throw dimension_error("dense_windowed_attention: x " + x.shape().str() +
                              " does not match wq " + p.wq.shape().str());
    const std::int64_t n = x.rows(), dk = p.wq.cols(), dv = p.wv.cols(), dout = p.wo.cols();

    // naive projections, accumulating in S (deliberately not the shared kernel)
    const auto proj = [&](const TensorT<S>& w) {
        TensorT<S> out(Shape(n, w.cols()));
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < w.cols(); ++j) {
                S acc = S(0);
                for (std::int64_t m = 0; m < x.cols(); ++m) acc += x.at(i, m) * w.at(m, j);
                out.at(i, j) = acc;
            }
        return out;
    };
    const TensorT<S> q = proj(p.wq), k = proj(p.wk), v = proj(p.wv);

    // explicit n x n masked score matrix
    const S inv_sqrt_dk = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
    TensorT<S> scores(Shape(n, n));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            if (j > i || j < window.lo(i)) {
                scores.at(i, j) = mask_lowest<S>();
                continue;
            }
            S acc = S(0);
            for (std::int64_t m = 0; m < dk; ++m) acc += q.at(i, m) * k.at(j, m);
            scores.at(i, j) = acc * inv_sqrt_dk;
        }

    // row-stable softmax; masked entries flush to exactly zero
    TensorT<S> probs(Shape(n, n));
    for (std::int64_t i = 0; i < n; ++i) {
        S mx = scores.at(i, 0);
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, scores.at(i, j));
        S denom = S(0);
        for (std::int64_t j = 0; j < n; ++j) {
            const S e = std::exp(scores.at(i, j) - mx);
            probs.at(i, j) = e;
            denom += e;
        }
        for (std::int64_t j = 0; j < n; ++j) probs.at(i, j) /= denom;
    }

    TensorT<S> z(Shape(n, dv));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t c = 0; c < dv; ++c) {
            S acc = S(0);
            for (std::int64_t j = 0; j < n; ++j) acc += probs.at(i, j) * v.at(j, c);
            z.at(i, c) = acc;
        }

    TensorT<S> out(Shape(n, dout));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t c = 0; c < dout; ++c) {
            S acc = S(0);
            for (std::int64_t m = 0; m < dv; ++m) acc += z.at(i, m) * p.wo.at(m, c);
            out.at(i, c) = acc;
        }
    out.require_finite("dense_windowed_attention");
    return out;
}

template <typename S>
DualityReport check_duality(const HiddenStackT<TensorT<S>>& h,
                            const AttentionParamsT<TensorT<S>>& params, WindowSpec k,
                            CheckMode mode, double tolerance) {
    k.validate();
    validate_params(params);
    if (h.depth() == 0) throw dimension_error("check_duality: empty stack");
    if (k.axis != Axis::depth)
        throw parameter_error("check_duality: window axis must be depth");
    const auto t0 = std::chrono::steady_clock::now();

    DualityReport r;
    r.L = h.depth() - 1;
    r.T = h.layers[0].rows();
    r.d = h.layers[0].cols();
    r.K = k.is_full() ? h.depth() : std::min(k.size, h.depth());
    r.mode = mode;
    r.dtype = dtype_of<S>();
    r.tolerance = mode == CheckMode::tolerance
                      ? (tolerance < 0 ? default_tolerance(r.dtype) : tolerance)
                      : 0.0;
    r.diff = Tensor(Shape(r.T, r.L + 1));

    for (std::int64_t t = 0; t < r.T; ++t) {
        const TensorT<S> traj = extract_trajectory(h, t);
        const TensorT<S> path_b = mode == CheckMode::bit_exact
                                      ? causal_swa(traj, params, k)
                                      : dense_windowed_attention(traj, params, k);
        for (std::int64_t ell = 0; ell <= r.L; ++ell) {
            const TensorT<S> path_a = depth_residual_read(h, t, ell, k, params);
            r.diff.at(t, ell) = max_abs_diff(path_a, row(path_b, ell));
        }
    }

    r.max_diff = 0.0;
    for (std::int64_t i = 0; i < r.diff.numel(); ++i)
        r.max_diff = std::max(r.max_diff, r.diff.data()[i]);
    r.exact = r.max_diff == 0.0;
    r.passed = mode == CheckMode::bit_exact ? r.exact : r.max_diff <= r.tolerance;
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

template <typename S>
DualityReport check_full_window_limit(const HiddenStackT<TensorT<S>>& h,
                                      const AttentionParamsT<TensorT<S>>& params,
                                      double tolerance) {
    return check_duality(h, params, WindowSpec::full(Axis::depth), CheckMode::tolerance,
                         tolerance);
}

DualityReport run_duality_job(const DualityJob& job) {
    const ModelConfig& cfg = job.config;
    validate_config(cfg);
    if (job.K != kFullWindow && (job.K < 1 || job.K > cfg.L + 1))
        throw config_error("duality: K must be in [1," + std::to_string(cfg.L + 1) +
                           "] or full, got " + std::to_string(job.K));

    HiddenStack h;
    if (job.stack == StackRecipe::forward_pass) {
        const ModelWeights w = init_weights(cfg);
        const Tensor input =
            Rng(cfg.seed + kInputSeedOffset).uniform_tensor(Shape(cfg.T, cfg.d), -1.0, 1.0);
        if (job.dtype == Dtype::f64) {
            h = forward_model(cfg, w, input);
        } else {
            // run the whole pipeline in f32, not just the comparison
            const HiddenStack32 h32 = forward_model(cfg, cast_weights(w, cfg), to_standard(input));
            const AttentionParams32 p32 = to_standard(draw_read_params(cfg.d, cfg.seed));
            DualityReport r = check_duality(h32, p32, WindowSpec(job.K, Axis::depth), job.mode,
                                            job.tolerance);
            r.seed = cfg.seed;
            r.stack = stack_recipe_name(job.stack);
            r.mixer = mixer_name(cfg.mixer.kind);
            return r;
        }
    } else {
        Rng rng(cfg.seed);
        h.layers.reserve(cfg.L + 1);
        for (std::int64_t ell = 0; ell <= cfg.L; ++ell)
            h.layers.push_back(rng.uniform_tensor(Shape(cfg.T, cfg.d), -1.0, 1.0));
    }

    const AttentionParams params = draw_read_params(cfg.d, cfg.seed);
    DualityReport r;
    if (job.dtype == Dtype::f64) {
        r = check_duality(h, params, WindowSpec(job.K, Axis::depth), job.mode, job.tolerance);
    } else {
        r = check_duality(to_standard(h), to_standard(params), WindowSpec(job.K, Axis::depth),
                          job.mode, job.tolerance);
    }
    r.seed = cfg.seed;
    r.stack = stack_recipe_name(job.stack);
    r.mixer = job.stack == StackRecipe::random ? "none" : mixer_name(cfg.mixer.kind);
    return r;
}

std::vector<DualityReport> sweep(const std::vector<ModelConfig>& configs,
                                 const std::vector<std::int64_t>& ks,
                                 const std::vector<std::uint64_t>& seeds, StackRecipe stack,
                                 CheckMode mode, Dtype dtype, double tolerance) {
    if (configs.empty()) throw parameter_error("sweep: empty config list");
    if (ks.empty()) throw parameter_error("sweep: empty K list");
    if (seeds.empty()) throw parameter_error("sweep: empty seed list");
    std::vector<DualityReport> out;
    out.reserve(configs.size() * ks.size() * seeds.size());
    for (std::size_t ci = 0; ci < configs.size(); ++ci)
        for (std::int64_t k : ks)
            for (std::uint64_t seed : seeds) {
                DualityJob job;
                job.config = configs[ci];
                job.config.seed = seed;
                job.stack = stack;
                job.K = k;
                job.mode = mode;
                job.dtype = dtype;
                job.tolerance = tolerance;
                try {
                    out.push_back(run_duality_job(job));
                } catch (const config_error& e) {
                    throw config_error("sweep: config " + std::to_string(ci) + ": " + e.what());
                } catch (const parameter_error& e) {
                    throw parameter_error("sweep: config " + std::to_string(ci) + ": " + e.what());
                }
            }
    return out;
}

ordered_json duality_report_json(const DualityReport& r, bool include_timing) {
    ordered_json j;
    j["report"] = "duality";
    j["version"] = kVersion;
    j["config"] = ordered_json{{"L", r.L},       {"T", r.T},         {"d", r.d},
                               {"seed", r.seed}, {"stack", r.stack}, {"mixer", r.mixer}};
    j["K"] = r.K;
    j["mode"] = check_mode_name(r.mode);
    j["dtype"] = dtype_name(r.dtype);
    j["tolerance"] = r.tolerance;
    j["max_abs_diff"] = r.max_diff;
    j["exact"] = r.exact;
    j["passed"] = r.passed;
    ordered_json cells = ordered_json::array();
    for (std::int64_t t = 0; t < r.T; ++t) {
        ordered_json row = ordered_json::array();
        for (std::int64_t ell = 0; ell <= r.L; ++ell) row.push_back(r.diff.at(t, ell));
        cells.push_back(std::move(row));
    }
    j["per_cell_max_abs_diff"] = std::move(cells);
    if (include_timing) j["elapsed_seconds"] = r.elapsed_seconds;
    return j;
}

ordered_json duality_reports_json(const std::vector<DualityReport>& rs, bool include_timing) {
    ordered_json j;
    j["report"] = "duality-sweep";
    j["version"] = kVersion;
    bool all = true;
    for (const DualityReport& r : rs) all = all && r.passed;
    j["passed"] = all;
    ordered_json cells = ordered_json::array();
    for (const DualityReport& r : rs) cells.push_back(duality_report_json(r, include_timing));
    j["cells"] = std::move(cells);
    return j;
}

std::string duality_report_csv(const DualityReport& r) {
    std::string out = "t";
    for (std::int64_t ell = 0; ell <= r.L; ++ell) out += ",layer" + std::to_string(ell);
    out += "\n";
    for (std::int64_t t = 0; t < r.T; ++t) {
        out += std::to_string(t);
        for (std::int64_t ell = 0; ell <= r.L; ++ell) out += "," + fmt_double(r.diff.at(t, ell));
        out += "\n";
    }
    return out;
}

std::string duality_reports_csv(const std::vector<DualityReport>& rs) {
    std::string out =
        "L,T,d,seed,stack,mixer,K,mode,dtype,tolerance,max_abs_diff,exact,passed\n";
    for (const DualityReport& r : rs) {
        out += std::to_string(r.L) + "," + std::to_string(r.T) + "," + std::to_string(r.d) + "," +
               std::to_string(r.seed) + "," + r.stack + "," + r.mixer + "," + std::to_string(r.K) +
               "," + check_mode_name(r.mode) + "," + dtype_name(r.dtype) + "," +
               fmt_double(r.tolerance) + "," + fmt_double(r.max_diff) + "," +
               (r.exact ? "true" : "false") + "," + (r.passed ? "true" : "false") + "\n";
    }
    return out;
}

template Tensor dense_windowed_attention<double>(const Tensor&, const AttentionParams&,
                                                 WindowSpec);
template Tensor32 dense_windowed_attention<float>(const Tensor32&, const AttentionParams32&,
                                                  WindowSpec);
template DualityReport check_duality<double>(const HiddenStack&, const AttentionParams&,
                                             WindowSpec, CheckMode, double);
template DualityReport check_duality<float>(const HiddenStack32&, const AttentionParams32&,
                                            WindowSpec, CheckMode, double);
template DualityReport check_full_window_limit<double>(const HiddenStack&, const AttentionParams&,
                                                       double);
template DualityReport check_full_window_limit<float>(const HiddenStack32&,
                                                      const AttentionParams32&, double);

}  // namespace resdual
