#pragma once

// Single-head QKV attention, windowed and causal, over either axis:
//   - causal_swa: sliding-window attention along a sequence of states
//   - depth_residual_read: one query into a window of a token's layer stack
//
// Both funnel through attn_core and the same matmul kernel, so a sequence-axis
// read over a token's trajectory and the depth-axis read of the same window
// execute identical floating-point operations in identical order. That shared
// path is what the bit-exact duality mode certifies.
//
// Also here: the two static depth aggregators (convex per-layer combination
// and unconstrained depth-weighted averaging), which read earlier layers with
// fixed coefficients instead of queries.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "resdual/errors.hpp"
#include "resdual/meter.hpp"
#include "resdual/ops.hpp"
#include "resdual/stack.hpp"
#include "resdual/tensor.hpp"

namespace resdual {

inline constexpr std::int64_t kFullWindow = -1;

enum class Axis { sequence, depth };

struct WindowSpec {
    std::int64_t size = kFullWindow;  // >= 1, or kFullWindow for the whole prefix
    Axis axis = Axis::sequence;

    WindowSpec() = default;
    WindowSpec(std::int64_t size_, Axis axis_) : size(size_), axis(axis_) { validate(); }

    static WindowSpec full(Axis axis_) { return WindowSpec(kFullWindow, axis_); }

    bool is_full() const { return size == kFullWindow; }

    void validate() const {
        if (size != kFullWindow && size < 1)
            throw parameter_error("window size must be >= 1 or FULL, got " + std::to_string(size));
    }

    // first attended index for a query at position i
    std::int64_t lo(std::int64_t i) const {
        return is_full() ? 0 : std::max<std::int64_t>(0, i - size + 1);
    }
};

template <typename TT>
struct AttentionParamsT {
    TT wq;  // d x d_k
    TT wk;  // d x d_k
    TT wv;  // d x d_v
    TT wo;  // d_v x d
};

using AttentionParams = AttentionParamsT<Tensor>;
using AttentionParams32 = AttentionParamsT<Tensor32>;

template <typename S>
void validate_params(const AttentionParamsT<TensorT<S>>& p) {
    const auto need2 = [](const TensorT<S>& m, const char* name) {
        if (m.rank() != 2)
            throw dimension_error(std::string("attention params: ") + name + " must be rank-2, got " +
                                  m.shape().str());
    };
    need2(p.wq, "wq");
    need2(p.wk, "wk");
    need2(p.wv, "wv");
    need2(p.wo, "wo");
    if (p.wq.rows() != p.wk.rows() || p.wq.rows() != p.wv.rows())
        throw dimension_error("attention params: wq/wk/wv input widths differ: " +
                              p.wq.shape().str() + ", " + p.wk.shape().str() + ", " +
                              p.wv.shape().str());
    if (p.wq.cols() != p.wk.cols())
        throw dimension_error("attention params: wq and wk key widths differ: " +
                              p.wq.shape().str() + " vs " + p.wk.shape().str());
    if (p.wo.rows() != p.wv.cols())
        throw dimension_error("attention params: wo input width " + p.wo.shape().str() +
                              " does not match wv output width " + p.wv.shape().str());
}

// identity output projection: the "raw z" variant
inline Tensor identity_matrix(std::int64_t n) {
    Tensor m(Shape(n, n));
    for (std::int64_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

// The one windowed-read kernel. q: 1 x d_k, k: n x d_k, v: n x d_v, all
// already projected; returns 1 x d_v. Every attention path in this library
// computes its softmax-weighted read through this function.
template <typename TT>
TT attn_core(const TT& q, const TT& k, const TT& v, double inv_sqrt_dk) {
    TT scores = [&] {
        meter::Region r(meter::Cat::scores);
        return matmul(q, transpose(k));  // 1 x n
    }();
    TT scaled = [&] {
        meter::Region r(meter::Cat::scale);
        return scale(scores, inv_sqrt_dk);
    }();
    TT p = [&] {
        meter::Region r(meter::Cat::softmax);
        return softmax_rows(scaled);
    }();
    meter::Region r(meter::Cat::weighted_sum);
    return matmul(p, v);  // 1 x d_v
}

// Causal sliding-window attention along the row axis of x (N x d): row i
// attends rows [max(0, i-w+1), i]. Keys/values are projected once for all
// rows; window == FULL or w >= N degrades to full causal attention.
template <typename TT>
TT causal_swa(const TT& x, const AttentionParamsT<TT>& params, const WindowSpec& window) {
    window.validate();
    const std::int64_t n = x.rows();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.wq.cols()));
    TT q, k, v;
    {
        meter::Region r(meter::Cat::qkv_proj);
        q = matmul(x, params.wq);
        k = matmul(x, params.wk);
        v = matmul(x, params.wv);
    }
    std::vector<TT> zrows;
    zrows.reserve(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t lo = window.lo(i);
        zrows.push_back(attn_core(row(q, i), rows(k, lo, i - lo + 1), rows(v, lo, i - lo + 1),
                                  inv_sqrt_dk));
    }
    TT z = vstack(zrows);
    meter::Region r(meter::Cat::out_proj);
    return matmul(z, params.wo);
}

// Depth-axis residual read: the token-t state entering layer ell queries the
// last K layer states of its own trajectory (fewer near the bottom). Window
// states are gathered and projected per read. Returns 1 x d.
template <typename TT>
TT depth_residual_read(const HiddenStackT<TT>& h, std::int64_t t, std::int64_t ell,
                       const WindowSpec& window, const AttentionParamsT<TT>& params) {
    window.validate();
    check_stack_index(h, ell, t, "depth_residual_read");
    const std::int64_t lo = window.lo(ell);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.wq.cols()));
    std::vector<TT> states;
    states.reserve(ell - lo + 1);
    for (std::int64_t j = lo; j <= ell; ++j) states.push_back(row(h.layers[j], t));
    TT win = vstack(states);
    TT q, k, v;
    {
        meter::Region r(meter::Cat::qkv_proj);
        q = matmul(row(h.layers[ell], t), params.wq);
        k = matmul(win, params.wk);
        v = matmul(win, params.wv);
    }
    TT z = attn_core(q, k, v, inv_sqrt_dk);
    meter::Region r(meter::Cat::out_proj);
    return matmul(z, params.wo);
}

// ---- static depth aggregators ----

enum class DepthWeightKind { elc_convex, denseformer_avg };

// Per-layer aggregation coefficients: row ell holds ell+1 coefficients over
// layers 0..ell. ELC rows must be convex; denseformer rows are unconstrained.
struct StaticDepthWeights {
    DepthWeightKind kind = DepthWeightKind::elc_convex;
    std::vector<std::vector<double>> rows;

    void validate_row(std::int64_t ell) const {
        if (ell < 0 || ell >= static_cast<std::int64_t>(rows.size()))
            throw bounds_error("depth weights: no row for layer " + std::to_string(ell));
        const auto& r = rows[ell];
        if (static_cast<std::int64_t>(r.size()) != ell + 1)
            throw dimension_error("depth weights: row " + std::to_string(ell) + " has " +
                                  std::to_string(r.size()) + " coefficients, needs " +
                                  std::to_string(ell + 1));
        if (kind == DepthWeightKind::elc_convex) {
            double sum = 0.0;
            for (double c : r) {
                if (c < 0.0)
                    throw invariant_error("depth weights: negative coefficient in convex row " +
                                          std::to_string(ell));
                sum += c;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw invariant_error("depth weights: convex row " + std::to_string(ell) +
                                      " sums to " + std::to_string(sum) + ", needs 1");
        }
    }
};

// sum_j coeffs[0,j] * states[j]; the differentiable core of both aggregators
template <typename TT>
TT depth_weighted_sum(const std::vector<TT>& states, const TT& coeffs) {
    if (states.empty()) throw dimension_error("depth_weighted_sum: no states");
    if (coeffs.cols() != static_cast<std::int64_t>(states.size()))
        throw dimension_error("depth_weighted_sum: " + std::to_string(states.size()) +
                              " states but " + std::to_string(coeffs.cols()) + " coefficients");
    TT acc = scale_by_scalar(states[0], element(coeffs, 0, 0));
    for (std::size_t j = 1; j < states.size(); ++j)
        acc = add(acc, scale_by_scalar(states[j], element(coeffs, 0, j)));
    return acc;
}

namespace detail {
template <typename S>
TensorT<S> aggregate_stack(const HiddenStackT<TensorT<S>>& h, std::int64_t ell,
                           const StaticDepthWeights& w, const char* op) {
    check_stack_index(h, ell, 0, op);
    w.validate_row(ell);
    TensorT<S> coeffs(Shape(1, ell + 1));
    for (std::int64_t j = 0; j <= ell; ++j) coeffs.at(0, j) = static_cast<S>(w.rows[ell][j]);
    std::vector<TensorT<S>> states(h.layers.begin(), h.layers.begin() + (ell + 1));
    return depth_weighted_sum(states, coeffs);
}
}  // namespace detail

// Convex combination of layers 0..ell (T x d); rejects non-convex rows.
template <typename S>
TensorT<S> elc_aggregate(const HiddenStackT<TensorT<S>>& h, std::int64_t ell,
                         const StaticDepthWeights& w) {
    if (w.kind != DepthWeightKind::elc_convex)
        throw parameter_error("elc_aggregate: weights are not convex-kind");
    return detail::aggregate_stack(h, ell, w, "elc_aggregate");
}

// Unconstrained depth-weighted average of layers 0..ell (T x d).
template <typename S>
TensorT<S> denseformer_aggregate(const HiddenStackT<TensorT<S>>& h, std::int64_t ell,
                                 const StaticDepthWeights& w) {
    if (w.kind != DepthWeightKind::denseformer_avg)
        throw parameter_error("denseformer_aggregate: weights are not average-kind");
    return detail::aggregate_stack(h, ell, w, "denseformer_aggregate");
}

}  // namespace resdual
