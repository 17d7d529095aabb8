#pragma once

// Raw tensor kernels. One accumulation discipline everywhere: contractions run
// left-to-right over the contraction index and accumulate in wide precision
// regardless of the storage scalar. The bit-exact branch of the duality
// checker relies on every code path funnelling through these kernels.

#include <cmath>
#include <cstdint>
#include <vector>

#include "resdual/meter.hpp"
#include "resdual/tensor.hpp"

namespace resdual {

// c[i,j] = sum_p a[i,p] * b[p,j]
template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw dimension_error("matmul: needs rank-2 operands, got " + a.shape().str() + " and " +
                              b.shape().str());
    if (a.cols() != b.rows())
        throw dimension_error("matmul: inner extents differ: " + a.shape().str() + " vs " +
                              b.shape().str());
    const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
    TensorT<S> c(Shape(m, n));
    const S* pa = a.data();
    const S* pb = b.data();
    S* pc = c.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::int64_t p = 0; p < k; ++p)
                acc += static_cast<double>(pa[i * k + p]) * static_cast<double>(pb[p * n + j]);
            pc[i * n + j] = static_cast<S>(acc);
        }
    meter::add(static_cast<std::uint64_t>(2 * m * n * k));
    c.require_finite("matmul");
    return c;
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
    if (a.rank() != 2)
        throw dimension_error("transpose: needs rank-2 tensor, got " + a.shape().str());
    TensorT<S> t(Shape(a.cols(), a.rows()));
    for (std::int64_t i = 0; i < a.rows(); ++i)
        for (std::int64_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        throw dimension_error("add: shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    TensorT<S> c = a;
    S* pc = c.data();
    const S* pb = b.data();
    for (std::int64_t i = 0; i < c.numel(); ++i) pc[i] += pb[i];
    meter::add(static_cast<std::uint64_t>(c.numel()));
    c.require_finite("add");
    return c;
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        throw dimension_error("sub: shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    TensorT<S> c = a;
    S* pc = c.data();
    const S* pb = b.data();
    for (std::int64_t i = 0; i < c.numel(); ++i) pc[i] -= pb[i];
    meter::add(static_cast<std::uint64_t>(c.numel()));
    c.require_finite("sub");
    return c;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, double s) {
    TensorT<S> c = a;
    S* pc = c.data();
    for (std::int64_t i = 0; i < c.numel(); ++i) pc[i] = static_cast<S>(pc[i] * static_cast<S>(s));
    meter::add(static_cast<std::uint64_t>(c.numel()));
    c.require_finite("scale");
    return c;
}

// contiguous row slice [i0, i0+n) of a rank-2 tensor
template <typename S>
TensorT<S> rows(const TensorT<S>& a, std::int64_t i0, std::int64_t n) {
    if (a.rank() != 2)
        throw dimension_error("rows: needs rank-2 tensor, got " + a.shape().str());
    if (n < 1 || i0 < 0 || i0 + n > a.rows())
        throw bounds_error("rows: slice [" + std::to_string(i0) + "," + std::to_string(i0 + n) +
                           ") outside " + a.shape().str());
    TensorT<S> r(Shape(n, a.cols()));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < a.cols(); ++j) r.at(i, j) = a.at(i0 + i, j);
    return r;
}

template <typename S>
TensorT<S> row(const TensorT<S>& a, std::int64_t i) {
    return rows(a, i, 1);
}

// stack equal-width rank-2 pieces on the row axis
template <typename S>
TensorT<S> vstack(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw dimension_error("vstack: no parts");
    std::int64_t total = 0;
    const std::int64_t c = parts[0].cols();
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.cols() != c)
            throw dimension_error("vstack: incompatible part " + p.shape().str());
        total += p.rows();
    }
    TensorT<S> out(Shape(total, c));
    std::int64_t r0 = 0;
    for (const auto& p : parts) {
        for (std::int64_t i = 0; i < p.rows(); ++i)
            for (std::int64_t j = 0; j < c; ++j) out.at(r0 + i, j) = p.at(i, j);
        r0 += p.rows();
    }
    return out;
}

// y[i,j] = gain[j] * x[i,j] / sqrt(mean_j(x[i,:]^2) + eps)
// flop convention per row of width d: 2d (squares) + 3 (mean, eps, sqrt) + 2d (scale)
template <typename S>
TensorT<S> rms_norm(const TensorT<S>& x, const TensorT<S>& gain, double eps) {
    if (x.rank() != 2)
        throw dimension_error("rms_norm: needs rank-2 input, got " + x.shape().str());
    if (gain.rank() != 1 || gain.dim(0) != x.cols())
        throw dimension_error("rms_norm: gain " + gain.shape().str() + " does not match row width " +
                              x.shape().str());
    if (!(eps >= 0.0)) throw parameter_error("rms_norm: eps must be >= 0, got " + std::to_string(eps));
    const std::int64_t d = x.cols();
    TensorT<S> y(x.shape());
    for (std::int64_t i = 0; i < x.rows(); ++i) {
        double ss = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double v = static_cast<double>(x.at(i, j));
            ss += v * v;
        }
        const S r = static_cast<S>(std::sqrt(ss / static_cast<double>(d) + eps));
        for (std::int64_t j = 0; j < d; ++j)
            y.at(i, j) = gain.at(j) * (x.at(i, j) / r);
    }
    meter::add(static_cast<std::uint64_t>(x.rows() * (4 * d + 3)));
    y.require_finite("rms_norm");
    return y;
}

// row-wise exp-normalize with row-max subtraction; rows sum to 1
// flop convention per row of width n: 4n - 1
template <typename S>
TensorT<S> softmax_rows(const TensorT<S>& x) {
    if (x.rank() != 2)
        throw dimension_error("softmax_rows: needs rank-2 input, got " + x.shape().str());
    const std::int64_t n = x.cols();
    TensorT<S> y(x.shape());
    for (std::int64_t i = 0; i < x.rows(); ++i) {
        S m = x.at(i, 0);
        for (std::int64_t j = 1; j < n; ++j) m = std::max(m, x.at(i, j));
        S denom = S(0);
        for (std::int64_t j = 0; j < n; ++j) {
            const S e = std::exp(x.at(i, j) - m);
            y.at(i, j) = e;
            denom += e;
        }
        for (std::int64_t j = 0; j < n; ++j) y.at(i, j) /= denom;
    }
    meter::add(static_cast<std::uint64_t>(x.rows() * (4 * n - 1)));
    y.require_finite("softmax_rows");
    return y;
}

template <typename S>
S sigmoid_scalar(S x) {
    if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
    const S e = std::exp(x);
    return e / (S(1) + e);
}

// x * sigmoid(x), elementwise; flop convention: 4 per element
template <typename S>
TensorT<S> silu(const TensorT<S>& x) {
    TensorT<S> y = x;
    S* p = y.data();
    for (std::int64_t i = 0; i < y.numel(); ++i) p[i] = p[i] * sigmoid_scalar(p[i]);
    meter::add(static_cast<std::uint64_t>(4 * x.numel()));
    y.require_finite("silu");
    return y;
}

// sum of squared elements as a one-element tensor (loss head for grad checks)
template <typename S>
TensorT<S> sum_squares(const TensorT<S>& x) {
    double acc = 0.0;
    const S* p = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i)
        acc += static_cast<double>(p[i]) * static_cast<double>(p[i]);
    meter::add(static_cast<std::uint64_t>(2 * x.numel()));
    TensorT<S> y(Shape(1));
    y.at(0) = static_cast<S>(acc);
    y.require_finite("sum_squares");
    return y;
}

// t * s where s is a one-element tensor (differentiable scalar coefficient)
template <typename S>
TensorT<S> scale_by_scalar(const TensorT<S>& t, const TensorT<S>& s) {
    if (s.numel() != 1)
        throw dimension_error("scale_by_scalar: coefficient must have one element, got " +
                              s.shape().str());
    TensorT<S> c = t;
    S* pc = c.data();
    const S v = s.data()[0];
    for (std::int64_t i = 0; i < c.numel(); ++i) pc[i] *= v;
    meter::add(static_cast<std::uint64_t>(c.numel()));
    c.require_finite("scale_by_scalar");
    return c;
}

// one element of a rank-2 tensor as a one-element tensor
template <typename S>
TensorT<S> element(const TensorT<S>& a, std::int64_t i, std::int64_t j) {
    TensorT<S> e(Shape(1));
    e.at(0) = a.at(i, j);  // bounds-checked
    return e;
}

// lossless-as-possible dtype conversion (used to derive standard-precision runs
// from wide master values)
inline Tensor32 to_standard(const Tensor& a) {
    Tensor32 out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i)
        out.data()[i] = static_cast<float>(a.data()[i]);
    return out;
}

inline Tensor to_wide(const Tensor32& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i)
        out.data()[i] = static_cast<double>(a.data()[i]);
    return out;
}

}  // namespace resdual
