#pragma once

// Dense row-major tensors of rank 1..3. Two scalar types are instantiated:
// double ("wide", the default everywhere) and float ("standard", opt-in for
// precision studies). All elements are required to be finite; ops re-check
// their outputs so a NaN/inf is caught where it is produced, not downstream.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "resdual/errors.hpp"

namespace resdual {

struct Shape {
    std::array<std::int64_t, 3> dim{0, 0, 0};
    int rank = 0;

    Shape() = default;
    explicit Shape(std::int64_t n) : dim{n, 0, 0}, rank(1) {}
    Shape(std::int64_t r, std::int64_t c) : dim{r, c, 0}, rank(2) {}
    Shape(std::int64_t a, std::int64_t b, std::int64_t c) : dim{a, b, c}, rank(3) {}

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int i = 0; i < rank; ++i) n *= dim[i];
        return rank == 0 ? 0 : n;
    }

    bool operator==(const Shape& o) const { return rank == o.rank && dim == o.dim; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < rank; ++i) {
            if (i) s += ",";
            s += std::to_string(dim[i]);
        }
        return s + ")";
    }
};

template <typename S>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(Shape shape) : shape_(shape), data_(check_shape(shape).numel(), S(0)) {}

    static TensorT zeros(Shape shape) { return TensorT(shape); }

    static TensorT full(Shape shape, S value) {
        TensorT t(shape);
        for (auto& x : t.data_) x = value;
        t.require_finite("full");
        return t;
    }

    static TensorT from_data(Shape shape, std::vector<S> values) {
        check_shape(shape);
        if (static_cast<std::int64_t>(values.size()) != shape.numel())
            throw dimension_error("from_data: " + std::to_string(values.size()) +
                                  " values for shape " + shape.str());
        TensorT t;
        t.shape_ = shape;
        t.data_ = std::move(values);
        t.require_finite("from_data");
        return t;
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank; }
    std::int64_t dim(int i) const { return shape_.dim[i]; }
    std::int64_t numel() const { return shape_.numel(); }

    // rank-2 conveniences; most kernels work on matrices
    std::int64_t rows() const { require_rank(2, "rows"); return shape_.dim[0]; }
    std::int64_t cols() const { require_rank(2, "cols"); return shape_.dim[1]; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }

    S& at(std::int64_t i) {
        require_rank(1, "at(i)");
        bounds(i, shape_.dim[0], "i");
        return data_[i];
    }
    S at(std::int64_t i) const { return const_cast<TensorT*>(this)->at(i); }

    S& at(std::int64_t i, std::int64_t j) {
        require_rank(2, "at(i,j)");
        bounds(i, shape_.dim[0], "i");
        bounds(j, shape_.dim[1], "j");
        return data_[i * shape_.dim[1] + j];
    }
    S at(std::int64_t i, std::int64_t j) const { return const_cast<TensorT*>(this)->at(i, j); }

    S& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        require_rank(3, "at(i,j,k)");
        bounds(i, shape_.dim[0], "i");
        bounds(j, shape_.dim[1], "j");
        bounds(k, shape_.dim[2], "k");
        return data_[(i * shape_.dim[1] + j) * shape_.dim[2] + k];
    }
    S at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return const_cast<TensorT*>(this)->at(i, j, k);
    }

    void require_finite(const char* op) const {
        for (const S& x : data_)
            if (!std::isfinite(x))
                throw invariant_error(std::string(op) + ": non-finite element in tensor " +
                                      shape_.str());
    }

    bool operator==(const TensorT& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  private:
    static const Shape& check_shape(const Shape& s) {
        if (s.rank < 1 || s.rank > 3)
            throw dimension_error("tensor rank must be 1..3, got " + std::to_string(s.rank));
        for (int i = 0; i < s.rank; ++i)
            if (s.dim[i] < 1)
                throw dimension_error("tensor extents must be positive, got " + s.str());
        return s;
    }

    void require_rank(int r, const char* what) const {
        if (shape_.rank != r)
            throw dimension_error(std::string(what) + ": needs rank-" + std::to_string(r) +
                                  " tensor, got " + shape_.str());
    }

    static void bounds(std::int64_t i, std::int64_t n, const char* axis) {
        if (i < 0 || i >= n)
            throw bounds_error(std::string("index ") + axis + "=" + std::to_string(i) +
                               " outside [0," + std::to_string(n) + ")");
    }

    Shape shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<double>;    // wide precision (default)
using Tensor32 = TensorT<float>;   // standard precision (opt-in)

// Largest-magnitude elementwise difference; the duality checker's metric.
template <typename S>
double max_abs_diff(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        throw dimension_error("max_abs_diff: shapes differ: " + a.shape().str() + " vs " +
                              b.shape().str());
    double m = 0.0;
    const S* pa = a.data();
    const S* pb = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        double d = std::abs(static_cast<double>(pa[i]) - static_cast<double>(pb[i]));
        if (d > m) m = d;
    }
    return m;
}

// Effectively -inf for masked attention scores while keeping tensors finite:
// exp() flushes it to exactly +0 in the corresponding precision.
template <typename S>
constexpr S mask_lowest();
template <>
constexpr double mask_lowest<double>() { return -1e300; }
template <>
constexpr float mask_lowest<float>() { return -3e38f; }

}  // namespace resdual
