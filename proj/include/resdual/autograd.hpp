#pragma once

// Reverse-mode autodiff over wide-precision tensors. A Tape records one value
// node per primitive op in creation order (parents always precede children, so
// creation order is a topological order); backward() walks that order in
// reverse exactly once, accumulating adjoints.
//
// The free functions here mirror the raw kernel names so the attention/block
// compositions can be instantiated with Var instead of a tensor; forward
// values are computed by the raw kernels themselves, which keeps recorded
// forwards bit-identical to unrecorded ones.

#include <cstdint>
#include <functional>
#include <vector>

#include "resdual/ops.hpp"
#include "resdual/tensor.hpp"

namespace resdual::ad {

class Tape;

class Var {
  public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    int rank() const { return shape().rank; }
    std::int64_t dim(int i) const { return shape().dim[i]; }
    std::int64_t rows() const { return value().rows(); }
    std::int64_t cols() const { return value().cols(); }

    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

  private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
  public:
    // registers an independent value (weight or input)
    Var leaf(Tensor value);

    // op recording; backward receives this tape and the node's own id
    Var record(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward);

    const Tensor& val(int id) const;
    // adjoint accumulator, lazily allocated to zeros of the node's shape
    Tensor& grad_acc(int id);
    bool grad_touched(int id) const;

    // seeds d(out)/d(out) = 1 and sweeps the tape once in reverse creation
    // order; out must be scalar (one element)
    void backward(Var out);

    // backward() + per-input adjoint collection (zeros where unused)
    std::vector<Tensor> grad(Var out, const std::vector<Var>& inputs);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool touched = false;
        std::vector<int> parents;
        std::function<void(Tape&, int)> backward;
    };
    std::vector<Node> nodes_;
    friend class Var;
};

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var scale_by_scalar(const Var& t, const Var& s);
Var element(const Var& a, std::int64_t i, std::int64_t j);
Var rows(const Var& a, std::int64_t i0, std::int64_t n);
Var row(const Var& a, std::int64_t i);
Var vstack(const std::vector<Var>& parts);
Var rms_norm(const Var& x, const Var& gain, double eps);
Var softmax_rows(const Var& x);
Var silu(const Var& x);
Var sum_squares(const Var& x);

}  // namespace resdual::ad
