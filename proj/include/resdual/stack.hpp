#pragma once

// A hidden-state stack: L+1 layer slices of shape T×d for one forward pass.
// Slice 0 is the input embedding, untouched. Kept as separate slices (rather
// than one rank-3 block) so the autodiff instantiation can hold one node per
// layer; the C API packs it contiguously at the boundary.

#include <cstdint>
#include <vector>

#include "resdual/errors.hpp"
#include "resdual/ops.hpp"
#include "resdual/tensor.hpp"

namespace resdual {

template <typename TT>
struct HiddenStackT {
    std::vector<TT> layers;

    std::int64_t depth() const { return static_cast<std::int64_t>(layers.size()); }  // L+1
};

using HiddenStack = HiddenStackT<Tensor>;
using HiddenStack32 = HiddenStackT<Tensor32>;

template <typename TT>
void check_stack_index(const HiddenStackT<TT>& h, std::int64_t layer, std::int64_t t,
                       const char* op) {
    if (h.depth() == 0) throw dimension_error(std::string(op) + ": empty stack");
    if (layer < 0 || layer >= h.depth())
        throw bounds_error(std::string(op) + ": layer " + std::to_string(layer) + " outside [0," +
                           std::to_string(h.depth()) + ")");
    if (t < 0 || t >= h.layers[0].rows())
        throw bounds_error(std::string(op) + ": token " + std::to_string(t) + " outside [0," +
                           std::to_string(h.layers[0].rows()) + ")");
}

// One token's residual trajectory: row ell is that token's state entering
// layer ell. Pure gather, no arithmetic.
template <typename TT>
TT extract_trajectory(const HiddenStackT<TT>& h, std::int64_t t) {
    check_stack_index(h, 0, t, "extract_trajectory");
    std::vector<TT> parts;
    parts.reserve(h.layers.size());
    for (const TT& layer : h.layers) parts.push_back(row(layer, t));
    return vstack(parts);
}

}  // namespace resdual
