#pragma once

// Scoped FLOP metering. Kernels report their arithmetic through meter::add();
// when no meter is active that is a dead branch. Cost counters activate a
// meter around a real kernel run, so counted flops can never drift from what
// the kernels actually execute.
//
// Conventions (shared with the closed-form formulas):
//   - one multiply-add = 2 flops
//   - scale/add: 1 flop per element
//   - softmax row of n: n subtractions + n exps + (n-1) adds + n divides = 4n-1
//   - data movement (transpose, slicing, stacking) = 0 flops

#include <array>
#include <cstdint>

namespace resdual::meter {

enum class Cat : int {
    qkv_proj = 0,   // query/key/value projections
    scores,         // q.k dot products
    scale,          // 1/sqrt(d_k) scaling of scores
    softmax,        // exp-normalize of score rows
    weighted_sum,   // probability-weighted value sums
    out_proj,       // output projection
    other,          // anything outside the attention breakdown
    count_
};
inline constexpr int kCats = static_cast<int>(Cat::count_);

struct Breakdown {
    std::array<std::uint64_t, kCats> flops{};

    std::uint64_t& operator[](Cat c) { return flops[static_cast<int>(c)]; }
    std::uint64_t operator[](Cat c) const { return flops[static_cast<int>(c)]; }

    // headline cost: score/value interactions only
    std::uint64_t score_value() const { return (*this)[Cat::scores] + (*this)[Cat::weighted_sum]; }
    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto f : flops) t += f;
        return t;
    }
    bool operator==(const Breakdown& o) const { return flops == o.flops; }
};

namespace detail {
inline thread_local Breakdown* active = nullptr;
inline thread_local Cat current = Cat::other;
}  // namespace detail

inline void add(std::uint64_t flops) {
    if (detail::active) (*detail::active)[detail::current] += flops;
}

// Activates a meter for the current thread while in scope.
class Scope {
  public:
    explicit Scope(Breakdown& b) : prev_(detail::active) { detail::active = &b; }
    ~Scope() { detail::active = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

  private:
    Breakdown* prev_;
};

// Attributes kernel flops to a category while in scope.
class Region {
  public:
    explicit Region(Cat c) : prev_(detail::current) { detail::current = c; }
    ~Region() { detail::current = prev_; }
    Region(const Region&) = delete;
    Region& operator=(const Region&) = delete;

  private:
    Cat prev_;
};

}  // namespace resdual::meter
