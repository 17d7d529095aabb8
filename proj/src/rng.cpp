#include "resdual/rng.hpp"

namespace resdual {

namespace {
std::uint32_t rotr32(std::uint32_t x, unsigned r) {
    return r == 0 ? x : (x >> r) | (x << (32 - r));
}
}  // namespace

Rng::Rng(std::uint64_t seed) : state_(seed + kIncrement) {
    next_u32();  // mix the seed through one step
}

std::uint32_t Rng::next_u32() {
    const std::uint64_t old = state_;
    state_ = old * kMultiplier + kIncrement;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<unsigned>(old >> 59u);
    return rotr32(xorshifted, rot);
}

double Rng::next_double() {
    const std::uint64_t hi = next_u32() >> 5;  // 27 bits
    const std::uint64_t lo = next_u32() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * (1.0 / 9007199254740992.0);  // / 2^53
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

Tensor Rng::uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t(shape);
    double* p = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = uniform(lo, hi);
    return t;
}

}  // namespace resdual
