#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lstmcov {

/// Seedable random source used by every stochastic operation.
///
/// Engine: std::mt19937_64 (the standard's fully specified 64-bit Mersenne
/// Twister). Derived quantities are computed here rather than through the
/// implementation-defined std distributions so streams are reproducible
/// across standard libraries:
///   uniform()      = (next() >> 11) * 2^-53, in [0, 1)
///   index(n)       = rejection-sampled next() mod n
///   normal()       = Box-Muller on two uniforms, second value cached
///   fork(tag)      = new Rng seeded with splitmix64(seed ^ fnv1a(tag))
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next();
    double uniform();
    double uniform(double lo, double hi);
    std::uint64_t index(std::uint64_t n);
    double normal();
    bool bernoulli(double p);

    Rng fork(std::string_view tag) const;
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text);

} // namespace lstmcov
