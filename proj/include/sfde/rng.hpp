#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace sfde {

/// Name recorded in path metadata and run manifests. Changing the generator
/// or the Gaussian transform invalidates golden files, so it is spelled out.
inline constexpr std::string_view rng_algorithm_name = "splitmix64/box-muller";

/// SplitMix64 finalizer (Vigna 2015). Full-avalanche 64-bit mix; also used
/// on its own to derive per-replication seeds from (master_seed, keys...).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

/// Deterministic seed derivation: fold each key into the state through the
/// avalanche mix. Independent of evaluation order of anything else, so
/// replication streams can be created in any order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = splitmix64_mix(master ^ UINT64_C(0x9E3779B97F4A7C15));
    for (std::uint64_t k : keys) {
        s = splitmix64_mix(s ^ k);
    }
    return s;
}

/// Splittable counter-style generator: 64-bit state advanced by the golden
/// gamma, output through the finalizer. Passes BigCrush; one instance per
/// simulated path.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += UINT64_C(0x9E3779B97F4A7C15);
        return splitmix64_mix(state_);
    }

    /// Uniform on the open interval (0, 1): (x >> 11) + 0.5 scaled by 2^-53,
    /// so log() in Box-Muller never sees 0.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

/// Standard normal stream via the basic Box-Muller transform. Consumes
/// exactly two uniforms per generated pair; the second deviate is cached.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.next_uniform();
        const double u2 = rng_.next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

  private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sfde
