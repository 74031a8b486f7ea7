#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace mdm {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Replica i draws its stream seed from the master seed alone. Documented
// contract: seed_i = splitmix64(master XOR golden * (i + 1)), so replicas
// are independent and any run is reproducible from the master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    uint64_t s = master ^ (0xD1B54A32D192ED03ull * (index + 1));
    return splitmix64(s);
}

// xoshiro256** with explicit, portable draw primitives. Samplers use only
// these primitives so that a (config, seed) pair pins the byte-exact output
// stream regardless of standard-library distribution internals.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Exp(1) deviate via inverse transform.
    double exponential() { return -std::log1p(-uniform()); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        return static_cast<int>(uniform() * n) % n;
    }

    // Single-uniform CDF draw from an (unnormalized is allowed) weight vector.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) throw std::invalid_argument("Rng::categorical: nonpositive total weight");
        double u = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        // Fall through only on rounding at the top of the CDF.
        for (size_t i = weights.size(); i-- > 0;)
            if (weights[i] > 0.0) return static_cast<int>(i);
        return 0;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace mdm
