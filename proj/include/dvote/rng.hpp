#pragma once

#include <cstdint>
#include <string>

#include "dvote/digest.hpp"

namespace dvote {

// SplitMix64. Fully specified by its code, unlike the standard library
// distributions, so every seeded stream is bit-identical everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased-enough for simulation purposes; bound > 0.
    uint64_t below(uint64_t bound) { return next() % bound; }

    // Uniform integer in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

private:
    uint64_t state_;
};

// Derives an independent substream seed from (label, parent seed). Streams
// for voter ids, ballot ids, perturbations etc. must never share state, and
// in particular the ballot-id stream is derived without any voter data.
uint64_t derive_seed(const std::string& label, uint64_t seed);
uint64_t derive_seed(const std::string& label, uint64_t seed, uint64_t index);

}  // namespace dvote
