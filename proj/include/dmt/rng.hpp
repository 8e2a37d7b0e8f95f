#ifndef DMT_RNG_HPP
#define DMT_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace dmt {

/**
 * @brief Deterministic xoshiro256++ generator.
 *
 * Every stochastic choice in the library goes through this type so that a
 * run is a pure function of its seed. The four-word state is exposed for
 * checkpointing; restoring it resumes the exact draw sequence. No code path
 * touches OS entropy.
 */
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) {
        // splitmix64 expansion of the seed into the initial state.
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    /// Derives an independent stream, e.g. one per subsystem of a training run.
    static SeededRng stream(uint64_t seed, uint64_t stream_id) {
        SeededRng rng(seed ^ (0xd1342543de82ef95ULL * (stream_id + 1)));
        return rng;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Unbiased integer in [0, n) by rejection.
    uint64_t next_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller. Stateless between calls: the second
    /// draw of the pair is discarded so the state is exactly two uint64 words
    /// per sample, which keeps checkpoint restore trivial.
    double normal() {
        double u1 = 1.0 - next_double();  // (0, 1]
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    /// Fisher-Yates shuffle.
    template<typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::array<uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

private:
    static uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<uint64_t, 4> state_;
};

}

#endif
