#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace autoloss {

// Owned, seeded random stream. Every consumer of randomness (init, shuffle,
// dropout, gumbel noise) gets its own stream so that contracts like
// "AL-2 runs are bitwise identical under a different gumbel seed" hold.
//
// Distributions are hand-rolled on top of mt19937_64 so that a fixed seed
// produces the same values regardless of the standard library in use.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 2^-53 granularity.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * kInv53;
    }

    // Uniform on the open interval (0, 1); safe to pass through log().
    double uniform01_open() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * kInv53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double gaussian();

    // Uniform integer in [0, n). n must be positive.
    std::size_t uniform_below(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives a child seed from a base seed and a role tag, so one user seed
    // can fan out into independent streams.
    static std::uint64_t derive(std::uint64_t seed, std::string_view tag);

    // Engine state round-trip for train-state checkpoints.
    std::string serialize_state() const;
    void restore_state(const std::string& text);

private:
    static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace autoloss
