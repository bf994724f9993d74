#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fairaudit {

/// Deterministic random source. All distribution transforms are implemented
/// here explicitly because the std::distribution classes are
/// implementation-defined; replayability across toolchains is a contract of
/// this toolkit, not a nice-to-have.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). Rejection-free modulo is fine here:
    /// bounds are tiny relative to 2^64, the bias is < 2^-40.
    std::uint64_t below(std::uint64_t bound) {
        return engine_() % bound;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (explicit so the byte stream is pinned).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential() {
        double u = uniform01();
        while (u <= 0.0) u = uniform01();
        return -std::log(u);
    }

    /// Poisson count by summing unit exponentials until the rate is spent.
    /// O(rate) draws, which is fine at simulation scale.
    std::uint64_t poisson(double rate) {
        if (rate <= 0.0) return 0;
        std::uint64_t count = 0;
        double acc = exponential();
        while (acc <= rate) {
            ++count;
            acc += exponential();
        }
        return count;
    }

    /// In-place Fisher-Yates shuffle (explicit, unlike std::shuffle).
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fairaudit
