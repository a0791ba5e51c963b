#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "mswave/errors.hpp"

namespace mswave {

/// Seedable random source with fixed, documented transforms.
///
/// std::mt19937_64 itself is specified bit-for-bit by the standard, but the
/// std::*_distribution adapters are not, and artifacts here must be
/// byte-identical across toolchains. So the engine is standard and the
/// transforms are written out:
///
///   uniform:     u = (top 53 bits + 0.5) * 2^-53, strictly inside (0,1)
///   normal:      Box-Muller on two uniforms, second value cached
///   exponential: -log(u)/rate (inverse CDF)
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on the open interval (0,1); never returns 0 or 1.
    double uniform() {
        const std::uint64_t bits = gen_() >> 11;  // 53 significant bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal deviate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Exponential holding time with the given rate (> 0).
    double exponential(double rate) {
        if (!(rate > 0.0)) throw NumericalError("exponential() requires rate > 0");
        return -std::log(uniform()) / rate;
    }

    /// Index drawn proportionally to non-negative weights (not all zero).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw NumericalError("categorical() weight < 0");
            total += w;
        }
        if (!(total > 0.0)) throw NumericalError("categorical() weights sum to 0");
        const double target = uniform() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            cum += weights[i];
            if (target <= cum) return i;
        }
        return weights.size() - 1;
    }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mswave
