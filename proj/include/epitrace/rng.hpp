#ifndef EPITRACE_RNG_HPP
#define EPITRACE_RNG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace epitrace {

/// SplitMix64 finaliser; used to derive independent seeds from (seed, stream).
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Pseudo-random source. Every variate is built from raw 64-bit engine
/// output so streams are reproducible independent of <random>'s
/// distribution implementations.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    /// Stream `k` of master seed `seed`; reproducible in isolation.
    static Rng stream(std::uint64_t seed, std::uint64_t k)
    {
        return Rng(mix64(seed) ^ mix64(k + 0x632be59bd9b4e019ULL));
    }

    /// Uniform on the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    double normal()
    {
        // Marsaglia polar method; second variate discarded so the state
        // stays a plain engine.
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0)
                return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    /// Uniform index in [0, n). Requires n > 0.
    std::size_t index(std::size_t n)
    {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace epitrace

#endif // EPITRACE_RNG_HPP
