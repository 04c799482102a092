#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntk {

// Activation / neural-input vectors. Plain doubles throughout; every public
// operation checks that no NaN/Inf escapes.
using Vec = std::vector<double>;

// Fixed ascending-index summation. All weighted sums in the engine go through
// here so that a threshold captured from a snapshot reproduces bit-identically
// when the same activations are replayed.
inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline bool all_finite(const Vec& v)
{
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void ensure_finite(const Vec& v, const std::string& context)
{
    if (!all_finite(v))
        throw std::runtime_error(context + ": non-finite value");
}

inline double squared_distance(const Vec& a, const Vec& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(const Vec& a, const Vec& b)
{
    return std::sqrt(squared_distance(a, b));
}

// Shortest decimal form that parses back to the same double.
inline std::string to_shortest(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Seeded RNG wrapper. Draws uniforms from the raw 64-bit stream instead of
// std::uniform_real_distribution, whose output is implementation-defined;
// this keeps seeded runs reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [lo, hi)
    double uniform(double lo, double hi)
    {
        const double u = std::ldexp(static_cast<double>(gen_() >> 11), -53);
        return lo + u * (hi - lo);
    }

    Vec uniform_vec(std::size_t n, double lo, double hi)
    {
        Vec v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }

    std::uint64_t next() { return gen_(); }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

private:
    std::mt19937_64 gen_;
};

}  // namespace ntk
