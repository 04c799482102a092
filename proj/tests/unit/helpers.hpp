#pragma once

#include <cstring>

#include "ntk/network.hpp"

namespace ntk::testing {

inline bool bit_equal(double a, double b)
{
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

inline bool bit_equal(const Vec& a, const Vec& b)
{
    if (a.size() != b.size()) return false;
    return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline std::size_t argmax(const Vec& v)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// The 4-bit toy input for value v, most significant bit first.
inline Vec four_bits(std::size_t v)
{
    return {static_cast<double>((v >> 3) & 1), static_cast<double>((v >> 2) & 1),
            static_cast<double>((v >> 1) & 1), static_cast<double>(v & 1)};
}

}  // namespace ntk::testing
