#pragma once

#include <array>
#include <span>

namespace rde {

namespace detail {

inline constexpr std::array<double, 4> kGaussNodes8 = {
    0.1834346424956498049, 0.5255324099163289858, 0.7966664774136267396,
    0.9602898564975362317};
inline constexpr std::array<double, 4> kGaussWeights8 = {
    0.3626837833783619830, 0.3137066458778872873, 0.2223810344533744706,
    0.1012285362903762591};

template <typename F>
auto gl8_integral(F& f, double a, double b) -> decltype(f(a)) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    decltype(f(a)) acc{};
    for (std::size_t i = 0; i < kGaussNodes8.size(); ++i) {
        const double dx = half * kGaussNodes8[i];
        acc += kGaussWeights8[i] * (f(mid - dx) + f(mid + dx));
    }
    return acc * half;
}

}  // namespace detail

template <typename F>
auto gauss_legendre_average(F&& f, double a, double b, std::span<const double> splits)
    -> decltype(f(a)) {
    decltype(f(a)) acc{};
    double left = a;
    for (double s : splits) {
        if (s <= left) continue;
        if (s >= b) break;
        acc += detail::gl8_integral(f, left, s);
        left = s;
    }
    acc += detail::gl8_integral(f, left, b);
    return acc / (b - a);
}

}  // namespace rde
