#include "spectemp/fourier.hpp"

#include "spectemp/errors.hpp"

#include <cmath>
#include <numbers>

namespace spectemp::temporal {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// exp(sign * 2 pi i * m / n), with m reduced mod n first to keep the angle small.
Complex twiddle(std::size_t m, std::size_t n, double sign) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(m % n) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

void fft_radix2(std::vector<Complex>& a, double sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const Complex w = twiddle(k, len, sign);
                const Complex u = a[i + k];
                const Complex v = a[i + k + half] * w;
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

std::vector<Complex> transform(std::span<const Complex> x, double sign) {
    const std::size_t n = x.size();
    if (n == 0) throw ShapeError("Fourier transform of an empty sequence");
    if (is_power_of_two(n)) {
        std::vector<Complex> a(x.begin(), x.end());
        fft_radix2(a, sign);
        return a;
    }
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) acc += x[t] * twiddle(k * t, n, sign);
        out[k] = acc;
    }
    return out;
}

} // namespace

std::vector<Complex> dft(std::span<const Complex> x) { return transform(x, -1.0); }

std::vector<Complex> dft(std::span<const double> x) {
    std::vector<Complex> c(x.begin(), x.end());
    return transform(c, -1.0);
}

std::vector<Complex> idft(std::span<const Complex> spectrum) {
    auto out = transform(spectrum, +1.0);
    const double inv = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= inv;
    return out;
}

} // namespace spectemp::temporal
