#pragma once

#include <complex>
#include <span>
#include <vector>

namespace spectemp::temporal {

using Complex = std::complex<double>;

// Unnormalised forward transform X(k) = sum_t x(t) exp(-2 pi i k t / T).
// Radix-2 for power-of-two lengths, direct summation otherwise.
std::vector<Complex> dft(std::span<const Complex> x);
std::vector<Complex> dft(std::span<const double> x);

// Inverse with the 1/T factor: x(t) = (1/T) sum_k X(k) exp(2 pi i k t / T).
std::vector<Complex> idft(std::span<const Complex> spectrum);

} // namespace spectemp::temporal
