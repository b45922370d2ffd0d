#pragma once

#include <complex>
#include <vector>

namespace eqcl::fft {

// Unnormalized forward transform X(k) = sum_n x(n) e^{-j 2 pi k n / N} when
// inverse == false; the conjugate-kernel sum (still without the 1/N) when
// inverse == true. Radix-2 for power-of-two lengths, Bluestein otherwise.
void transform(std::vector<std::complex<double>>& data, bool inverse);

bool is_power_of_two(std::size_t n);

}  // namespace eqcl::fft
