#pragma once

// Independent reference computations used as test oracles. Nothing here
// calls into the library's numeric kernels.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "eqcl/signal.hpp"

namespace oracle {

inline std::vector<std::complex<double>> direct_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{};
        for (std::size_t t = 0; t < n; ++t) {
            // Reduce k*t mod n first so the angle stays small and exact.
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

inline eqcl::IqSignal random_signal(std::size_t length, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    eqcl::IqSignal s;
    s.samples.resize(length);
    for (auto& v : s.samples) v = {g(rng), g(rng)};
    return s;
}

inline double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double energy(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
}

inline std::size_t zero_crossings(const std::vector<double>& v) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if ((v[i - 1] < 0 && v[i] >= 0) || (v[i - 1] >= 0 && v[i] < 0)) ++n;
    return n;
}

}  // namespace oracle
