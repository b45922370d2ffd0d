// Empirical mode decomposition by envelope sifting.

#include <cmath>
#include <numeric>

#include "eqcl/errors.hpp"
#include "eqcl/views.hpp"

namespace eqcl {

namespace {

struct Extrema {
    std::vector<std::size_t> maxima;
    std::vector<std::size_t> minima;
    std::size_t count() const { return maxima.size() + minima.size(); }
};

// Interior extrema only. A flat top counts once, at its first sample.
Extrema find_extrema(std::span<const double> x) {
    Extrema e;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] > x[i - 1] && x[i] >= x[i + 1]) e.maxima.push_back(i);
        else if (x[i] < x[i - 1] && x[i] <= x[i + 1]) e.minima.push_back(i);
    }
    return e;
}

// Knots are the extrema plus up to `width` of them reflected about each end
// sample, which pins the spline near the boundaries.
std::vector<double> envelope(std::span<const double> x, const std::vector<std::size_t>& idx, int width) {
    const std::size_t n = x.size();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(width), idx.size());
    std::vector<double> kx, ky;
    kx.reserve(idx.size() + 2 * w);
    ky.reserve(idx.size() + 2 * w);
    for (std::size_t j = w; j-- > 0;) {
        kx.push_back(-static_cast<double>(idx[j]));
        ky.push_back(x[idx[j]]);
    }
    for (auto i : idx) {
        kx.push_back(static_cast<double>(i));
        ky.push_back(x[i]);
    }
    const double right = 2.0 * static_cast<double>(n - 1);
    for (std::size_t j = 0; j < w; ++j) {
        const auto i = idx[idx.size() - 1 - j];
        kx.push_back(right - static_cast<double>(i));
        ky.push_back(x[i]);
    }
    return natural_cubic_spline(kx, ky, n);
}

}  // namespace

std::vector<double> natural_cubic_spline(std::span<const double> xs, std::span<const double> ys,
                                         std::size_t n_out) {
    const std::size_t k = xs.size();
    if (k < 2 || ys.size() != k) throw InvalidParameter("natural_cubic_spline: need >= 2 matching knots");

    // Second derivatives M_i with M_0 = M_{k-1} = 0; tridiagonal system solved
    // by forward elimination / back substitution.
    std::vector<double> h(k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        h[i] = xs[i + 1] - xs[i];
        if (!(h[i] > 0.0)) throw InvalidParameter("natural_cubic_spline: knots must be strictly increasing");
    }
    std::vector<double> m(k, 0.0);
    if (k > 2) {
        const std::size_t n = k - 2;
        std::vector<double> diag(n), upper(n), rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double f = h[i] / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        m[n] = rhs[n - 1] / diag[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }

    std::vector<double> out(n_out);
    std::size_t seg = 0;
    for (std::size_t t = 0; t < n_out; ++t) {
        const double x = static_cast<double>(t);
        while (seg + 2 < k && x > xs[seg + 1]) ++seg;
        const double hi = h[seg];
        const double a = (xs[seg + 1] - x) / hi;
        const double b = (x - xs[seg]) / hi;
        out[t] = a * ys[seg] + b * ys[seg + 1] +
                 ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * hi * hi / 6.0;
    }
    return out;
}

std::vector<std::vector<double>> emd_decompose(std::span<const double> channel, const EmdConfig& cfg) {
    cfg.validate();
    const std::size_t n = channel.size();
    if (n < 8) throw SignalTooShort("emd_decompose: need at least 8 samples, got " + std::to_string(n));

    std::vector<std::vector<double>> parts;
    std::vector<double> residual(channel.begin(), channel.end());

    while (static_cast<int>(parts.size()) < cfg.max_imfs && find_extrema(residual).count() >= 3) {
        std::vector<double> h = residual;
        for (int it = 0; it < cfg.max_sift_iters; ++it) {
            const Extrema e = find_extrema(h);
            if (e.maxima.empty() || e.minima.empty()) break;
            const auto upper = envelope(h, e.maxima, cfg.boundary);
            const auto lower = envelope(h, e.minima, cfg.boundary);

            double diff = 0.0, energy = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double mean = 0.5 * (upper[t] + lower[t]);
                diff += mean * mean;
                energy += h[t] * h[t];
                h[t] -= mean;
            }
            if (energy == 0.0 || diff / energy < cfg.sift_sd_threshold) break;
        }
        for (std::size_t t = 0; t < n; ++t) residual[t] -= h[t];
        parts.push_back(std::move(h));
    }
    parts.push_back(std::move(residual));
    return parts;
}

}  // namespace eqcl
