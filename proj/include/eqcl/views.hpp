#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "eqcl/signal.hpp"
#include "eqcl/tensor.hpp"

namespace eqcl {

struct EmdConfig {
    int max_imfs = 4;                 // M
    double sift_sd_threshold = 0.3;
    int max_sift_iters = 10;
    int boundary = 2;                 // extrema mirrored past each end

    void validate() const;
    std::size_t rows_per_channel() const { return static_cast<std::size_t>(max_imfs) + 1; }
};

enum class TaOp { Rotate, Shift };

// The augmentation drawn by time_augment, kept so it can be undone.
struct TaParams {
    TaOp op = TaOp::Rotate;
    double alpha = 0.0;      // used when op == Rotate
    std::size_t shift = 0;   // used when op == Shift

    friend bool operator==(const TaParams&, const TaParams&) = default;
};

// The raw record plus its four lossless representations. All tensors are
// channels x length.
struct ViewSet {
    Tensor raw;  // 2 x L: I, Q
    Tensor ta;   // 2 x L
    Tensor ap;   // 2 x L: amplitude, phase in (-pi, pi]
    Tensor fft;  // 2 x L: Re X(k), Im X(k), natural bin order
    Tensor emd;  // 2(M+1) x L: I IMFs, I residual, Q IMFs, Q residual
    TaParams ta_params;

    friend bool operator==(const ViewSet&, const ViewSet&) = default;
};

Tensor iq_tensor(const IqSignal& x);
IqSignal tensor_to_iq(const Tensor& iq);

// Multiplies every (I, Q) column by the rotation matrix of angle alpha in (0, pi].
Tensor rotate(const Tensor& iq, double alpha);
// Applies the transpose of the alpha rotation; no range restriction.
Tensor rotate_inverse(const Tensor& iq, double alpha);

// Rotates both rows left by i in [1, L-1]: out[n] = in[(n + i) mod L].
Tensor cyclic_shift(const Tensor& iq, std::size_t i);

// Rotation with alpha ~ U(0, pi] or cyclic shift with i ~ U{1..L-1}, each
// with probability 1/2, fully determined by seed.
std::pair<Tensor, TaParams> time_augment(const Tensor& iq, std::uint64_t seed);
Tensor time_augment_inverse(const Tensor& ta, const TaParams& params);

Tensor amp_phase(const Tensor& iq);
Tensor amp_phase_inverse(const Tensor& ap);

// Unnormalized N-point DFT of x(n) = I(n) + jQ(n), N = L.
Tensor dft(const Tensor& iq);
// x(n) = (1/N) sum_k X(k) e^{+j 2 pi k n / N}.
Tensor idft(const Tensor& spectrum);

// Returns [IMF_1, ..., IMF_m, residual] with m <= cfg.max_imfs. The pieces sum
// back to the input up to rounding since every IMF is peeled off a running
// residual.
std::vector<std::vector<double>> emd_decompose(std::span<const double> channel, const EmdConfig& cfg);

// Per-channel EMD of the I and Q rows, absent IMFs zero-filled.
Tensor emd_view(const Tensor& iq, const EmdConfig& cfg);
// Sums each block of M+1 rows back to the 2 x L signal.
Tensor emd_view_inverse(const Tensor& emd, const EmdConfig& cfg);

ViewSet make_view_set(const IqSignal& x, const EmdConfig& cfg, std::uint64_t seed);

// Per-row zero mean / unit variance. Rows with variance < 1e-12 are only
// centred.
Tensor standardize_view(const Tensor& t);

// Natural cubic spline through (xs, ys), evaluated at 0, 1, ..., n_out-1.
// xs must be strictly increasing with at least two knots.
std::vector<double> natural_cubic_spline(std::span<const double> xs, std::span<const double> ys,
                                         std::size_t n_out);

}  // namespace eqcl
