#include "eqcl/views.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "eqcl/errors.hpp"
#include "eqcl/fft.hpp"

namespace eqcl {

namespace {

void require_iq(const Tensor& t, const char* op) {
    if (t.rank() != 2 || t.rows() != 2)
        throw ShapeError(std::string(op) + ": expected a 2 x L tensor, got " + t.shape_string());
}

Tensor rotate_impl(const Tensor& iq, double c, double s) {
    Tensor out(iq.shape);
    const std::size_t n = iq.cols();
    for (std::size_t t = 0; t < n; ++t) {
        const double i = iq.at(0, t);
        const double q = iq.at(1, t);
        out.at(0, t) = c * i - s * q;
        out.at(1, t) = s * i + c * q;
    }
    return out;
}

std::vector<std::complex<double>> to_complex(const Tensor& iq) {
    std::vector<std::complex<double>> x(iq.cols());
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = {iq.at(0, t), iq.at(1, t)};
    return x;
}

Tensor from_complex(const std::vector<std::complex<double>>& x) {
    Tensor out = Tensor::matrix(2, x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        out.at(0, t) = x[t].real();
        out.at(1, t) = x[t].imag();
    }
    return out;
}

}  // namespace

void EmdConfig::validate() const {
    if (max_imfs < 1 || !(sift_sd_threshold > 0.0) || max_sift_iters < 1 || boundary < 1)
        throw InvalidParameter("EmdConfig fields must all be positive");
}

Tensor iq_tensor(const IqSignal& x) {
    Tensor out = Tensor::matrix(2, x.samples.size());
    for (std::size_t t = 0; t < x.samples.size(); ++t) {
        out.at(0, t) = x.samples[t].real();
        out.at(1, t) = x.samples[t].imag();
    }
    return out;
}

IqSignal tensor_to_iq(const Tensor& iq) {
    require_iq(iq, "tensor_to_iq");
    IqSignal x;
    x.samples = to_complex(iq);
    return x;
}

Tensor rotate(const Tensor& iq, double alpha) {
    require_iq(iq, "rotate");
    if (!(alpha > 0.0 && alpha <= std::numbers::pi))
        throw InvalidParameter("rotate: alpha must lie in (0, pi], got " + std::to_string(alpha));
    return rotate_impl(iq, std::cos(alpha), std::sin(alpha));
}

Tensor rotate_inverse(const Tensor& iq, double alpha) {
    require_iq(iq, "rotate_inverse");
    return rotate_impl(iq, std::cos(alpha), -std::sin(alpha));
}

Tensor cyclic_shift(const Tensor& iq, std::size_t i) {
    require_iq(iq, "cyclic_shift");
    const std::size_t n = iq.cols();
    if (i == 0 || i + 1 > n)
        throw InvalidParameter("cyclic_shift: shift must lie in [1, L-1], got " + std::to_string(i));
    Tensor out(iq.shape);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t t = 0; t < n; ++t) out.at(r, t) = iq.at(r, (t + i) % n);
    return out;
}

std::pair<Tensor, TaParams> time_augment(const Tensor& iq, std::uint64_t seed) {
    require_iq(iq, "time_augment");
    std::mt19937_64 rng(seed);
    TaParams p;
    const bool use_rotation = std::bernoulli_distribution(0.5)(rng) || iq.cols() < 2;
    if (use_rotation) {
        p.op = TaOp::Rotate;
        // U(0, pi]: mirror a draw from [0, pi).
        p.alpha = std::numbers::pi - std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
        return {rotate(iq, p.alpha), p};
    }
    p.op = TaOp::Shift;
    p.shift = std::uniform_int_distribution<std::size_t>(1, iq.cols() - 1)(rng);
    return {cyclic_shift(iq, p.shift), p};
}

Tensor time_augment_inverse(const Tensor& ta, const TaParams& params) {
    if (params.op == TaOp::Rotate) return rotate_inverse(ta, params.alpha);
    require_iq(ta, "time_augment_inverse");
    return cyclic_shift(ta, ta.cols() - params.shift);
}

Tensor amp_phase(const Tensor& iq) {
    require_iq(iq, "amp_phase");
    Tensor out(iq.shape);
    for (std::size_t t = 0; t < iq.cols(); ++t) {
        const double i = iq.at(0, t);
        const double q = iq.at(1, t);
        const double amp = std::hypot(i, q);
        double ph = 0.0;
        if (amp > 0.0) {
            ph = std::atan2(q, i);
            if (ph <= -std::numbers::pi) ph = std::numbers::pi;
        }
        out.at(0, t) = amp;
        out.at(1, t) = ph;
    }
    return out;
}

Tensor amp_phase_inverse(const Tensor& ap) {
    require_iq(ap, "amp_phase_inverse");
    Tensor out(ap.shape);
    for (std::size_t t = 0; t < ap.cols(); ++t) {
        const double amp = ap.at(0, t);
        if (amp < 0.0)
            throw InvalidRepresentation("amp_phase_inverse: negative amplitude at index " + std::to_string(t));
        out.at(0, t) = amp * std::cos(ap.at(1, t));
        out.at(1, t) = amp * std::sin(ap.at(1, t));
    }
    return out;
}

Tensor dft(const Tensor& iq) {
    require_iq(iq, "dft");
    auto x = to_complex(iq);
    fft::transform(x, false);
    return from_complex(x);
}

Tensor idft(const Tensor& spectrum) {
    require_iq(spectrum, "idft");
    auto x = to_complex(spectrum);
    fft::transform(x, true);
    const double scale = x.empty() ? 0.0 : 1.0 / static_cast<double>(x.size());
    for (auto& v : x) v *= scale;
    return from_complex(x);
}

Tensor emd_view(const Tensor& iq, const EmdConfig& cfg) {
    require_iq(iq, "emd_view");
    cfg.validate();
    const std::size_t rows = cfg.rows_per_channel();
    const std::size_t n = iq.cols();
    Tensor out = Tensor::matrix(2 * rows, n);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        const auto parts = emd_decompose(iq.row(ch), cfg);
        const std::size_t m = parts.size() - 1;
        for (std::size_t k = 0; k < m; ++k)
            std::copy(parts[k].begin(), parts[k].end(), out.row(ch * rows + k).begin());
        std::copy(parts.back().begin(), parts.back().end(), out.row(ch * rows + rows - 1).begin());
    }
    return out;
}

Tensor emd_view_inverse(const Tensor& emd, const EmdConfig& cfg) {
    const std::size_t rows = cfg.rows_per_channel();
    if (emd.rank() != 2 || emd.rows() != 2 * rows)
        throw ShapeError("emd_view_inverse: expected " + std::to_string(2 * rows) + " rows, got " +
                         emd.shape_string());
    Tensor out = Tensor::matrix(2, emd.cols());
    for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t k = 0; k < rows; ++k) {
            const auto src = emd.row(ch * rows + k);
            auto dst = out.row(ch);
            for (std::size_t t = 0; t < src.size(); ++t) dst[t] += src[t];
        }
    return out;
}

ViewSet make_view_set(const IqSignal& x, const EmdConfig& cfg, std::uint64_t seed) {
    if (x.samples.empty()) throw InvalidSignal("make_view_set: empty signal");
    if (!x.all_finite()) throw InvalidSignal("make_view_set: non-finite samples");
    ViewSet v;
    v.raw = iq_tensor(x);
    std::tie(v.ta, v.ta_params) = time_augment(v.raw, seed);
    v.ap = amp_phase(v.raw);
    v.fft = dft(v.raw);
    v.emd = emd_view(v.raw, cfg);
    return v;
}

Tensor standardize_view(const Tensor& t) {
    Tensor out = t;
    if (t.rank() != 2) throw ShapeError("standardize_view: expected C x L, got " + t.shape_string());
    const std::size_t n = t.cols();
    if (n == 0) return out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        auto row = out.row(r);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv = var < 1e-12 ? 1.0 : 1.0 / std::sqrt(var);
        for (double& v : row) v = (v - mean) * inv;
    }
    return out;
}

}  // namespace eqcl
