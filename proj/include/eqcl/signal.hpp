#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eqcl {

using cplx = std::complex<double>;

// One complex baseband record.
struct IqSignal {
    std::vector<cplx> samples;
    std::optional<int> label;
    std::optional<double> snr_db;
    std::uint64_t id = 0;

    std::size_t length() const { return samples.size(); }
    bool all_finite() const;
    double mean_power() const;

    friend bool operator==(const IqSignal&, const IqSignal&) = default;
};

enum class Modulation { BPSK, QPSK, PSK8, PAM4, QAM16, CPFSK };

// Accepts the canonical names BPSK, QPSK, 8PSK, PAM4, QAM16, CPFSK.
Modulation parse_modulation(std::string_view name);
std::string_view modulation_name(Modulation m);
std::vector<std::string> supported_modulations();

// Received-signal model: s_r = (s_t * h) e^{j(2 pi df n + theta0)} + w.
struct ChannelSpec {
    double snr_db = std::numeric_limits<double>::infinity();  // +inf disables noise
    double freq_offset = 0.0;                                  // cycles / sample, [-0.5, 0.5)
    double phase_offset = 0.0;                                 // radians
    std::vector<cplx> taps{cplx{1.0, 0.0}};                    // unit energy
    std::uint64_t noise_seed = 0;

    void validate() const;
};

struct SyntheticDatasetSpec {
    std::vector<std::string> classes{"BPSK", "QPSK", "PAM4", "QAM16"};
    int samples_per_class_per_snr = 100;
    std::vector<double> snr_grid_db{10.0};
    std::size_t length = 128;
    int symbol_rate = 8;  // samples per symbol
    std::uint64_t master_seed = 1;
    bool random_phase = false;  // draw theta0 ~ U[0, 2pi) per record

    void validate() const;
};

// Unit-average-power waveform of num_symbols * symbol_rate samples.
// PSK/QAM/PAM use a rectangular pulse; CPFSK is binary continuous-phase FSK
// with modulation index 1/2.
IqSignal modulate(std::string_view class_name, std::size_t num_symbols, int symbol_rate,
                  std::uint64_t seed);

// Linear convolution with the taps truncated to the input length, then the
// carrier rotation, then circular complex AWGN at spec.snr_db relative to the
// power measured before noise injection.
IqSignal apply_channel(const IqSignal& x, const ChannelSpec& spec);

// |classes| * |snr_grid| * samples_per_class_per_snr labelled records, ordered
// by SNR, then class, then draw index. Each record's seed is derived from
// (master_seed, class, snr index, draw) so the set is bitwise reproducible.
std::vector<IqSignal> make_dataset(const SyntheticDatasetSpec& spec);

// Seed used for the held-out test draw of a dataset spec.
std::uint64_t test_split_seed(std::uint64_t master_seed);

}  // namespace eqcl
