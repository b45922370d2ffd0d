#include "eqcl/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "eqcl/errors.hpp"
#include "eqcl/seed.hpp"

namespace eqcl {

namespace {

constexpr std::array<std::pair<Modulation, std::string_view>, 6> kModulationNames{{
    {Modulation::BPSK, "BPSK"},
    {Modulation::QPSK, "QPSK"},
    {Modulation::PSK8, "8PSK"},
    {Modulation::PAM4, "PAM4"},
    {Modulation::QAM16, "QAM16"},
    {Modulation::CPFSK, "CPFSK"},
}};

// Unnormalized constellation; the waveform is scaled to unit power afterwards.
std::vector<cplx> constellation(Modulation m) {
    using std::numbers::pi;
    std::vector<cplx> pts;
    switch (m) {
    case Modulation::BPSK:
        pts = {{1, 0}, {-1, 0}};
        break;
    case Modulation::QPSK:
        for (int k = 0; k < 4; ++k) pts.push_back(std::polar(1.0, pi / 4 + k * pi / 2));
        break;
    case Modulation::PSK8:
        for (int k = 0; k < 8; ++k) pts.push_back(std::polar(1.0, k * pi / 4));
        break;
    case Modulation::PAM4:
        pts = {{-3, 0}, {-1, 0}, {1, 0}, {3, 0}};
        break;
    case Modulation::QAM16:
        for (int i : {-3, -1, 1, 3})
            for (int q : {-3, -1, 1, 3}) pts.emplace_back(i, q);
        break;
    case Modulation::CPFSK:
        break;
    }
    return pts;
}

}  // namespace

bool IqSignal::all_finite() const {
    return std::all_of(samples.begin(), samples.end(),
                       [](cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

double IqSignal::mean_power() const {
    if (samples.empty()) return 0.0;
    double p = 0.0;
    for (auto v : samples) p += std::norm(v);
    return p / static_cast<double>(samples.size());
}

Modulation parse_modulation(std::string_view name) {
    for (auto [m, n] : kModulationNames)
        if (n == name) return m;
    throw UnsupportedModulation("unsupported modulation '" + std::string(name) + "'");
}

std::string_view modulation_name(Modulation m) {
    for (auto [mm, n] : kModulationNames)
        if (mm == m) return n;
    return "?";
}

std::vector<std::string> supported_modulations() {
    std::vector<std::string> out;
    for (auto [m, n] : kModulationNames) out.emplace_back(n);
    return out;
}

void ChannelSpec::validate() const {
    if (taps.empty()) throw InvalidParameter("channel taps must be non-empty");
    double energy = 0.0;
    for (auto h : taps) energy += std::norm(h);
    if (std::abs(energy - 1.0) > 1e-9)
        throw InvalidParameter("channel taps must have unit energy, got " + std::to_string(energy));
    if (!(freq_offset >= -0.5 && freq_offset < 0.5))
        throw InvalidParameter("freq_offset must lie in [-0.5, 0.5)");
    if (!std::isfinite(phase_offset)) throw InvalidParameter("phase_offset must be finite");
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw InvalidParameter("snr_db must be a number or +inf");
}

void SyntheticDatasetSpec::validate() const {
    if (classes.empty()) throw InvalidParameter("dataset spec needs at least one class");
    std::set<std::string> seen;
    for (const auto& c : classes) {
        parse_modulation(c);
        if (!seen.insert(c).second) throw InvalidParameter("duplicate class '" + c + "'");
    }
    if (samples_per_class_per_snr < 1) throw InvalidParameter("samples_per_class_per_snr must be >= 1");
    if (length == 0) throw InvalidParameter("signal length must be positive");
    if (symbol_rate < 2) throw InvalidParameter("symbol_rate must be >= 2 samples per symbol");
}

IqSignal modulate(std::string_view class_name, std::size_t num_symbols, int symbol_rate,
                  std::uint64_t seed) {
    const Modulation m = parse_modulation(class_name);
    if (num_symbols < 1) throw InvalidParameter("modulate: num_symbols must be >= 1");
    if (symbol_rate < 1) throw InvalidParameter("modulate: symbol_rate must be >= 1");

    std::mt19937_64 rng(seed);
    IqSignal out;
    out.samples.reserve(num_symbols * static_cast<std::size_t>(symbol_rate));

    if (m == Modulation::CPFSK) {
        // Binary CPFSK, h = 1/2: the phase advances by +-pi/2 over each symbol.
        std::bernoulli_distribution bit(0.5);
        const double step = std::numbers::pi * 0.5 / symbol_rate;
        double phase = 0.0;
        for (std::size_t s = 0; s < num_symbols; ++s) {
            const double dir = bit(rng) ? 1.0 : -1.0;
            for (int k = 0; k < symbol_rate; ++k) {
                out.samples.push_back(std::polar(1.0, phase));
                phase += dir * step;
            }
        }
    } else {
        const auto pts = constellation(m);
        std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
        for (std::size_t s = 0; s < num_symbols; ++s) {
            const cplx sym = pts[pick(rng)];
            for (int k = 0; k < symbol_rate; ++k) out.samples.push_back(sym);
        }
    }

    const double p = out.mean_power();
    if (p > 0.0) {
        const double g = 1.0 / std::sqrt(p);
        for (auto& v : out.samples) v *= g;
    }
    return out;
}

IqSignal apply_channel(const IqSignal& x, const ChannelSpec& spec) {
    spec.validate();
    if (!x.all_finite()) throw InvalidSignal("apply_channel: input contains non-finite samples");

    const std::size_t n = x.samples.size();
    IqSignal y = x;

    if (!(spec.taps.size() == 1 && spec.taps[0] == cplx{1.0, 0.0})) {
        for (std::size_t i = 0; i < n; ++i) {
            cplx acc{0.0, 0.0};
            const std::size_t kmax = std::min(spec.taps.size(), i + 1);
            for (std::size_t k = 0; k < kmax; ++k) acc += spec.taps[k] * x.samples[i - k];
            y.samples[i] = acc;
        }
    }

    if (spec.freq_offset != 0.0 || spec.phase_offset != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double arg = 2.0 * std::numbers::pi * spec.freq_offset * static_cast<double>(i) +
                               spec.phase_offset;
            y.samples[i] *= std::polar(1.0, arg);
        }
    }

    if (std::isfinite(spec.snr_db)) {
        const double signal_power = y.mean_power();
        const double noise_power = signal_power / std::pow(10.0, spec.snr_db / 10.0);
        std::mt19937_64 rng(spec.noise_seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
        for (auto& v : y.samples) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v += cplx{re, im};
        }
    }
    y.snr_db = std::isfinite(spec.snr_db) ? std::optional<double>(spec.snr_db) : x.snr_db;
    return y;
}

std::uint64_t test_split_seed(std::uint64_t master_seed) {
    return derive_seed(master_seed, {0x7e57ULL});
}

std::vector<IqSignal> make_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    std::vector<IqSignal> out;
    out.reserve(spec.classes.size() * spec.snr_grid_db.size() *
                static_cast<std::size_t>(spec.samples_per_class_per_snr));

    const std::size_t symbols = (spec.length + spec.symbol_rate - 1) / spec.symbol_rate;
    std::uint64_t next_id = 0;
    for (std::size_t si = 0; si < spec.snr_grid_db.size(); ++si) {
        for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
            for (int k = 0; k < spec.samples_per_class_per_snr; ++k) {
                const std::uint64_t s = derive_seed(spec.master_seed, {ci, si, static_cast<std::uint64_t>(k)});
                IqSignal tx = modulate(spec.classes[ci], symbols, spec.symbol_rate, derive_seed(s, {1}));
                tx.samples.resize(spec.length);

                ChannelSpec ch;
                ch.snr_db = spec.snr_grid_db[si];
                ch.noise_seed = derive_seed(s, {2});
                if (spec.random_phase) {
                    std::mt19937_64 prng(derive_seed(s, {3}));
                    ch.phase_offset = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(prng);
                }
                IqSignal rx = apply_channel(tx, ch);
                rx.label = static_cast<int>(ci);
                rx.snr_db = spec.snr_grid_db[si];
                rx.id = next_id++;
                out.push_back(std::move(rx));
            }
        }
    }
    return out;
}

}  // namespace eqcl
