// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eqcl/cli.hpp"
#include "eqcl/contrastive.hpp"
#include "eqcl/eval.hpp"
#include "eqcl/fft.hpp"
#include "eqcl/gradcheck.hpp"
#include "eqcl/io.hpp"
#include "eqcl/signal.hpp"
#include "eqcl/views.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace eqcl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string pct(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << '%';
    return s.str();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

Tensor random_iq(std::size_t length, std::uint64_t seed) {
    const IqSignal x = oracle::random_signal(length, seed, 1.0);
    return iq_tensor(x);
}

// Settings shared by the learning-signal criteria.
constexpr int kSeeds = 3;
constexpr std::size_t kLength = 128;

SyntheticDatasetSpec desk_dataset(int per_class) {
    SyntheticDatasetSpec d;
    d.samples_per_class_per_snr = per_class;
    d.length = kLength;
    d.snr_grid_db = {10.0};
    d.master_seed = 1;
    return d;
}

ModelSpec default_encoder() {
    ModelSpec s;
    s.emd_rows = 2 * (EmdConfig{}.max_imfs + 1);
    return s;
}

// Classifier training used by every probe here: the Adam default of 60 epochs
// at batch 128 amounts to about a hundred steps on 200 labels, which leaves a
// linear head close to its initialization.
FinetuneConfig desk_probe(FinetuneMode mode, double fraction, std::uint64_t seed) {
    FinetuneConfig f;
    f.mode = mode;
    f.label_fraction = fraction;
    f.lr = 5e-3;
    f.epochs = 100;
    f.batch_size = 16;
    f.seed = seed;
    return f;
}

Outcome c1_transform_audit() {
    Stopwatch clock;
    const EmdConfig emd;
    double ta_err = 0.0, ap_err = 0.0, fft_err = 0.0, emd_err = 0.0, block_err = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Tensor x = random_iq(kLength, 1000 + s);
        const auto [ta, params] = time_augment(x, 77 + s);
        ta_err = std::max(ta_err, max_abs_diff(time_augment_inverse(ta, params), x));
        ap_err = std::max(ap_err, max_abs_diff(amp_phase_inverse(amp_phase(x)), x));
        fft_err = std::max(fft_err, max_abs_diff(idft(dft(x)), x));
        const Tensor e = emd_view(x, emd);
        emd_err = std::max(emd_err, max_abs_diff(emd_view_inverse(e, emd), x));
        // Block sums taken directly from the view rows.
        const std::size_t block = emd.max_imfs + 1;
        for (std::size_t ch = 0; ch < 2; ++ch)
            for (std::size_t n = 0; n < kLength; ++n) {
                double acc = 0.0;
                for (std::size_t r = 0; r < block; ++r) acc += e.at(ch * block + r, n);
                block_err = std::max(block_err, std::abs(acc - x.at(ch, n)));
            }
    }
    const double t = clock.seconds();
    const double worst = std::max({ta_err, ap_err, fft_err, emd_err});
    return {worst < 1e-5 && block_err < 1e-6 && t < 60.0,
            "ta " + fmt(ta_err) + ", ap " + fmt(ap_err) + ", fft " + fmt(fft_err) + ", emd " + fmt(emd_err) +
                " (< 1e-5); emd blocks " + fmt(block_err) + " (< 1e-6); " + fmt(t) + " s (< 60 s)"};
}

Outcome c2_dft_oracle() {
    double rel = 0.0, parseval = 0.0;
    for (std::size_t n : {8u, 64u, 128u, 1024u}) {
        const IqSignal x = oracle::random_signal(n, n, 1.0);
        const auto ref = oracle::direct_dft(x.samples);
        const Tensor fast = dft(iq_tensor(x));
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            diff = std::max(diff, std::abs(std::complex<double>(fast.at(0, k), fast.at(1, k)) - ref[k]));
            scale = std::max(scale, std::abs(ref[k]));
        }
        rel = std::max(rel, diff / scale);
        double time_energy = 0.0, freq_energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            time_energy += std::norm(x.samples[i]);
            freq_energy += fast.at(0, i) * fast.at(0, i) + fast.at(1, i) * fast.at(1, i);
        }
        parseval = std::max(parseval, std::abs(time_energy - freq_energy / n) / time_energy);
    }
    return {rel < 1e-6 && parseval < 1e-6,
            "max relative error " + fmt(rel) + " (< 1e-6); Parseval " + fmt(parseval) + " (< 1e-6)"};
}

Outcome c3_gradients() {
    Stopwatch clock;
    ModelSpec tiny;
    tiny.blocks = {{4, 3, 2}, {4, 3, 2}};
    tiny.embed_dim = 8;
    tiny.proj_dim = 6;
    const EmdConfig emd;
    tiny.emd_rows = 2 * (emd.max_imfs + 1);

    SyntheticDatasetSpec d;
    d.samples_per_class_per_snr = 1;
    d.length = 32;
    d.master_seed = 5;
    const auto batch = make_dataset(d);  // B = 4, one record per class

    PretrainConfig pc;
    std::vector<ViewSet> views;
    for (const auto& x : batch) views.push_back(make_view_set(x, emd, 100 + x.id));
    ModelParams pp = init_params(pretrain_model_spec(tiny, pc), 11);
    jitter_biases(pp, 12);
    const auto con = grad_check_contrastive(tiny, pp, views, pc);

    const ModelSpec cs = classifier_model_spec(tiny, 4);
    ModelParams cp = init_params(cs, 13);
    jitter_biases(cp, 14);
    const auto full = grad_check_finetune(cs, cp, batch, false);
    const auto frozen = grad_check_finetune(cs, cp, batch, true);

    const double t = clock.seconds();
    const double worst = std::max({con.max_rel_error, full.max_rel_error, frozen.max_rel_error});
    return {worst < 1e-3 && t < 300.0,
            "contrastive " + fmt(con.max_rel_error) + " over " + std::to_string(con.checked) + ", finetune " +
                fmt(full.max_rel_error) + " over " + std::to_string(full.checked) + ", frozen " +
                fmt(frozen.max_rel_error) + " (< 1e-3); " + fmt(t) + " s (< 300 s)"};
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.data) v = g(rng);
    return t;
}

Outcome c4_loss_identities() {
    std::vector<std::string> notes;
    bool ok = true;
    auto check = [&](const std::string& name, double got, double want, bool exact) {
        const double err = std::abs(got - want);
        const bool pass = exact ? got == want : err < 1e-9;
        ok = ok && pass;
        notes.push_back(name + " " + fmt(err));
    };

    const Tensor a1 = random_matrix(1, 6, 1), o1 = random_matrix(1, 6, 2);
    check("B=1", info_nce(a1, o1, 0.1).loss, 0.0, true);

    const std::size_t B = 7;
    Tensor same = Tensor::matrix(B, 6);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < 6; ++j) same.at(i, j) = 1.0 + j;
    check("uniform", info_nce(same, same, 0.1).loss, std::log(static_cast<double>(B)), false);

    const int C = 5;
    Tensor logits = Tensor::vector(C, 0.3);
    check("ce", softmax_cross_entropy(logits, 2).loss, std::log(static_cast<double>(C)), false);

    EmbeddingBatch eb;
    eb.z_raw = random_matrix(B, 6, 3);
    std::uint64_t seed = 4;
    for (Branch b : kViewBranches) eb.z[b] = random_matrix(B, 6, seed++);
    PretrainConfig all;
    double parts = 0.0;
    for (Branch b : kViewBranches) {
        PretrainConfig one;
        one.enabled_branches = {b};
        parts += total_loss(eb, one).total;
    }
    const double whole = total_loss(eb, all).total;
    check("additivity", whole, parts, false);

    std::vector<std::size_t> perm(B);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    EmbeddingBatch pb;
    auto permute = [&](const Tensor& t) {
        Tensor out = t;
        for (std::size_t i = 0; i < B; ++i)
            std::copy(t.row(perm[i]).begin(), t.row(perm[i]).end(), out.row(i).begin());
        return out;
    };
    pb.z_raw = permute(eb.z_raw);
    for (const auto& [b, t] : eb.z) pb.z[b] = permute(t);
    check("permutation", total_loss(pb, all).total, whole, false);

    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
    return {ok, detail + " (B=1 exact, others < 1e-9)"};
}

struct SeedRun {
    ModelParams params;
    double first_epoch_loss = 0.0;
    double last_epoch_loss = 0.0;
};

// Pretrained encoders of criterion 5, reused by criterion 6.
struct LearningSetup {
    std::vector<IqSignal> train, test;
    std::vector<SeedRun> runs;
    double pretrain_seconds = 0.0;
};

LearningSetup pretrain_desk_models() {
    LearningSetup s;
    s.train = make_dataset(desk_dataset(500));
    SyntheticDatasetSpec t = desk_dataset(100);
    t.master_seed = test_split_seed(t.master_seed);
    s.test = make_dataset(t);
    Stopwatch clock;
    for (int k = 0; k < kSeeds; ++k) {
        PretrainConfig pc;
        pc.epochs = 40;
        pc.seed = 1 + k;
        pc.checkpoint_every = 0;
        const PretrainResult r = pretrain(s.train, pc, default_encoder(), EmdConfig{});
        s.runs.push_back({r.params, r.log.epochs.front().total, r.log.epochs.back().total});
        std::cout << "  pretrain seed " << pc.seed << ": epoch 1 loss " << fmt(r.log.epochs.front().total, 5)
                  << ", epoch 40 loss " << fmt(r.log.epochs.back().total, 5) << std::endl;
    }
    s.pretrain_seconds = clock.seconds();
    return s;
}

double probe_accuracy(const ModelParams* source, const LearningSetup& s, FinetuneMode mode, double fraction,
                      std::uint64_t seed) {
    const FinetuneConfig f = desk_probe(mode, fraction, seed);
    const auto labelled = sample_label_fraction(s.train, fraction, seed);
    return finetune(source, labelled, s.test, f, default_encoder(), 4).report.overall_accuracy;
}

Outcome c5_learning_signal(const LearningSetup& s) {
    Stopwatch clock;
    bool decreased = true;
    std::vector<double> pre, rnd;
    for (int k = 0; k < kSeeds; ++k) {
        const auto& r = s.runs[k];
        decreased = decreased && r.last_epoch_loss < r.first_epoch_loss;
        pre.push_back(probe_accuracy(&r.params, s, FinetuneMode::LinearEval, 0.1, 1 + k));
        rnd.push_back(probe_accuracy(nullptr, s, FinetuneMode::LinearEval, 0.1, 1 + k));
        std::cout << "  linear eval seed " << 1 + k << ": pretrained " << pct(pre.back()) << ", random "
                  << pct(rnd.back()) << std::endl;
    }
    const double gap = mean(pre) - mean(rnd);
    const double t = s.pretrain_seconds + clock.seconds();
    return {decreased && gap >= 0.10 && mean(pre) >= 0.50,
            std::string("(a) loss decreased on every seed: ") + (decreased ? "yes" : "no") + "; (b) LE gap " +
                fmt(100.0 * gap) + " points (>= 10); (c) pretrained LE " + pct(mean(pre)) + " (>= 50%); " +
                fmt(t) + " s"};
}

Outcome c6_few_shot(const LearningSetup& s) {
    bool ok = true;
    std::string detail;
    for (double fraction : {0.05, 0.2}) {
        std::vector<double> pre, rnd;
        for (int k = 0; k < kSeeds; ++k) {
            pre.push_back(probe_accuracy(&s.runs[k].params, s, FinetuneMode::SslFinetune, fraction, 1 + k));
            rnd.push_back(probe_accuracy(nullptr, s, FinetuneMode::SslFinetune, fraction, 1 + k));
        }
        const double margin = mean(pre) - mean(rnd);
        ok = ok && margin > 0.0;
        detail += (detail.empty() ? "" : "; ") + std::string("fraction ") + fmt(fraction) + ": pretrained " +
                  pct(mean(pre)) + " vs random " + pct(mean(rnd)) + " (margin " + fmt(100.0 * margin) +
                  " points, > 0)";
    }
    return {ok, detail};
}

struct CliCall {
    int code = 0;
    std::string out, err;
};

CliCall run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "eqcl");
    std::ostringstream out, err;
    CliCall c;
    c.code = cli_main(args, out, err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

// Runs the CLI with dir as the working directory so that relative paths in
// the config resolve identically for every run.
CliCall run_cli_in(const fs::path& dir, const std::vector<std::string>& args) {
    const fs::path prev = fs::current_path();
    fs::current_path(dir);
    CliCall c = run_cli(args);
    fs::current_path(prev);
    return c;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    return cells;
}

Outcome c7_ablation(const fs::path& workdir) {
    Stopwatch clock;
    const fs::path dir = workdir / "ablation";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_text(dir / "ablate.ini",
               "[data]\n"
               "samples_per_class_per_snr = 250\n"
               "test_samples_per_class_per_snr = 100\n"
               "[pretrain]\n"
               "epochs = 15\n"
               "batch_size = 64\n"
               "checkpoint_every = 0\n"
               "[finetune]\n"
               "lr = 5e-3\n"
               "epochs = 100\n"
               "batch_size = 16\n"
               "[ablate]\n"
               "seeds = 3\n"
               "ssl_label_fraction = 0.05\n");
    const CliCall gen = run_cli_in(dir, {"gen-data", "ablate.ini"});
    if (gen.code != 0) return {false, "gen-data failed: " + gen.err};
    const CliCall abl = run_cli_in(dir, {"ablate", "ablate.ini"});
    if (abl.code != 0) return {false, "ablate failed: " + abl.err};
    std::cout << abl.out;

    std::ifstream csv(dir / "run/reports/ablation.csv");
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    double best_single = 0.0, all = -1.0, best_single_ssl = 0.0, all_ssl = -1.0;
    while (std::getline(csv, line)) {
        const auto cells = split_csv(line);
        if (cells.size() != 6) return {false, "malformed ablation row: " + line};
        ++rows;
        const int count = std::stoi(cells[0]) + std::stoi(cells[1]) + std::stoi(cells[2]) + std::stoi(cells[3]);
        const double le = std::stod(cells[4]), ssl = std::stod(cells[5]);
        if (count == 1) {
            best_single = std::max(best_single, le);
            best_single_ssl = std::max(best_single_ssl, ssl);
        }
        if (count == 4) {
            all = le;
            all_ssl = ssl;
        }
    }
    const double shortfall = best_single - all;
    return {rows == 7 && shortfall <= 0.02,
            std::to_string(rows) + " subsets; LE all branches " + pct(all) + " vs best single " + pct(best_single) +
                " (shortfall " + fmt(100.0 * shortfall) + " points, <= 2); SSL " + pct(all_ssl) + " vs " +
                pct(best_single_ssl) + " (reported only); " + fmt(clock.seconds()) + " s"};
}

std::map<std::string, std::string> snapshot_files(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream f(e.path(), std::ios::binary);
        std::ostringstream bytes;
        bytes << f.rdbuf();
        files[fs::relative(e.path(), root).string()] = bytes.str();
    }
    return files;
}

Outcome c8_determinism(const fs::path& workdir) {
    const std::string config =
        "[data]\n"
        "samples_per_class_per_snr = 40\n"
        "test_samples_per_class_per_snr = 10\n"
        "length = 64\n"
        "[pretrain]\n"
        "epochs = 3\n"
        "batch_size = 32\n"
        "checkpoint_every = 2\n"
        "log_every_steps = 2\n"
        "[finetune]\n"
        "label_fraction = 0.25\n"
        "epochs = 5\n"
        "batch_size = 16\n"
        "source_checkpoint = run/pretrain.eqsg\n";
    std::vector<std::map<std::string, std::string>> snapshots;
    for (const char* name : {"determinism_a", "determinism_b"}) {
        const fs::path dir = workdir / name;
        fs::remove_all(dir);
        fs::create_directories(dir);
        write_text(dir / "run.ini", config);
        for (const char* cmd : {"gen-data", "pretrain", "finetune", "evaluate"}) {
            const CliCall c = run_cli_in(dir, {cmd, "run.ini"});
            if (c.code != 0) return {false, std::string(cmd) + " failed in " + name + ": " + c.err};
        }
        snapshots.push_back(snapshot_files(dir));
    }
    std::set<std::string> names;
    for (const auto& s : snapshots)
        for (const auto& [n, bytes] : s) names.insert(n);
    std::vector<std::string> differing;
    for (const auto& n : names) {
        auto a = snapshots[0].find(n), b = snapshots[1].find(n);
        if (a == snapshots[0].end() || b == snapshots[1].end() || a->second != b->second) differing.push_back(n);
    }
    std::string detail = std::to_string(names.size()) + " files compared";
    for (const auto& n : differing) detail += "; differs: " + n;
    return {differing.empty() && names.size() > 5, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eqcl acceptance suite"};
    std::string workdir = "acceptance_work";
    std::vector<int> only;
    app.add_option("--workdir", workdir, "scratch directory for datasets and reports");
    app.add_option("--only", only, "run the listed criteria only")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(workdir);
    const fs::path work = fs::absolute(workdir);

    auto selected = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    int failures = 0;
    auto report = [&](int n, const Outcome& o) {
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
        if (!o.pass) ++failures;
    };

    if (selected(1)) report(1, c1_transform_audit());
    if (selected(2)) report(2, c2_dft_oracle());
    if (selected(3)) report(3, c3_gradients());
    if (selected(4)) report(4, c4_loss_identities());
    if (selected(5) || selected(6)) {
        const LearningSetup setup = pretrain_desk_models();
        if (selected(5)) report(5, c5_learning_signal(setup));
        if (selected(6)) report(6, c6_few_shot(setup));
    }
    if (selected(7)) report(7, c7_ablation(work));
    if (selected(8)) report(8, c8_determinism(work));
    return failures == 0 ? 0 : 1;
}
