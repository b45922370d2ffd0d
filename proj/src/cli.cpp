#include "eqcl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "eqcl/config.hpp"
#include "eqcl/contrastive.hpp"
#include "eqcl/errors.hpp"
#include "eqcl/eval.hpp"
#include "eqcl/io.hpp"
#include "eqcl/views.hpp"

namespace eqcl {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string dataset, test_dataset, checkpoint, report_dir;
};

void add_overrides(CLI::App* sub, Overrides& o) {
    sub->add_option("--seed", o.seed, "override the seed of this stage");
    sub->add_option("--dataset", o.dataset, "override paths.dataset");
    sub->add_option("--test-dataset", o.test_dataset, "override paths.test_dataset");
    sub->add_option("--checkpoint", o.checkpoint, "override paths.checkpoint");
    sub->add_option("--report-dir", o.report_dir, "override paths.report_dir");
}

RunConfig load_run_config(const std::string& path, const Overrides& o, std::ostream& err) {
    LoadedConfig lc = load_config(path);
    for (const auto& d : lc.defaulted) err << "config: default " << d << '\n';
    RunConfig& c = lc.config;
    if (!o.dataset.empty()) c.paths.dataset = o.dataset;
    if (!o.test_dataset.empty()) c.paths.test_dataset = o.test_dataset;
    if (!o.checkpoint.empty()) c.paths.checkpoint = o.checkpoint;
    if (!o.report_dir.empty()) c.paths.report_dir = o.report_dir;
    return c;
}

std::vector<IqSignal> require_records(const io::Dataset& ds, const std::string& path) {
    if (ds.records.empty()) throw Error("dataset '" + path + "' is empty");
    return ds.records;
}

io::Checkpoint make_checkpoint(const ModelParams& p, std::size_t length) {
    io::Checkpoint ck;
    ck.params = p;
    ck.meta["length"] = static_cast<double>(length);
    return ck;
}

ModelSpec model_spec(const RunConfig& c) {
    ModelSpec s = c.model;
    s.emd_rows = static_cast<int>(2 * c.emd.rows_per_channel());
    return s;
}

std::string fmt_pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
}

int cmd_gen_data(const RunConfig& c, const Overrides& o, std::ostream& out) {
    SyntheticDatasetSpec spec = c.data;
    if (o.seed) spec.master_seed = *o.seed;
    io::Dataset train{make_dataset(spec), spec.classes, spec.length};
    SyntheticDatasetSpec test_spec = spec;
    test_spec.master_seed = test_split_seed(spec.master_seed);
    test_spec.samples_per_class_per_snr = c.test_samples_per_class_per_snr;
    io::Dataset test{make_dataset(test_spec), spec.classes, spec.length};
    io::write_dataset(c.paths.dataset, train);
    io::write_dataset(c.paths.test_dataset, test);
    out << "wrote " << train.records.size() << " training records to " << c.paths.dataset << '\n';
    out << "wrote " << test.records.size() << " test records to " << c.paths.test_dataset << '\n';
    return kExitOk;
}

int cmd_verify(const std::string& path, std::size_t max_records, const EmdConfig& emd, std::ostream& out) {
    const io::Dataset ds = io::read_dataset(path);
    const std::size_t n = std::min(max_records, ds.records.size());
    double err_ta = 0, err_ap = 0, err_fft = 0, err_emd = 0, emd_blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const ViewSet v = make_view_set(ds.records[i], emd, i);
        err_ta = std::max(err_ta, max_abs_diff(time_augment_inverse(v.ta, v.ta_params), v.raw));
        err_ap = std::max(err_ap, max_abs_diff(amp_phase_inverse(v.ap), v.raw));
        err_fft = std::max(err_fft, max_abs_diff(idft(v.fft), v.raw));
        const double e = max_abs_diff(emd_view_inverse(v.emd, emd), v.raw);
        err_emd = std::max(err_emd, e);
        emd_blocks = std::max(emd_blocks, e);
    }
    constexpr double kTol = 1e-5;
    out << "transform  records  max_abs_error  status\n";
    bool ok = true;
    auto row = [&](const char* name, double e, double tol) {
        const bool pass = e < tol;
        ok = ok && pass;
        out << std::left << std::setw(11) << name << std::setw(9) << n << std::setw(15) << std::scientific
            << std::setprecision(3) << e << (pass ? "PASS" : "FAIL") << '\n';
    };
    row("ta", err_ta, kTol);
    row("ap", err_ap, kTol);
    row("fft", err_fft, kTol);
    row("emd", err_emd, kTol);
    row("emd-block", emd_blocks, 1e-6);
    return ok ? kExitOk : kExitRuntime;
}

PretrainResult run_pretrain(const RunConfig& c, const std::vector<IqSignal>& data, std::ostream& out) {
    const fs::path ckpt = c.paths.checkpoint;
    const std::size_t length = data.front().length();
    PretrainHooks hooks;
    hooks.on_epoch = [&](const LossRecord& r) {
        out << "epoch " << r.epoch << "  lr " << r.lr << "  loss " << r.total;
        for (auto [b, v] : r.per_branch) out << "  " << branch_name(b) << ' ' << v;
        out << '\n';
    };
    hooks.checkpoint = [&](const ModelParams& p, int epoch) {
        fs::path target = ckpt;
        if (epoch != c.pretrain.epochs) target += ".epoch" + std::to_string(epoch);
        io::write_checkpoint(target, make_checkpoint(p, length));
    };
    PretrainResult r = pretrain(data, c.pretrain, model_spec(c), c.emd, hooks);
    const fs::path dir = c.paths.report_dir;
    io::write_file_atomic(dir / "pretrain_log.csv", io::pretrain_log_csv(r.log.epochs));
    io::write_file_atomic(dir / "pretrain_steps.csv", io::pretrain_log_csv(r.log.snapshots));
    out << "checkpoint written to " << ckpt.string() << '\n';
    return r;
}

int cmd_pretrain(RunConfig c, const Overrides& o, std::ostream& out) {
    if (o.seed) c.pretrain.seed = *o.seed;
    const io::Dataset ds = io::read_dataset(c.paths.dataset);
    run_pretrain(c, require_records(ds, c.paths.dataset), out);
    io::write_file_atomic(fs::path(c.paths.report_dir) / "pretrain_config.ini", save_config(c));
    return kExitOk;
}

const ModelParams* load_source(const std::string& path, std::optional<io::Checkpoint>& holder) {
    if (path.empty() || path == "none") return nullptr;
    holder = io::read_checkpoint(path);
    return &holder->params;
}

int cmd_finetune(RunConfig c, const Overrides& o, std::ostream& out) {
    if (o.seed) c.finetune.seed = *o.seed;
    const io::Dataset train = io::read_dataset(c.paths.dataset);
    const io::Dataset test = io::read_dataset(c.paths.test_dataset);
    const int classes = static_cast<int>(train.class_names.size());
    std::optional<io::Checkpoint> source;
    const ModelParams* init = load_source(c.finetune.source_checkpoint, source);

    const auto labeled = sample_label_fraction(require_records(train, c.paths.dataset), c.finetune.label_fraction,
                                               c.finetune.seed);
    FinetuneResult r = finetune(init, labeled, test.records, c.finetune, model_spec(c), classes);
    r.report.class_names = train.class_names;
    r.report.config_hash = config_hash(c);
    io::write_checkpoint(c.paths.finetuned_checkpoint, make_checkpoint(r.params, train.length));
    io::write_report(c.paths.report_dir, "finetune", r.report);
    out << finetune_mode_name(c.finetune.mode) << " on " << labeled.size() << " labelled records: test accuracy "
        << fmt_pct(r.report.overall_accuracy) << "%\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
    const io::Dataset test = io::read_dataset(c.paths.test_dataset);
    const io::Checkpoint ck = io::read_checkpoint(c.paths.finetuned_checkpoint);
    const int classes = static_cast<int>(test.class_names.size());
    const ModelSpec spec = classifier_model_spec(model_spec(c), classes);
    if (auto it = ck.params.entries.find(std::string(kClassifierPrefix) + ".w");
        it == ck.params.entries.end() || it->second.rows() != static_cast<std::size_t>(classes))
        throw ConfigError("checkpoint '" + c.paths.finetuned_checkpoint + "' has no classifier for " +
                          std::to_string(classes) + " classes");
    EvalReport r = evaluate(spec, ck.params, test.records, classes);
    r.class_names = test.class_names;
    r.config_hash = config_hash(c);
    io::write_report(c.paths.report_dir, "evaluate", r);
    out << "test accuracy " << fmt_pct(r.overall_accuracy) << "% over " << r.total << " records\n";
    for (auto [snr, acc] : r.per_snr) out << "  snr " << snr << " dB: " << fmt_pct(acc) << "%\n";
    return kExitOk;
}

int cmd_transfer(RunConfig c, const Overrides& o, std::ostream& out) {
    if (o.seed) c.pretrain.seed = *o.seed;
    if (c.transfer.source_datasets.empty()) throw ConfigError("transfer.source_datasets is empty");
    std::vector<std::vector<IqSignal>> parts;
    for (const auto& p : c.transfer.source_datasets) parts.push_back(require_records(io::read_dataset(p), p));
    const auto source = concat_datasets(parts);
    const std::size_t source_length = source.front().length();
    for (const auto& x : source)
        if (x.length() != source_length) throw ShapeError("transfer: source datasets differ in record length");

    const PretrainResult pre = run_pretrain(c, source, out);
    const io::Dataset train = io::read_dataset(c.paths.dataset);
    const io::Dataset test = io::read_dataset(c.paths.test_dataset);
    const int classes = static_cast<int>(train.class_names.size());

    FinetuneConfig le = c.finetune, ssl = c.finetune;
    le.label_fraction = c.transfer.le_label_fraction;
    ssl.label_fraction = c.transfer.ssl_label_fraction;
    TransferResult r = transfer_eval(pre.params, source_length, require_records(train, c.paths.dataset), test.records,
                                     le, ssl, model_spec(c), classes, c.transfer.length_adapter);
    for (EvalReport* rep : {&r.linear_eval, &r.ssl}) {
        rep->class_names = train.class_names;
        rep->config_hash = config_hash(c);
    }
    io::write_report(c.paths.report_dir, "transfer_le", r.linear_eval);
    io::write_report(c.paths.report_dir, "transfer_ssl", r.ssl);
    std::ostringstream csv;
    csv << "protocol,accuracy\nLE," << r.linear_eval.overall_accuracy << "\nSSL," << r.ssl.overall_accuracy << '\n';
    io::write_file_atomic(fs::path(c.paths.report_dir) / "transfer.csv", csv.str());
    out << "transfer LE " << fmt_pct(r.linear_eval.overall_accuracy) << "%  SSL "
        << fmt_pct(r.ssl.overall_accuracy) << "%\n";
    return kExitOk;
}

int cmd_ablate(RunConfig c, const Overrides& o, std::ostream& out) {
    if (o.seed) c.pretrain.seed = *o.seed;
    if (c.ablate.seeds < 1) throw ConfigError("ablate.seeds must be >= 1");
    const io::Dataset train = io::read_dataset(c.paths.dataset);
    const io::Dataset test = io::read_dataset(c.paths.test_dataset);
    const auto records = require_records(train, c.paths.dataset);
    const int classes = static_cast<int>(train.class_names.size());
    const ModelSpec spec = model_spec(c);

    std::ostringstream csv;
    csv << "ta,ap,fft,emd,le_accuracy,ssl_accuracy\n";
    out << "ta  ap  fft emd  LE%     SSL%\n";
    for (const auto& subset : ablation_subsets(c.pretrain.enabled_branches)) {
        double le_sum = 0.0, ssl_sum = 0.0;
        for (int s = 0; s < c.ablate.seeds; ++s) {
            PretrainConfig pc = c.pretrain;
            pc.enabled_branches = subset;
            pc.seed = c.pretrain.seed + static_cast<std::uint64_t>(s);
            const PretrainResult pre = pretrain(records, pc, spec, c.emd);

            FinetuneConfig le = c.finetune, ssl = c.finetune;
            le.mode = FinetuneMode::LinearEval;
            le.label_fraction = 1.0;
            ssl.mode = FinetuneMode::SslFinetune;
            ssl.label_fraction = c.ablate.ssl_label_fraction;
            le.seed = ssl.seed = c.finetune.seed + static_cast<std::uint64_t>(s);
            le_sum += finetune(&pre.params, records, test.records, le, spec, classes).report.overall_accuracy;
            ssl_sum += finetune(&pre.params, sample_label_fraction(records, ssl.label_fraction, ssl.seed),
                                test.records, ssl, spec, classes)
                           .report.overall_accuracy;
        }
        const double le_acc = le_sum / c.ablate.seeds, ssl_acc = ssl_sum / c.ablate.seeds;
        auto has = [&](Branch b) { return std::find(subset.begin(), subset.end(), b) != subset.end(); };
        for (Branch b : kViewBranches) {
            csv << (has(b) ? 1 : 0) << ',';
            out << (has(b) ? "x   " : ".   ");
        }
        csv << le_acc << ',' << ssl_acc << '\n';
        out << std::setw(8) << std::left << fmt_pct(le_acc) << fmt_pct(ssl_acc) << '\n';
    }
    io::write_file_atomic(fs::path(c.paths.report_dir) / "ablation.csv", csv.str());
    return kExitOk;
}

}  // namespace

std::vector<std::vector<Branch>> ablation_subsets(const std::vector<Branch>& enabled) {
    using B = Branch;
    const std::vector<std::vector<Branch>> grid = {
        {B::Ta}, {B::Ap}, {B::Fft}, {B::Emd}, {B::Fft, B::Emd}, {B::Ap, B::Fft, B::Emd}, {B::Ta, B::Ap, B::Fft, B::Emd},
    };
    std::vector<std::vector<Branch>> out;
    for (const auto& s : grid)
        if (std::all_of(s.begin(), s.end(), [&](B b) { return std::find(enabled.begin(), enabled.end(), b) != enabled.end(); }))
            out.push_back(s);
    return out;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Equivalent contrastive learning toolkit for IQ radio signals", "eqcl"};
    bool emit = false;
    app.add_flag("--emit-template", emit, "print a configuration template with every default and exit");
    app.require_subcommand(0, 1);

    std::string config_path, dataset_path;
    std::size_t max_records = 100;
    Overrides ov;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic training and test datasets");
    auto* verify = app.add_subcommand("verify-transforms", "check that every equivalent transform inverts");
    auto* pre = app.add_subcommand("pretrain", "contrastive pretraining");
    auto* fine = app.add_subcommand("finetune", "train a classifier on labelled records");
    auto* evalc = app.add_subcommand("evaluate", "evaluate a fine-tuned checkpoint on the test set");
    auto* transfer = app.add_subcommand("transfer", "pretrain on source datasets, evaluate on a target");
    auto* ablate = app.add_subcommand("ablate", "pretrain and evaluate every branch subset");
    for (auto* sub : {gen, pre, fine, evalc, transfer, ablate}) {
        sub->add_option("config", config_path, "run configuration file")->required();
        add_overrides(sub, ov);
    }
    verify->add_option("dataset", dataset_path, "EQDS dataset")->required();
    verify->add_option("--max-records", max_records, "records to audit");
    verify->add_option("--config", config_path, "configuration providing the EMD settings");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (emit) {
        out << emit_template();
        return kExitOk;
    }
    if (app.get_subcommands().empty()) {
        err << "error: a subcommand is required\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (verify->parsed()) {
            EmdConfig emd;
            if (!config_path.empty()) emd = load_run_config(config_path, ov, err).emd;
            return cmd_verify(dataset_path, max_records, emd, out);
        }
        const RunConfig c = load_run_config(config_path, ov, err);
        if (gen->parsed()) return cmd_gen_data(c, ov, out);
        if (pre->parsed()) return cmd_pretrain(c, ov, out);
        if (fine->parsed()) return cmd_finetune(c, ov, out);
        if (evalc->parsed()) return cmd_evaluate(c, out);
        if (transfer->parsed()) return cmd_transfer(c, ov, out);
        if (ablate->parsed()) return cmd_ablate(c, ov, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace eqcl
