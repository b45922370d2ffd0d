#include "eqcl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "eqcl/errors.hpp"

namespace eqcl {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

double to_double(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InvalidParameter("expected a number, got '" + s + "'");
    return v;
}

template <typename T>
T to_int(const std::string& s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InvalidParameter("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw InvalidParameter("expected true or false, got '" + s + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
    std::string section;
    std::string name;
    std::string doc;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define EQCL_KEY(sec, nm, doc, getter, setter) \
    Key { sec, nm, doc, [](const RunConfig& c) { return getter; }, [](RunConfig& c, const std::string& v) { setter; } }

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = {
        // data
        EQCL_KEY("data", "classes", "modulations, subset of BPSK,QPSK,8PSK,PAM4,QAM16,CPFSK",
                 join(c.data.classes), c.data.classes = split(v, ',')),
        EQCL_KEY("data", "samples_per_class_per_snr", "training records per (class, SNR)",
                 std::to_string(c.data.samples_per_class_per_snr), c.data.samples_per_class_per_snr = to_int<int>(v)),
        EQCL_KEY("data", "test_samples_per_class_per_snr", "records per (class, SNR) in the held-out test draw",
                 std::to_string(c.test_samples_per_class_per_snr), c.test_samples_per_class_per_snr = to_int<int>(v)),
        EQCL_KEY("data", "snr_grid_db", "comma-separated SNR values in dB", [&] {
            std::vector<std::string> s;
            for (double d : c.data.snr_grid_db) s.push_back(fmt(d));
            return join(s);
        }(), {
            c.data.snr_grid_db.clear();
            for (const auto& s : split(v, ',')) c.data.snr_grid_db.push_back(to_double(s));
        }),
        EQCL_KEY("data", "length", "samples per record (L)", std::to_string(c.data.length),
                 c.data.length = to_int<std::size_t>(v)),
        EQCL_KEY("data", "symbol_rate", "samples per symbol (>= 2)", std::to_string(c.data.symbol_rate),
                 c.data.symbol_rate = to_int<int>(v)),
        EQCL_KEY("data", "master_seed", "dataset seed; the test draw uses a seed derived from it",
                 std::to_string(c.data.master_seed), c.data.master_seed = to_int<std::uint64_t>(v)),
        EQCL_KEY("data", "random_phase", "draw a uniform carrier phase offset per record",
                 fmt_bool(c.data.random_phase), c.data.random_phase = to_bool(v)),
        // views
        EQCL_KEY("views", "emd_max_imfs", "IMFs per channel (M)", std::to_string(c.emd.max_imfs),
                 c.emd.max_imfs = to_int<int>(v)),
        EQCL_KEY("views", "emd_sift_sd_threshold", "sifting stops when the SD criterion drops below this",
                 fmt(c.emd.sift_sd_threshold), c.emd.sift_sd_threshold = to_double(v)),
        EQCL_KEY("views", "emd_max_sift_iters", "upper bound on sifting passes per IMF",
                 std::to_string(c.emd.max_sift_iters), c.emd.max_sift_iters = to_int<int>(v)),
        EQCL_KEY("views", "emd_boundary", "extrema mirrored past each end for the envelopes",
                 std::to_string(c.emd.boundary), c.emd.boundary = to_int<int>(v)),
        // model
        EQCL_KEY("model", "conv_blocks", "out_channels:kernel:pool per block", [&] {
            std::vector<std::string> s;
            for (const auto& b : c.model.blocks)
                s.push_back(std::to_string(b.out_channels) + ":" + std::to_string(b.kernel_size) + ":" +
                            std::to_string(b.pool));
            return join(s);
        }(), {
            c.model.blocks.clear();
            for (const auto& s : split(v, ',')) {
                const auto parts = split(s, ':');
                if (parts.size() != 3) throw InvalidParameter("conv block '" + s + "' is not out:kernel:pool");
                c.model.blocks.push_back({to_int<int>(parts[0]), to_int<int>(parts[1]), to_int<int>(parts[2])});
            }
        }),
        EQCL_KEY("model", "embed_dim", "encoder output dimension (d)", std::to_string(c.model.embed_dim),
                 c.model.embed_dim = to_int<int>(v)),
        EQCL_KEY("model", "proj_dim", "projection head output dimension (p)", std::to_string(c.model.proj_dim),
                 c.model.proj_dim = to_int<int>(v)),
        // pretrain
        EQCL_KEY("pretrain", "branches", "enabled contrastive branches, subset of ta,ap,fft,emd", [&] {
            std::vector<std::string> s;
            for (Branch b : c.pretrain.enabled_branches) s.emplace_back(branch_name(b));
            return join(s);
        }(), {
            c.pretrain.enabled_branches.clear();
            for (const auto& s : split(v, ',')) c.pretrain.enabled_branches.push_back(parse_branch(s));
        }),
        EQCL_KEY("pretrain", "temperature", "InfoNCE temperature", fmt(c.pretrain.temperature),
                 c.pretrain.temperature = to_double(v)),
        EQCL_KEY("pretrain", "batch_size", "records per optimizer step", std::to_string(c.pretrain.batch_size),
                 c.pretrain.batch_size = to_int<std::size_t>(v)),
        EQCL_KEY("pretrain", "epochs", "passes over the dataset", std::to_string(c.pretrain.epochs),
                 c.pretrain.epochs = to_int<int>(v)),
        EQCL_KEY("pretrain", "lr", "initial Adam learning rate", fmt(c.pretrain.lr), c.pretrain.lr = to_double(v)),
        EQCL_KEY("pretrain", "lr_decay", "learning-rate multiplier applied every lr_decay_every epochs",
                 fmt(c.pretrain.lr_decay), c.pretrain.lr_decay = to_double(v)),
        EQCL_KEY("pretrain", "lr_decay_every", "epochs between learning-rate decays",
                 std::to_string(c.pretrain.lr_decay_every), c.pretrain.lr_decay_every = to_int<int>(v)),
        EQCL_KEY("pretrain", "seed", "initialization / shuffling / augmentation seed",
                 std::to_string(c.pretrain.seed), c.pretrain.seed = to_int<std::uint64_t>(v)),
        EQCL_KEY("pretrain", "checkpoint_every", "epochs between checkpoints (0: only at the end)",
                 std::to_string(c.pretrain.checkpoint_every), c.pretrain.checkpoint_every = to_int<int>(v)),
        EQCL_KEY("pretrain", "log_every_steps", "optimizer steps between loss snapshots",
                 std::to_string(c.pretrain.log_every_steps), c.pretrain.log_every_steps = to_int<int>(v)),
        // finetune
        EQCL_KEY("finetune", "mode", "linear_eval or ssl_finetune", std::string(finetune_mode_name(c.finetune.mode)),
                 c.finetune.mode = parse_finetune_mode(v)),
        EQCL_KEY("finetune", "label_fraction", "class-balanced fraction of labelled training records",
                 fmt(c.finetune.label_fraction), c.finetune.label_fraction = to_double(v)),
        EQCL_KEY("finetune", "freeze_encoder", "train the classifier only (always true for linear_eval)",
                 fmt_bool(c.finetune.freeze_encoder), c.finetune.freeze_encoder = to_bool(v)),
        EQCL_KEY("finetune", "lr", "constant Adam learning rate", fmt(c.finetune.lr), c.finetune.lr = to_double(v)),
        EQCL_KEY("finetune", "epochs", "passes over the labelled subset", std::to_string(c.finetune.epochs),
                 c.finetune.epochs = to_int<int>(v)),
        EQCL_KEY("finetune", "batch_size", "records per optimizer step", std::to_string(c.finetune.batch_size),
                 c.finetune.batch_size = to_int<std::size_t>(v)),
        EQCL_KEY("finetune", "seed", "label sampling / classifier init / shuffling seed",
                 std::to_string(c.finetune.seed), c.finetune.seed = to_int<std::uint64_t>(v)),
        EQCL_KEY("finetune", "source_checkpoint", "pretrained checkpoint; empty means random initialization",
                 c.finetune.source_checkpoint, c.finetune.source_checkpoint = v),
        // transfer
        EQCL_KEY("transfer", "source_datasets", "comma-separated source dataset paths, joined for pretraining",
                 join(c.transfer.source_datasets), c.transfer.source_datasets = split(v, ',')),
        EQCL_KEY("transfer", "le_label_fraction", "labelled fraction for the linear-evaluation arm",
                 fmt(c.transfer.le_label_fraction), c.transfer.le_label_fraction = to_double(v)),
        EQCL_KEY("transfer", "ssl_label_fraction", "labelled fraction for the fine-tuning arm",
                 fmt(c.transfer.ssl_label_fraction), c.transfer.ssl_label_fraction = to_double(v)),
        EQCL_KEY("transfer", "length_adapter", "none or crop_pad",
                 std::string(c.transfer.length_adapter == LengthAdapter::CropPad ? "crop_pad" : "none"), {
                     if (v == "none") c.transfer.length_adapter = LengthAdapter::None;
                     else if (v == "crop_pad") c.transfer.length_adapter = LengthAdapter::CropPad;
                     else throw InvalidParameter("length_adapter must be none or crop_pad");
                 }),
        // ablate
        EQCL_KEY("ablate", "seeds", "pretraining seeds averaged per branch subset", std::to_string(c.ablate.seeds),
                 c.ablate.seeds = to_int<int>(v)),
        EQCL_KEY("ablate", "ssl_label_fraction", "labelled fraction for the fine-tuning column",
                 fmt(c.ablate.ssl_label_fraction), c.ablate.ssl_label_fraction = to_double(v)),
        // paths
        EQCL_KEY("paths", "dataset", "training dataset (EQDS)", c.paths.dataset, c.paths.dataset = v),
        EQCL_KEY("paths", "test_dataset", "held-out test dataset (EQDS)", c.paths.test_dataset, c.paths.test_dataset = v),
        EQCL_KEY("paths", "checkpoint", "pretraining checkpoint (EQSG)", c.paths.checkpoint, c.paths.checkpoint = v),
        EQCL_KEY("paths", "finetuned_checkpoint", "fine-tuned model checkpoint (EQSG)", c.paths.finetuned_checkpoint,
                 c.paths.finetuned_checkpoint = v),
        EQCL_KEY("paths", "report_dir", "directory for logs and reports", c.paths.report_dir, c.paths.report_dir = v),
    };
    return keys;
}

#undef EQCL_KEY

std::string render(const RunConfig& cfg, bool comments) {
    std::ostringstream os;
    std::string section;
    const RunConfig defaults;
    for (const auto& k : registry()) {
        if (k.section != section) {
            if (!section.empty()) os << '\n';
            section = k.section;
            os << '[' << section << "]\n";
        }
        if (comments) os << "# " << k.doc << " (default: " << k.get(defaults) << ")\n";
        os << k.name << " = " << k.get(cfg) << '\n';
    }
    return os.str();
}

}  // namespace

LoadedConfig parse_config(const std::string& text) {
    LoadedConfig out;
    std::map<std::string, const Key*> by_name;
    std::set<std::string> sections;
    for (const auto& k : registry()) {
        by_name[k.section + "." + k.name] = &k;
        sections.insert(k.section);
    }

    std::set<std::string> seen;
    std::string section;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (!sections.count(section))
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown section '" + section + "'");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": key outside of any [section]");
        const std::string full = section + "." + trim(body.substr(0, eq));
        auto it = by_name.find(full);
        if (it == by_name.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full + "'");
        if (!seen.insert(full).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
        try {
            it->second->set(out.config, trim(body.substr(eq + 1)));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError("config line " + std::to_string(lineno) + " (" + full + "): " + e.what());
        }
    }
    for (const auto& k : registry()) {
        const std::string full = k.section + "." + k.name;
        if (!seen.count(full)) out.defaulted.push_back(full + " = " + k.get(out.config));
    }
    return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string save_config(const RunConfig& cfg) { return render(cfg, false); }

std::string emit_template() { return render(RunConfig{}, true); }

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : save_config(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return s;
}

}  // namespace eqcl
