#include "eqcl/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "eqcl/errors.hpp"

namespace eqcl::io {

namespace {

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
    void f32(double v) { le(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str16(const std::string& s) {
        if (s.size() > 0xffff) throw InvalidParameter("string too long for u16 length prefix: " + s.substr(0, 32));
        le(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& b, const char* what) : b_(b), what_(what) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(le<std::uint32_t>())); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::string str16() { return str(le<std::uint16_t>()); }
    void magic(const char (&m)[5]) {
        const std::size_t at = pos_;
        if (str(4) != std::string(m, 4)) throw FormatError(std::string(what_) + ": bad magic, expected " + m, at);
    }
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n)
            throw FormatError(std::string(what_) + ": truncated, field at offset " + std::to_string(pos_) + " needs " +
                                  std::to_string(n) + " bytes but the data ends",
                              b_.size());
    }
    void expect_end() const {
        if (pos_ != b_.size()) throw FormatError(std::string(what_) + ": trailing bytes after payload", pos_);
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& b_;
    const char* what_;
    std::size_t pos_ = 0;
};

constexpr std::uint32_t kFlagLabels = 1u;
constexpr std::uint32_t kFlagSnr = 2u;
constexpr std::uint16_t kNoLabel = 0xffff;

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
    const std::size_t n = ds.records.size();
    const bool labelled = n > 0 && ds.records.front().label.has_value();
    const bool has_snr = n > 0 && ds.records.front().snr_db.has_value();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = ds.records[i];
        if (r.length() != ds.length)
            throw InvalidParameter("write_dataset: record " + std::to_string(i) + " has length " +
                                   std::to_string(r.length()) + ", dataset length is " + std::to_string(ds.length));
        if (r.label.has_value() != labelled || r.snr_db.has_value() != has_snr)
            throw InvalidParameter("write_dataset: record " + std::to_string(i) + " is inconsistently annotated");
        if (r.label && (*r.label < 0 || static_cast<std::size_t>(*r.label) >= ds.class_names.size()))
            throw InvalidParameter("write_dataset: record " + std::to_string(i) + " label outside the class table");
    }

    ByteWriter w;
    w.raw("EQDS", 4);
    w.le<std::uint32_t>(kDatasetVersion);
    w.le(static_cast<std::uint32_t>(n));
    w.le(static_cast<std::uint32_t>(ds.length));
    w.le(static_cast<std::uint32_t>(ds.class_names.size()));
    w.le<std::uint32_t>((labelled ? kFlagLabels : 0u) | (has_snr ? kFlagSnr : 0u));
    for (const auto& r : ds.records) {
        w.le<std::uint16_t>(r.label ? static_cast<std::uint16_t>(*r.label) : kNoLabel);
        w.f32(r.snr_db.value_or(std::numeric_limits<double>::quiet_NaN()));
        for (auto v : r.samples) {
            w.f32(v.real());
            w.f32(v.imag());
        }
    }
    for (const auto& name : ds.class_names) w.str16(name);
    return std::move(w.bytes());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "dataset");
    r.magic("EQDS");
    const std::size_t vpos = r.pos();
    const auto version = r.le<std::uint32_t>();
    if (version != kDatasetVersion)
        throw FormatError("dataset: unsupported version " + std::to_string(version), vpos);
    const auto count = r.le<std::uint32_t>();
    const auto length = r.le<std::uint32_t>();
    const auto classes = r.le<std::uint32_t>();
    const std::size_t fpos = r.pos();
    const auto flags = r.le<std::uint32_t>();
    if (flags & ~(kFlagLabels | kFlagSnr)) throw FormatError("dataset: unknown flag bits", fpos);

    const std::uint64_t record_bytes = 2 + 4 + 8ull * length;
    if (record_bytes * count > r.remaining())
        throw FormatError("dataset: truncated, header announces " + std::to_string(count) + " records of " +
                              std::to_string(length) + " samples",
                          bytes.size());

    Dataset ds;
    ds.length = length;
    ds.records.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        IqSignal& x = ds.records[i];
        const std::size_t lpos = r.pos();
        const auto label = r.le<std::uint16_t>();
        const double snr = r.f32();
        if (flags & kFlagLabels) {
            if (label >= classes) throw FormatError("dataset: label outside the class table", lpos);
            x.label = label;
        }
        if (flags & kFlagSnr) x.snr_db = snr;
        x.samples.resize(length);
        for (auto& v : x.samples) {
            const double re = r.f32();
            const double im = r.f32();
            v = {re, im};
        }
        x.id = i;
    }
    for (std::uint32_t c = 0; c < classes; ++c) ds.class_names.push_back(r.str16());
    r.expect_end();
    return ds;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open '" + tmp.string() + "' for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) { write_file_atomic(path, encode_dataset(ds)); }

Dataset read_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("dataset file '" + path.string() + "' does not exist");
    return decode_dataset(read_file(path));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    std::map<std::string, Tensor> all;
    for (const auto& [name, t] : ckpt.params.entries) all[name] = t;
    for (const auto& [name, t] : ckpt.params.adam_m) all["adam1/" + name] = t;
    for (const auto& [name, t] : ckpt.params.adam_v) all["adam2/" + name] = t;
    all["meta/step"] = Tensor::vector(1, static_cast<double>(ckpt.params.step_count));
    for (const auto& [key, v] : ckpt.meta) all["meta/" + key] = Tensor::vector(1, v);

    ByteWriter w;
    w.raw("EQSG", 4);
    w.le<std::uint32_t>(kCheckpointVersion);
    w.le(static_cast<std::uint32_t>(all.size()));
    for (const auto& [name, t] : all) {
        w.str16(name);
        if (t.rank() > 255) throw InvalidParameter("checkpoint: rank too large for '" + name + "'");
        w.le(static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.shape) w.le(static_cast<std::uint32_t>(d));
        for (double v : t.data) w.f32(v);
    }
    return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "checkpoint");
    r.magic("EQSG");
    const std::size_t vpos = r.pos();
    const auto version = r.le<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version), vpos);
    const auto count = r.le<std::uint32_t>();

    Checkpoint ck;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::string name = r.str16();
        const auto rank = r.le<std::uint8_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = r.le<std::uint32_t>();
        const std::size_t n = shape_product(shape);
        r.need(4 * n);
        Tensor t(shape);
        for (double& v : t.data) v = r.f32();

        if (name == "meta/step") {
            ck.params.step_count = t.empty() ? 0 : static_cast<std::uint64_t>(t.data[0]);
        } else if (name.rfind("meta/", 0) == 0) {
            ck.meta[name.substr(5)] = t.empty() ? 0.0 : t.data[0];
        } else if (name.rfind("adam1/", 0) == 0) {
            ck.params.adam_m[name.substr(6)] = std::move(t);
        } else if (name.rfind("adam2/", 0) == 0) {
            ck.params.adam_v[name.substr(6)] = std::move(t);
        } else {
            ck.params.entries[name] = std::move(t);
        }
    }
    r.expect_end();
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("checkpoint file '" + path.string() + "' does not exist");
    return decode_checkpoint(read_file(path));
}

std::string pretrain_log_csv(const std::vector<LossRecord>& rows) {
    std::ostringstream os;
    os << "epoch,step,lr,total_loss,loss_ta,loss_ap,loss_fft,loss_emd\n";
    for (const auto& r : rows) {
        os << r.epoch << ',' << r.step << ',' << fmt_double(r.lr) << ',' << fmt_double(r.total);
        for (Branch b : kViewBranches) {
            os << ',';
            if (auto it = r.per_branch.find(b); it != r.per_branch.end()) os << fmt_double(it->second);
        }
        os << '\n';
    }
    return os.str();
}

std::string report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["config_hash"] = r.config_hash;
    j["overall_accuracy"] = r.overall_accuracy;
    j["total"] = r.total;
    j["class_names"] = r.class_names;
    auto& snr = j["per_snr"] = nlohmann::ordered_json::array();
    for (auto [s, acc] : r.per_snr) snr.push_back({{"snr_db", s}, {"accuracy", acc}, {"count", r.per_snr_count.at(s)}});
    auto& pc = j["per_class"] = nlohmann::ordered_json::array();
    for (auto [c, acc] : r.per_class) {
        const auto idx = static_cast<std::size_t>(c);
        pc.push_back({{"class", idx < r.class_names.size() ? r.class_names[idx] : std::to_string(c)},
                      {"index", c},
                      {"accuracy", acc}});
    }
    j["confusion"] = r.confusion;
    return j.dump(2) + "\n";
}

std::string report_snr_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "snr_db,accuracy\n";
    for (auto [s, acc] : r.per_snr) os << fmt_double(s) << ',' << fmt_double(acc) << '\n';
    return os.str();
}

std::string report_confusion_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "true\\predicted";
    for (std::size_t c = 0; c < r.confusion.size(); ++c)
        os << ',' << (c < r.class_names.size() ? r.class_names[c] : std::to_string(c));
    os << '\n';
    for (std::size_t t = 0; t < r.confusion.size(); ++t) {
        os << (t < r.class_names.size() ? r.class_names[t] : std::to_string(t));
        for (auto n : r.confusion[t]) os << ',' << n;
        os << '\n';
    }
    return os.str();
}

void write_report(const std::filesystem::path& dir, const std::string& stem, const EvalReport& r) {
    write_file_atomic(dir / (stem + ".json"), report_json(r));
    write_file_atomic(dir / (stem + "_snr.csv"), report_snr_csv(r));
    write_file_atomic(dir / (stem + "_confusion.csv"), report_confusion_csv(r));
}

}  // namespace eqcl::io
