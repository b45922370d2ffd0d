#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "eqcl/cli.hpp"
#include "eqcl/config.hpp"
#include "eqcl/contrastive.hpp"
#include "eqcl/errors.hpp"
#include "eqcl/eval.hpp"
#include "eqcl/io.hpp"
#include "eqcl/signal.hpp"
#include "eqcl/views.hpp"

namespace py = pybind11;
using namespace eqcl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
    Tensor t = Tensor::matrix(a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), t.data.begin());
    return t;
}

Array to_array(const Tensor& t) {
    Array a({t.rows(), t.cols()});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

ComplexArray samples_of(const std::vector<IqSignal>& records, std::size_t length) {
    ComplexArray a({records.size(), length});
    auto* out = a.mutable_data();
    for (const auto& r : records) out = std::copy(r.samples.begin(), r.samples.end(), out);
    return a;
}

py::dict dataset_dict(const io::Dataset& ds) {
    std::vector<int> labels;
    std::vector<double> snr;
    std::vector<std::uint64_t> ids;
    for (const auto& r : ds.records) {
        labels.push_back(r.label.value_or(-1));
        snr.push_back(r.snr_db.value_or(std::numeric_limits<double>::quiet_NaN()));
        ids.push_back(r.id);
    }
    py::dict d;
    d["iq"] = samples_of(ds.records, ds.length);
    d["labels"] = py::array_t<int>(labels.size(), labels.data());
    d["snr_db"] = py::array_t<double>(snr.size(), snr.data());
    d["ids"] = py::array_t<std::uint64_t>(ids.size(), ids.data());
    d["class_names"] = ds.class_names;
    return d;
}

io::Dataset dataset_from(const ComplexArray& iq, const std::vector<int>& labels, const std::vector<double>& snr_db,
                         const std::vector<std::string>& class_names) {
    if (iq.ndim() != 2) throw ShapeError("iq must be records x length");
    const std::size_t n = iq.shape(0), len = iq.shape(1);
    if (labels.size() != n || snr_db.size() != n) throw ShapeError("labels and snr_db need one entry per record");
    io::Dataset ds;
    ds.class_names = class_names;
    ds.length = len;
    for (std::size_t i = 0; i < n; ++i) {
        IqSignal r;
        r.samples.assign(iq.data() + i * len, iq.data() + (i + 1) * len);
        if (labels[i] >= 0) r.label = labels[i];
        if (!std::isnan(snr_db[i])) r.snr_db = snr_db[i];
        r.id = i;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

EmdConfig emd_config(int max_imfs, double sd, int iters) {
    EmdConfig c;
    c.max_imfs = max_imfs;
    c.sift_sd_threshold = sd;
    c.max_sift_iters = iters;
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Equivalent-transform views, contrastive loss and dataset tools for IQ signals.";

    py::register_exception<Error>(m, "EqclError", PyExc_RuntimeError);

    m.def(
        "make_dataset",
        [](std::vector<std::string> classes, int samples_per_class_per_snr, std::vector<double> snr_grid_db,
           std::size_t length, int symbol_rate, std::uint64_t seed, bool random_phase) {
            SyntheticDatasetSpec s;
            s.classes = std::move(classes);
            s.samples_per_class_per_snr = samples_per_class_per_snr;
            s.snr_grid_db = std::move(snr_grid_db);
            s.length = length;
            s.symbol_rate = symbol_rate;
            s.master_seed = seed;
            s.random_phase = random_phase;
            io::Dataset ds{make_dataset(s), s.classes, length};
            return dataset_dict(ds);
        },
        py::arg("classes") = std::vector<std::string>{"BPSK", "QPSK", "PAM4", "QAM16"},
        py::arg("samples_per_class_per_snr") = 100, py::arg("snr_grid_db") = std::vector<double>{10.0},
        py::arg("length") = 128, py::arg("symbol_rate") = 8, py::arg("seed") = 1, py::arg("random_phase") = false,
        "Synthetic labelled dataset as a dict of numpy arrays.");
    m.def("test_split_seed", &test_split_seed, py::arg("master_seed"));

    m.def(
        "time_augment",
        [](const Array& iq, std::uint64_t seed) {
            auto [ta, p] = time_augment(to_tensor(iq), seed);
            py::dict params;
            params["op"] = p.op == TaOp::Rotate ? "rotate" : "shift";
            params["alpha"] = p.alpha;
            params["shift"] = p.shift;
            return py::make_tuple(to_array(ta), params);
        },
        py::arg("iq"), py::arg("seed"), "Random rotation or cyclic shift of a 2 x L array.");
    m.def(
        "time_augment_inverse",
        [](const Array& ta, const py::dict& params) {
            TaParams p;
            p.op = params["op"].cast<std::string>() == "rotate" ? TaOp::Rotate : TaOp::Shift;
            p.alpha = params["alpha"].cast<double>();
            p.shift = params["shift"].cast<std::size_t>();
            return to_array(time_augment_inverse(to_tensor(ta), p));
        },
        py::arg("ta"), py::arg("params"));
    m.def("amp_phase", [](const Array& iq) { return to_array(amp_phase(to_tensor(iq))); }, py::arg("iq"));
    m.def("amp_phase_inverse", [](const Array& ap) { return to_array(amp_phase_inverse(to_tensor(ap))); },
          py::arg("ap"));
    m.def("dft", [](const Array& iq) { return to_array(dft(to_tensor(iq))); }, py::arg("iq"),
          "Unnormalized DFT; rows are Re and Im.");
    m.def("idft", [](const Array& x) { return to_array(idft(to_tensor(x))); }, py::arg("spectrum"));
    m.def(
        "emd_decompose",
        [](std::vector<double> channel, int max_imfs, double sd, int iters) {
            return emd_decompose(channel, emd_config(max_imfs, sd, iters));
        },
        py::arg("channel"), py::arg("max_imfs") = 4, py::arg("sift_sd_threshold") = 0.3,
        py::arg("max_sift_iters") = 10, "IMFs followed by the residual.");
    m.def(
        "emd_view",
        [](const Array& iq, int max_imfs) { return to_array(emd_view(to_tensor(iq), emd_config(max_imfs, 0.3, 10))); },
        py::arg("iq"), py::arg("max_imfs") = 4);
    m.def(
        "emd_view_inverse",
        [](const Array& e, int max_imfs) {
            return to_array(emd_view_inverse(to_tensor(e), emd_config(max_imfs, 0.3, 10)));
        },
        py::arg("emd"), py::arg("max_imfs") = 4);
    m.def("standardize_view", [](const Array& t) { return to_array(standardize_view(to_tensor(t))); },
          py::arg("view"));

    m.def(
        "info_nce",
        [](const Array& anchor, const Array& other, double tau) {
            const PairLoss l = info_nce(to_tensor(anchor), to_tensor(other), tau);
            return py::make_tuple(l.loss, to_array(l.grad_anchor), to_array(l.grad_other));
        },
        py::arg("anchor"), py::arg("other"), py::arg("tau") = 0.1,
        "Loss and gradients with respect to both embedding batches.");
    m.def(
        "cross_entropy",
        [](std::vector<double> logits, int label) {
            Tensor t = Tensor::vector(logits.size());
            t.data = std::move(logits);
            return softmax_cross_entropy(t, label).loss;
        },
        py::arg("logits"), py::arg("label"));

    m.def("read_dataset", [](const std::string& path) { return dataset_dict(io::read_dataset(path)); },
          py::arg("path"));
    m.def(
        "write_dataset",
        [](const std::string& path, const ComplexArray& iq, const std::vector<int>& labels,
           const std::vector<double>& snr_db, const std::vector<std::string>& class_names) {
            io::write_dataset(path, dataset_from(iq, labels, snr_db, class_names));
        },
        py::arg("path"), py::arg("iq"), py::arg("labels"), py::arg("snr_db"), py::arg("class_names"),
        "Negative labels and NaN SNRs are stored as absent.");

    m.def("config_template", &emit_template);
    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "eqcl");
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli_main(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs an eqcl subcommand in-process; returns (exit code, stdout, stderr).");
}
