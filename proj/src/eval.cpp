#include "eqcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eqcl/errors.hpp"
#include "eqcl/seed.hpp"
#include "eqcl/views.hpp"

namespace eqcl {

std::string_view finetune_mode_name(FinetuneMode m) {
    return m == FinetuneMode::LinearEval ? "linear_eval" : "ssl_finetune";
}

FinetuneMode parse_finetune_mode(std::string_view s) {
    if (s == "linear_eval") return FinetuneMode::LinearEval;
    if (s == "ssl_finetune") return FinetuneMode::SslFinetune;
    throw InvalidParameter("unknown finetune mode '" + std::string(s) + "'");
}

void FinetuneConfig::validate() const {
    if (!(label_fraction > 0.0 && label_fraction <= 1.0))
        throw InvalidParameter("finetune: label_fraction must lie in (0, 1]");
    if (!(lr > 0.0)) throw InvalidParameter("finetune: lr must be positive");
    if (epochs < 0) throw InvalidParameter("finetune: epochs must be >= 0");
    if (batch_size < 1) throw InvalidParameter("finetune: batch_size must be >= 1");
}

std::vector<IqSignal> sample_label_fraction(const std::vector<IqSignal>& dataset, double fraction,
                                            std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InvalidParameter("sample_label_fraction: fraction must lie in (0, 1]");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset[i].label) throw InvalidParameter("sample_label_fraction: record " + std::to_string(i) + " is unlabeled");
        by_class[*dataset[i].label].push_back(i);
    }
    if (fraction == 1.0) return dataset;

    std::vector<std::size_t> chosen;
    for (auto& [cls, idx] : by_class) {
        const double want = fraction * static_cast<double>(idx.size());
        if (want < 1.0 - 1e-9)
            throw InfeasibleFraction("label fraction " + std::to_string(fraction) + " selects no samples of class " +
                                         std::to_string(cls) + " (" + std::to_string(idx.size()) + " available)",
                                     cls);
        const auto k = static_cast<std::size_t>(std::ceil(want - 1e-9));
        std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
        std::shuffle(idx.begin(), idx.end(), rng);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<IqSignal> out;
    out.reserve(chosen.size());
    for (auto i : chosen) out.push_back(dataset[i]);
    return out;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, int label) {
    const std::size_t c = logits.size();
    if (label < 0 || static_cast<std::size_t>(label) >= c)
        throw InvalidParameter("cross entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(c) + ")");
    const double m = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (double l : logits.data) z += std::exp(l - m);
    CrossEntropy out;
    out.loss = m + std::log(z) - logits.data[static_cast<std::size_t>(label)];
    out.grad_logits = Tensor::vector(c);
    for (std::size_t k = 0; k < c; ++k)
        out.grad_logits.data[k] = std::exp(logits.data[k] - m) / z - (static_cast<int>(k) == label ? 1.0 : 0.0);
    return out;
}

ModelSpec classifier_model_spec(const ModelSpec& base, int num_classes) {
    ModelSpec s = base;
    s.view_branches.clear();
    s.projectors = false;
    s.num_classes = num_classes;
    return s;
}

ModelParams classifier_params(const ModelParams* checkpoint, const ModelSpec& spec, int num_classes,
                              std::uint64_t seed) {
    if (num_classes < 1) throw ConfigError("classifier needs at least one class");
    const ModelSpec cs = classifier_model_spec(spec, num_classes);
    ModelParams p = init_params(cs, seed);
    if (!checkpoint) return p;

    if (auto it = checkpoint->entries.find(std::string(kClassifierPrefix) + ".w");
        it != checkpoint->entries.end() && it->second.rows() != static_cast<std::size_t>(num_classes))
        throw ConfigError("checkpoint classifier has " + std::to_string(it->second.rows()) +
                          " classes but the data has " + std::to_string(num_classes));

    const std::string prefix = encoder_prefix(Branch::Raw) + ".";
    for (auto& [name, t] : p.entries) {
        if (name.compare(0, prefix.size(), prefix) != 0) continue;
        auto it = checkpoint->entries.find(name);
        if (it == checkpoint->entries.end()) throw ConfigError("checkpoint lacks raw-encoder parameter '" + name + "'");
        if (!it->second.same_shape(t))
            throw ConfigError("checkpoint parameter '" + name + "' has shape " + it->second.shape_string() +
                              ", model expects " + t.shape_string());
        t = it->second;
    }
    return p;
}

std::vector<Tensor> encoder_inputs(const std::vector<IqSignal>& data) {
    std::vector<Tensor> out;
    out.reserve(data.size());
    for (const auto& x : data) out.push_back(standardize_view(iq_tensor(x)));
    return out;
}

double classifier_batch_loss(const ModelSpec& spec, const ModelParams& params, const std::vector<Tensor>& inputs,
                             const std::vector<int>& labels, bool freeze_encoder, GradMap* grads) {
    if (inputs.size() != labels.size() || inputs.empty()) throw ShapeError("classifier batch: bad sizes");
    const EncoderSpec enc = spec.encoder(Branch::Raw);
    const std::string ep = encoder_prefix(Branch::Raw);
    const double inv = 1.0 / static_cast<double>(inputs.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto [z, cache] = encoder_forward(enc, params, ep, inputs[i]);
        const Tensor logits = linear_forward(params, kClassifierPrefix, z);
        CrossEntropy ce = softmax_cross_entropy(logits, labels[i]);
        loss += ce.loss * inv;
        if (!grads) continue;
        for (double& g : ce.grad_logits.data) g *= inv;
        const Tensor gz = linear_backward(params, kClassifierPrefix, z, ce.grad_logits, *grads);
        if (!freeze_encoder) encoder_backward(enc, params, ep, cache, gz, *grads);
    }
    return loss;
}

std::vector<int> predict(const ModelSpec& spec, const ModelParams& params, const std::vector<Tensor>& inputs) {
    const EncoderSpec enc = spec.encoder(Branch::Raw);
    const std::string ep = encoder_prefix(Branch::Raw);
    std::vector<int> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) {
        const Tensor logits = linear_forward(params, kClassifierPrefix, encoder_forward(enc, params, ep, x).first);
        out.push_back(static_cast<int>(std::max_element(logits.data.begin(), logits.data.end()) - logits.data.begin()));
    }
    return out;
}

EvalReport build_report(const std::vector<IqSignal>& test, const std::vector<int>& predicted, int num_classes) {
    if (test.size() != predicted.size()) throw ShapeError("build_report: prediction count mismatch");
    const auto c = static_cast<std::size_t>(num_classes);
    EvalReport r;
    r.confusion.assign(c, std::vector<std::uint64_t>(c, 0));
    std::map<double, std::uint64_t> snr_hits;
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test[i].label) throw InvalidParameter("evaluate: test record " + std::to_string(i) + " is unlabeled");
        const int y = *test[i].label;
        if (y < 0 || y >= num_classes) throw ConfigError("evaluate: label " + std::to_string(y) + " out of range");
        const bool ok = predicted[i] == y;
        ++r.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(predicted[i])];
        hits += ok;
        const double snr = test[i].snr_db.value_or(std::numeric_limits<double>::quiet_NaN());
        if (!std::isnan(snr)) {
            ++r.per_snr_count[snr];
            snr_hits[snr] += ok;
        }
    }
    r.total = test.size();
    r.overall_accuracy = test.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test.size());
    for (auto [snr, n] : r.per_snr_count) r.per_snr[snr] = static_cast<double>(snr_hits[snr]) / static_cast<double>(n);
    for (std::size_t k = 0; k < c; ++k) {
        const auto n = std::accumulate(r.confusion[k].begin(), r.confusion[k].end(), std::uint64_t{0});
        if (n > 0) r.per_class[static_cast<int>(k)] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(n);
    }
    return r;
}

EvalReport evaluate(const ModelSpec& spec, const ModelParams& params, const std::vector<IqSignal>& test,
                    int num_classes) {
    return build_report(test, predict(spec, params, encoder_inputs(test)), num_classes);
}

FinetuneResult finetune(const ModelParams* checkpoint, const std::vector<IqSignal>& labeled,
                        const std::vector<IqSignal>& test, const FinetuneConfig& cfg, const ModelSpec& base,
                        int num_classes) {
    cfg.validate();
    if (labeled.empty()) throw InvalidParameter("finetune: no labeled records");
    const ModelSpec spec = classifier_model_spec(base, num_classes);
    spec.encoder(Branch::Raw).check_length(labeled.front().length());

    FinetuneResult out;
    out.params = classifier_params(checkpoint, spec, num_classes, derive_seed(cfg.seed, {0xc1f}));
    ModelParams& params = out.params;
    const bool frozen = cfg.frozen();

    const std::vector<Tensor> inputs = encoder_inputs(labeled);
    std::vector<int> labels;
    for (const auto& x : labeled) {
        if (!x.label || *x.label < 0 || *x.label >= num_classes)
            throw ConfigError("finetune: record label outside the configured " + std::to_string(num_classes) + " classes");
        labels.push_back(*x.label);
    }

    // A frozen encoder maps each record to a fixed embedding; compute it once.
    std::vector<Tensor> embeddings;
    if (frozen) {
        const EncoderSpec enc = spec.encoder(Branch::Raw);
        for (const auto& x : inputs) embeddings.push_back(encoder_forward(enc, params, encoder_prefix(Branch::Raw), x).first);
    }

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, {0xf7, static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            GradMap grads;
            if (frozen) {
                const double inv = 1.0 / static_cast<double>(end - start);
                for (std::size_t k = start; k < end; ++k) {
                    const Tensor& z = embeddings[order[k]];
                    CrossEntropy ce = softmax_cross_entropy(linear_forward(params, kClassifierPrefix, z), labels[order[k]]);
                    for (double& g : ce.grad_logits.data) g *= inv;
                    linear_backward(params, kClassifierPrefix, z, ce.grad_logits, grads);
                }
            } else {
                std::vector<Tensor> bx;
                std::vector<int> by;
                for (std::size_t k = start; k < end; ++k) {
                    bx.push_back(inputs[order[k]]);
                    by.push_back(labels[order[k]]);
                }
                classifier_batch_loss(spec, params, bx, by, false, &grads);
            }
            adam_step(params, grads, cfg.lr);
        }
    }

    out.report = evaluate(spec, params, test, num_classes);
    return out;
}

std::vector<IqSignal> adapt_length(const std::vector<IqSignal>& data, std::size_t length) {
    std::vector<IqSignal> out = data;
    for (auto& x : out) {
        const std::size_t n = x.samples.size();
        if (n == length) continue;
        std::vector<cplx> s(length, cplx{0.0, 0.0});
        if (n > length) {
            const std::size_t off = (n - length) / 2;
            std::copy_n(x.samples.begin() + static_cast<std::ptrdiff_t>(off), length, s.begin());
        } else {
            const std::size_t off = (length - n) / 2;
            std::copy(x.samples.begin(), x.samples.end(), s.begin() + static_cast<std::ptrdiff_t>(off));
        }
        x.samples = std::move(s);
    }
    return out;
}

TransferResult transfer_eval(const ModelParams& source, std::size_t source_length,
                             const std::vector<IqSignal>& target_train, const std::vector<IqSignal>& target_test,
                             const FinetuneConfig& le_cfg, const FinetuneConfig& ssl_cfg, const ModelSpec& spec,
                             int num_classes, LengthAdapter adapter) {
    auto check = [&](const std::vector<IqSignal>& d, const char* which) {
        for (const auto& x : d)
            if (x.length() != source_length) {
                if (adapter == LengthAdapter::None)
                    throw ShapeError(std::string("transfer: ") + which + " records have length " +
                                     std::to_string(x.length()) + " but the source encoder was trained on " +
                                     std::to_string(source_length));
                return adapt_length(d, source_length);
            }
        return d;
    };
    const auto train = check(target_train, "target train");
    const auto test = check(target_test, "target test");

    FinetuneConfig le = le_cfg;
    le.mode = FinetuneMode::LinearEval;
    FinetuneConfig ssl = ssl_cfg;
    ssl.mode = FinetuneMode::SslFinetune;

    TransferResult r;
    r.linear_eval = finetune(&source, sample_label_fraction(train, le.label_fraction, le.seed), test, le, spec, num_classes).report;
    r.ssl = finetune(&source, sample_label_fraction(train, ssl.label_fraction, ssl.seed), test, ssl, spec, num_classes).report;
    return r;
}

std::vector<IqSignal> concat_datasets(const std::vector<std::vector<IqSignal>>& parts) {
    std::vector<IqSignal> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
    return out;
}

}  // namespace eqcl
