#include "eqcl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eqcl/errors.hpp"
#include "eqcl/seed.hpp"

namespace eqcl {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void stack_row(Tensor& dst, std::size_t r, const Tensor& src) {
    std::copy(src.data.begin(), src.data.end(), dst.row(r).begin());
}

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine_sim: length mismatch");
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("cosine_sim: zero-norm embedding");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

PairLoss info_nce(const Tensor& anchor, const Tensor& other, double tau) {
    if (!(tau > 0.0)) throw InvalidParameter("info_nce: temperature must be positive");
    if (anchor.rank() != 2 || !anchor.same_shape(other))
        throw ShapeError("info_nce: anchor " + anchor.shape_string() + " vs other " + other.shape_string());
    const std::size_t B = anchor.rows(), p = anchor.cols();

    // Unit-normalized copies.
    Tensor a_hat = anchor, o_hat = other;
    std::vector<double> na(B), no(B);
    for (std::size_t i = 0; i < B; ++i) {
        na[i] = norm2(anchor.row(i));
        no[i] = norm2(other.row(i));
        if (na[i] == 0.0 || no[i] == 0.0)
            throw DegenerateEmbedding("info_nce: zero-norm embedding in row " + std::to_string(i));
        for (double& v : a_hat.row(i)) v /= na[i];
        for (double& v : o_hat.row(i)) v /= no[i];
    }

    // dL/dS_ij = (softmax_ij - [i == j]) / (B tau), S = cosine similarities.
    Tensor d_sim = Tensor::matrix(B, B);
    std::vector<double> logits(B);
    PairLoss out;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i) {
        const auto ai = a_hat.row(i);
        for (std::size_t j = 0; j < B; ++j) {
            const auto oj = o_hat.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < p; ++k) dot += ai[k] * oj[k];
            logits[j] = dot / tau;
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - m);
        out.loss += (m + std::log(z) - logits[i]) * inv_b;
        for (std::size_t j = 0; j < B; ++j) {
            const double sm = std::exp(logits[j] - m) / z;
            d_sim.at(i, j) = (sm - (i == j ? 1.0 : 0.0)) * inv_b / tau;
        }
    }

    // Through the normalization: d/da = (g - (g . a_hat) a_hat) / |a|.
    auto project_back = [&](const Tensor& hat, const std::vector<double>& norms, Tensor& g) {
        for (std::size_t i = 0; i < B; ++i) {
            auto gi = g.row(i);
            const auto hi = hat.row(i);
            double dot = 0.0;
            for (std::size_t k = 0; k < p; ++k) dot += gi[k] * hi[k];
            for (std::size_t k = 0; k < p; ++k) gi[k] = (gi[k] - dot * hi[k]) / norms[i];
        }
    };
    out.grad_anchor = Tensor::matrix(B, p);
    out.grad_other = Tensor::matrix(B, p);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j) {
            const double d = d_sim.at(i, j);
            if (d == 0.0) continue;
            auto ga = out.grad_anchor.row(i);
            auto go = out.grad_other.row(j);
            const auto ai = a_hat.row(i);
            const auto oj = o_hat.row(j);
            for (std::size_t k = 0; k < p; ++k) {
                ga[k] += d * oj[k];
                go[k] += d * ai[k];
            }
        }
    project_back(a_hat, na, out.grad_anchor);
    project_back(o_hat, no, out.grad_other);
    return out;
}

void PretrainConfig::validate() const {
    if (enabled_branches.empty()) throw InvalidParameter("pretrain: at least one branch must be enabled");
    for (Branch b : enabled_branches)
        if (b == Branch::Raw) throw InvalidParameter("pretrain: raw is the anchor, not a branch");
    if (!(temperature > 0.0)) throw InvalidParameter("pretrain: temperature must be positive");
    if (batch_size < 1) throw InvalidParameter("pretrain: batch_size must be >= 1");
    if (epochs < 0) throw InvalidParameter("pretrain: epochs must be >= 0");
    if (!(lr > 0.0) || !(lr_decay > 0.0) || lr_decay_every < 1)
        throw InvalidParameter("pretrain: learning-rate schedule must be positive");
}

double PretrainConfig::lr_at(int epoch) const {
    return lr * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

TotalLoss total_loss(const EmbeddingBatch& batch, const PretrainConfig& cfg) {
    TotalLoss out;
    out.grad_raw = Tensor(batch.z_raw.shape);
    for (Branch b : cfg.enabled_branches) {
        auto it = batch.z.find(b);
        if (it == batch.z.end())
            throw InvalidParameter("total_loss: batch has no embeddings for branch '" +
                                   std::string(branch_name(b)) + "'");
        const PairLoss fwd = info_nce(batch.z_raw, it->second, cfg.temperature);
        const PairLoss rev = info_nce(it->second, batch.z_raw, cfg.temperature);
        const double pair = 0.5 * (fwd.loss + rev.loss);
        out.per_branch[b] = pair;
        out.total += pair;

        Tensor gk(it->second.shape);
        for (std::size_t i = 0; i < gk.size(); ++i) {
            out.grad_raw.data[i] += 0.5 * (fwd.grad_anchor.data[i] + rev.grad_other.data[i]);
            gk.data[i] = 0.5 * (fwd.grad_other.data[i] + rev.grad_anchor.data[i]);
        }
        out.grad_view[b] = std::move(gk);
    }
    return out;
}

ModelSpec pretrain_model_spec(const ModelSpec& base, const PretrainConfig& cfg) {
    ModelSpec s = base;
    s.view_branches = cfg.enabled_branches;
    s.projectors = true;
    s.num_classes = 0;
    return s;
}

const Tensor& view_of(const ViewSet& v, Branch b) {
    switch (b) {
    case Branch::Raw: return v.raw;
    case Branch::Ta: return v.ta;
    case Branch::Ap: return v.ap;
    case Branch::Fft: return v.fft;
    case Branch::Emd: return v.emd;
    }
    throw InvalidParameter("view_of: bad branch");
}

TotalLoss contrastive_step(const ModelSpec& spec, const ModelParams& params, const BatchInputs& in,
                           const PretrainConfig& cfg, GradMap* grads) {
    const std::size_t B = in.raw.size();
    if (B == 0) throw InvalidParameter("contrastive_step: empty batch");

    struct BranchState {
        Branch branch;
        EncoderSpec enc;
        std::vector<EncoderCache> enc_cache;
        std::vector<ProjectorCache> proj_cache;
    };
    std::vector<BranchState> states;
    states.push_back({Branch::Raw, spec.encoder(Branch::Raw), {}, {}});
    for (Branch b : cfg.enabled_branches) states.push_back({b, spec.encoder(b), {}, {}});

    EmbeddingBatch batch;
    for (auto& st : states) {
        const auto& inputs = st.branch == Branch::Raw ? in.raw : in.views.at(st.branch);
        if (inputs.size() != B) throw ShapeError("contrastive_step: ragged batch");
        const std::string ep = encoder_prefix(st.branch), pp = projector_prefix(st.branch);
        Tensor z;
        for (std::size_t i = 0; i < B; ++i) {
            auto [emb, ec] = encoder_forward(st.enc, params, ep, inputs[i]);
            auto [proj, pc] = projector_forward(params, pp, emb);
            if (z.empty()) z = Tensor::matrix(B, proj.size());
            stack_row(z, i, proj);
            if (grads) {
                st.enc_cache.push_back(std::move(ec));
                st.proj_cache.push_back(std::move(pc));
            }
        }
        if (st.branch == Branch::Raw)
            batch.z_raw = std::move(z);
        else
            batch.z[st.branch] = std::move(z);
    }

    TotalLoss loss = total_loss(batch, cfg);
    if (!grads) return loss;

    for (auto& st : states) {
        const Tensor& g = st.branch == Branch::Raw ? loss.grad_raw : loss.grad_view.at(st.branch);
        const std::string ep = encoder_prefix(st.branch), pp = projector_prefix(st.branch);
        for (std::size_t i = 0; i < B; ++i) {
            Tensor gi = Tensor::vector(g.cols());
            std::copy(g.row(i).begin(), g.row(i).end(), gi.data.begin());
            const Tensor gz = projector_backward(params, pp, st.proj_cache[i], gi, *grads);
            encoder_backward(st.enc, params, ep, st.enc_cache[i], gz, *grads);
        }
    }
    return loss;
}

PretrainResult pretrain(const std::vector<IqSignal>& dataset, const PretrainConfig& cfg, const ModelSpec& base,
                        const EmdConfig& emd, const PretrainHooks& hooks) {
    cfg.validate();
    if (dataset.size() < cfg.batch_size)
        throw InvalidParameter("pretrain: dataset has " + std::to_string(dataset.size()) +
                               " records, fewer than batch size " + std::to_string(cfg.batch_size));
    const ModelSpec spec = pretrain_model_spec(base, cfg);
    spec.encoder(Branch::Raw).check_length(dataset.front().length());

    // ap / fft / emd do not depend on the epoch; compute and standardize once.
    const std::size_t n = dataset.size();
    std::vector<Tensor> raw(n);
    std::map<Branch, std::vector<Tensor>> fixed;
    bool use_ta = false;
    for (Branch b : cfg.enabled_branches) {
        if (b == Branch::Ta)
            use_ta = true;
        else
            fixed[b].resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Tensor iq = iq_tensor(dataset[i]);
        if (iq.cols() != dataset.front().length()) throw ShapeError("pretrain: records differ in length");
        raw[i] = standardize_view(iq);
        for (auto& [b, vec] : fixed) {
            switch (b) {
            case Branch::Ap: vec[i] = standardize_view(amp_phase(iq)); break;
            case Branch::Fft: vec[i] = standardize_view(dft(iq)); break;
            case Branch::Emd: vec[i] = standardize_view(emd_view(iq, emd)); break;
            default: break;
            }
        }
    }

    PretrainResult result;
    result.params = init_params(spec, derive_seed(cfg.seed, {0x1417}));
    ModelParams& params = result.params;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches = n / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {0x5u, static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cfg.lr_at(epoch);

        LossRecord mean;
        mean.epoch = epoch + 1;
        mean.lr = lr;
        for (std::size_t bi = 0; bi < batches; ++bi) {
            BatchInputs in;
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                const std::size_t idx = order[bi * cfg.batch_size + k];
                in.raw.push_back(raw[idx]);
                for (auto& [b, vec] : fixed) in.views[b].push_back(vec[idx]);
                if (use_ta) {
                    const auto seed = derive_seed(cfg.seed, {0x7a, idx, static_cast<std::uint64_t>(epoch)});
                    in.views[Branch::Ta].push_back(
                        standardize_view(time_augment(iq_tensor(dataset[idx]), seed).first));
                }
            }
            GradMap grads;
            const TotalLoss loss = contrastive_step(spec, params, in, cfg, &grads);
            adam_step(params, grads, lr);

            mean.total += loss.total;
            for (auto [b, v] : loss.per_branch) mean.per_branch[b] += v;
            if (cfg.log_every_steps > 0 && params.step_count % static_cast<std::uint64_t>(cfg.log_every_steps) == 0)
                result.log.snapshots.push_back({epoch + 1, params.step_count, lr, loss.total, loss.per_branch});
        }
        const double inv = 1.0 / static_cast<double>(batches);
        mean.total *= inv;
        for (auto& [b, v] : mean.per_branch) v *= inv;
        mean.step = params.step_count;
        result.log.epochs.push_back(mean);
        if (hooks.on_epoch) hooks.on_epoch(mean);
        if (hooks.checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
            epoch + 1 != cfg.epochs)
            hooks.checkpoint(params, epoch + 1);
    }
    if (hooks.checkpoint) hooks.checkpoint(params, cfg.epochs);
    return result;
}

}  // namespace eqcl
