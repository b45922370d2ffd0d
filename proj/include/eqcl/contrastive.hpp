#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "eqcl/nn.hpp"
#include "eqcl/signal.hpp"
#include "eqcl/views.hpp"

namespace eqcl {

// a.b / (|a| |b|). Throws DegenerateEmbedding on a zero vector.
double cosine_sim(std::span<const double> a, std::span<const double> b);

struct PairLoss {
    double loss = 0.0;
    Tensor grad_anchor;  // B x p
    Tensor grad_other;   // B x p
};

// -(1/B) sum_i log softmax_j(sim(a_i, o_j) / tau)[i]. The denominator runs
// over every row of `other`, positive included.
PairLoss info_nce(const Tensor& anchor, const Tensor& other, double tau);

struct EmbeddingBatch {
    Tensor z_raw;                  // B x p
    std::map<Branch, Tensor> z;    // per transformed branch, B x p
    std::vector<std::uint64_t> sample_ids;
};

struct PretrainConfig {
    std::vector<Branch> enabled_branches{Branch::Ta, Branch::Ap, Branch::Fft, Branch::Emd};
    double temperature = 0.1;
    std::size_t batch_size = 128;
    int epochs = 80;
    double lr = 1e-3;
    double lr_decay = 0.2;      // multiplicative
    int lr_decay_every = 10;    // epochs
    std::uint64_t seed = 1;
    int checkpoint_every = 10;  // epochs; 0 = only at completion
    int log_every_steps = 100;

    void validate() const;
    double lr_at(int epoch) const;  // epoch is 0-based
};

struct TotalLoss {
    double total = 0.0;
    std::map<Branch, double> per_branch;  // 0.5 (L_raw,k + L_k,raw)
    Tensor grad_raw;
    std::map<Branch, Tensor> grad_view;
};

// Sum over enabled branches of the symmetric raw <-> k InfoNCE pair.
TotalLoss total_loss(const EmbeddingBatch& batch, const PretrainConfig& cfg);

struct LossRecord {
    int epoch = 0;  // 1-based
    std::uint64_t step = 0;
    double lr = 0.0;
    double total = 0.0;
    std::map<Branch, double> per_branch;
};

struct PretrainLog {
    std::vector<LossRecord> epochs;     // per-epoch means
    std::vector<LossRecord> snapshots;  // every log_every_steps optimizer steps
};

struct PretrainHooks {
    // Called every checkpoint_every epochs and once at completion.
    std::function<void(const ModelParams&, int epoch)> checkpoint;
    std::function<void(const LossRecord&)> on_epoch;
};

struct PretrainResult {
    ModelParams params;
    PretrainLog log;
};

// The model spec used for pretraining: one encoder + projector for raw and
// for each enabled branch, no classifier.
ModelSpec pretrain_model_spec(const ModelSpec& base, const PretrainConfig& cfg);

// The representation a branch encodes.
const Tensor& view_of(const ViewSet& v, Branch b);

// Forward of a whole batch of view sets through raw + enabled branches,
// followed by total_loss and the full backward pass. grads receives the
// gradient of the total loss. Inputs must already be standardized.
struct BatchInputs {
    std::vector<Tensor> raw;
    std::map<Branch, std::vector<Tensor>> views;
};
TotalLoss contrastive_step(const ModelSpec& spec, const ModelParams& params, const BatchInputs& in,
                           const PretrainConfig& cfg, GradMap* grads);

PretrainResult pretrain(const std::vector<IqSignal>& dataset, const PretrainConfig& cfg, const ModelSpec& spec,
                        const EmdConfig& emd, const PretrainHooks& hooks = {});

}  // namespace eqcl
