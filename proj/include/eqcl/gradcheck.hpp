#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eqcl/contrastive.hpp"
#include "eqcl/eval.hpp"

namespace eqcl {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;     // parameters entries with |grad| > threshold
    std::string worst;           // "name[index]" of the worst entry
    GradMap analytic;            // gradients from backward
};

// Compares `analytic` against central differences (loss(p + eps) - loss(p - eps)) / 2eps
// for every scalar of every parameter in params. Relative error is
// |fd - bp| / max(|fd|, |bp|), taken over entries with |bp| > min_grad.
GradCheckResult compare_with_finite_differences(const ModelParams& params, const GradMap& analytic,
                                                 const std::function<double(const ModelParams&)>& loss,
                                                 double eps = 1e-6, double min_grad = 1e-8);

// Total contrastive loss of a batch of view sets.
GradCheckResult grad_check_contrastive(const ModelSpec& spec, const ModelParams& params,
                                       const std::vector<ViewSet>& batch, const PretrainConfig& cfg,
                                       double eps = 1e-6);

// Cross-entropy fine-tuning loss of the raw encoder + classifier.
GradCheckResult grad_check_finetune(const ModelSpec& spec, const ModelParams& params,
                                    const std::vector<IqSignal>& batch, bool freeze_encoder, double eps = 1e-6);

// Redraws every bias uniformly in [-scale, scale]. With zero biases an
// all-zero input window puts a pre-activation exactly on the ReLU kink, where
// a central difference sees the mean of the two one-sided slopes.
void jitter_biases(ModelParams& params, std::uint64_t seed, double scale = 0.1);

BatchInputs standardized_inputs(const std::vector<ViewSet>& batch, const std::vector<Branch>& branches);

}  // namespace eqcl
