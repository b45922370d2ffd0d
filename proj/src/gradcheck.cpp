#include "eqcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace eqcl {

GradCheckResult compare_with_finite_differences(const ModelParams& params, const GradMap& analytic,
                                                 const std::function<double(const ModelParams&)>& loss,
                                                 double eps, double min_grad) {
    GradCheckResult r;
    r.analytic = analytic;
    ModelParams probe = params;
    for (auto& [name, t] : probe.entries) {
        auto g = analytic.find(name);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double bp = g == analytic.end() ? 0.0 : g->second.data[i];
            if (std::abs(bp) <= min_grad) continue;
            const double orig = t.data[i];
            t.data[i] = orig + eps;
            const double up = loss(probe);
            t.data[i] = orig - eps;
            const double down = loss(probe);
            t.data[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            const double rel = std::abs(fd - bp) / std::max(std::abs(fd), std::abs(bp));
            ++r.checked;
            if (rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return r;
}

void jitter_biases(ModelParams& params, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& [name, t] : params.entries)
        if (name.ends_with(".b"))
            for (double& v : t.data) v = u(rng);
}

BatchInputs standardized_inputs(const std::vector<ViewSet>& batch, const std::vector<Branch>& branches) {
    BatchInputs in;
    for (const auto& v : batch) {
        in.raw.push_back(standardize_view(v.raw));
        for (Branch b : branches) in.views[b].push_back(standardize_view(view_of(v, b)));
    }
    return in;
}

GradCheckResult grad_check_contrastive(const ModelSpec& base, const ModelParams& params,
                                       const std::vector<ViewSet>& batch, const PretrainConfig& cfg, double eps) {
    const ModelSpec spec = pretrain_model_spec(base, cfg);
    const BatchInputs in = standardized_inputs(batch, cfg.enabled_branches);
    GradMap grads;
    contrastive_step(spec, params, in, cfg, &grads);
    return compare_with_finite_differences(
        params, grads, [&](const ModelParams& p) { return contrastive_step(spec, p, in, cfg, nullptr).total; }, eps);
}

GradCheckResult grad_check_finetune(const ModelSpec& spec, const ModelParams& params,
                                    const std::vector<IqSignal>& batch, bool freeze_encoder, double eps) {
    const std::vector<Tensor> inputs = encoder_inputs(batch);
    std::vector<int> labels;
    for (const auto& x : batch) labels.push_back(x.label.value_or(0));
    GradMap grads;
    classifier_batch_loss(spec, params, inputs, labels, freeze_encoder, &grads);
    return compare_with_finite_differences(
        params, grads,
        [&](const ModelParams& p) { return classifier_batch_loss(spec, p, inputs, labels, freeze_encoder, nullptr); },
        eps);
}

}  // namespace eqcl
