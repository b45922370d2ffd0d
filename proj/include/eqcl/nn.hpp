#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eqcl/tensor.hpp"

namespace eqcl {

// Input branches of the multi-view model. Raw is the untransformed IQ view;
// the other four are the equivalent representations.
enum class Branch { Raw, Ta, Ap, Fft, Emd };

inline constexpr Branch kViewBranches[] = {Branch::Ta, Branch::Ap, Branch::Fft, Branch::Emd};

std::string_view branch_name(Branch b);
Branch parse_branch(std::string_view name);

struct ConvBlock {
    int out_channels = 16;
    int kernel_size = 5;  // odd, "same" padding
    int pool = 2;         // average-pool factor

    friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

// [conv -> bias -> ReLU -> avg-pool] x blocks -> global average pool -> affine(d).
struct EncoderSpec {
    int in_channels = 2;
    std::vector<ConvBlock> blocks;
    int embed_dim = 64;

    void validate() const;
    // Throws ShapeError naming the first block whose pool factor does not
    // divide the running length.
    void check_length(std::size_t length) const;
};

// Architecture of every sub-network in a run.
struct ModelSpec {
    std::vector<ConvBlock> blocks{{16, 5, 2}, {32, 5, 2}, {64, 3, 2}};
    int embed_dim = 64;
    int proj_dim = 32;
    int emd_rows = 10;                 // 2 (M + 1)
    std::vector<Branch> view_branches;  // transformed branches that get an encoder + projector
    bool projectors = true;             // raw projector too (pretraining)
    int num_classes = 0;                // > 0 adds the linear classifier "clf"

    EncoderSpec encoder(Branch b) const;
};

using ParamMap = std::map<std::string, Tensor>;
using GradMap = ParamMap;

struct ModelParams {
    ParamMap entries;
    std::uint64_t step_count = 0;
    ParamMap adam_m;  // first moments, keyed like entries
    ParamMap adam_v;  // second moments

    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return entries.count(name) != 0; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

std::string encoder_prefix(Branch b);    // "enc.<branch>"
std::string projector_prefix(Branch b);  // "proj.<branch>"
inline constexpr const char* kClassifierPrefix = "clf";

// Adds uniform(+-sqrt(3 / fan_in)) weights and zero biases for every
// sub-network of spec.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);
void init_encoder(ParamMap& out, const EncoderSpec& spec, const std::string& prefix, std::uint64_t seed);
void init_projector(ParamMap& out, int embed_dim, int proj_dim, const std::string& prefix, std::uint64_t seed);
void init_linear(ParamMap& out, int in, int out_dim, const std::string& prefix, std::uint64_t seed);

// Activation record of one encoder forward pass.
struct EncoderCache {
    bool valid = false;
    const ModelParams* owner = nullptr;
    std::uint64_t step = 0;
    std::vector<Tensor> block_in;   // input to each block
    std::vector<Tensor> block_act;  // post-ReLU, pre-pool
    Tensor pooled;                  // last block output (GAP input)
};

struct ProjectorCache {
    bool valid = false;
    const ModelParams* owner = nullptr;
    std::uint64_t step = 0;
    Tensor input;
    Tensor hidden;  // post-ReLU
};

std::pair<Tensor, EncoderCache> encoder_forward(const EncoderSpec& spec, const ModelParams& params,
                                                const std::string& prefix, const Tensor& input);

// Accumulates d(loss)/d(param) for every encoder parameter into grads.
void encoder_backward(const EncoderSpec& spec, const ModelParams& params, const std::string& prefix,
                      const EncoderCache& cache, const Tensor& grad_embedding, GradMap& grads);

// affine(d -> d) -> ReLU -> affine(d -> p).
std::pair<Tensor, ProjectorCache> projector_forward(const ModelParams& params, const std::string& prefix,
                                                    const Tensor& z);
// Returns d(loss)/dz and accumulates projector gradients.
Tensor projector_backward(const ModelParams& params, const std::string& prefix, const ProjectorCache& cache,
                          const Tensor& grad_out, GradMap& grads);

Tensor linear_forward(const ModelParams& params, const std::string& prefix, const Tensor& x);
// Returns d(loss)/dx; parameter gradients are accumulated only when
// accumulate_params is set.
Tensor linear_backward(const ModelParams& params, const std::string& prefix, const Tensor& x,
                       const Tensor& grad_out, GradMap& grads, bool accumulate_params = true);

void add_into(GradMap& grads, const std::string& name, const Tensor& g);
void scale_grads(GradMap& grads, double factor);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam step with bias correction over the parameters present in grads.
// Throws NumericFailure, leaving params untouched, if any gradient is
// non-finite; throws ShapeError on a name or shape mismatch.
void adam_step(ModelParams& params, const GradMap& grads, double lr, const AdamHyper& hyper = {});

// FNV-1a digest over names, shapes and values of entries whose name starts
// with prefix.
std::uint64_t params_checksum(const ParamMap& entries, std::string_view prefix = {});

}  // namespace eqcl
