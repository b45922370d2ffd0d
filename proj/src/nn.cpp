#include "eqcl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "eqcl/errors.hpp"
#include "eqcl/seed.hpp"

namespace eqcl {

namespace {

std::string block_name(const std::string& prefix, std::size_t i, const char* what) {
    return prefix + ".conv" + std::to_string(i) + "." + what;
}

void fill_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.data) v = u(rng);
}

const Tensor& param(const ModelParams& p, const std::string& name) { return p.get(name); }

void check_cache(bool valid, const ModelParams* owner, std::uint64_t step, const ModelParams& params,
                 const std::string& who) {
    if (!valid) throw StaleCacheError(who + ": no forward cache");
    if (owner != &params || step != params.step_count)
        throw StaleCacheError(who + ": cache was produced by different or since-updated parameters");
}

Tensor& grad_slot(GradMap& grads, const std::string& name, const Tensor& like) {
    auto it = grads.find(name);
    if (it == grads.end()) it = grads.emplace(name, Tensor(like.shape)).first;
    return it->second;
}

// "Same"-padded cross-correlation: out[o][t] = b[o] + sum_{c,j} w[o][c][j] in[c][t + j - pad].
void conv_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    const std::size_t cin = in.rows(), len = in.cols();
    const std::size_t cout = w.dim(0), k = w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    out = Tensor::matrix(cout, len);
    for (std::size_t o = 0; o < cout; ++o) {
        double* row = out.data.data() + o * len;
        std::fill(row, row + len, b.data[o]);
        for (std::size_t c = 0; c < cin; ++c) {
            const double* src = in.data.data() + c * len;
            for (std::size_t j = 0; j < k; ++j) {
                const double wv = w.data[(o * cin + c) * k + j];
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
                const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                const std::size_t t1 = off > 0 ? len - static_cast<std::size_t>(off) : len;
                const double* s = src + off;
                for (std::size_t t = t0; t < t1; ++t) row[t] += wv * s[t];
            }
        }
    }
}

void conv_backward(const Tensor& in, const Tensor& w, const Tensor& gout, Tensor& gw, Tensor& gb,
                   Tensor* gin) {
    const std::size_t cin = in.rows(), len = in.cols();
    const std::size_t cout = w.dim(0), k = w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    if (gin) *gin = Tensor::matrix(cin, len);
    for (std::size_t o = 0; o < cout; ++o) {
        const double* g = gout.data.data() + o * len;
        double sb = 0.0;
#pragma omp simd reduction(+ : sb)
        for (std::size_t t = 0; t < len; ++t) sb += g[t];
        gb.data[o] += sb;
        for (std::size_t c = 0; c < cin; ++c) {
            const double* src = in.data.data() + c * len;
            double* dst = gin ? gin->data.data() + c * len : nullptr;
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t widx = (o * cin + c) * k + j;
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
                const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                const std::size_t t1 = off > 0 ? len - static_cast<std::size_t>(off) : len;
                const double* s = src + off;
                double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                for (std::size_t t = t0; t < t1; ++t) acc += g[t] * s[t];
                gw.data[widx] += acc;
                if (dst) {
                    const double wv = w.data[widx];
                    double* d = dst + off;
                    for (std::size_t t = t0; t < t1; ++t) d[t] += wv * g[t];
                }
            }
        }
    }
}

}  // namespace

std::string_view branch_name(Branch b) {
    switch (b) {
    case Branch::Raw: return "raw";
    case Branch::Ta: return "ta";
    case Branch::Ap: return "ap";
    case Branch::Fft: return "fft";
    case Branch::Emd: return "emd";
    }
    return "?";
}

Branch parse_branch(std::string_view name) {
    for (Branch b : {Branch::Raw, Branch::Ta, Branch::Ap, Branch::Fft, Branch::Emd})
        if (branch_name(b) == name) return b;
    throw InvalidParameter("unknown branch '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
    if (in_channels < 1) throw ShapeError("encoder: in_channels must be positive");
    if (embed_dim < 2) throw ShapeError("encoder: embed_dim must be >= 2");
    if (blocks.empty()) throw ShapeError("encoder: needs at least one conv block");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (b.out_channels < 1 || b.kernel_size < 1 || b.kernel_size % 2 == 0 || b.pool < 1)
            throw ShapeError("encoder block " + std::to_string(i) +
                             ": needs positive channels, odd kernel and positive pool");
    }
}

void EncoderSpec::check_length(std::size_t length) const {
    std::size_t len = length;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto p = static_cast<std::size_t>(blocks[i].pool);
        if (len == 0 || len % p != 0)
            throw ShapeError("encoder block " + std::to_string(i) + ": pool factor " + std::to_string(p) +
                             " does not divide running length " + std::to_string(len));
        len /= p;
    }
}

EncoderSpec ModelSpec::encoder(Branch b) const {
    EncoderSpec e;
    e.in_channels = b == Branch::Emd ? emd_rows : 2;
    e.blocks = blocks;
    e.embed_dim = embed_dim;
    return e;
}

const Tensor& ModelParams::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw ShapeError("missing parameter '" + name + "'");
    return it->second;
}

std::string encoder_prefix(Branch b) { return "enc." + std::string(branch_name(b)); }
std::string projector_prefix(Branch b) { return "proj." + std::string(branch_name(b)); }

void init_encoder(ParamMap& out, const EncoderSpec& spec, const std::string& prefix, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::size_t cin = static_cast<std::size_t>(spec.in_channels);
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const auto& b = spec.blocks[i];
        const auto cout = static_cast<std::size_t>(b.out_channels);
        const auto k = static_cast<std::size_t>(b.kernel_size);
        Tensor w({cout, cin, k});
        fill_uniform(w, cin * k, rng);
        out[block_name(prefix, i, "w")] = std::move(w);
        out[block_name(prefix, i, "b")] = Tensor::vector(cout);
        cin = cout;
    }
    Tensor w = Tensor::matrix(static_cast<std::size_t>(spec.embed_dim), cin);
    fill_uniform(w, cin, rng);
    out[prefix + ".fc.w"] = std::move(w);
    out[prefix + ".fc.b"] = Tensor::vector(static_cast<std::size_t>(spec.embed_dim));
}

void init_linear(ParamMap& out, int in, int out_dim, const std::string& prefix, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor w = Tensor::matrix(static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in));
    fill_uniform(w, static_cast<std::size_t>(in), rng);
    out[prefix + ".w"] = std::move(w);
    out[prefix + ".b"] = Tensor::vector(static_cast<std::size_t>(out_dim));
}

void init_projector(ParamMap& out, int embed_dim, int proj_dim, const std::string& prefix, std::uint64_t seed) {
    init_linear(out, embed_dim, embed_dim, prefix + ".fc1", derive_seed(seed, {1}));
    init_linear(out, embed_dim, proj_dim, prefix + ".fc2", derive_seed(seed, {2}));
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams p;
    auto branches = spec.view_branches;
    branches.insert(branches.begin(), Branch::Raw);
    for (Branch b : branches) {
        const auto bi = static_cast<std::uint64_t>(b);
        init_encoder(p.entries, spec.encoder(b), encoder_prefix(b), derive_seed(seed, {10, bi}));
        if (b != Branch::Raw || spec.projectors)
            init_projector(p.entries, spec.embed_dim, spec.proj_dim, projector_prefix(b), derive_seed(seed, {20, bi}));
    }
    if (spec.num_classes > 0)
        init_linear(p.entries, spec.embed_dim, spec.num_classes, kClassifierPrefix, derive_seed(seed, {30}));
    return p;
}

std::pair<Tensor, EncoderCache> encoder_forward(const EncoderSpec& spec, const ModelParams& params,
                                                const std::string& prefix, const Tensor& input) {
    if (input.rank() != 2 || input.rows() != static_cast<std::size_t>(spec.in_channels))
        throw ShapeError(prefix + " block 0: expected " + std::to_string(spec.in_channels) +
                         " input channels, got " + input.shape_string());
    spec.check_length(input.cols());

    EncoderCache cache;
    cache.valid = true;
    cache.owner = &params;
    cache.step = params.step_count;
    cache.block_in.reserve(spec.blocks.size());
    cache.block_act.reserve(spec.blocks.size());

    Tensor x = input;
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const Tensor& w = param(params, block_name(prefix, i, "w"));
        const Tensor& b = param(params, block_name(prefix, i, "b"));
        if (w.rank() != 3 || w.dim(1) != x.rows() || w.dim(0) != b.size())
            throw ShapeError(prefix + " block " + std::to_string(i) + ": weight " + w.shape_string() +
                             " does not match input " + x.shape_string());
        Tensor act;
        conv_forward(x, w, b, act);
        for (double& v : act.data) v = v > 0.0 ? v : 0.0;

        const auto pool = static_cast<std::size_t>(spec.blocks[i].pool);
        const std::size_t out_len = act.cols() / pool;
        Tensor pooled = Tensor::matrix(act.rows(), out_len);
        const double inv = 1.0 / static_cast<double>(pool);
        for (std::size_t c = 0; c < act.rows(); ++c) {
            const double* a = act.data.data() + c * act.cols();
            double* o = pooled.data.data() + c * out_len;
            for (std::size_t t = 0; t < out_len; ++t) {
                double s = 0.0;
                for (std::size_t q = 0; q < pool; ++q) s += a[t * pool + q];
                o[t] = s * inv;
            }
        }
        cache.block_in.push_back(std::move(x));
        cache.block_act.push_back(std::move(act));
        x = std::move(pooled);
    }

    const std::size_t ch = x.rows(), len = x.cols();
    Tensor gap = Tensor::vector(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        double s = 0.0;
        for (double v : x.row(c)) s += v;
        gap.data[c] = s / static_cast<double>(len);
    }
    cache.pooled = std::move(x);
    Tensor z = linear_forward(params, prefix + ".fc", gap);
    return {std::move(z), std::move(cache)};
}

void encoder_backward(const EncoderSpec& spec, const ModelParams& params, const std::string& prefix,
                      const EncoderCache& cache, const Tensor& grad_embedding, GradMap& grads) {
    check_cache(cache.valid, cache.owner, cache.step, params, prefix);
    const Tensor& last = cache.pooled;
    const std::size_t ch = last.rows(), len = last.cols();
    Tensor gap = Tensor::vector(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        double s = 0.0;
        for (double v : last.row(c)) s += v;
        gap.data[c] = s / static_cast<double>(len);
    }
    const Tensor g_gap = linear_backward(params, prefix + ".fc", gap, grad_embedding, grads);

    Tensor g = Tensor::matrix(ch, len);
    for (std::size_t c = 0; c < ch; ++c)
        std::fill_n(g.data.begin() + static_cast<std::ptrdiff_t>(c * len), len,
                    g_gap.data[c] / static_cast<double>(len));

    for (std::size_t i = spec.blocks.size(); i-- > 0;) {
        const Tensor& act = cache.block_act[i];
        const auto pool = static_cast<std::size_t>(spec.blocks[i].pool);
        const double inv = 1.0 / static_cast<double>(pool);
        // Average-pool then ReLU backward, fused.
        Tensor g_pre(act.shape);
        const std::size_t alen = act.cols();
        for (std::size_t c = 0; c < act.rows(); ++c) {
            const double* a = act.data.data() + c * alen;
            const double* gp = g.data.data() + c * g.cols();
            double* gd = g_pre.data.data() + c * alen;
            for (std::size_t t = 0; t < alen; ++t) gd[t] = a[t] > 0.0 ? gp[t / pool] * inv : 0.0;
        }
        const std::string wn = block_name(prefix, i, "w");
        const std::string bn = block_name(prefix, i, "b");
        const Tensor& w = param(params, wn);
        Tensor& gw = grad_slot(grads, wn, w);
        Tensor& gb = grad_slot(grads, bn, param(params, bn));
        Tensor g_in;
        conv_backward(cache.block_in[i], w, g_pre, gw, gb, i > 0 ? &g_in : nullptr);
        g = std::move(g_in);
    }
}

Tensor linear_forward(const ModelParams& params, const std::string& prefix, const Tensor& x) {
    const Tensor& w = param(params, prefix + ".w");
    const Tensor& b = param(params, prefix + ".b");
    if (w.rank() != 2 || w.cols() != x.size())
        throw ShapeError(prefix + ": weight " + w.shape_string() + " vs input " + x.shape_string());
    Tensor y = Tensor::vector(w.rows());
    const std::size_t in = w.cols();
    for (std::size_t o = 0; o < w.rows(); ++o) {
        const double* wr = w.data.data() + o * in;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x.data[i];
        y.data[o] = acc + b.data[o];
    }
    return y;
}

Tensor linear_backward(const ModelParams& params, const std::string& prefix, const Tensor& x,
                       const Tensor& grad_out, GradMap& grads, bool accumulate_params) {
    const std::string wn = prefix + ".w", bn = prefix + ".b";
    const Tensor& w = param(params, wn);
    const std::size_t in = w.cols();
    Tensor gx = Tensor::vector(in);
    Tensor* gw = accumulate_params ? &grad_slot(grads, wn, w) : nullptr;
    Tensor* gb = accumulate_params ? &grad_slot(grads, bn, param(params, bn)) : nullptr;
    for (std::size_t o = 0; o < w.rows(); ++o) {
        const double go = grad_out.data[o];
        const double* wr = w.data.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) gx.data[i] += go * wr[i];
        if (gw) {
            double* gwr = gw->data.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) gwr[i] += go * x.data[i];
            gb->data[o] += go;
        }
    }
    return gx;
}

std::pair<Tensor, ProjectorCache> projector_forward(const ModelParams& params, const std::string& prefix,
                                                    const Tensor& z) {
    ProjectorCache cache;
    cache.valid = true;
    cache.owner = &params;
    cache.step = params.step_count;
    cache.input = z;
    Tensor h = linear_forward(params, prefix + ".fc1", z);
    for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    Tensor out = linear_forward(params, prefix + ".fc2", h);
    cache.hidden = std::move(h);
    return {std::move(out), std::move(cache)};
}

Tensor projector_backward(const ModelParams& params, const std::string& prefix, const ProjectorCache& cache,
                          const Tensor& grad_out, GradMap& grads) {
    check_cache(cache.valid, cache.owner, cache.step, params, prefix);
    Tensor gh = linear_backward(params, prefix + ".fc2", cache.hidden, grad_out, grads);
    for (std::size_t i = 0; i < gh.size(); ++i)
        if (!(cache.hidden.data[i] > 0.0)) gh.data[i] = 0.0;
    return linear_backward(params, prefix + ".fc1", cache.input, gh, grads);
}

void add_into(GradMap& grads, const std::string& name, const Tensor& g) {
    auto it = grads.find(name);
    if (it == grads.end()) {
        grads.emplace(name, g);
        return;
    }
    if (!it->second.same_shape(g)) throw ShapeError("gradient shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < g.size(); ++i) it->second.data[i] += g.data[i];
}

void scale_grads(GradMap& grads, double factor) {
    for (auto& [name, g] : grads)
        for (double& v : g.data) v *= factor;
}

void adam_step(ModelParams& params, const GradMap& grads, double lr, const AdamHyper& hyper) {
    for (const auto& [name, g] : grads) {
        auto it = params.entries.find(name);
        if (it == params.entries.end()) throw ShapeError("gradient for unknown parameter '" + name + "'");
        if (!it->second.same_shape(g))
            throw ShapeError("gradient shape " + g.shape_string() + " does not match parameter '" + name +
                             "' " + it->second.shape_string());
        if (!g.all_finite()) throw NumericFailure("non-finite gradient for '" + name + "'");
    }

    const std::uint64_t step = params.step_count + 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.entries.at(name);
        auto& m = params.adam_m.try_emplace(name, Tensor(p.shape)).first->second;
        auto& v = params.adam_v.try_emplace(name, Tensor(p.shape)).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data[i];
            m.data[i] = hyper.beta1 * m.data[i] + (1.0 - hyper.beta1) * gi;
            v.data[i] = hyper.beta2 * v.data[i] + (1.0 - hyper.beta2) * gi * gi;
            const double mh = m.data[i] / bc1;
            const double vh = v.data[i] / bc2;
            p.data[i] -= lr * mh / (std::sqrt(vh) + hyper.eps);
        }
#ifndef NDEBUG
        if (!p.all_finite()) throw NumericFailure("parameter '" + name + "' became non-finite");
#endif
    }
    params.step_count = step;
}

std::uint64_t params_checksum(const ParamMap& entries, std::string_view prefix) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : entries) {
        if (name.compare(0, prefix.size(), prefix) != 0) continue;
        feed(name.data(), name.size());
        for (auto d : t.shape) feed(&d, sizeof d);
        feed(t.data.data(), t.data.size() * sizeof(double));
    }
    return h;
}

}  // namespace eqcl
