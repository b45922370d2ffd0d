#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eqcl/contrastive.hpp"
#include "eqcl/errors.hpp"
#include "eqcl/gradcheck.hpp"
#include "eqcl/signal.hpp"
#include "oracles.hpp"

using namespace eqcl;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data) v = g(rng);
    return t;
}

// Straight transcription of the pairwise loss with no stabilization.
double naive_info_nce(const Tensor& a, const Tensor& o, double tau) {
    const std::size_t B = a.rows();
    auto cos = [&](std::size_t i, std::size_t j) {
        double d = 0, na = 0, no = 0;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            d += a.at(i, k) * o.at(j, k);
            na += a.at(i, k) * a.at(i, k);
            no += o.at(j, k) * o.at(j, k);
        }
        return d / std::sqrt(na * no);
    };
    double loss = 0;
    for (std::size_t i = 0; i < B; ++i) {
        double den = 0;
        for (std::size_t j = 0; j < B; ++j) den += std::exp(cos(i, j) / tau);
        loss -= std::log(std::exp(cos(i, i) / tau) / den);
    }
    return loss / static_cast<double>(B);
}

EmbeddingBatch random_batch(std::size_t B, std::size_t p, std::uint64_t seed) {
    EmbeddingBatch e;
    e.z_raw = random_matrix(B, p, seed);
    std::uint64_t k = 1;
    for (Branch b : kViewBranches) e.z[b] = random_matrix(B, p, seed + 100 * k++);
    return e;
}

}  // namespace

TEST(CosineSim, Identities) {
    const std::vector<double> z{0.3, -2.0, 1.1}, neg{-0.3, 2.0, -1.1};
    EXPECT_DOUBLE_EQ(cosine_sim(z, z), 1.0);
    EXPECT_DOUBLE_EQ(cosine_sim(z, neg), -1.0);
    const std::vector<double> e1{1, 0, 0}, e2{0, 5, 0};
    EXPECT_EQ(cosine_sim(e1, e2), 0.0);
    const std::vector<double> zero{0, 0, 0};
    EXPECT_THROW(cosine_sim(z, zero), DegenerateEmbedding);
}

TEST(InfoNce, SinglePairIsExactlyZero) {
    const Tensor a = random_matrix(1, 8, 1), o = random_matrix(1, 8, 2);
    EXPECT_EQ(info_nce(a, o, 0.1).loss, 0.0);
    EXPECT_EQ(info_nce(a, o, 7.0).loss, 0.0);
}

TEST(InfoNce, OrthonormalPairClosedForm) {
    Tensor a = Tensor::matrix(2, 2);
    a.at(0, 0) = 1;
    a.at(1, 1) = 1;
    const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    EXPECT_NEAR(expect, 0.3133, 5e-5);
    EXPECT_NEAR(info_nce(a, a, 1.0).loss, expect, 1e-12);
    const double tau = 0.1;
    EXPECT_NEAR(info_nce(a, a, tau).loss, -std::log(std::exp(1 / tau) / (std::exp(1 / tau) + 1.0)), 1e-12);
}

TEST(InfoNce, UniformSimilarityGivesLogB) {
    for (std::size_t B : {2u, 5u, 64u}) {
        Tensor a = Tensor::matrix(B, 4);
        for (std::size_t i = 0; i < B; ++i) a.row(i)[0] = 1.0 + static_cast<double>(i);  // same direction
        EXPECT_NEAR(info_nce(a, a, 0.1).loss, std::log(static_cast<double>(B)), 1e-9);
    }
}

TEST(InfoNce, MatchesNaiveFormulaAndBounds) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Tensor a = random_matrix(9, 6, s), o = random_matrix(9, 6, s + 50);
        for (double tau : {0.1, 0.5, 2.0}) {
            const double l = info_nce(a, o, tau).loss;
            EXPECT_NEAR(l, naive_info_nce(a, o, tau), 1e-10);
            EXPECT_GE(l, 0.0);
            EXPECT_LE(l, std::log(9.0) + 2.0 / tau);
        }
    }
}

TEST(InfoNce, StableAtSmallTemperature) {
    const Tensor a = random_matrix(16, 8, 3), o = random_matrix(16, 8, 4);
    const PairLoss l = info_nce(a, o, 1e-3);
    EXPECT_TRUE(std::isfinite(l.loss));
    EXPECT_TRUE(l.grad_anchor.all_finite());
}

TEST(InfoNce, GradientsMatchFiniteDifferences) {
    const Tensor a = random_matrix(5, 4, 7), o = random_matrix(5, 4, 8);
    const double tau = 0.3, eps = 1e-6;
    const PairLoss l = info_nce(a, o, tau);
    for (int which = 0; which < 2; ++which) {
        const Tensor& g = which == 0 ? l.grad_anchor : l.grad_other;
        for (std::size_t i = 0; i < a.size(); ++i) {
            Tensor ap = which == 0 ? a : o, am = ap;
            ap.data[i] += eps;
            am.data[i] -= eps;
            const double fd = which == 0 ? (info_nce(ap, o, tau).loss - info_nce(am, o, tau).loss) / (2 * eps)
                                         : (info_nce(a, ap, tau).loss - info_nce(a, am, tau).loss) / (2 * eps);
            EXPECT_NEAR(g.data[i], fd, 1e-7);
        }
    }
}

TEST(InfoNce, Errors) {
    EXPECT_THROW(info_nce(random_matrix(2, 3, 1), random_matrix(3, 3, 1), 0.1), ShapeError);
    EXPECT_THROW(info_nce(random_matrix(2, 3, 1), random_matrix(2, 3, 1), 0.0), InvalidParameter);
    EXPECT_THROW(info_nce(Tensor::matrix(2, 3), random_matrix(2, 3, 1), 0.1), DegenerateEmbedding);
}

TEST(TotalLoss, SingleBranchSingleSampleIsZero) {
    PretrainConfig cfg;
    cfg.enabled_branches = {Branch::Fft};
    EXPECT_EQ(total_loss(random_batch(1, 4, 1), cfg).total, 0.0);
}

TEST(TotalLoss, SymmetricWhenViewsEqualRaw) {
    EmbeddingBatch e;
    e.z_raw = random_matrix(6, 5, 2);
    for (Branch b : kViewBranches) e.z[b] = e.z_raw;
    PretrainConfig cfg;
    for (Branch b : kViewBranches) {
        const double fwd = info_nce(e.z_raw, e.z[b], cfg.temperature).loss;
        const double rev = info_nce(e.z[b], e.z_raw, cfg.temperature).loss;
        EXPECT_EQ(fwd, rev);
    }
}

TEST(TotalLoss, EqualsSumOfIndependentPairs) {
    const EmbeddingBatch e = random_batch(8, 6, 3);
    PretrainConfig cfg;
    const TotalLoss t = total_loss(e, cfg);
    double sum = 0;
    for (Branch b : kViewBranches) {
        const double pair = 0.5 * (naive_info_nce(e.z_raw, e.z.at(b), cfg.temperature) +
                                   naive_info_nce(e.z.at(b), e.z_raw, cfg.temperature));
        EXPECT_NEAR(t.per_branch.at(b), pair, 1e-9);
        sum += pair;
    }
    EXPECT_NEAR(t.total, sum, 1e-9);
}

TEST(TotalLoss, BranchAdditivity) {
    const EmbeddingBatch e = random_batch(7, 5, 4);
    PretrainConfig s1, s2, all;
    s1.enabled_branches = {Branch::Ta, Branch::Emd};
    s2.enabled_branches = {Branch::Ap, Branch::Fft};
    EXPECT_NEAR(total_loss(e, all).total, total_loss(e, s1).total + total_loss(e, s2).total, 1e-9);
}

TEST(TotalLoss, PermutationAndScaleInvariance) {
    const EmbeddingBatch e = random_batch(10, 4, 5);
    const PretrainConfig cfg;
    const double base = total_loss(e, cfg).total;

    const std::vector<std::size_t> perm{3, 7, 0, 9, 1, 5, 2, 8, 6, 4};
    EmbeddingBatch p = e;
    auto permute = [&](const Tensor& src) {
        Tensor out = src;
        for (std::size_t i = 0; i < perm.size(); ++i)
            std::copy(src.row(perm[i]).begin(), src.row(perm[i]).end(), out.row(i).begin());
        return out;
    };
    p.z_raw = permute(e.z_raw);
    for (auto& [b, z] : p.z) z = permute(e.z.at(b));
    EXPECT_NEAR(total_loss(p, cfg).total, base, 1e-9);

    EmbeddingBatch s = e;
    for (double& v : s.z_raw.row(2)) v *= 13.5;
    for (double& v : s.z[Branch::Ap].row(6)) v *= 0.02;
    EXPECT_NEAR(total_loss(s, cfg).total, base, 1e-9);
}

TEST(TotalLoss, MissingBranchIsRejected) {
    EmbeddingBatch e = random_batch(3, 4, 6);
    e.z.erase(Branch::Emd);
    EXPECT_THROW(total_loss(e, PretrainConfig{}), InvalidParameter);
}

TEST(PretrainConfig, ScheduleAndValidation) {
    PretrainConfig cfg;
    EXPECT_EQ(cfg.lr, 1e-3);
    EXPECT_EQ(cfg.batch_size, 128u);
    EXPECT_EQ(cfg.epochs, 80);
    EXPECT_DOUBLE_EQ(cfg.lr_at(0), 1e-3);
    EXPECT_DOUBLE_EQ(cfg.lr_at(9), 1e-3);
    EXPECT_DOUBLE_EQ(cfg.lr_at(10), 2e-4);
    EXPECT_NEAR(cfg.lr_at(79), 1e-3 * std::pow(0.2, 7), 1e-18);
    cfg.enabled_branches.clear();
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), InvalidParameter);
}

namespace {

ModelSpec tiny_spec() {
    ModelSpec s;
    s.blocks = {{4, 3, 2}, {4, 3, 2}};
    s.embed_dim = 8;
    s.proj_dim = 6;
    return s;
}

std::vector<IqSignal> tiny_dataset(std::size_t per_class, std::size_t length, std::uint64_t seed) {
    SyntheticDatasetSpec d;
    d.samples_per_class_per_snr = static_cast<int>(per_class);
    d.length = length;
    d.master_seed = seed;
    return make_dataset(d);
}

}  // namespace

TEST(ContrastiveStep, UnusedBranchesGetNoGradient) {
    PretrainConfig all;
    const ModelSpec spec = pretrain_model_spec(tiny_spec(), all);
    const ModelParams params = init_params(spec, 1);
    std::vector<ViewSet> views;
    for (const auto& x : tiny_dataset(1, 32, 2)) views.push_back(make_view_set(x, EmdConfig{}, x.id));
    PretrainConfig only_ta;
    only_ta.enabled_branches = {Branch::Ta};
    GradMap g;
    contrastive_step(spec, params, standardized_inputs(views, only_ta.enabled_branches), only_ta, &g);
    for (const auto& [name, t] : g) {
        EXPECT_TRUE(name.find(".raw.") != std::string::npos || name.find(".ta.") != std::string::npos) << name;
    }
    EXPECT_TRUE(g.count("enc.raw.conv0.w"));
    EXPECT_TRUE(g.count("proj.ta.fc2.b"));
}

TEST(ContrastiveStep, GradCheckTinyConfig) {
    PretrainConfig cfg;
    const ModelSpec spec = pretrain_model_spec(tiny_spec(), cfg);
    ModelParams params = init_params(spec, 3);
    jitter_biases(params, 1);
    std::vector<ViewSet> views;
    const auto data = tiny_dataset(1, 32, 4);
    for (const auto& x : data) views.push_back(make_view_set(x, EmdConfig{}, 10 + x.id));
    const GradCheckResult r = grad_check_contrastive(spec, params, views, cfg);
    EXPECT_GT(r.checked, 500u);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Pretrain, SmokeRunLogsEveryEpochAndCheckpoints) {
    PretrainConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 3;
    cfg.checkpoint_every = 2;
    cfg.log_every_steps = 4;
    std::vector<int> saved;
    PretrainHooks hooks;
    hooks.checkpoint = [&](const ModelParams&, int epoch) { saved.push_back(epoch); };
    const auto data = tiny_dataset(64, 64, 5);
    ASSERT_EQ(data.size(), 256u);
    const PretrainResult r = pretrain(data, cfg, tiny_spec(), EmdConfig{}, hooks);
    ASSERT_EQ(r.log.epochs.size(), 3u);
    EXPECT_EQ(saved, (std::vector<int>{2, 3}));
    EXPECT_EQ(r.params.step_count, 24u);
    EXPECT_EQ(r.log.snapshots.size(), 6u);
    for (const auto& e : r.log.epochs) {
        EXPECT_EQ(e.per_branch.size(), 4u);
        double s = 0;
        for (auto [b, v] : e.per_branch) s += v;
        EXPECT_NEAR(s, e.total, 1e-9);
    }
    EXPECT_EQ(r.log.epochs[1].step, 16u);
    EXPECT_DOUBLE_EQ(r.log.epochs[2].lr, 1e-3);
}

TEST(Pretrain, DeterministicForFixedSeed) {
    PretrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 2;
    cfg.enabled_branches = {Branch::Ta, Branch::Fft};
    const auto data = tiny_dataset(8, 32, 6);
    const auto a = pretrain(data, cfg, tiny_spec(), EmdConfig{});
    const auto b = pretrain(data, cfg, tiny_spec(), EmdConfig{});
    EXPECT_EQ(a.params, b.params);
    cfg.seed = 2;
    EXPECT_NE(pretrain(data, cfg, tiny_spec(), EmdConfig{}).params.entries, a.params.entries);
}

TEST(Pretrain, LossDecreasesOnSyntheticData) {
    PretrainConfig cfg;
    cfg.batch_size = 64;
    cfg.epochs = 15;
    const auto data = tiny_dataset(128, 128, 7);
    const auto r = pretrain(data, cfg, ModelSpec{}, EmdConfig{});
    EXPECT_LT(r.log.epochs.back().total, r.log.epochs.front().total);
}

TEST(Pretrain, RejectsTooSmallDatasetAndBadLength) {
    PretrainConfig cfg;
    EXPECT_THROW(pretrain(tiny_dataset(2, 64, 1), cfg, tiny_spec(), EmdConfig{}), InvalidParameter);
    cfg.batch_size = 4;
    EXPECT_THROW(pretrain(tiny_dataset(2, 30, 1), cfg, tiny_spec(), EmdConfig{}), ShapeError);
}

TEST(Pretrain, NonFiniteGradientAborts) {
    PretrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.temperature = 1e-310;
    EXPECT_THROW(pretrain(tiny_dataset(4, 32, 8), cfg, tiny_spec(), EmdConfig{}), NumericFailure);
}
