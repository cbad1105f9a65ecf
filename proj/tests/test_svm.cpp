#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cmc/error.hpp"
#include "cmc/svm.hpp"
#include "test_helpers.hpp"

namespace cmc {
namespace {

using namespace svm;

std::vector<Sample> blobs(std::size_t per_class, std::uint64_t seed, double centre = 3.0,
                          double sd = 0.5) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(0.0, sd);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < per_class; ++i) {
        out.push_back({{-centre + d(gen), -centre + d(gen)}, -1});
        out.push_back({{centre + d(gen), centre + d(gen)}, 1});
    }
    return out;
}

double training_accuracy(const SvmModel& m, const std::vector<Sample>& s) {
    std::size_t ok = 0;
    for (const auto& x : s) ok += predict(m, x.features) == x.label;
    return static_cast<double>(ok) / static_cast<double>(s.size());
}

TEST(Svm, TwoPointLinear) {
    const std::vector<Sample> s{{{-1.0}, -1}, {{1.0}, 1}};
    TrainParams p;
    p.standardize = false;
    const auto m = train_smo(s, {KernelKind::linear}, p);
    EXPECT_EQ(predict(m, std::vector<double>{-1.0}), -1);
    EXPECT_EQ(predict(m, std::vector<double>{1.0}), 1);
    EXPECT_NEAR(m.decision(std::vector<double>{0.0}), 0.0, 1e-12);
    EXPECT_NEAR(m.decision(std::vector<double>{0.5}), 0.5, 1e-9);
    // Exact zero decision maps to +1.
    SvmModel tie = m;
    tie.bias = 0.0;
    tie.coefficients = {-0.5, 0.5};
    EXPECT_EQ(tie.decision(std::vector<double>{0.0}), 0.0);
    EXPECT_EQ(predict(tie, std::vector<double>{0.0}), 1);
}

TEST(Svm, XorWithRbf) {
    const std::vector<Sample> s{{{0, 0}, -1}, {{1, 1}, -1}, {{0, 1}, 1}, {{1, 0}, 1}};
    TrainParams p;
    p.c = 10.0;
    p.standardize = false;
    const auto m = train_smo(s, {KernelKind::rbf, 1.0}, p);
    for (const auto& x : s) {
        // Direct kernel sum as an independent decision value.
        double f = m.bias;
        for (std::size_t j = 0; j < m.support_vectors.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double d = m.support_vectors[j][k] - x.features[k];
                d2 += d * d;
            }
            f += m.coefficients[j] * std::exp(-d2);
        }
        EXPECT_NEAR(f, m.decision(x.features), 1e-12);
        EXPECT_GT(f * x.label, 0.0);
    }
    EXPECT_EQ(training_accuracy(m, s), 1.0);
}

TEST(Svm, BlobsSeparated) {
    const auto s = blobs(100, 5);
    for (auto kind : {KernelKind::linear, KernelKind::rbf}) {
        const auto m = train_smo(s, {kind}, TrainParams{});
        EXPECT_EQ(training_accuracy(m, s), 1.0) << to_string(kind);
        EXPECT_EQ(predict(m, std::vector<double>{-4.0, -4.0}), -1);
        EXPECT_EQ(predict(m, std::vector<double>{4.0, 4.0}), 1);
    }
}

// Maximum of the dual over all faces of the box: for each assignment of the
// multipliers to {0, C, free}, solve the KKT system of the free block.
double dual_oracle(const std::vector<Sample>& s, const KernelSpec& k, double c) {
    const std::size_t n = s.size();
    Eigen::MatrixXd q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            q(i, j) = s[i].label * s[j].label * kernel(k, s[i].features, s[j].features);
        }
    }
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> state(n);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t r = code;
        std::vector<std::size_t> free_idx;
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            state[i] = static_cast<int>(r % 3);
            r /= 3;
            if (state[i] == 1) alpha(static_cast<Eigen::Index>(i)) = c;
            if (state[i] == 2) free_idx.push_back(i);
        }
        const auto f = static_cast<Eigen::Index>(free_idx.size());
        if (f > 0) {
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f + 1, f + 1);
            Eigen::VectorXd rhs(f + 1);
            double y_fixed = 0.0;
            for (std::size_t i = 0; i < n; ++i) y_fixed += s[i].label * alpha(static_cast<Eigen::Index>(i));
            for (Eigen::Index u = 0; u < f; ++u) {
                const auto i = static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(u)]);
                for (Eigen::Index v = 0; v < f; ++v) {
                    a(u, v) = q(i, static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(v)]));
                }
                a(u, f) = s[static_cast<std::size_t>(i)].label;
                a(f, u) = s[static_cast<std::size_t>(i)].label;
                rhs(u) = 1.0 - q.row(i).dot(alpha);
            }
            rhs(f) = -y_fixed;
            const Eigen::VectorXd sol = a.fullPivLu().solve(rhs);
            if (!((a * sol - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()))) continue;
            bool feasible = true;
            for (Eigen::Index u = 0; u < f; ++u) {
                if (sol(u) < -1e-12 || sol(u) > c + 1e-12) feasible = false;
                alpha(static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(u)])) = sol(u);
            }
            if (!feasible) continue;
        } else {
            double y_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) y_sum += s[i].label * alpha(static_cast<Eigen::Index>(i));
            if (std::fabs(y_sum) > 1e-12) continue;
        }
        best = std::max(best, alpha.sum() - 0.5 * alpha.dot(q * alpha));
    }
    return best;
}

double smo_objective(const std::vector<Sample>& s, const KernelSpec& k, const TrainParams& p) {
    const auto r = train_smo_full(s, k, p);
    std::vector<int> labels;
    for (const auto& x : s) labels.push_back(x.label);
    return dual_objective(r.alpha, r.train_features, labels, r.model.kernel);
}

TEST(Svm, MatchesExhaustiveDualOnTenPoints) {
    TrainParams p;
    p.standardize = false;
    p.tol = 1e-6;
    {
        auto s = blobs(5, 11, 1.0, 0.3);
        EXPECT_NEAR(smo_objective(s, {KernelKind::linear}, p), dual_oracle(s, {KernelKind::linear}, p.c), 1e-3);
    }
    {
        // Overlapping classes so some multipliers sit at C.
        auto s = blobs(5, 12, 0.3, 1.0);
        EXPECT_NEAR(smo_objective(s, {KernelKind::linear}, p), dual_oracle(s, {KernelKind::linear}, p.c), 1e-3);
        const KernelSpec rbf{KernelKind::rbf, 0.5};
        EXPECT_NEAR(smo_objective(s, rbf, p), dual_oracle(s, rbf, p.c), 1e-3);
    }
    {
        // Ten points drawn from the 200-point blob set.
        const auto big = blobs(100, 5);
        std::vector<Sample> s(big.begin(), big.begin() + 10);
        EXPECT_NEAR(smo_objective(s, {KernelKind::linear}, p), dual_oracle(s, {KernelKind::linear}, p.c), 1e-3);
    }
}

void expect_kkt(const std::vector<Sample>& s, const KernelSpec& k, const TrainParams& p) {
    const auto r = train_smo_full(s, k, p);
    ASSERT_TRUE(r.converged);
    double balance = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_GE(r.alpha[i], -1e-9);
        EXPECT_LE(r.alpha[i], p.c + 1e-9);
        balance += r.alpha[i] * s[i].label;
    }
    EXPECT_LE(std::fabs(balance), 1e-9);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double f = r.model.bias;
        for (std::size_t j = 0; j < s.size(); ++j) {
            f += r.alpha[j] * s[j].label * kernel(r.model.kernel, r.train_features[j], r.train_features[i]);
        }
        const double margin = s[i].label * f;
        if (r.alpha[i] <= 0.0) {
            EXPECT_GE(margin, 1.0 - p.tol) << i;
        } else if (r.alpha[i] >= p.c) {
            EXPECT_LE(margin, 1.0 + p.tol) << i;
        } else {
            EXPECT_NEAR(margin, 1.0, p.tol) << i << " alpha " << r.alpha[i];
        }
    }
}

TEST(Svm, KktConditionsHold) {
    TrainParams p;
    expect_kkt(blobs(100, 5), {KernelKind::linear}, p);
    expect_kkt(blobs(40, 6, 0.4, 1.0), {KernelKind::linear}, p);
    expect_kkt(blobs(40, 7, 0.4, 1.0), {KernelKind::rbf}, p);
    p.c = 10.0;
    expect_kkt(blobs(40, 8, 0.2, 1.0), {KernelKind::rbf, 2.0}, p);
}

TEST(Svm, KktHoldsAcrossOverlapAndSmallC) {
    // Heavy overlap with small C leaves few or no free multipliers, where the
    // bias has to come from the bound ones.
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        TrainParams p;
        p.c = seed % 2 ? 0.05 : 0.5;
        p.seed = seed;
        expect_kkt(blobs(15 + seed, 100 + seed, 0.2, 1.0),
                   {seed % 3 ? KernelKind::linear : KernelKind::rbf}, p);
    }
}

TEST(Svm, FreeSupportVectorsPredictOwnLabel) {
    TrainParams p;
    p.tol = 1e-6;
    const auto s = blobs(30, 9, 0.5, 1.0);
    const auto r = train_smo_full(s, {KernelKind::linear}, p);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (r.alpha[i] > 0.0 && r.alpha[i] < p.c) EXPECT_EQ(predict(r.model, s[i].features), s[i].label);
    }
}

TEST(Svm, Errors) {
    const std::vector<Sample> one_class{{{1.0}, 1}, {{2.0}, 1}};
    EXPECT_THROW(train_smo(one_class, {}, {}), InvalidArgument);
    const std::vector<Sample> bad{{{1.0}, 1}, {{std::nan("")}, -1}};
    EXPECT_THROW(train_smo(bad, {}, {}), InvalidArgument);
    const std::vector<Sample> ragged{{{1.0}, 1}, {{1.0, 2.0}, -1}};
    EXPECT_THROW(train_smo(ragged, {}, {}), InvalidArgument);
    TrainParams p;
    p.c = 0.0;
    EXPECT_THROW(train_smo(blobs(3, 1), {}, p), InvalidArgument);
    const auto m = train_smo(blobs(3, 1), {}, {});
    EXPECT_THROW(predict(m, std::vector<double>{1.0}), InvalidArgument);
}

TEST(Standardization, Examples) {
    const std::vector<Sample> s{{{1.0, 5.0}, 1}, {{3.0, 5.0}, -1}};
    const auto st = standardize_fit(s);
    EXPECT_EQ(st.mean, (std::vector<double>{2.0, 5.0}));
    EXPECT_EQ(st.apply(std::vector<double>{3.0, 7.0}), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(st.apply(std::vector<double>{1.0, 5.0}), (std::vector<double>{-1.0, 0.0}));
    EXPECT_THROW(st.apply(std::vector<double>{1.0}), InvalidArgument);
}

TEST(Standardization, PredictionInvariantUnderStoredTransform) {
    const auto s = blobs(40, 21, 0.5, 1.0);
    const auto m = train_smo(s, {KernelKind::rbf}, {});
    SvmModel raw = m;
    raw.standardization = identity_standardization(m.dimension());
    std::mt19937_64 gen(3);
    std::normal_distribution<double> d(0.0, 2.0);
    for (int t = 0; t < 200; ++t) {
        const std::vector<double> x{d(gen), d(gen)};
        EXPECT_EQ(predict(m, x), predict(raw, m.standardization.apply(x)));
    }
}

TEST(Accuracy, RatioDefinition) {
    std::vector<int> actual(50, 1), predicted(50, 1);
    predicted[3] = predicted[20] = predicted[41] = -1;
    EXPECT_DOUBLE_EQ(accuracy(predicted, actual), 0.94);
    const std::vector<int> a{1, 1, 1, -1}, p{1, 1, -1, -1};
    EXPECT_DOUBLE_EQ(balanced_accuracy(p, a), 0.5 * (2.0 / 3.0 + 1.0));
}

TEST(CrossValidate, SeparableClasses) {
    const auto s = blobs(30, 31);
    const auto r = cross_validate(s, {KernelKind::linear}, {}, 5, 10, 1);
    EXPECT_EQ(r.accuracies.size(), 50u);
    EXPECT_GE(r.mean, 0.95);
}

TEST(CrossValidate, RandomLabelsAtChance) {
    auto s = blobs(50, 32, 0.0, 1.0);
    std::mt19937_64 gen(4);
    std::vector<int> labels;
    for (const auto& x : s) labels.push_back(x.label);
    std::shuffle(labels.begin(), labels.end(), gen);
    for (std::size_t i = 0; i < s.size(); ++i) s[i].label = labels[i];
    for (auto kind : {KernelKind::linear, KernelKind::rbf}) {
        const auto r = cross_validate(s, {kind}, {}, 5, 10, 2);
        EXPECT_NEAR(r.mean, 0.5, 0.1) << to_string(kind);
    }
}

TEST(CrossValidate, DeterministicAndStratified) {
    const auto s = blobs(20, 33, 0.5, 1.0);
    const auto a = cross_validate(s, {KernelKind::rbf}, {}, 5, 3, 99);
    const auto b = cross_validate(s, {KernelKind::rbf}, {}, 5, 3, 99);
    EXPECT_EQ(a.accuracies, b.accuracies);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_THROW(cross_validate(blobs(4, 1), {}, {}, 5, 1, 0), InsufficientData);
}

TEST(ModelFile, RoundTrip) {
    test::TempDir dir("svm");
    const auto s = blobs(20, 41, 0.6, 1.0);
    const auto m = train_smo(s, {KernelKind::rbf}, {});
    save_model(dir.path() / "model.json", m);
    const auto back = load_model(dir.path() / "model.json");
    EXPECT_EQ(back.kernel.kind, m.kernel.kind);
    EXPECT_EQ(back.kernel.gamma, m.kernel.gamma);
    EXPECT_EQ(back.coefficients, m.coefficients);
    EXPECT_EQ(back.support_vectors, m.support_vectors);
    EXPECT_EQ(back.bias, m.bias);
    for (const auto& x : s) EXPECT_EQ(back.decision(x.features), m.decision(x.features));
    EXPECT_THROW(load_model(dir.path() / "missing.json"), IoError);
}

}  // namespace
}  // namespace cmc
