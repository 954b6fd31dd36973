#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "radfuse/evaluation.hpp"
#include "radfuse/learners/subensemble.hpp"

using namespace radfuse;
using namespace radfuse::learners;

namespace {

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out(i++) = d;
    return out;
}

struct Sample {
    Matrix x;
    std::vector<int> y;
};

// Two unit-variance Gaussian classes whose means differ by `shift` in every
// feature.
Sample gaussian_classes(int n, int p, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Sample s{Matrix(n, p), std::vector<int>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        s.y[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < p; ++j) s.x(i, j) = z(rng) + (label ? shift : 0.0);
    }
    return s;
}

template <typename Model>
std::vector<double> predict_all(const Model& m, const Matrix& x) {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = m.predict_proba(x.row(i).transpose());
    return out;
}

std::string bundle_text(const SubEnsemble& e) {
    std::ostringstream out;
    e.save(out);
    return out.str();
}

LearnerConfig fast_config() {
    LearnerConfig cfg;
    cfg.rf.trees = 40;
    cfg.bswims.bootstraps = 5;
    cfg.svm.epochs = 50;
    return cfg;
}

}  // namespace

TEST(Scaler, TwoPointColumnAndConstantColumn) {
    const Matrix x = rows_to_matrix({{1, 5}, {3, 5}});
    const Scaler s = Scaler::fit(x);
    const Matrix z = s.apply_rows(x);
    EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(z(1, 0), 1.0);
    EXPECT_EQ(z(0, 1), 0.0);
    EXPECT_EQ(z(1, 1), 0.0);
    EXPECT_EQ(s.stdev(1), kScalerFloor);
    EXPECT_EQ(s.apply(s.mean), Vector::Zero(2));
    EXPECT_THROW(Scaler::fit(Matrix(0, 3)), Error);
}

TEST(Scaler, ExtremeInputsStayFinite) {
    const Scaler s = Scaler::fit(rows_to_matrix({{0, 1}, {0, 2}}));
    const Vector z = s.apply(vec({std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()}));
    EXPECT_EQ(z(0), kScaledClamp);
    EXPECT_EQ(z(1), -kScaledClamp);
}

TEST(Knn, SelfMatchCountingAndClusters) {
    const Matrix x = rows_to_matrix({{0}, {1}, {2}, {3}, {4}, {10}});
    const std::vector<int> y = {1, 1, 0, 0, 0, 1};
    EXPECT_EQ(Knn::train(x, y, {1}).predict_proba(vec({0})), 1.0);
    EXPECT_DOUBLE_EQ(Knn::train(x, y, {5}).predict_proba(vec({2})), 0.4);

    const Matrix c = rows_to_matrix({{0}, {0.1}, {0.2}, {5}, {5.1}, {5.2}});
    const std::vector<int> cy = {0, 0, 0, 1, 1, 1};
    EXPECT_EQ(Knn::train(c, cy, {3}).predict_proba(vec({5.05})), 1.0);
}

TEST(Knn, DistanceTiesGoToLowerRow) {
    const Matrix x = rows_to_matrix({{-1}, {1}});
    EXPECT_EQ(Knn::train(x, std::vector<int>{1, 0}, {1}).predict_proba(vec({0})), 1.0);
    EXPECT_EQ(Knn::train(x, std::vector<int>{0, 1}, {1}).predict_proba(vec({0})), 0.0);
}

TEST(Knn, KLargerThanTrainingSetThrows) {
    EXPECT_THROW(Knn::train(rows_to_matrix({{0}, {1}}), std::vector<int>{0, 1}, {3}), Error);
    EXPECT_THROW(Knn::train(rows_to_matrix({{0}, {1}}), std::vector<int>{0, 1}, {0}), Error);
}

TEST(Svm, SeparableBlobsFullTrainingAccuracy) {
    const Sample s = gaussian_classes(200, 2, 8.0, 31);
    const LinearSvm m = LinearSvm::train(s.x, s.y, 5);
    const auto p = predict_all(m, s.x);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i] >= 0.5, s.y[i] == 1) << i;
}

TEST(Svm, FarPositivePointMatchesHandAppliedPlattMap) {
    const Sample s = gaussian_classes(200, 3, 2.5, 32);
    const LinearSvm m = LinearSvm::train(s.x, s.y, 6);
    const Vector q = Vector::Constant(3, 10.0);
    double margin = m.b;
    for (int j = 0; j < 3; ++j) margin += m.w(j) * q(j);
    const double expect = 1.0 / (1.0 + std::exp(-(m.platt.slope * margin + m.platt.intercept)));
    EXPECT_NEAR(m.predict_proba(q), expect, 1e-15);
    EXPECT_GT(m.predict_proba(q), 0.9);
}

TEST(Svm, MirroredDataHasZeroDecisionAtOrigin) {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
        const double a = z(rng) + 1.5, b = z(rng);
        rows.push_back({a, b});
        y.push_back(1);
        rows.push_back({-a, -b});
        y.push_back(0);
    }
    const LinearSvm m = LinearSvm::train(rows_to_matrix(rows), y, 7);
    EXPECT_LT(std::abs(m.decision(Vector::Zero(2))), 1e-6);
}

TEST(Svm, HingeOffsetMatchesGridSearch) {
    std::mt19937_64 rng(34);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(15);
        std::vector<int> sign(15);
        for (std::size_t i = 0; i < s.size(); ++i) {
            sign[i] = i % 3 == 0 ? 1 : -1;
            s[i] = std::round(4 * (z(rng) + 0.5 * sign[i])) / 4;
        }
        auto loss = [&](double b) {
            double l = 0;
            for (std::size_t i = 0; i < s.size(); ++i) l += std::max(0.0, 1.0 - sign[i] * (s[i] + b));
            return l;
        };
        double best = std::numeric_limits<double>::infinity();
        for (double b = -8; b <= 8; b += 1.0 / 64) best = std::min(best, loss(b));
        EXPECT_NEAR(loss(best_hinge_offset(s, sign)), best, 1e-12);
    }
}

TEST(Svm, SingleClassThrows) {
    EXPECT_THROW(LinearSvm::train(rows_to_matrix({{0}, {1}}), std::vector<int>{1, 1}, 1), SingleClassError);
}

TEST(Lasso, SoftThreshold) {
    EXPECT_DOUBLE_EQ(soft_threshold(0.7, 0.2), 0.5);
    EXPECT_EQ(soft_threshold(-0.1, 0.2), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-0.7, 0.2), -0.5);
}

TEST(Lasso, GridIsTenLogSpacedPoints) {
    const auto g = lasso_lambda_grid({});
    ASSERT_EQ(g.size(), 10u);
    EXPECT_EQ(g.front(), 1e-4);
    EXPECT_EQ(g.back(), 1e-1);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(1e3, 1.0 / 9.0), 1e-12);
}

TEST(Lasso, MaximumLambdaGivesPrevalence) {
    std::mt19937_64 rng(35);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(300, 6);
    std::vector<int> y(300);
    for (int i = 0; i < 300; ++i) {
        y[static_cast<std::size_t>(i)] = i % 4 == 0;
        for (int j = 0; j < 6; ++j) x(i, j) = z(rng);
    }
    const Matrix xs = Scaler::fit(x).apply_rows(x);
    const Lasso m = Lasso::train_fixed(xs, y, 1e-1);
    for (Eigen::Index j = 0; j < m.coef.size(); ++j) EXPECT_EQ(m.coef(j), 0.0);
    for (Eigen::Index i = 0; i < 20; ++i) EXPECT_NEAR(m.predict_proba(xs.row(i).transpose()), 0.25, 1e-9);
}

// One informative and nine noise features, n = 400. The fit at the selected
// lambda must agree with a coordinate-descent reference, support included.
// Inner-CV AUC is flat in tiny noise coefficients, so the selected lambda is
// sometimes small enough to admit a few; sparsity is checked over 20 draws.
TEST(Lasso, SelectedModelMatchesCoordinateDescent) {
    const int n = 400, p = 10, draws = 20;
    int sparse_draws = 0;
    for (int draw = 0; draw < draws; ++draw) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(100 + draw));
        std::normal_distribution<double> z(0.0, 1.0);
        Matrix x(n, p);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) x(i, j) = z(rng);
            std::bernoulli_distribution b(sigmoid(1.5 * x(i, 0)));
            y[static_cast<std::size_t>(i)] = b(rng);
        }
        const Matrix xs = Scaler::fit(x).apply_rows(x);
        std::vector<std::vector<double>> rows(n, std::vector<double>(p));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) rows[i][j] = xs(i, j);

        LassoParams params;
        params.max_iter = 200000;
        params.tol = 1e-13;
        const Lasso m = Lasso::train(xs, y, 9, params);
        const auto ref = oracle::cd_lasso_logistic(rows, y, m.lambda);
        EXPECT_NEAR(m.intercept, ref.intercept, 1e-6);
        int zero_noise = 0;
        for (int j = 0; j < p; ++j) {
            EXPECT_NEAR(m.coef(j), ref.coef[j], 1e-6) << "draw " << draw << " coef " << j;
            EXPECT_EQ(m.coef(j) == 0.0, ref.coef[j] == 0.0) << "draw " << draw << " coef " << j;
            if (j > 0) zero_noise += m.coef(j) == 0.0;
        }
        EXPECT_NE(m.coef(0), 0.0) << "draw " << draw;
        sparse_draws += zero_noise >= 7;
    }
    EXPECT_GE(sparse_draws, 14);
}

TEST(Bswims, NullFeaturesSelectAlmostNothing) {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(200, 8);
    std::vector<int> y(200);
    for (int i = 0; i < 200; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        for (int j = 0; j < 8; ++j) x(i, j) = z(rng);
    }
    const Bswims m = Bswims::train(x, y, 3);
    ASSERT_EQ(m.members.size(), 20u);
    std::vector<std::size_t> sizes;
    for (const auto& mem : m.members) sizes.push_back(mem.features.size());
    std::nth_element(sizes.begin(), sizes.begin() + 10, sizes.end());
    EXPECT_LE(sizes[10], 1u);
}

TEST(Bswims, DominantFeatureAlmostAlwaysSelected) {
    std::mt19937_64 rng(38);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(200, 8);
    std::vector<int> y(200);
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        y[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < 8; ++j) x(i, j) = z(rng);
        x(i, 3) += label ? 2.0 : 0.0;
    }
    const Bswims m = Bswims::train(x, y, 4);
    int hits = 0;
    for (const auto& mem : m.members) hits += std::count(mem.features.begin(), mem.features.end(), 3) > 0;
    EXPECT_GE(hits, 18);
}

TEST(Bswims, SingleBootstrapIsDeterministic) {
    const Sample s = gaussian_classes(80, 4, 1.0, 39);
    BswimsParams p;
    p.bootstraps = 1;
    const Bswims a = Bswims::train(s.x, s.y, 11, p), b = Bswims::train(s.x, s.y, 11, p);
    EXPECT_EQ(predict_all(a, s.x), predict_all(b, s.x));
}

TEST(Lda, SymmetricMidpointAndPriorInvariance) {
    const Matrix x = rows_to_matrix({{-2}, {-1}, {0}, {2}, {3}, {4}});
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    const Lda m = Lda::train(x, y);
    EXPECT_NEAR(m.predict_proba(vec({1.0})), 0.5, 1e-15);

    const Matrix x2 = rows_to_matrix({{-2}, {-1}, {0}, {2}, {3}, {4}, {-2}, {-1}, {0}, {2}, {3}, {4}});
    const std::vector<int> y2 = {0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1};
    const Lda m2 = Lda::train(x2, y2);
    for (double q : {-3.0, 0.5, 1.0, 2.5, 7.0}) EXPECT_NEAR(m2.predict_proba(vec({q})), m.predict_proba(vec({q})), 1e-12);
}

TEST(Lda, PositiveMeanMatchesGaussianPosterior) {
    const Sample s = gaussian_classes(300, 2, 3.5, 40);
    const Lda m = Lda::train(s.x, s.y);
    // oracle: class means, ML pooled covariance plus the ridge, and the posterior
    // from the two Gaussian densities evaluated directly
    Eigen::Vector2d mu[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    double cnt[2] = {0, 0};
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
        mu[s.y[i]] += s.x.row(i).transpose();
        cnt[s.y[i]] += 1;
    }
    mu[0] /= cnt[0];
    mu[1] /= cnt[1];
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
        const Eigen::Vector2d d = s.x.row(i).transpose() - mu[s.y[i]];
        cov += d * d.transpose();
    }
    cov /= (cnt[0] + cnt[1]);
    cov += 1e-3 * cov.trace() / 2.0 * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d inv = cov.inverse();
    auto density = [&](const Eigen::Vector2d& q, int c) {
        const Eigen::Vector2d d = q - mu[c];
        return std::exp(-0.5 * d.dot(inv * d)) / (2 * std::numbers::pi * std::sqrt(cov.determinant()));
    };
    const Eigen::Vector2d q = mu[1];
    const double num = cnt[1] * density(q, 1), den = num + cnt[0] * density(q, 0);
    EXPECT_NEAR(m.predict_proba(q), num / den, 1e-12);
    EXPECT_GT(m.predict_proba(q), 0.95);
}

TEST(NaiveBayes, HandEvaluatedLikelihoodRatio) {
    // class 0 sample has mean 0, variance 1; class 1 has mean 2, variance 1
    const Matrix x = rows_to_matrix({{-1}, {1}, {1}, {3}});
    const std::vector<int> y = {0, 0, 1, 1};
    const NaiveBayes m = NaiveBayes::train(x, y);
    EXPECT_NEAR(m.predict_proba(vec({1.0})), 0.5, 1e-15);
    EXPECT_NEAR(m.predict_proba(vec({2.0})), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(m.predict_proba(vec({2.0})), 0.881, 5e-4);
}

TEST(NaiveBayes, IdenticalIrrelevantFeaturesCancel) {
    const int extra = 500;
    Matrix x(4, 1 + extra);
    const double base[4] = {-1, 1, 1, 3};
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector shared(extra);
    for (auto& v : shared) v = z(rng);
    for (int i = 0; i < 4; ++i) {
        x(i, 0) = base[i];
        x.row(i).tail(extra) = shared.transpose();
    }
    const std::vector<int> y = {0, 0, 1, 1};
    const NaiveBayes small = NaiveBayes::train(x.leftCols(1), y), big = NaiveBayes::train(x, y);
    Vector q(1 + extra);
    q(0) = 2.0;
    q.tail(extra) = Vector::Constant(extra, 3.7);
    EXPECT_EQ(big.predict_proba(q), small.predict_proba(vec({2.0})));
}

TEST(Forest, AllPositiveTrainingIsRejected) {
    EXPECT_THROW(RandomForest::train(rows_to_matrix({{0}, {1}, {2}}), std::vector<int>{1, 1, 1}, 1), SingleClassError);
}

TEST(Forest, PureRegionLeavesGiveCertainty) {
    const Matrix x = rows_to_matrix({{0}, {0.1}, {0.2}, {0.3}, {0.4}, {0.5}, {5}, {5.1}, {5.2}, {5.3}, {5.4}, {5.5}});
    const std::vector<int> y = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    ForestParams p;
    p.min_leaf = 1;
    const RandomForest f = RandomForest::train(x, y, 3, p);
    // any tree that splits puts the far positive side in a pure leaf
    EXPECT_GE(f.predict_proba(vec({100.0})), 0.95);
    EXPECT_LE(f.predict_proba(vec({-100.0})), 0.05);
}

TEST(Forest, XorIsLearned) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(400, 2);
    std::vector<int> y(400);
    for (int i = 0; i < 400; ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y[static_cast<std::size_t>(i)] = (x(i, 0) > 0) != (x(i, 1) > 0);
    }
    const RandomForest f = RandomForest::train(x, y, 5);
    EXPECT_GE(auc(predict_all(f, x), y), 0.95);
    // a linear member cannot do this
    EXPECT_LT(auc(predict_all(Lda::train(x, y), x), y), 0.7);
}

TEST(Forest, SeedDeterminesForestRegardlessOfThreads) {
    const Sample s = gaussian_classes(120, 5, 1.0, 43);
    ForestParams p;
    p.trees = 30;
    const RandomForest a = RandomForest::train(s.x, s.y, 8, p, 1), b = RandomForest::train(s.x, s.y, 8, p, 4);
    std::ostringstream oa, ob;
    BundleWriter wa(oa), wb(ob);
    a.save(wa);
    b.save(wb);
    EXPECT_EQ(oa.str(), ob.str());
}

TEST(SubEnsembleVote, ArithmeticMeanAndBounds) {
    const std::vector<double> p = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    EXPECT_NEAR(SubEnsemble::soft_vote(p), 0.4, 1e-15);
    EXPECT_EQ(SubEnsemble::soft_vote(std::vector<double>(7, 1.0)), 1.0);
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(7);
        for (auto& d : v) d = u(rng);
        const double m = SubEnsemble::soft_vote(v);
        EXPECT_GE(m, *std::min_element(v.begin(), v.end()));
        EXPECT_LE(m, *std::max_element(v.begin(), v.end()));
        std::shuffle(v.begin(), v.end(), rng);
        EXPECT_EQ(SubEnsemble::soft_vote(v), m);
    }
}

// 3 sigma mean shift in each of the ten features, which makes the classes
// close to linearly separable.
TEST(SubEnsembleVote, EveryLearnerSeparatesGaussianBenchmark) {
    const Sample train = gaussian_classes(400, 10, 3.0, 45), test = gaussian_classes(400, 10, 3.0, 46);
    const SubEnsemble e = SubEnsemble::train(train.x, train.y, 12, {}, 4);
    std::array<std::vector<double>, 8> scores;
    for (Eigen::Index i = 0; i < test.x.rows(); ++i) {
        const auto p = e.member_probas(test.x.row(i).transpose());
        for (int m = 0; m < 7; ++m) scores[m].push_back(p[m]);
        scores[7].push_back(e.predict_proba(test.x.row(i).transpose()));
    }
    for (int m = 0; m < 8; ++m) EXPECT_GE(auc(scores[m], test.y), 0.95) << (m < 7 ? kMemberNames[m] : "ensemble");
}

TEST(SubEnsembleVote, BundleRoundTripAndDeterminism) {
    const Sample s = gaussian_classes(120, 6, 1.0, 47);
    const SubEnsemble a = SubEnsemble::train(s.x, s.y, 13, fast_config(), 1, 1);
    const SubEnsemble b = SubEnsemble::train(s.x, s.y, 13, fast_config(), 4, 1);
    const std::string text = bundle_text(a);
    EXPECT_EQ(text, bundle_text(b));
    std::istringstream in(text);
    const SubEnsemble back = SubEnsemble::load(in);
    EXPECT_EQ(bundle_text(back), text);
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
        const Vector q = s.x.row(i).transpose();
        EXPECT_NEAR(back.predict_proba(q), a.predict_proba(q), 1e-15);
    }
    EXPECT_NE(text, bundle_text(SubEnsemble::train(s.x, s.y, 14, fast_config(), 1, 1)));
}

TEST(SubEnsembleVote, CorruptBundleIsRejected) {
    std::istringstream bad("radfuse-bundle 99\n");
    EXPECT_THROW(SubEnsemble::load(bad), Error);
    const Sample s = gaussian_classes(60, 3, 1.2, 48);
    std::string text = bundle_text(SubEnsemble::train(s.x, s.y, 1, fast_config()));
    std::istringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(SubEnsemble::load(truncated), Error);
}

TEST(SubEnsembleVote, ProbabilitiesInUnitIntervalForExtremeInputs) {
    const Sample s = gaussian_classes(120, 4, 1.0, 49);
    const SubEnsemble e = SubEnsemble::train(s.x, s.y, 15, fast_config());
    std::mt19937_64 rng(50);
    std::uniform_int_distribution<int> expo(-300, 300);
    std::bernoulli_distribution neg(0.5);
    for (int trial = 0; trial < 300; ++trial) {
        Vector q(4);
        for (auto& v : q) v = (neg(rng) ? -1.0 : 1.0) * std::pow(10.0, expo(rng));
        if (trial % 10 == 0) q(trial % 4) = std::numeric_limits<double>::max();
        for (double p : e.member_probas(q)) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
        const double p = e.predict_proba(q);
        EXPECT_TRUE(p >= 0.0 && p <= 1.0);
    }
}

TEST(SubEnsembleVote, SingleClassPropagates) {
    EXPECT_THROW(SubEnsemble::train(rows_to_matrix({{0}, {1}, {2}, {3}, {4}, {5}}), std::vector<int>(6, 0), 1),
                 SingleClassError);
}
