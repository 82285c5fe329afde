#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "lapklr/model.hpp"
#include "lapklr/random.hpp"
#include "lapklr/synthetic.hpp"
#include "oracles.hpp"

using namespace lapklr;

namespace {

Vector random_vector(Rng& rng, Index n, double scale = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

LapKlrObjective make_objective(const oracle::Instance& in) {
    return LapKlrObjective(in.K.values, in.L.L, in.labeled_rows, to_vector(in.y01),
                           Hyperparams{in.lambda1, in.lambda2});
}

double relative_error(const Vector& a, const Vector& b) {
    const double scale = std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>());
    return scale == 0.0 ? 0.0 : (a - b).lpNorm<Eigen::Infinity>() / scale;
}

OptimizerConfig tight_optimizer() {
    OptimizerConfig opt;
    opt.beta_step = 16.0;
    opt.epsilon = 1e-14;
    opt.grad_tol = 1e-9;
    opt.max_iters = 5000;
    return opt;
}

}  // namespace

TEST(Logistic, StableHelpers) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(-800.0), 0.0);
    EXPECT_EQ(sigmoid(800.0), 1.0);
    EXPECT_NEAR(softplus(0.0), std::numbers::ln2, 1e-16);
    EXPECT_EQ(softplus(800.0), 800.0);
    EXPECT_GT(softplus(-800.0), -1.0);
    EXPECT_TRUE(std::isfinite(softplus(1e308)));
}

TEST(Labels, AcceptsBothCodings) {
    EXPECT_EQ(to_label01(1.0), 1.0);
    EXPECT_EQ(to_label01(0.0), 0.0);
    EXPECT_EQ(to_label01(-1.0), 0.0);
    EXPECT_THROW(to_label01(2.0), DataError);
}

TEST(LabeledSet, Construction) {
    const std::vector<double> y = {1.0, -1.0};
    const LabeledSet s(Matrix::Zero(5, 2), y);
    EXPECT_EQ(s.labeled_count(), 2);
    EXPECT_EQ(s.unlabeled_count(), 3);
    EXPECT_EQ(s.labels01(), Vector((Vector(2) << 1.0, 0.0).finished()));
    EXPECT_THROW(LabeledSet(Matrix::Zero(1, 2), y), DataError);
    EXPECT_THROW(LabeledSet(Matrix::Zero(3, 2), std::vector<double>{}), DataError);
}

TEST(Objective, AtZeroIsLn2) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<Index>(rng.below(10)),
                                                static_cast<Index>(rng.below(10)), 2);
        const auto obj = make_objective(in);
        EXPECT_NEAR(obj.value(Vector::Zero(obj.dim())), std::numbers::ln2, 1e-15);
    }
}

TEST(Objective, WithoutRegularizersIsMeanCrossEntropy) {
    Rng rng(2);
    auto in = oracle::random_instance(rng, 6, 4, 3);
    const Vector theta = random_vector(rng, 10);
    const Vector f = in.K.values * theta;
    double ce = 0.0;
    for (std::size_t i = 0; i < in.labeled_rows.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-f(in.labeled_rows[i])));
        ce -= in.y01[i] * std::log(s) + (1.0 - in.y01[i]) * std::log(1.0 - s);
    }
    ce /= 6.0;
    LapKlrObjective obj(in.K.values, in.L.L, in.labeled_rows, to_vector(in.y01), Hyperparams{0.0, 0.0});
    EXPECT_NEAR(obj.value(theta), ce, 1e-13);
}

TEST(Objective, MatchesExtendedPrecisionOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = oracle::random_instance(rng, 3, 2, 2);
        const Vector theta = random_vector(rng, 5);
        const double expected = oracle::lapklr_objective(theta, in.K.values, Matrix(in.L.L), in.labeled_rows,
                                                         in.y01, in.lambda1, in.lambda2);
        EXPECT_NEAR(make_objective(in).value(theta), expected, 1e-13 * std::max(1.0, std::abs(expected)));
    }
}

TEST(Objective, FreeFunctionsAgreeWithClass) {
    Rng rng(4);
    const auto in = oracle::random_instance(rng, 4, 3, 2);
    std::vector<double> y(in.y01.begin(), in.y01.end());
    const LabeledSet data(in.X, y);
    const Vector theta = random_vector(rng, 7);
    const Hyperparams h{in.lambda1, in.lambda2};
    EXPECT_EQ(objective(theta, in.K, in.L, data, h), make_objective(in).value(theta));
    EXPECT_EQ(gradient(theta, in.K, in.L, data, h), make_objective(in).gradient(theta));
    EXPECT_THROW(objective(Vector::Zero(3), in.K, in.L, data, h), DataError);
    Vector bad = theta;
    bad(0) = std::nan("");
    EXPECT_THROW(objective(bad, in.K, in.L, data, h), NumericalError);
}

TEST(Objective, MismatchedKernelAndLaplacian) {
    const Matrix K = Matrix::Identity(3, 3);
    const SparseMatrix L(4, 4);
    EXPECT_THROW(LapKlrObjective(K, L, {0}, Vector::Ones(1), Hyperparams{}), DataError);
}

TEST(Gradient, BalancedLabelsWithIdenticalRowsCancelAtZero) {
    Matrix X(4, 2);
    X << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
    const auto K = gram_matrix(KernelSpec::rbf(1.0), X);
    const auto L = empty_laplacian(4);
    Vector y(4);
    y << 1, 0, 1, 0;
    LapKlrObjective obj(K.values, L.L, {0, 1, 2, 3}, y, Hyperparams{0.0, 0.0});
    EXPECT_EQ(obj.gradient(Vector::Zero(4)), Vector::Zero(4));
}

TEST(Gradient, SingleLabeledPointClosedForm) {
    Rng rng(5);
    const auto in = oracle::random_instance(rng, 1, 4, 2);
    const Vector theta = random_vector(rng, 5);
    LapKlrObjective obj(in.K.values, in.L.L, {0}, Vector::Ones(1), Hyperparams{0.0, 0.0});
    const Vector k1 = in.K.values.row(0).transpose();
    const Vector expected = -(1.0 - sigmoid(k1.dot(theta))) * k1;
    EXPECT_LT((obj.gradient(theta) - expected).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(Gradient, MatchesCentralDifferences) {
    Rng rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index l = 1 + static_cast<Index>(rng.below(10));
        const Index u = static_cast<Index>(rng.below(11));
        const Index d = 1 + static_cast<Index>(rng.below(5));
        const auto in = oracle::random_instance(rng, l, u, d);
        const auto obj = make_objective(in);
        const Vector theta = random_vector(rng, l + u);
        const Vector fd =
            oracle::finite_difference_gradient([&](const Vector& t) { return obj.value(t); }, theta);
        worst = std::max(worst, relative_error(obj.gradient(theta), fd));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Reduction, ZeroLambda2IsPlainKlr) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto in = oracle::random_instance(rng, 1 + static_cast<Index>(rng.below(10)),
                                          static_cast<Index>(rng.below(10)), 3);
        in.lambda2 = 0.0;
        const auto obj = make_objective(in);
        const Vector theta = random_vector(rng, obj.dim(), 2.0);
        const double a = obj.value(theta);
        const double b = klr_objective(theta, in.K.values, in.labeled_rows, to_vector(in.y01), in.lambda1);
        EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(b)));
    }
}

TEST(Reduction, ZeroLambda2FitsMatchWithOrWithoutGraph) {
    const auto moons = make_two_moons(60, 0.1, 3);
    std::vector<double> y = {1, 1, 0, 0};
    std::vector<Index> labeled = {0, 1, 40, 41};
    std::vector<Index> rest;
    for (Index i = 0; i < 60; ++i)
        if (i != 0 && i != 1 && i != 40 && i != 41) rest.push_back(i);
    const auto data = LabeledSet::from_indices(moons.X, labeled, y, rest);
    const Hyperparams h{1e-2, 0.0};
    GraphConfig g;
    g.k = 5;
    const auto via_fit = fit(data, KernelSpec::rbf(2.0), g, h, OptimizerConfig{});
    auto support = std::make_shared<const Matrix>(data.features());
    auto K = std::make_shared<const GramMatrix>(gram_matrix(KernelSpec::rbf(2.0), *support));
    const auto with_graph = fit_prepared(support, K, build_laplacian(*support, g), data.labeled_rows(),
                                         data.labels01(), h, OptimizerConfig{});
    EXPECT_NEAR(via_fit.final_objective, with_graph.final_objective, 1e-9);
}

TEST(Symmetry, FlippedLabelsAndNegatedThetaGiveSameValue) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<Index>(rng.below(8)),
                                                static_cast<Index>(rng.below(8)), 2);
        auto flipped = in;
        for (double& y : flipped.y01) y = 1.0 - y;
        const Vector theta = random_vector(rng, in.K.n());
        EXPECT_NEAR(make_objective(in).value(theta), make_objective(flipped).value(-theta), 1e-12);
    }
}

TEST(Fit, ConvexityGivesSameOptimumFromDifferentStarts) {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        auto in = oracle::random_instance(rng, 6, 6, 2);
        in.lambda1 = std::max(in.lambda1, 1e-2);
        std::vector<double> y(in.y01.begin(), in.y01.end());
        const LabeledSet data(in.X, y);
        GraphConfig g;
        g.k = 3;
        OptimizerConfig a = tight_optimizer(), b = tight_optimizer();
        b.theta0 = random_vector(rng, 12, 3.0);
        const Hyperparams h{in.lambda1, in.lambda2};
        const auto ma = fit(data, KernelSpec::rbf(0.25), g, h, a);
        const auto mb = fit(data, KernelSpec::rbf(0.25), g, h, b);
        EXPECT_NEAR(ma.final_objective, mb.final_objective, 1e-6) << trial;
    }
}

TEST(Fit, ReturnsStationaryPoint) {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        auto in = oracle::random_instance(rng, 6, 6, 2);
        in.lambda1 = std::max(in.lambda1, 1e-2);
        std::vector<double> y(in.y01.begin(), in.y01.end());
        const LabeledSet data(in.X, y);
        GraphConfig g;
        g.k = 3;
        const Hyperparams h{in.lambda1, in.lambda2};
        // default gradient tolerance; the f-change stop is pushed out of the
        // way so that only the gradient stop can end the run
        OptimizerConfig opt;
        opt.beta_step = 16.0;
        opt.epsilon = 1e-30;
        opt.max_iters = 5000;
        const auto m = fit(data, KernelSpec::rbf(0.25), g, h, opt);
        ASSERT_EQ(m.trace.stop_reason, StopReason::grad_tol) << trial;
        const auto L = build_laplacian(data.features(), g);
        EXPECT_LE(gradient(m.theta, *m.gram, L, data, h).lpNorm<Eigen::Infinity>(), opt.grad_tol);
    }
}

TEST(Fit, SinglePositiveLabelPushesScoreUp) {
    Matrix X(1, 2);
    X << 0.3, -0.2;
    const LabeledSet data(X, std::vector<double>{1.0});
    const auto m = fit(data, KernelSpec::rbf(1.0), GraphConfig{}, Hyperparams{}, OptimizerConfig{});
    EXPECT_GT(predict_proba(m, X)(0), 0.5);
    EXPECT_EQ(predict_label(m, X), std::vector<int>{1});
}

TEST(Fit, WarnsWhenAllLabelsAgree) {
    const auto moons = make_two_moons(20, 0.1, 1);
    const LabeledSet data(moons.X, std::vector<double>{1.0, 1.0, 1.0});
    GraphConfig g;
    g.k = 3;
    const auto m = fit(data, KernelSpec::rbf(1.0), g, Hyperparams{}, OptimizerConfig{});
    ASSERT_EQ(m.warnings.size(), 1u);
}

TEST(Fit, KIsClampedOnTinyProblems) {
    Matrix X(3, 1);
    X << 0.0, 1.0, 2.0;
    const LabeledSet data(X, std::vector<double>{1.0, 0.0});
    EXPECT_NO_THROW(fit(data, KernelSpec::rbf(1.0), GraphConfig{}, Hyperparams{}, OptimizerConfig{}));
}

TEST(Predict, ZeroThetaGivesZeroScores) {
    Rng rng(10);
    TrainedModel m;
    m.support_points = std::make_shared<const Matrix>(Matrix::Random(5, 2));
    m.kernel = KernelSpec::rbf(1.0);
    m.theta = Vector::Zero(5);
    EXPECT_EQ(predict_score(m, Matrix::Random(3, 2)), Vector::Zero(3));
    EXPECT_EQ(predict_proba(m, Matrix::Random(3, 2)), Vector::Constant(3, 0.5));
    EXPECT_EQ(predict_label(m, Matrix::Random(3, 2)), std::vector<int>(3, 0));
}

TEST(Predict, SingleSupportPoint) {
    TrainedModel m;
    Matrix X(1, 2);
    X << 0.1, 0.2;
    m.support_points = std::make_shared<const Matrix>(X);
    m.kernel = KernelSpec::rbf(1.0);
    m.theta = Vector::Ones(1);
    EXPECT_EQ(predict_score(m, X)(0), 1.0);
}

TEST(Predict, MatchesDoubleLoop) {
    Rng rng(11);
    const Matrix S = Matrix::Random(6, 3), Q = Matrix::Random(4, 3);
    TrainedModel m;
    m.support_points = std::make_shared<const Matrix>(S);
    m.kernel = KernelSpec::rbf(0.7);
    m.theta = random_vector(rng, 6);
    const Vector f = predict_score(m, Q);
    for (Index q = 0; q < 4; ++q) {
        long double s = 0;
        for (Index i = 0; i < 6; ++i) s += m.theta(i) * std::exp(-0.7 * (S.row(i) - Q.row(q)).squaredNorm());
        EXPECT_NEAR(f(q), static_cast<double>(s), 1e-14);
    }
    EXPECT_THROW(predict_score(m, Matrix::Zero(1, 2)), DataError);
}

TEST(Predict, SupportScoresUseCachedGram) {
    Rng rng(12);
    const auto in = oracle::random_instance(rng, 3, 3, 2);
    TrainedModel m;
    m.support_points = std::make_shared<const Matrix>(in.X);
    m.kernel = in.K.spec;
    m.theta = random_vector(rng, 6);
    const Vector direct = predict_score_support(m);
    m.gram = std::make_shared<const GramMatrix>(in.K);
    EXPECT_LT((predict_score_support(m) - direct).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Probability, StrictlyInsideUnitIntervalAndMonotone) {
    Vector s(9);
    s << -1e6, -800, -50, -1, 0, 1, 50, 800, 1e6;
    const Vector p = proba_from_scores(s);
    EXPECT_EQ(p(4), 0.5);
    for (Index i = 0; i < s.size(); ++i) {
        EXPECT_GT(p(i), 0.0);
        EXPECT_LT(p(i), 1.0);
        if (i > 0) {
            EXPECT_LE(p(i - 1), p(i));
        }
    }
}

TEST(Probability, FarPositiveScoreTail) {
    TrainedModel m;
    Matrix X(1, 1);
    X << 0.0;
    m.support_points = std::make_shared<const Matrix>(X);
    m.kernel = KernelSpec::rbf(1.0);
    m.theta = Vector::Constant(1, 50.0);
    const double eps = predict_proba_complement(m, X)(0);
    EXPECT_GT(eps, 0.0);
    EXPECT_LT(eps, 1e-21);
    EXPECT_NEAR(eps, std::exp(-50.0), 1e-35);
    EXPECT_LT(predict_proba(m, X)(0), 1.0);
}

TEST(OneVsRest, SingleClassMatchesFit) {
    const auto moons = make_two_moons(30, 0.1, 2);
    std::vector<double> y = {1, 0, 1, 0};
    const LabeledSet data(moons.X, y);
    GraphConfig g;
    g.k = 4;
    const Hyperparams h{1e-2, 1e-2};
    const auto single = fit(data, KernelSpec::rbf(1.0), g, h, OptimizerConfig{});
    const auto ovr = fit_one_vs_rest(moons.X, {ClassTask{"a", {0, 1, 2, 3}, y}}, KernelSpec::rbf(1.0), g, h,
                                     OptimizerConfig{});
    ASSERT_EQ(ovr.models.size(), 1u);
    EXPECT_EQ(ovr.models[0].second.theta, single.theta);
}

TEST(OneVsRest, MirroredLabelsGiveNegatedTheta) {
    const auto moons = make_two_moons(40, 0.1, 4);
    std::vector<Index> rows = {0, 1, 2, 20, 21, 22};
    std::vector<double> ya = {1, 1, 1, 0, 0, 0}, yb = {0, 0, 0, 1, 1, 1};
    GraphConfig g;
    g.k = 5;
    const auto ovr = fit_one_vs_rest(moons.X, {ClassTask{"a", rows, ya}, ClassTask{"b", rows, yb}},
                                     KernelSpec::rbf(1.0), g, Hyperparams{1e-2, 1e-2}, OptimizerConfig{});
    ASSERT_EQ(ovr.models.size(), 2u);
    const Vector& ta = ovr.models[0].second.theta;
    const Vector& tb = ovr.models[1].second.theta;
    EXPECT_LT((ta + tb).lpNorm<Eigen::Infinity>(), 1e-12 * ta.lpNorm<Eigen::Infinity>());
}

TEST(OneVsRest, ManyClassesShareOneGram) {
    const auto moons = make_two_moons(200, 0.1, 6);
    Rng rng(13);
    Eigen::MatrixXi labels(200, 38);
    std::vector<std::string> names;
    for (Index c = 0; c < 38; ++c) {
        names.push_back("class" + std::to_string(c));
        for (Index r = 0; r < 200; ++r) labels(r, c) = static_cast<int>(rng.below(2));
    }
    OptimizerConfig opt;
    opt.max_iters = 5;
    const std::size_t before = gram_build_count();
    const auto ovr = fit_one_vs_rest(moons.X, labels, names, KernelSpec::rbf(1.0), GraphConfig{},
                                     Hyperparams{}, opt);
    EXPECT_EQ(gram_build_count() - before, 1u);
    ASSERT_EQ(ovr.models.size(), 38u);
    for (Index c = 0; c < 38; ++c) EXPECT_EQ(ovr.models[static_cast<std::size_t>(c)].first, names[static_cast<std::size_t>(c)]);
}

TEST(OneVsRest, ClassWithoutLabelsIsSkipped) {
    const auto moons = make_two_moons(20, 0.1, 7);
    GraphConfig g;
    g.k = 3;
    const auto ovr = fit_one_vs_rest(moons.X, {ClassTask{"a", {0, 15}, {1, 0}}, ClassTask{"empty", {}, {}}},
                                     KernelSpec::rbf(1.0), g, Hyperparams{}, OptimizerConfig{});
    EXPECT_EQ(ovr.models.size(), 1u);
    ASSERT_EQ(ovr.skipped.size(), 1u);
    EXPECT_EQ(ovr.skipped[0].first, "empty");
}
