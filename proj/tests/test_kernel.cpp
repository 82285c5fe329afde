#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "lapklr/kernel.hpp"
#include "lapklr/random.hpp"

using namespace lapklr;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal();
    return X;
}

}  // namespace

TEST(EvalKernel, RbfOfIdenticalPointsIsOne) {
    Eigen::Vector2d x(0.3, 0.7);
    EXPECT_EQ(eval_kernel(KernelSpec::rbf(1.0), x, x), 1.0);
}

TEST(EvalKernel, RbfClosedForm) {
    Eigen::Vector2d x(0.0, 0.0), z(1.0, 0.0);
    EXPECT_NEAR(eval_kernel(KernelSpec::rbf(1.0), x, z), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(eval_kernel(KernelSpec::rbf(1.0), x, z), 0.367879, 1e-6);
}

TEST(EvalKernel, LinearIsDotProduct) {
    Eigen::Vector2d x(1.0, 2.0), z(3.0, 4.0);
    EXPECT_EQ(eval_kernel(KernelSpec::linear(), x, z), 11.0);
}

TEST(EvalKernel, Polynomial) {
    Eigen::Vector2d x(1.0, 2.0), z(3.0, 4.0);
    EXPECT_DOUBLE_EQ(eval_kernel(KernelSpec::polynomial(2, 1.0), x, z), 144.0);
}

TEST(EvalKernel, DimensionMismatchNamesBothDimensions) {
    Eigen::Vector2d x(1.0, 2.0);
    Eigen::Vector3d z(1.0, 2.0, 3.0);
    try {
        eval_kernel(KernelSpec::linear(), x, z);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('2'), std::string::npos);
        EXPECT_NE(msg.find('3'), std::string::npos);
    }
}

TEST(KernelSpec, Validation) {
    EXPECT_THROW(KernelSpec::rbf(0.0).validate(), ConfigError);
    EXPECT_THROW(KernelSpec::rbf(-1.0).validate(), ConfigError);
    EXPECT_THROW(KernelSpec::polynomial(0, 1.0).validate(), ConfigError);
    EXPECT_NO_THROW(KernelSpec::linear().validate());
    EXPECT_THROW(parse_kernel_family("sigmoid"), ConfigError);
}

TEST(GramMatrix, SinglePoint) {
    Matrix X(1, 2);
    X << 0.5, -1.0;
    const auto K = gram_matrix(KernelSpec::rbf(1.0), X);
    ASSERT_EQ(K.n(), 1);
    EXPECT_EQ(K.values(0, 0), 1.0);
}

TEST(GramMatrix, DuplicateRows) {
    Matrix X(2, 2);
    X << 0.1, 0.2, 0.1, 0.2;
    const auto K = gram_matrix(KernelSpec::rbf(1.0), X);
    EXPECT_EQ(K.values, Matrix::Ones(2, 2));
}

TEST(GramMatrix, RbfOffDiagonal) {
    Matrix X(2, 2);
    X << 0.0, 0.0, 1.0, 1.0;
    const auto K = gram_matrix(KernelSpec::rbf(0.5), X);
    // exp(-0.5 * 2)
    EXPECT_NEAR(K.values(0, 1), 0.36787944117144233, 1e-15);
    EXPECT_EQ(K.values(0, 1), K.values(1, 0));
}

TEST(GramMatrix, NonFiniteFeatureNamesRow) {
    Matrix X = Matrix::Zero(3, 2);
    X(2, 1) = std::nan("");
    try {
        gram_matrix(KernelSpec::rbf(1.0), X);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    }
}

TEST(GramMatrix, ExactlySymmetric) {
    Rng rng(3);
    const Matrix X = random_matrix(rng, 17, 4);
    for (auto spec : {KernelSpec::rbf(0.3), KernelSpec::linear(), KernelSpec::polynomial(3, 0.5)}) {
        const auto K = gram_matrix(spec, X);
        EXPECT_TRUE((K.values.array() == K.values.transpose().array()).all());
    }
}

TEST(GramMatrix, PermutationConjugationIsBitIdentical) {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(15));
        const Matrix X = random_matrix(rng, n, 3);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<int>(perm));
        Eigen::PermutationMatrix<Eigen::Dynamic> P(n);
        for (Eigen::Index i = 0; i < n; ++i) P.indices()(i) = perm[static_cast<std::size_t>(i)];
        for (auto spec : {KernelSpec::rbf(0.7), KernelSpec::linear()}) {
            const Matrix K = gram_matrix(spec, X).values;
            const Matrix Kp = gram_matrix(spec, Matrix(P * X)).values;
            const Matrix expected = P * K * P.transpose();
            EXPECT_TRUE((Kp.array() == expected.array()).all());
        }
    }
}

TEST(GramMatrix, RbfEntriesInUnitIntervalAndOneOnlyForIdenticalRows) {
    Rng rng(5);
    Matrix X = random_matrix(rng, 12, 2);
    X.row(7) = X.row(2);
    const auto K = gram_matrix(KernelSpec::rbf(1.0), X);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
            EXPECT_GT(K.values(i, j), 0.0);
            EXPECT_LE(K.values(i, j), 1.0);
            const bool same = X.row(i) == X.row(j);
            EXPECT_EQ(K.values(i, j) == 1.0, same) << i << "," << j;
        }
}

TEST(GramMatrix, NumericallyPositiveSemidefinite) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(49));
        const Matrix X = random_matrix(rng, n, 1 + static_cast<Eigen::Index>(rng.below(5)));
        const auto K = gram_matrix(KernelSpec::rbf(0.2 + rng.uniform()), X);
        Eigen::SelfAdjointEigenSolver<Matrix> es(K.values, Eigen::EigenvaluesOnly);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8) << "n=" << n;
        for (auto spec : {KernelSpec::linear(), KernelSpec::polynomial(2, 1.0)}) {
            const auto G = gram_matrix(spec, X);
            Eigen::SelfAdjointEigenSolver<Matrix> eg(G.values, Eigen::EigenvaluesOnly);
            EXPECT_GE(eg.eigenvalues().minCoeff(), -1e-8 * G.values.cwiseAbs().maxCoeff());
        }
    }
}

TEST(CrossKernel, SelfCrossEqualsGram) {
    Rng rng(8);
    const Matrix X = random_matrix(rng, 6, 3);
    const auto spec = KernelSpec::rbf(0.4);
    EXPECT_TRUE((cross_kernel(spec, X, X).array() == gram_matrix(spec, X).values.array()).all());
}

TEST(CrossKernel, QueryAtTrainingPoint) {
    Rng rng(9);
    const Matrix X = random_matrix(rng, 5, 2);
    const Matrix q = X.row(3);
    const Matrix row = cross_kernel(KernelSpec::rbf(1.0), X, q);
    ASSERT_EQ(row.rows(), 1);
    EXPECT_EQ(row(0, 3), 1.0);
    for (Eigen::Index i = 0; i < 5; ++i)
        if (i != 3) {
            EXPECT_LT(row(0, i), 1.0);
        }
}

TEST(CrossKernel, MatchesEntrywiseLoop) {
    Rng rng(10);
    const Matrix Xq = random_matrix(rng, 3, 2);
    const Matrix Xt = random_matrix(rng, 2, 2);
    const auto spec = KernelSpec::rbf(0.9);
    const Matrix C = cross_kernel(spec, Xt, Xq);
    ASSERT_EQ(C.rows(), 3);
    ASSERT_EQ(C.cols(), 2);
    for (Eigen::Index q = 0; q < 3; ++q)
        for (Eigen::Index i = 0; i < 2; ++i)
            EXPECT_NEAR(C(q, i), std::exp(-0.9 * (Xq.row(q) - Xt.row(i)).squaredNorm()), 1e-15);
}

TEST(CrossKernel, DimensionMismatch) {
    EXPECT_THROW(cross_kernel(KernelSpec::linear(), Matrix::Zero(2, 3), Matrix::Zero(1, 2)), DataError);
}

TEST(DefaultGamma, InverseOfDimensionTimesVariance) {
    Matrix X(2, 2);
    X << 0.0, 0.0, 2.0, 2.0;  // mean 1, variance 1
    EXPECT_DOUBLE_EQ(default_rbf_gamma(X), 0.5);
    EXPECT_DOUBLE_EQ(default_rbf_gamma(Matrix::Ones(3, 4)), 0.25);
}
