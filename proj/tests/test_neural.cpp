#include "boundarylab/neural.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace boundarylab;

namespace {

double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-8});
    return (a - b).norm() / scale;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Vector xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (f(xp) - f(xm)) / (2 * h);
        xp[i] = xm[i] = x[i];
    }
    return g;
}

LabeledDataset blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset ds{"blobs", Role::train, Matrix(static_cast<Eigen::Index>(n), 2), {}, 2};
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        ds.points(static_cast<Eigen::Index>(i), 0) = (y ? 1.5 : -1.5) + 0.4 * rng.normal();
        ds.points(static_cast<Eigen::Index>(i), 1) = 0.4 * rng.normal();
        ds.labels.push_back(y);
    }
    return ds;
}

}  // namespace

TEST(Mlp, ZeroParametersGiveUniformProbabilities) {
    auto m = mlp_init({3, 4, 5}, 0);
    for (auto& w : m.weights) w.setZero();
    const auto r = mlp_forward(m, Vector::Ones(3));
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.probabilities[i], 0.2, 1e-15);
}

TEST(Mlp, SoftmaxShiftInvariant) {
    Eigen::VectorXd z(4);
    z << 0.3, -1.2, 2.0, 0.1;
    const Eigen::VectorXd p = softmax(z), q = softmax((z.array() + 17.5).matrix());
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

// Forward pass recomputed in long double.
TEST(Mlp, ForwardMatchesExtendedPrecision) {
    const auto m = mlp_init({5, 7, 6, 3}, 4);
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        const Vector x = rng.normal_vector(5);
        std::vector<long double> a(x.data(), x.data() + 5);
        for (std::size_t l = 0; l < m.layer_count(); ++l) {
            std::vector<long double> z(static_cast<std::size_t>(m.weights[l].rows()));
            for (Eigen::Index i = 0; i < m.weights[l].rows(); ++i) {
                long double s = m.biases[l][i];
                for (Eigen::Index j = 0; j < m.weights[l].cols(); ++j) s += static_cast<long double>(m.weights[l](i, j)) * a[static_cast<std::size_t>(j)];
                z[static_cast<std::size_t>(i)] = l + 1 == m.layer_count() ? s : 1.0L / (1.0L + std::exp(-s));
            }
            a = z;
        }
        long double mx = *std::max_element(a.begin(), a.end()), sum = 0;
        for (auto v : a) sum += std::exp(v - mx);
        const auto r = mlp_forward(m, x);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(r.probabilities[static_cast<Eigen::Index>(i)], static_cast<double>(std::exp(a[i] - mx) / sum), 1e-12);
        }
    }
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
    for (auto [d, c] : {std::pair{2, 2}, std::pair{8, 2}, std::pair{8, 10}, std::pair{784, 2}, std::pair{784, 10}}) {
        for (int t = 0; t < 20; ++t) {
            const auto m = mlp_init({d, 32, 32, c}, split_seed(static_cast<std::uint64_t>(d * 100 + c), static_cast<std::uint64_t>(t)));
            Rng rng(split_seed(7, static_cast<std::uint64_t>(t)));
            const Vector x = rng.normal_vector(d);
            const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
            const auto g = mlp_input_gradient(m, x, y);
            const auto fd = fd_gradient([&](const Vector& v) { return mlp_loss(m, v, y); }, x);
            ASSERT_LE(rel_error(g, fd), 1e-4) << d << "x" << c << " case " << t;
        }
    }
}

TEST(Mlp, LogitDifferenceGradientMatchesFiniteDifferences) {
    const auto m = mlp_init({6, 16, 3}, 9);
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const Vector x = rng.normal_vector(6);
        const auto jac = mlp_logit_jacobian(m, x);
        const Eigen::VectorXd w = (jac.row(2) - jac.row(0)).transpose();
        const auto fd = fd_gradient(
            [&](const Vector& v) {
                const auto z = mlp_forward(m, v).logits;
                return z[2] - z[0];
            },
            x);
        ASSERT_LE(rel_error(w, fd), 1e-4);
    }
}

TEST(Mlp, GradientVanishesAtSaturatedMinimum) {
    // Logistic model with a huge margin at x: loss ~ 0 and gradient ~ 0.
    MlpModel m;
    m.sizes = {1, 2};
    m.weights.push_back((Eigen::MatrixXd(2, 1) << -20.0, 20.0).finished());
    m.biases.push_back(Eigen::VectorXd::Zero(2));
    const auto g = mlp_input_gradient(m, Vector::Constant(1, 1.0), 1);
    EXPECT_LE(g.norm(), 1e-6);
}

TEST(Mlp, SeparableBlobsTrainToHighAccuracy) {
    const auto ds = blobs(200, 1);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 3;
    const auto r = mlp_train(ds, cfg);
    EXPECT_GE(mlp_accuracy(r.model, ds), 0.99);
    EXPECT_EQ(r.loss_trace.size(), 200u);
    for (double l : r.loss_trace) ASSERT_TRUE(std::isfinite(l));
}

TEST(Mlp, ZeroLearningRateKeepsInitialization) {
    const auto ds = blobs(40, 2);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    cfg.seed = 4;
    const auto r = mlp_train(ds, cfg);
    const auto init = mlp_init({2, 32, 32, 2}, split_seed(4, 0));
    for (std::size_t l = 0; l < init.layer_count(); ++l) {
        EXPECT_EQ(r.model.weights[l], init.weights[l]);
        EXPECT_EQ(r.model.biases[l], init.biases[l]);
    }
}

TEST(Mlp, TrainingIsDeterministic) {
    const auto ds = blobs(60, 5);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 11;
    const auto a = mlp_train(ds, cfg).model, b = mlp_train(ds, cfg).model;
    for (std::size_t l = 0; l < a.layer_count(); ++l) EXPECT_EQ(a.weights[l], b.weights[l]);
}

TEST(Mlp, DivergenceIsReported) {
    auto ds = blobs(40, 6);
    ds.points *= 1e300;  // updates of order lr overflow to inf
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 1e308;
    try {
        mlp_train(ds, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.kind() == ErrorKind::training_diverged || e.kind() == ErrorKind::numeric);
    }
}

TEST(Mlp, MnistOneVsSevenTestAccuracy) {
    const std::string dir = BOUNDARYLAB_TEST_DATA_DIR;
    const auto ds = load_mnist_idx(dir + "/mnist17-images.idx3-ubyte", dir + "/mnist17-labels.idx1-ubyte", std::set<int>{1, 7});
    auto [train, test] = stratified_split(ds, 1000, 500, 0);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 1;
    const auto m = mlp_train(train, cfg).model;
    EXPECT_GE(mlp_accuracy(m, test), 0.95);
}
