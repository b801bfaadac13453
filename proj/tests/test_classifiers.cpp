#include "boundarylab/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace boundarylab;

namespace {

LabeledDataset random_binary(std::size_t n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset ds{"random", Role::train, Matrix(static_cast<Eigen::Index>(n), d), {}, 2};
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) ds.points(static_cast<Eigen::Index>(i), j) = rng.uniform(-1.0, 1.0);
        ds.labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    return ds;
}

// Full scan with an explicit (distance, index) sort.
double brute_knn_eta(const LabeledDataset& train, const Vector& x, int k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < train.dim(); ++j) {
            const double t = train.points(static_cast<Eigen::Index>(i), j) - x[j];
            s += t * t;
        }
        d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (int r = 0; r < k; ++r) sum += train.labels[d[static_cast<std::size_t>(r)].second];
    return sum / k;
}

// Gaussian elimination with partial pivoting.
std::vector<double> naive_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Knn, KEqualsNGivesGlobalMean) {
    const auto ds = random_binary(10, 2, 1);
    const auto m = knn_fit(ds, 10);
    double mean = 0;
    for (int y : ds.labels) mean += y;
    mean /= 10;
    Rng rng(2);
    for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(knn_predict_eta(m, vec2(rng.uniform(), rng.uniform())), mean);
}

TEST(Knn, OneNnFitsHalfmoonTrainingSet) {
    const auto ds = generate_halfmoon(500, 0.2, 3).first;
    EXPECT_EQ(accuracy(knn_fit(ds, 1), ds), 1.0);
}

TEST(Knn, TwoPointExamples) {
    LabeledDataset ds{"two", Role::train, Matrix(2, 2), {0, 1}, 2};
    ds.points << 0, 0, 1, 1;
    const auto m1 = knn_fit(ds, 1);
    EXPECT_EQ(knn_predict_eta(m1, vec2(0.1, 0)), 0.0);
    EXPECT_EQ(knn_predict(m1, vec2(0.1, 0)), 0);
    const auto m2 = knn_fit(ds, 2);
    EXPECT_EQ(knn_predict_eta(m2, vec2(0.7, -3)), 0.5);
    EXPECT_EQ(knn_predict(m2, vec2(0.7, -3)), 0);
}

TEST(Knn, RejectsKAboveN) {
    try {
        knn_fit(random_binary(5, 2, 0), 6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(Knn, MatchesFullScanOnHalfmoon) {
    const auto ds = generate_halfmoon(100, 0.2, 7).first;
    const auto m = knn_fit(ds, 5);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const Vector x = vec2(rng.uniform(-1.5, 2.5), rng.uniform(-1, 1.5));
        ASSERT_EQ(knn_predict_eta(m, x), brute_knn_eta(ds, x, 5));
    }
}

TEST(Knn, MatchesFullScanRandom) {
    const auto ds = random_binary(200, 3, 4);
    const auto m = knn_fit(ds, 7);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        Vector x(3);
        for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-1, 1);
        ASSERT_EQ(knn_predict_eta(m, x), brute_knn_eta(ds, x, 7));
    }
}

TEST(Knn, TiesGoToLowerIndex) {
    LabeledDataset ds{"tie", Role::train, Matrix(3, 1), {1, 0, 0}, 2};
    ds.points << -1, 1, 5;
    const auto idx = nearest_indices(ds.points, Vector::Zero(1), 2);
    EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(knn_predict(knn_fit(ds, 1), Vector::Zero(1)), 1);
}

TEST(Knn, EtaOnGridOfMultiplesOfOneOverK) {
    const auto ds = random_binary(60, 2, 9);
    const auto m = knn_fit(ds, 4);
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
        const double e = knn_predict_eta(m, vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)));
        ASSERT_DOUBLE_EQ(e * 4, std::round(e * 4));
    }
}

TEST(Knn, PermutationInvariantInGeneralPosition) {
    const auto ds = random_binary(80, 2, 12);
    std::vector<std::size_t> order(80);
    for (std::size_t i = 0; i < 80; ++i) order[i] = 79 - i;
    const auto a = knn_fit(ds, 3), b = knn_fit(ds.subset(order), 3);
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const Vector x = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        ASSERT_EQ(knn_predict_eta(a, x), knn_predict_eta(b, x));
    }
}

TEST(Nw, SinglePointWithinBandwidth) {
    LabeledDataset ds{"one", Role::train, Matrix(2, 1), {1, 0}, 2};
    ds.points << 0.0, 10.0;
    const auto m = nw_fit(ds, 0.5);
    EXPECT_EQ(nw_predict_eta(m, Vector::Constant(1, 0.2)), 1.0);
}

TEST(Nw, SymmetricPairGivesHalf) {
    LabeledDataset ds{"pair", Role::train, Matrix(2, 1), {0, 1}, 2};
    ds.points << -0.3, 0.3;
    for (auto k : {NwKernel::triangular, NwKernel::epanechnikov, NwKernel::boxcar}) {
        const auto m = nw_fit(ds, 1.0, k);
        EXPECT_DOUBLE_EQ(nw_predict_eta(m, Vector::Zero(1)), 0.5);
        EXPECT_EQ(nw_predict(m, Vector::Zero(1)), 0);
    }
}

TEST(Nw, BoxcarIsFixedRadiusAverage) {
    const auto ds = random_binary(150, 2, 14);
    const double h = 0.3;
    const auto m = nw_fit(ds, h, NwKernel::boxcar);
    Rng rng(15);
    for (int i = 0; i < 50; ++i) {
        const Vector x = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        double sum = 0;
        int cnt = 0;
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if ((ds.point(j) - x).norm() <= h) {
                sum += ds.labels[j];
                ++cnt;
            }
        }
        if (cnt == 0) continue;
        ASSERT_NEAR(nw_predict_eta(m, x), sum / cnt, 1e-12);
    }
}

TEST(Nw, MatchesWeightedAverageOracle) {
    const auto ds = random_binary(50, 2, 16);
    const auto m = nw_fit(ds, 0.4, NwKernel::triangular);
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        const Vector x = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        double num = 0, den = 0;
        for (std::size_t j = 0; j < ds.size(); ++j) {
            const double w = std::max(0.0, 1.0 - (ds.point(j) - x).norm() / 0.4);
            num += w * ds.labels[j];
            den += w;
        }
        if (den == 0) continue;
        ASSERT_NEAR(nw_predict_eta(m, x), num / den, 1e-12);
    }
}

TEST(Nw, EmptyNeighbourhoodFallsBackToNearestLabel) {
    LabeledDataset ds{"far", Role::train, Matrix(2, 1), {0, 1}, 2};
    ds.points << 0.0, 10.0;
    const auto m = nw_fit(ds, 0.1);
    EXPECT_EQ(nw_predict_eta(m, Vector::Constant(1, 8.0)), 1.0);
}

TEST(Nw, EtaWithinLabelRange) {
    const auto ds = random_binary(100, 2, 18);
    const auto m = nw_fit(ds, 0.2);
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        const double e = nw_predict_eta(m, vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)));
        ASSERT_GE(e, 0.0);
        ASSERT_LE(e, 1.0);
    }
}

TEST(Krr, OnePointLinearClosedForm) {
    LabeledDataset ds{"one", Role::train, Matrix(1, 2), {1}, 2};
    ds.points << 1, 0;
    const auto m = krr_fit(ds, 1.0, KernelSpec::linear());
    EXPECT_NEAR(m.alpha[0], 0.5, 1e-15);
    EXPECT_NEAR(krr_predict_eta(m, vec2(1, 0)), 0.5, 1e-15);
}

TEST(Krr, TinyLambdaInterpolates) {
    const auto ds = random_binary(30, 2, 20);
    // f(x_i) = y_i - lambda alpha_i, so the Gram matrix must be well conditioned
    const auto m = krr_fit(ds, 1e-8, KernelSpec::gaussian(50.0));
    for (std::size_t i = 0; i < ds.size(); ++i) ASSERT_NEAR(krr_predict_eta(m, ds.point(i)), ds.labels[i], 1e-4);
}

TEST(Krr, MatchesDenseSolveOracle) {
    const auto ds = random_binary(50, 3, 21);
    const auto kernel = KernelSpec::gaussian(1.5);
    const auto m = krr_fit(ds, 0.1, kernel);
    std::vector<std::vector<double>> a(50, std::vector<double>(50));
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        y[i] = ds.labels[i];
        for (std::size_t j = 0; j < 50; ++j) {
            a[i][j] = std::exp(-1.5 * (ds.point(i) - ds.point(j)).squaredNorm()) + (i == j ? 0.1 : 0.0);
        }
    }
    const auto alpha = naive_solve(a, y);
    Rng rng(22);
    for (int q = 0; q < 50; ++q) {
        Vector x(3);
        for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-1, 1);
        double f = 0;
        for (std::size_t i = 0; i < 50; ++i) f += alpha[i] * std::exp(-1.5 * (ds.point(i) - x).squaredNorm());
        ASSERT_NEAR(krr_predict_eta(m, x), f, 1e-8);
    }
}

TEST(Krr, DualResidualBelowTolerance) {
    const auto ds = random_binary(80, 2, 23);
    const auto m = krr_fit(ds, 0.05);
    Eigen::MatrixXd a = gram_matrix(ds.points, m.kernel);
    a.diagonal().array() += 0.05;
    Eigen::VectorXd y(80);
    for (int i = 0; i < 80; ++i) y[i] = ds.labels[static_cast<std::size_t>(i)];
    EXPECT_LE((a * m.alpha - y).norm(), 1e-8 * y.norm());
}

TEST(Krr, ObjectiveStationary) {
    const auto ds = random_binary(40, 2, 24);
    const auto m = krr_fit(ds, 0.3);
    const auto g = gram_matrix(ds.points, m.kernel);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y[i] = ds.labels[static_cast<std::size_t>(i)];
    const double base = krr_objective(g, y, 0.3, m.alpha);
    Rng rng(25);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd v = rng.normal_vector(40);
        v *= 1e-3 / v.norm();
        ASSERT_LE(base, krr_objective(g, y, 0.3, m.alpha + v));
    }
}

TEST(Krr, MedianHeuristicGamma) {
    Matrix p(3, 1);
    p << 0, 1, 3;
    // squared distances 1, 9, 4 -> median 4
    EXPECT_DOUBLE_EQ(median_heuristic_gamma(p), 1.0 / 8.0);
}

TEST(Krr, NonFiniteGramIsNumericError) {
    LabeledDataset ds{"big", Role::train, Matrix(2, 1), {0, 1}, 2};
    ds.points << 1e200, -1e200;
    try {
        krr_fit(ds, 1.0, KernelSpec::linear());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(Consistency, ErrorShrinksWithTrainingSize) {
    const auto gt = halfmoon_ground_truth(0.2);
    BetaSamplerConfig tc;
    tc.seed = 999;
    const auto test_pts = sample_beta_concentrated(gt, tc, 500);
    const std::vector<std::string> specs{"knn:5", "nw:0.15", "krr:gaussian:0.1"};
    for (const auto& spec : specs) {
        std::vector<double> err;
        for (std::size_t n : {100u, 400u, 1600u}) {
            double e = 0;
            for (std::uint64_t s = 0; s < 10; ++s) {
                BetaSamplerConfig c;
                c.seed = split_seed(s, n);
                LabeledDataset tr{"tr", Role::train, sample_beta_concentrated(gt, c, n), {}, 2};
                tr.labels = sample_labels(gt, tr.points, split_seed(s, n + 1));
                const auto clf = fit_model(ModelSpec::parse(spec), tr);
                for (Eigen::Index i = 0; i < test_pts.rows(); ++i) {
                    const Vector x = row_vector(test_pts, i);
                    e += predict_label(clf, x) != gt.bayes_label(x);
                }
            }
            err.push_back(e);
        }
        EXPECT_GE(err[0], err[1]) << spec;
        EXPECT_GE(err[1], err[2]) << spec;
    }
}

TEST(Serialization, RoundTripIsBitExact) {
    const auto ds = random_binary(30, 2, 26);
    std::vector<FittedClassifier> models{knn_fit(ds, 3), nw_fit(ds, 0.25, NwKernel::epanechnikov), krr_fit(ds, 0.2),
                                         fit_model(ModelSpec::parse("mlp:4"), ds, 1)};
    Rng rng(27);
    for (const auto& m : models) {
        const auto text = serialize_model(m);
        const auto back = deserialize_model(text);
        EXPECT_EQ(serialize_model(back), text);
        for (int i = 0; i < 20; ++i) {
            const Vector x = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
            ASSERT_EQ(predict_score(m, x), predict_score(back, x));
        }
    }
}

TEST(Serialization, RejectsWrongVersionAndGarbage) {
    auto j = model_to_json(knn_fit(random_binary(5, 1, 0), 1));
    j["version"] = 99;
    try {
        model_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
    try {
        deserialize_model("{not json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
    }
}

TEST(ModelSpec, ParsesAllKinds) {
    EXPECT_EQ(ModelSpec::parse("knn:7").k, 7);
    EXPECT_EQ(ModelSpec::parse("nw:0.3:boxcar").nw_kernel, NwKernel::boxcar);
    EXPECT_EQ(ModelSpec::parse("krr:linear:2").lambda, 2.0);
    EXPECT_EQ(ModelSpec::parse("mlp:8,4").train.hidden, (std::vector<int>{8, 4}));
    try {
        ModelSpec::parse("svm");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}
