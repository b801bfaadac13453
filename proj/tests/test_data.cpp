#include "boundarylab/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace boundarylab;

namespace {

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / ("boundarylab_" + name)).string(); }

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

std::string be32(std::uint32_t v) {
    std::string s(4, '\0');
    s[0] = static_cast<char>((v >> 24) & 0xff);
    s[1] = static_cast<char>((v >> 16) & 0xff);
    s[2] = static_cast<char>((v >> 8) & 0xff);
    s[3] = static_cast<char>(v & 0xff);
    return s;
}

// Asymptotic Kolmogorov-Smirnov statistic against U(lo, hi).
double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace

TEST(Halfmoon, BalancedClasses) {
    auto [ds, gt] = generate_halfmoon(1800, 0.2, 1);
    EXPECT_EQ(ds.size(), 1800u);
    EXPECT_EQ(ds.dim(), 2);
    EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 0), 900);
    EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 900);
    ds.validate();
}

TEST(Halfmoon, TinyNoiseGivesPurePosterior) {
    auto [ds, gt] = generate_halfmoon(2, 0.01, 0);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(gt.eta(ds.point(i)), ds.labels[i], 0.01);
}

TEST(Halfmoon, RejectsTooFewPoints) {
    try {
        generate_halfmoon(1, 0.2, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(Halfmoon, DeterministicPerSeed) {
    auto a = generate_halfmoon(300, 0.2, 4).first;
    auto b = generate_halfmoon(300, 0.2, 4).first;
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.labels, b.labels);
}

// Monte-Carlo posterior over the continuous arcs, with its own generator.
TEST(Halfmoon, PosteriorMatchesMonteCarlo) {
    const double sigma = 0.2;
    const auto gt = halfmoon_ground_truth(sigma);
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> t_dist(0.0, std::numbers::pi);
    for (auto [px, py] : {std::pair{0.0, 1.0}, std::pair{0.5, 0.25}, std::pair{1.2, -0.1}}) {
        double p0 = 0.0, p1 = 0.0;
        for (int i = 0; i < 1000000; ++i) {
            const double t = t_dist(gen);
            const double a0x = std::cos(t), a0y = std::sin(t);
            const double a1x = 1.0 - std::cos(t), a1y = 0.5 - std::sin(t);
            p0 += std::exp(-((px - a0x) * (px - a0x) + (py - a0y) * (py - a0y)) / (2 * sigma * sigma));
            p1 += std::exp(-((px - a1x) * (px - a1x) + (py - a1y) * (py - a1y)) / (2 * sigma * sigma));
        }
        Vector x(2);
        x << px, py;
        EXPECT_NEAR(gt.eta(x), p1 / (p0 + p1), 0.005) << px << "," << py;
    }
}

TEST(Halfmoon, ArcSwapSymmetry) {
    const auto gt = halfmoon_ground_truth(0.2);
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        Vector x(2), tx(2);
        x << rng.uniform(-1.5, 2.5), rng.uniform(-1.0, 1.5);
        tx << 1.0 - x[0], 0.5 - x[1];
        ASSERT_NEAR(gt.eta(tx), 1.0 - gt.eta(x), 1e-6);
    }
}

TEST(Halfmoon, EtaInUnitIntervalOnSupport) {
    const auto gt = halfmoon_ground_truth(0.2);
    Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        Vector x(2);
        x << rng.uniform(gt.support.lower[0], gt.support.upper[0]), rng.uniform(gt.support.lower[1], gt.support.upper[1]);
        const double e = gt.eta(x);
        ASSERT_GE(e, 0.0);
        ASSERT_LE(e, 1.0);
    }
}

TEST(Abalone, EncodesSexAndThresholdsAge) {
    const auto ds = parse_abalone("M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\nF,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\nI,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7\n");
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.dim(), 8);
    EXPECT_EQ(ds.points(0, 0), 0.0);
    EXPECT_EQ(ds.points(0, 1), 0.455);
    EXPECT_EQ(ds.points(0, 7), 0.15);
    EXPECT_EQ(ds.labels[0], 1);
    EXPECT_EQ(ds.points(1, 0), 0.5);
    EXPECT_EQ(ds.labels[1], 0);
    EXPECT_EQ(ds.points(2, 0), 1.0);
}

TEST(Abalone, MalformedRowReportsLine) {
    try {
        parse_abalone("M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\nX,1,2,3,4,5,6,7,8\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
    }
}

TEST(Abalone, MissingFileIsIoError) {
    try {
        load_abalone("/nonexistent/abalone.data");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(Mnist, HandCraftedPair) {
    const auto img = temp_path("img.idx3");
    const auto lbl = temp_path("lbl.idx1");
    write_bytes(img, be32(0x803) + be32(2) + be32(2) + be32(2) + std::string("\x00\xff\x80\x01", 4) + std::string("\xff\x00\x00\x00", 4));
    write_bytes(lbl, be32(0x801) + be32(2) + std::string("\x07\x01", 2));
    const auto ds = load_mnist_idx(img, lbl);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.dim(), 4);
    EXPECT_EQ(ds.points(0, 1), 1.0);
    EXPECT_EQ(ds.points(0, 0), 0.0);
    EXPECT_EQ(ds.points(1, 0), 1.0);
    EXPECT_EQ(ds.labels[0], 7);
    const auto bin = load_mnist_idx(img, lbl, std::set<int>{1, 7});
    EXPECT_EQ(bin.class_count, 2);
    EXPECT_EQ(bin.labels, (std::vector<int>{1, 0}));
    std::remove(img.c_str());
    std::remove(lbl.c_str());
}

TEST(Mnist, BadMagicAndCountMismatch) {
    const auto img = temp_path("img2.idx3");
    const auto lbl = temp_path("lbl2.idx1");
    write_bytes(img, be32(0x801) + be32(1) + be32(1) + be32(1) + std::string("\x00", 1));
    write_bytes(lbl, be32(0x801) + be32(1) + std::string("\x01", 1));
    try {
        load_mnist_idx(img, lbl);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
    write_bytes(img, be32(0x803) + be32(2) + be32(1) + be32(1) + std::string("\x00\x00", 2));
    try {
        load_mnist_idx(img, lbl);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::consistency);
    }
    std::remove(img.c_str());
    std::remove(lbl.c_str());
}

TEST(Mnist, ShippedOneVsSevenFiles) {
    const std::string dir = BOUNDARYLAB_TEST_DATA_DIR;
    const auto ds = load_mnist_idx(dir + "/mnist17-images.idx3-ubyte", dir + "/mnist17-labels.idx1-ubyte", std::set<int>{1, 7});
    EXPECT_EQ(ds.dim(), 784);
    EXPECT_EQ(ds.class_count, 2);
    EXPECT_GE(ds.size(), 1500u);
    EXPECT_GE(ds.points.minCoeff(), 0.0);
    EXPECT_LE(ds.points.maxCoeff(), 1.0);
    auto [train, test] = stratified_split(ds, 1000, 500, 0);
    EXPECT_EQ(train.size(), 1000u);
    EXPECT_EQ(test.size(), 500u);
    const auto again = stratified_split(ds, 1000, 500, 0);
    EXPECT_EQ(again.first.labels, train.labels);
}

TEST(BetaSampler, BetaZeroIsUniform) {
    const auto gt = halfmoon_ground_truth(0.2);
    BetaSamplerConfig cfg;
    cfg.seed = 3;
    const auto pts = sample_beta_concentrated(gt, cfg, 2000);
    const double crit = 1.628 / std::sqrt(2000.0);  // alpha = 0.01
    for (Eigen::Index j = 0; j < 2; ++j) {
        std::vector<double> xs;
        for (Eigen::Index i = 0; i < pts.rows(); ++i) xs.push_back(pts(i, j));
        EXPECT_LT(ks_uniform(xs, gt.support.lower[j], gt.support.upper[j]), crit);
    }
}

TEST(BetaSampler, LargerBetaConcentratesNearBoundary) {
    const auto gt = halfmoon_ground_truth(0.2);
    auto near_fraction = [&](double beta) {
        BetaSamplerConfig cfg;
        cfg.beta = beta;
        cfg.seed = 8;
        const auto pts = sample_beta_concentrated(gt, cfg, 2000);
        int near = 0;
        for (Eigen::Index i = 0; i < pts.rows(); ++i) near += std::abs(gt.eta(row_vector(pts, i)) - 0.5) < 0.1;
        return near / 2000.0;
    };
    EXPECT_GT(near_fraction(2.0), near_fraction(0.0));
}

TEST(BetaSampler, ClampSaturatesAcceptance) {
    EXPECT_EQ(beta_acceptance(0.5, 2.0, 1e-3), 1.0);
    EXPECT_EQ(beta_acceptance(0.5005, 2.0, 1e-3), 1.0);
    EXPECT_LT(beta_acceptance(0.9, 2.0, 1e-3), 1.0);
}

// 1-D eta(x) = x on [0, 1]; decile masses against the exact integral of
// max(|x - 1/2|, eps)^-beta.
TEST(BetaSampler, DecileHistogramMatchesDensity) {
    const double beta = 0.5, eps = 1e-3;
    GroundTruthModel gt{[](const Vector& x) { return x[0]; }, Box{Vector::Zero(1), Vector::Ones(1)}, 2};
    BetaSamplerConfig cfg;
    cfg.beta = beta;
    cfg.density_floor = eps;
    cfg.seed = 21;
    const std::size_t n = 100000;
    const auto pts = sample_beta_concentrated(gt, cfg, n);
    // antiderivative of max(u, eps)^-beta in u = |x - 1/2| from 0
    auto F = [&](double u) {
        if (u <= eps) return u * std::pow(eps, -beta);
        return eps * std::pow(eps, -beta) + (std::pow(u, 1 - beta) - std::pow(eps, 1 - beta)) / (1 - beta);
    };
    auto mass = [&](double a, double b) {
        auto G = [&](double x) { return x < 0.5 ? -F(0.5 - x) : F(x - 0.5); };
        return G(b) - G(a);
    };
    const double total = mass(0.0, 1.0);
    std::vector<int> counts(10, 0);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) ++counts[std::min<std::size_t>(9, static_cast<std::size_t>(pts(i, 0) * 10))];
    for (int b = 0; b < 10; ++b) {
        const double expected = n * mass(b / 10.0, (b + 1) / 10.0) / total;
        EXPECT_NEAR(counts[static_cast<std::size_t>(b)] / expected, 1.0, 0.05) << "bin " << b;
    }
}

TEST(BetaSampler, StallReportsAcceptanceRate) {
    GroundTruthModel gt{[](const Vector&) { return 1.0; }, Box{Vector::Zero(1), Vector::Ones(1)}, 2};
    BetaSamplerConfig cfg;
    cfg.beta = 3.0;
    cfg.max_rejections = 1000;
    try {
        sample_beta_concentrated(gt, cfg, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::sampler_stalled);
        EXPECT_NE(std::string(e.what()).find("acceptance rate"), std::string::npos);
    }
}

TEST(Csv, RoundTripIsExact) {
    auto ds = generate_halfmoon(50, 0.2, 6).first;
    const auto text = dataset_to_csv(ds);
    EXPECT_EQ(text.rfind("# schema=v1\nx0,x1,label\n", 0), 0u);
    const auto back = dataset_from_csv(text);
    EXPECT_EQ(back.points, ds.points);
    EXPECT_EQ(back.labels, ds.labels);
}
