#pragma once

#include "boundarylab/data.hpp"
#include "boundarylab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace boundarylab {

// ---------------------------------------------------------------------------
// Correctness regions

/// Cell-centre grid over a support box with the ground truth cached.
struct RegionGrid {
    Box support;
    int resolution = 0;
    Matrix points;
    std::vector<double> eta;
    std::vector<int> bayes;

    std::size_t size() const { return eta.size(); }
};

inline RegionGrid make_region_grid(const GroundTruthModel& gt, int resolution, unsigned jobs = 1) {
    const auto d = gt.dim();
    require(d >= 1, ErrorKind::invalid_argument, "ground truth has no dimension");
    require(d <= 3, ErrorKind::unsupported, "correctness grid needs d <= 3 (d = " + std::to_string(d) + "); use test-set accuracy instead");
    require(resolution >= 1, ErrorKind::invalid_argument, "grid resolution must be >= 1");
    std::size_t total = 1;
    for (Eigen::Index j = 0; j < d; ++j) total *= static_cast<std::size_t>(resolution);
    RegionGrid g{gt.support, resolution, Matrix(static_cast<Eigen::Index>(total), d), std::vector<double>(total), std::vector<int>(total)};
    const Vector step = (gt.support.upper - gt.support.lower) / resolution;
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        for (Eigen::Index j = d; j-- > 0;) {
            const auto cell = static_cast<double>(rest % static_cast<std::size_t>(resolution));
            rest /= static_cast<std::size_t>(resolution);
            g.points(static_cast<Eigen::Index>(i), j) = gt.support.lower[j] + (cell + 0.5) * step[j];
        }
    }
    parallel_for(total, jobs, [&](std::size_t i) {
        g.eta[i] = gt.eta(row_vector(g.points, static_cast<Eigen::Index>(i)));
        g.bayes[i] = g.eta[i] > 0.5 ? 1 : 0;
    });
    return g;
}

struct RegionReport {
    Matrix points;
    std::vector<double> eta;
    std::vector<double> margin;
    std::vector<int> label;
    std::vector<int> bayes;
    std::vector<char> correct;
    double correct_fraction = 0.0;
    double correct_measure = 0.0;
};

inline RegionReport correctness_region(const LabelFn& clf, const RegionGrid& grid) {
    RegionReport r;
    r.points = grid.points;
    r.eta = grid.eta;
    r.bayes = grid.bayes;
    const auto n = grid.size();
    r.margin.resize(n);
    r.label.resize(n);
    r.correct.resize(n);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.margin[i] = std::abs(grid.eta[i] - 0.5);
        r.label[i] = clf(row_vector(grid.points, static_cast<Eigen::Index>(i)));
        r.correct[i] = r.label[i] == grid.bayes[i];
        ok += r.correct[i] ? 1 : 0;
    }
    r.correct_fraction = n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n);
    r.correct_measure = r.correct_fraction * grid.support.volume();
    return r;
}

inline RegionReport correctness_region(const FittedClassifier& clf, const GroundTruthModel& gt, int grid_resolution = 200) {
    require(model_dim(clf) == gt.dim(), ErrorKind::invalid_argument, "classifier and ground truth dimensions differ");
    const auto grid = make_region_grid(gt, grid_resolution);
    return correctness_region([&](const Vector& x) { return predict_label(clf, x); }, grid);
}

/// Fraction of grid cells where clf agrees with Bayes, without building a report.
inline double correct_fraction(const LabelFn& clf, const RegionGrid& grid) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) ok += clf(row_vector(grid.points, static_cast<Eigen::Index>(i))) == grid.bayes[i];
    return grid.size() == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(grid.size());
}

// ---------------------------------------------------------------------------
// r_p(x0)

/// Empirical r_p: the ceil(p N)-th smallest distance from x0 to the samples.
inline double radius_rp(const Matrix& samples, const Vector& x0, double p) {
    require(p > 0.0 && p <= 1.0, ErrorKind::invalid_argument, "p must lie in (0, 1]");
    require(samples.rows() >= 1, ErrorKind::invalid_argument, "radius_rp needs samples");
    require(samples.cols() == x0.size(), ErrorKind::invalid_argument, "radius_rp: dimension mismatch");
    const auto n = static_cast<std::size_t>(samples.rows());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    Eigen::VectorXd d2 = (samples.rowwise() - x0.transpose()).rowwise().squaredNorm();
    std::nth_element(d2.data(), d2.data() + rank - 1, d2.data() + n);
    return std::sqrt(d2[static_cast<Eigen::Index>(rank - 1)]);
}

namespace detail {

/// Area of {u in [0,X], v in [0,Y], u^2 + v^2 <= r^2} for X, Y >= 0.
inline double quarter_disk_rect_area(double X, double Y, double r) {
    if (r <= 0.0 || X <= 0.0 || Y <= 0.0) return 0.0;
    auto S = [r](double u) { return 0.5 * (u * std::sqrt(std::max(0.0, r * r - u * u)) + r * r * std::asin(std::clamp(u / r, -1.0, 1.0))); };
    const double xc = std::min(X, r);
    const double u_star = Y >= r ? 0.0 : std::sqrt(r * r - Y * Y);
    const double flat = std::min(u_star, xc);
    return Y * flat + (S(xc) - S(flat));
}

inline double signed_quarter(double X, double Y, double r) {
    const double s = (X < 0 ? -1.0 : 1.0) * (Y < 0 ? -1.0 : 1.0);
    return s * quarter_disk_rect_area(std::abs(X), std::abs(Y), r);
}

}  // namespace detail

/// Volume of the ball B(x0, r) intersected with the box; d = 1 and d = 2.
inline double ball_box_measure(const Box& box, const Vector& x0, double r) {
    const auto d = box.dim();
    require(d == 1 || d == 2, ErrorKind::unsupported, "analytic ball measure is implemented for d = 1, 2");
    if (d == 1) return std::max(0.0, std::min(box.upper[0], x0[0] + r) - std::max(box.lower[0], x0[0] - r));
    const double a = box.lower[0] - x0[0], b = box.upper[0] - x0[0];
    const double c = box.lower[1] - x0[1], e = box.upper[1] - x0[1];
    using detail::signed_quarter;
    return signed_quarter(b, e, r) - signed_quarter(a, e, r) - signed_quarter(b, c, r) + signed_quarter(a, c, r);
}

/// Analytic r_p for the uniform distribution on a box, by bisection on the
/// closed-form ball measure.
inline double radius_rp_uniform_box(const Box& box, const Vector& x0, double p) {
    require(p > 0.0 && p <= 1.0, ErrorKind::invalid_argument, "p must lie in (0, 1]");
    require(x0.size() == box.dim(), ErrorKind::invalid_argument, "radius_rp: dimension mismatch");
    const auto d = box.dim();
    require(d == 1 || d == 2, ErrorKind::unsupported, "analytic r_p is implemented for d = 1, 2");
    double far = 0.0;  // distance to the farthest corner
    for (Eigen::Index j = 0; j < d; ++j) {
        const double m = std::max(std::abs(x0[j] - box.lower[j]), std::abs(x0[j] - box.upper[j]));
        far += m * m;
    }
    far = std::sqrt(far);
    if (p == 1.0) return far;
    const double target = p * box.volume();
    double lo = 0.0, hi = far;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, far); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ball_box_measure(box, x0, mid) >= target) hi = mid;
        else lo = mid;
    }
    return hi;
}

// ---------------------------------------------------------------------------
// Theorem constants and bounds

struct Thm1Params {
    std::size_t n = 1000;
    std::size_t k = 50;
    int d = 2;
    double delta = 0.05;
    double alpha = 1.0;
    double lipschitz = 1.0;
    double c_dp = 1.0;

    void validate() const {
        require(n >= 1 && k >= 1 && k <= n, ErrorKind::invalid_argument, "need 1 <= k <= n");
        require(d >= 1, ErrorKind::invalid_argument, "d must be >= 1");
        require(delta > 0.0 && delta < 0.5, ErrorKind::invalid_argument, "delta must lie in (0, 1/2)");
        require(alpha > 0.0 && alpha <= 1.0, ErrorKind::invalid_argument, "alpha must lie in (0, 1]");
        require(lipschitz >= 0.0 && c_dp > 0.0, ErrorKind::invalid_argument, "lipschitz must be >= 0 and c_dp > 0");
    }
};

struct Thm1Constants {
    double c0 = 0.0;
    double delta_p = 0.0;
    double p = 0.0;  // k/n + delta_p, the mass level of the radius
};

inline Thm1Constants thm1_constants(const Thm1Params& prm) {
    prm.validate();
    const double n = static_cast<double>(prm.n), k = static_cast<double>(prm.k);
    const double ln_n = std::log(n);
    // log(n^(d+1) + 1) without forming n^(d+1)
    const double log_term = (prm.d + 1) * ln_n + std::log1p(std::exp(-(prm.d + 1) * ln_n));
    Thm1Constants c;
    c.c0 = std::sqrt((2.0 * std::log(2.0) + log_term - std::log(prm.delta)) / (2.0 * k));
    const double a = prm.d * ln_n + std::log(1.0 / prm.delta);
    c.delta_p = prm.c_dp / n * (a + std::sqrt(k * a));
    c.p = k / n + c.delta_p;
    return c;
}

struct Thm1Indicator {
    bool inside = false;
    bool radius_defined = true;
    double lhs = 0.0;  // |eta - 1/2| - L r^alpha
};

/// Membership of x in the predicted correct set, with r_p taken from samples
/// of the training distribution.
inline Thm1Indicator thm1_correct_set_indicator(const GroundTruthModel& gt, const Thm1Params& prm, const Matrix& samples, const Vector& x) {
    const auto c = thm1_constants(prm);
    Thm1Indicator ind;
    if (c.p > 1.0) {
        ind.radius_defined = false;
        ind.lhs = -std::numeric_limits<double>::infinity();
        return ind;
    }
    const double r = radius_rp(samples, x, c.p);
    ind.lhs = std::abs(gt.eta(x) - 0.5) - prm.lipschitz * std::pow(r, prm.alpha);
    ind.inside = ind.lhs > c.c0;
    return ind;
}

/// Parameters shared by the Nadaraya-Watson and RKHS bounds.
struct KernelBoundParams {
    double n = 1e4;
    double h = 0.1;
    int d = 2;
    double lipschitz = 1.0;
    double C = 1.0;
    std::optional<double> t;  // default log^2 n
    double lambda = 1.0;      // RKHS only

    double t_value() const { return t ? *t : std::pow(std::log(n), 2); }
    void validate() const {
        require(n >= 1.0 && h > 0.0 && d >= 1, ErrorKind::invalid_argument, "need n >= 1, h > 0, d >= 1");
        require(lambda > 0.0, ErrorKind::invalid_argument, "lambda_n must be > 0");
    }
};

/// h L + 2t / (C n h^d mu - t); +inf when the denominator is not positive.
inline double thm2_bound(const KernelBoundParams& prm, double mu_at_x) {
    prm.validate();
    const double t = prm.t_value();
    const double den = prm.C * prm.n * std::pow(prm.h, prm.d) * mu_at_x - t;
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return prm.h * prm.lipschitz + 2.0 * t / den;
}

/// 2t / (C n h^d mu - t) + L h + C / (h (C n h^d - t)) sqrt(n / lambda).
inline double thm3_bound(const KernelBoundParams& prm, double mu_at_x) {
    prm.validate();
    const double t = prm.t_value();
    const double nh = prm.C * prm.n * std::pow(prm.h, prm.d);
    const double den1 = nh * mu_at_x - t;
    const double den2 = nh - t;
    if (!(den1 > 0.0) || !(den2 > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * t / den1 + prm.lipschitz * prm.h + prm.C / (prm.h * den2) * std::sqrt(prm.n / prm.lambda);
}

// ---------------------------------------------------------------------------
// Empirical checks

/// Largest central-difference gradient norm of eta over a cell-centre grid.
inline double estimate_lipschitz(const GroundTruthModel& gt, int resolution = 120, unsigned jobs = 1) {
    const auto grid = make_region_grid(gt, resolution, jobs);
    const auto d = gt.dim();
    const double step = 1e-5 * (gt.support.upper - gt.support.lower).maxCoeff();
    std::vector<double> norms(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        Vector x = row_vector(grid.points, static_cast<Eigen::Index>(i));
        double g2 = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            Vector a = x, b = x;
            a[j] += step;
            b[j] -= step;
            const double g = (gt.eta(a) - gt.eta(b)) / (2.0 * step);
            g2 += g * g;
        }
        norms[i] = std::sqrt(g2);
    });
    return norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), ErrorKind::invalid_argument, "spearman: length mismatch");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t s = 0; s < idx.size();) {
            std::size_t e = s;
            while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[s]]) ++e;
            const double avg = 0.5 * static_cast<double>(s + e) + 1.0;
            for (std::size_t q = s; q <= e; ++q) r[idx[q]] = avg;
            s = e + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    if (a.size() < 2) return 0.0;
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// Training set of size n from mu_beta with Bernoulli(eta) labels.
inline LabeledDataset sample_training_set(const GroundTruthModel& gt, double beta, std::size_t n, std::uint64_t seed,
                                          double density_floor = 1e-3) {
    BetaSamplerConfig cfg;
    cfg.beta = beta;
    cfg.density_floor = density_floor;
    cfg.seed = split_seed(seed, 0);
    LabeledDataset ds{"mu_beta", Role::train, sample_beta_concentrated(gt, cfg, n), {}, 2};
    ds.labels = sample_labels(gt, ds.points, split_seed(seed, 1));
    return ds;
}

struct BetaExperimentConfig {
    std::vector<double> betas{0.0, 1.0, 2.0};
    std::size_t n = 500;
    std::size_t seeds = 10;
    std::uint64_t base_seed = 0;
    int grid_resolution = 200;
    double density_floor = 1e-3;
    unsigned jobs = 1;
};

struct BetaTrial {
    std::size_t estimator = 0;
    std::size_t beta_index = 0;
    std::size_t seed = 0;
    double correct_fraction = 0.0;
};

struct BetaTrendReport {
    std::vector<double> betas;
    std::vector<std::string> estimators;
    std::vector<BetaTrial> trials;           // sorted by (estimator, beta, seed)
    std::vector<std::vector<double>> means;  // [estimator][beta]
    std::vector<double> spearman;            // per estimator
};

/// For each beta and seed: draw a training set from mu_beta, label it by
/// Bernoulli(eta), fit every estimator on the same set and measure its
/// correctness-region fraction on the grid.
inline BetaTrendReport beta_monotonicity_experiment(const GroundTruthModel& gt, const std::vector<std::pair<std::string, ModelSpec>>& estimators,
                                                    const BetaExperimentConfig& cfg) {
    require(!cfg.betas.empty(), ErrorKind::invalid_argument, "beta list is empty");
    require(!estimators.empty(), ErrorKind::invalid_argument, "no estimators given");
    require(cfg.seeds >= 1 && cfg.n >= 1, ErrorKind::invalid_argument, "need seeds >= 1 and n >= 1");
    for (double b : cfg.betas) require(b >= 0.0, ErrorKind::invalid_argument, "beta must be >= 0");
    const auto grid = make_region_grid(gt, cfg.grid_resolution, cfg.jobs);
    const std::size_t cells = cfg.betas.size() * cfg.seeds;
    std::vector<std::vector<double>> fractions(cells);
    parallel_for(cells, cfg.jobs, [&](std::size_t cell) {
        const std::size_t bi = cell / cfg.seeds, s = cell % cfg.seeds;
        const auto train = sample_training_set(gt, cfg.betas[bi], cfg.n, split_seed(split_seed(cfg.base_seed, s), bi), cfg.density_floor);
        for (const auto& [name, spec] : estimators) {
            const auto clf = fit_model(spec, train, split_seed(cfg.base_seed, s));
            fractions[cell].push_back(correct_fraction([&](const Vector& x) { return predict_label(clf, x); }, grid));
        }
    });
    BetaTrendReport rep;
    rep.betas = cfg.betas;
    for (const auto& e : estimators) rep.estimators.push_back(e.first);
    rep.means.assign(estimators.size(), std::vector<double>(cfg.betas.size(), 0.0));
    for (std::size_t e = 0; e < estimators.size(); ++e) {
        for (std::size_t bi = 0; bi < cfg.betas.size(); ++bi) {
            for (std::size_t s = 0; s < cfg.seeds; ++s) {
                const double f = fractions[bi * cfg.seeds + s][e];
                rep.trials.push_back({e, bi, s, f});
                rep.means[e][bi] += f / static_cast<double>(cfg.seeds);
            }
        }
        rep.spearman.push_back(spearman(cfg.betas, rep.means[e]));
    }
    return rep;
}

struct KnnBoundConfig {
    double beta = 0.0;
    std::size_t n = 500;
    std::size_t k = 25;
    double delta = 0.05;
    std::size_t trials = 200;
    int grid_resolution = 50;
    double alpha = 1.0;
    std::optional<double> lipschitz;  // default: estimate_lipschitz(gt)
    double lipschitz_scale = 1.0;
    double c_dp = 1.0;
    std::size_t reference_samples = 20000;
    double density_floor = 1e-3;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct KnnBoundTrial {
    std::size_t trial = 0;
    double max_error = 0.0;   // sup over grid of |eta_hat - eta|
    double max_excess = 0.0;  // sup over grid of |eta_hat - eta| - rhs
    bool violated = false;
    bool set_violated = false;  // some grid point of the predicted correct set misclassified
};

struct KnnBoundReport {
    Thm1Constants constants;
    double lipschitz = 0.0;
    bool radius_defined = true;
    std::size_t predicted_set_size = 0;
    double violation_fraction = 0.0;
    double set_violation_fraction = 0.0;
    std::vector<KnnBoundTrial> trials;
};

/// Monte-Carlo check of the uniform k-NN regression bound
/// |eta_hat(x) - eta(x)| < L r_{k/n + delta_p}(x)^alpha + C0 over a grid.
inline KnnBoundReport verify_knn_bound(const GroundTruthModel& gt, const KnnBoundConfig& cfg) {
    require(cfg.trials >= 1, ErrorKind::invalid_argument, "need trials >= 1");
    require(cfg.lipschitz_scale > 0.0, ErrorKind::invalid_argument, "lipschitz_scale must be > 0");
    const auto grid = make_region_grid(gt, cfg.grid_resolution, cfg.jobs);
    KnnBoundReport rep;
    rep.lipschitz = cfg.lipschitz_scale * (cfg.lipschitz ? *cfg.lipschitz : estimate_lipschitz(gt, 120, cfg.jobs));
    Thm1Params prm{cfg.n, cfg.k, static_cast<int>(gt.dim()), cfg.delta, cfg.alpha, rep.lipschitz, cfg.c_dp};
    rep.constants = thm1_constants(prm);
    rep.radius_defined = rep.constants.p <= 1.0;

    std::vector<double> rhs(grid.size(), std::numeric_limits<double>::infinity());
    std::vector<char> in_set(grid.size(), 0);
    if (rep.radius_defined) {
        BetaSamplerConfig ref_cfg;
        ref_cfg.beta = cfg.beta;
        ref_cfg.density_floor = cfg.density_floor;
        ref_cfg.seed = split_seed(cfg.seed, 0x5eedull << 32);
        const Matrix reference = sample_beta_concentrated(gt, ref_cfg, cfg.reference_samples);
        parallel_for(grid.size(), cfg.jobs, [&](std::size_t i) {
            const double r = radius_rp(reference, row_vector(grid.points, static_cast<Eigen::Index>(i)), rep.constants.p);
            const double slack = rep.lipschitz * std::pow(r, cfg.alpha);
            rhs[i] = slack + rep.constants.c0;
            in_set[i] = std::abs(grid.eta[i] - 0.5) - slack > rep.constants.c0;
        });
    }
    rep.predicted_set_size = static_cast<std::size_t>(std::count(in_set.begin(), in_set.end(), 1));

    rep.trials.resize(cfg.trials);
    parallel_for(cfg.trials, cfg.jobs, [&](std::size_t t) {
        const auto train = sample_training_set(gt, cfg.beta, cfg.n, split_seed(cfg.seed, t + 1), cfg.density_floor);
        const auto model = knn_fit(train, static_cast<int>(cfg.k));
        KnnBoundTrial tr;
        tr.trial = t;
        tr.max_excess = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double est = knn_predict_eta(model, row_vector(grid.points, static_cast<Eigen::Index>(i)));
            const double err = std::abs(est - grid.eta[i]);
            tr.max_error = std::max(tr.max_error, err);
            tr.max_excess = std::max(tr.max_excess, err - rhs[i]);
            if (err >= rhs[i]) tr.violated = true;
            if (in_set[i] && (est > 0.5 ? 1 : 0) != grid.bayes[i]) tr.set_violated = true;
        }
        rep.trials[t] = tr;
    });
    std::size_t v = 0, sv = 0;
    for (const auto& tr : rep.trials) {
        v += tr.violated;
        sv += tr.set_violated;
    }
    rep.violation_fraction = static_cast<double>(v) / static_cast<double>(cfg.trials);
    rep.set_violation_fraction = static_cast<double>(sv) / static_cast<double>(cfg.trials);
    return rep;
}

// ---------------------------------------------------------------------------
// Report CSVs

inline std::string region_to_csv(const RegionReport& r) {
    std::string out = "# schema=v1\n";
    const auto d = r.points.cols();
    for (Eigen::Index j = 0; j < d; ++j) out += "x" + std::to_string(j) + ",";
    out += "eta,margin,label,bayes,correct\n";
    for (std::size_t i = 0; i < r.eta.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out += detail::format_double(r.points(static_cast<Eigen::Index>(i), j)) + ",";
        out += detail::format_double(r.eta[i]) + "," + detail::format_double(r.margin[i]) + "," + std::to_string(r.label[i]) + "," +
               std::to_string(r.bayes[i]) + "," + (r.correct[i] ? "1" : "0") + "\n";
    }
    return out;
}

inline std::string beta_trend_to_csv(const BetaTrendReport& r) {
    std::string out = "# schema=v1\nestimator,beta,seed,correct_fraction\n";
    for (const auto& t : r.trials) {
        out += r.estimators[t.estimator] + "," + detail::format_double(r.betas[t.beta_index]) + "," + std::to_string(t.seed) + "," +
               detail::format_double(t.correct_fraction) + "\n";
    }
    return out;
}

inline std::string beta_trend_summary(const BetaTrendReport& r) {
    std::ostringstream os;
    os.precision(6);
    for (std::size_t e = 0; e < r.estimators.size(); ++e) {
        os << r.estimators[e] << ":";
        for (std::size_t b = 0; b < r.betas.size(); ++b) os << " beta=" << r.betas[b] << " mean=" << r.means[e][b];
        os << " spearman=" << r.spearman[e] << " sign=" << (r.spearman[e] > 0 ? "+" : r.spearman[e] < 0 ? "-" : "0") << "\n";
    }
    return os.str();
}

inline std::string knn_bound_to_csv(const KnnBoundReport& r) {
    std::string out = "# schema=v1\ntrial,max_error,max_excess,violated,set_violated\n";
    for (const auto& t : r.trials) {
        out += std::to_string(t.trial) + "," + detail::format_double(t.max_error) + "," + detail::format_double(t.max_excess) + "," +
               (t.violated ? "1" : "0") + "," + (t.set_violated ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace boundarylab
