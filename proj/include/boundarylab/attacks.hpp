#pragma once

#include "boundarylab/classifiers.hpp"
#include "boundarylab/model.hpp"
#include "boundarylab/neural.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace boundarylab {

enum class AttackMethod { direct, rba_approx, rba_exact, kernel_sub, bbox_opt, fgsm, pgd, deepfool, cw };

inline const char* to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::direct: return "direct";
        case AttackMethod::rba_approx: return "rba";
        case AttackMethod::rba_exact: return "rba_exact";
        case AttackMethod::kernel_sub: return "kernel_sub";
        case AttackMethod::bbox_opt: return "bbox";
        case AttackMethod::fgsm: return "fgsm";
        case AttackMethod::pgd: return "pgd";
        case AttackMethod::deepfool: return "deepfool";
        case AttackMethod::cw: return "cw";
    }
    return "direct";
}

inline const std::vector<std::string>& attack_names() {
    static const std::vector<std::string> names{"direct", "rba", "rba_approx", "rba_exact", "kernel_sub", "bbox", "bbox_opt",
                                                "fgsm",   "pgd", "deepfool",   "cw"};
    return names;
}

inline AttackMethod parse_attack(const std::string& name) {
    if (name == "direct") return AttackMethod::direct;
    if (name == "rba" || name == "rba_approx") return AttackMethod::rba_approx;
    if (name == "rba_exact") return AttackMethod::rba_exact;
    if (name == "kernel_sub") return AttackMethod::kernel_sub;
    if (name == "bbox" || name == "bbox_opt") return AttackMethod::bbox_opt;
    if (name == "fgsm") return AttackMethod::fgsm;
    if (name == "pgd") return AttackMethod::pgd;
    if (name == "deepfool") return AttackMethod::deepfool;
    if (name == "cw") return AttackMethod::cw;
    std::string valid;
    for (const auto& n : attack_names()) valid += (valid.empty() ? "" : ", ") + n;
    fail(ErrorKind::invalid_argument, "unknown attack '" + name + "'; valid: " + valid);
}

/// True for attacks that need white-box access to a k-NN victim.
inline bool is_knn_attack(AttackMethod m) {
    return m == AttackMethod::direct || m == AttackMethod::rba_approx || m == AttackMethod::rba_exact || m == AttackMethod::kernel_sub;
}

inline bool is_gradient_attack(AttackMethod m) {
    return m == AttackMethod::fgsm || m == AttackMethod::pgd || m == AttackMethod::deepfool || m == AttackMethod::cw;
}

struct AdversarialExample {
    Vector original;
    Vector perturbed;
    double perturbation_l2 = 0.0;
    double perturbation_linf = 0.0;
    AttackMethod attack = AttackMethod::direct;
    bool success = false;
    std::size_t queries_used = 0;
    int original_label = 0;
    int perturbed_label = 0;
    int iterations = 0;
};

inline AdversarialExample make_example(Vector original, Vector perturbed, AttackMethod attack, int original_label, int perturbed_label) {
    AdversarialExample a;
    const Vector delta = perturbed - original;
    a.perturbation_l2 = delta.norm();
    a.perturbation_linf = linf_norm(delta);
    a.original = std::move(original);
    a.perturbed = std::move(perturbed);
    a.attack = attack;
    a.original_label = original_label;
    a.perturbed_label = perturbed_label;
    a.success = original_label != perturbed_label;
    return a;
}

/// original + scale * (perturbed - original); norms scale linearly.
inline AdversarialExample scale_perturbation(const AdversarialExample& adv, double scale, const LabelFn& victim) {
    require(scale >= 0.0 && std::isfinite(scale), ErrorKind::invalid_argument, "scale must be >= 0");
    AdversarialExample out = adv;
    out.perturbed = adv.original + scale * (adv.perturbed - adv.original);
    out.perturbation_l2 = scale * adv.perturbation_l2;
    out.perturbation_linf = scale * adv.perturbation_linf;
    out.perturbed_label = victim(out.perturbed);
    out.success = out.perturbed_label != out.original_label;
    return out;
}

// ---------------------------------------------------------------------------
// k-NN attacks

namespace detail {

inline std::size_t nearest_with_label_other_than(const KnnModel& m, const Vector& x, int label) {
    require_dim(m.points, x);
    const Eigen::VectorXd d2 = squared_distances(m.points, x);
    std::size_t best = m.size();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.labels[i] == label) continue;
        if (best == m.size() || d2[static_cast<Eigen::Index>(i)] < d2[static_cast<Eigen::Index>(best)]) best = i;
    }
    if (best == m.size()) fail(ErrorKind::attack_infeasible, "training set has no point with a label other than " + std::to_string(label));
    return best;
}

}  // namespace detail

/// Moves x a distance r toward its nearest training point whose label differs
/// from the victim's prediction at x.
inline AdversarialExample direct_attack(const KnnModel& model, const Vector& x, double r) {
    require(r >= 0.0 && std::isfinite(r), ErrorKind::invalid_argument, "direct attack radius must be >= 0");
    const int y = knn_predict(model, x);
    const std::size_t j = detail::nearest_with_label_other_than(model, x, y);
    const Vector dir = row_vector(model.points, static_cast<Eigen::Index>(j)) - x;
    const double len = dir.norm();
    Vector adv = len > 0.0 ? Vector(x + (r / len) * dir) : x;
    const int y_adv = knn_predict(model, adv);
    return make_example(x, std::move(adv), AttackMethod::direct, y, y_adv);
}

/// factor * half the distance from x to its nearest opposite-label point.
inline double direct_radius(const KnnModel& model, const Vector& x, double factor = 1.05) {
    const int y = knn_predict(model, x);
    const std::size_t j = detail::nearest_with_label_other_than(model, x, y);
    return factor * 0.5 * (row_vector(model.points, static_cast<Eigen::Index>(j)) - x).norm();
}

struct HalfspaceSet {
    Matrix normals;  // one row per constraint: normals.row(i) . z <= offsets[i]
    Eigen::VectorXd offsets;
};

struct ProjectionResult {
    Vector point;
    int cycles = 0;
    double residual = 0.0;  // max normalized violation at exit
    bool converged = false;
};

namespace detail {

inline double max_violation(const HalfspaceSet& hs, const Eigen::VectorXd& norms2, const Vector& z) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < hs.normals.rows(); ++i) {
        if (norms2[i] == 0.0) continue;
        v = std::max(v, (hs.normals.row(i).dot(z) - hs.offsets[i]) / std::sqrt(norms2[i]));
    }
    return v;
}

/// Lawson-Hanson non-negative least squares: min ||E u - f|| subject to u >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& e, const Eigen::VectorXd& f, int max_outer = 0) {
    const auto m = e.cols();
    if (max_outer <= 0) max_outer = static_cast<int>(3 * m + 10);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    std::vector<char> passive(static_cast<std::size_t>(m), 0);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, e.cwiseAbs().maxCoeff()) * static_cast<double>(std::max(e.rows(), m));
    auto solve_passive = [&](Eigen::VectorXd& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < m; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Eigen::MatrixXd ep(e.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) ep.col(static_cast<Eigen::Index>(c)) = e.col(idx[c]);
        const Eigen::VectorXd sp = ep.completeOrthogonalDecomposition().solve(f);
        s = Eigen::VectorXd::Zero(m);
        for (std::size_t c = 0; c < idx.size(); ++c) s[idx[c]] = sp[static_cast<Eigen::Index>(c)];
    };
    for (int outer = 0; outer < max_outer; ++outer) {
        const Eigen::VectorXd w = e.transpose() * (f - e * u);
        Eigen::Index t = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
                best = w[j];
                t = j;
            }
        }
        if (t < 0) break;
        passive[static_cast<std::size_t>(t)] = 1;
        for (int inner = 0; inner < 3 * m + 10; ++inner) {
            Eigen::VectorXd s;
            solve_passive(s);
            double alpha = 1.0;
            bool clipped = false;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
                    const double denom = u[j] - s[j];
                    const double a = denom > 0.0 ? u[j] / denom : 0.0;
                    if (!clipped || a < alpha) alpha = a;
                    clipped = true;
                }
            }
            if (!clipped) {
                u = s;
                break;
            }
            u += alpha * (s - u);
            for (Eigen::Index j = 0; j < m; ++j) {
                if (passive[static_cast<std::size_t>(j)] && u[j] <= tol) {
                    passive[static_cast<std::size_t>(j)] = 0;
                    u[j] = 0.0;
                }
            }
        }
    }
    return u;
}

/// Exact projection of `start` onto {z : A z <= b} through the least-distance
/// reduction to NNLS. Rows are normalised first; zero rows are skipped.
inline std::optional<Vector> least_distance_project(const Vector& start, const HalfspaceSet& hs, const Eigen::VectorXd& norms2) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < hs.normals.rows(); ++i)
        if (norms2[i] > 0.0) rows.push_back(i);
    const auto d = start.size();
    const auto m = static_cast<Eigen::Index>(rows.size());
    // w = z - start satisfies (-a_i / |a_i|) . w >= (a_i . start - b_i) / |a_i|
    Eigen::MatrixXd e(d + 1, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto i = rows[static_cast<std::size_t>(c)];
        const double len = std::sqrt(norms2[i]);
        e.col(c).head(d) = -hs.normals.row(i).transpose() / len;
        e(d, c) = (hs.normals.row(i).dot(start) - hs.offsets[i]) / len;
    }
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d + 1);
    f[d] = 1.0;
    const Eigen::VectorXd u = nnls(e, f);
    const Eigen::VectorXd r = e * u - f;
    if (!(std::abs(r[d]) > 1e-14)) return std::nullopt;  // infeasible
    return Vector(start - r.head(d) / r[d]);
}

}  // namespace detail

/// Dykstra's alternating projections onto the intersection of halfspaces.
/// Small steps do not imply optimality (Dykstra can stall short of the
/// projection), so on settling, and after 500 cycles, the exact
/// least-distance solution is tried and kept when feasible and no farther.
inline ProjectionResult dykstra_project(const Vector& start, const HalfspaceSet& hs, double tol = 1e-8, int max_cycles = 10000) {
    const auto m = hs.normals.rows();
    const auto d = start.size();
    Eigen::VectorXd norms2(m);
    for (Eigen::Index i = 0; i < m; ++i) norms2[i] = hs.normals.row(i).squaredNorm();
    Matrix increments = Matrix::Zero(m, d);
    Vector z = start;
    ProjectionResult res;
    for (int cycle = 1; cycle <= max_cycles; ++cycle) {
        const Vector before = z;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (norms2[i] == 0.0) continue;
            Vector y = z + increments.row(i).transpose();
            const double excess = hs.normals.row(i).dot(y) - hs.offsets[i];
            Vector projected = excess > 0.0 ? Vector(y - (excess / norms2[i]) * hs.normals.row(i).transpose()) : y;
            increments.row(i) = (y - projected).transpose();
            z = std::move(projected);
        }
        const double violation = detail::max_violation(hs, norms2, z);
        res.cycles = cycle;
        res.residual = violation;
        const bool settled = (z - before).norm() <= tol && violation <= tol;
        if (settled || cycle == 500 || cycle == max_cycles) {
            if (auto exact = detail::least_distance_project(start, hs, norms2)) {
                const double v = detail::max_violation(hs, norms2, *exact);
                if (v <= tol && (!settled || (*exact - start).norm() <= (z - start).norm())) {
                    z = std::move(*exact);
                    res.residual = v;
                    res.converged = true;
                    break;
                }
            }
            if (settled) {
                res.converged = true;
                break;
            }
        }
    }
    res.point = std::move(z);
    return res;
}

struct RbaConfig {
    std::size_t candidates = 10;
    bool exact = false;
    double tolerance = 1e-8;
    int max_cycles = 10000;
    double inside_offset = 1e-6;
    std::size_t exact_limit = 500;
    std::size_t initial_constraints = 24;
};

/// Euclidean projection of x onto the 1-NN Voronoi cell of training point j,
/// with constraint generation: Dykstra runs on a working set of bisector
/// halfspaces that grows until no constraint over the full set is violated.
inline ProjectionResult project_onto_voronoi_cell(const KnnModel& model, std::size_t j, const Vector& x, const RbaConfig& cfg = {}) {
    const Vector xj = row_vector(model.points, static_cast<Eigen::Index>(j));
    const auto n = model.size();
    const double xj2 = xj.squaredNorm();
    std::vector<char> in_set(n, 0);
    std::vector<std::size_t> working;
    auto add = [&](std::size_t i) {
        if (i != j && !in_set[i] && (model.points.row(static_cast<Eigen::Index>(i)) - xj.transpose()).squaredNorm() > 0.0) {
            in_set[i] = 1;
            working.push_back(i);
        }
    };
    for (auto i : nearest_indices(model.points, xj, cfg.initial_constraints + 1)) add(i);
    for (auto i : nearest_indices(model.points, x, cfg.initial_constraints / 2 + 1)) add(i);

    const Eigen::VectorXd point_norms = model.points.rowwise().squaredNorm();
    for (;;) {
        HalfspaceSet hs{Matrix(static_cast<Eigen::Index>(working.size()), model.dim()), Eigen::VectorXd(static_cast<Eigen::Index>(working.size()))};
        for (std::size_t r = 0; r < working.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(working[r]);
            hs.normals.row(static_cast<Eigen::Index>(r)) = 2.0 * (model.points.row(i) - xj.transpose());
            hs.offsets[static_cast<Eigen::Index>(r)] = point_norms[i] - xj2;
        }
        auto res = dykstra_project(x, hs, cfg.tolerance, cfg.max_cycles);
        if (!res.converged) {
            std::ostringstream msg;
            msg << "Dykstra projection did not converge in " << res.cycles << " cycles (residual " << res.residual << ")";
            fail(ErrorKind::numeric, msg.str());
        }
        // full check: z must be at least as close to x_j as to every other point
        const Eigen::VectorXd d2 = detail::squared_distances(model.points, res.point);
        const double dj = d2[static_cast<Eigen::Index>(j)];
        std::vector<std::pair<double, std::size_t>> violated;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j || in_set[i]) continue;
            const double gap = dj - d2[static_cast<Eigen::Index>(i)];
            const double scale = 2.0 * std::sqrt(std::max((model.points.row(static_cast<Eigen::Index>(i)) - xj.transpose()).squaredNorm(), 1e-300));
            if (gap / scale > cfg.tolerance) violated.emplace_back(gap / scale, i);
        }
        if (violated.empty()) return res;
        std::sort(violated.begin(), violated.end(), [](auto a, auto b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t r = 0; r < std::min<std::size_t>(violated.size(), 16); ++r) add(violated[r].second);
        for (auto i : nearest_indices(model.points, res.point, 8)) add(i);
    }
}

/// Region-based attack on a 1-NN victim: minimum-norm move of x into a
/// Voronoi cell of an opposite-label training point, searched over the
/// `candidates` nearest such points (all of them when exact), then pushed
/// `inside_offset` toward the cell's site.
inline AdversarialExample rba_attack(const KnnModel& model, const Vector& x, const RbaConfig& cfg = {}) {
    require(model.k == 1, ErrorKind::unsupported, "region-based attack is implemented for 1-NN only (k = " + std::to_string(model.k) + ")");
    require(!cfg.exact || model.size() <= cfg.exact_limit, ErrorKind::unsupported,
            "exact region-based attack is limited to n <= " + std::to_string(cfg.exact_limit));
    require(cfg.exact || cfg.candidates >= 1, ErrorKind::invalid_argument, "rba needs at least one candidate");
    const int y = knn_predict(model, x);
    const Eigen::VectorXd d2 = detail::squared_distances(model.points, x);
    std::vector<std::size_t> opposite;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (model.labels[i] != y) opposite.push_back(i);
    if (opposite.empty()) fail(ErrorKind::attack_infeasible, "no training point with a label other than " + std::to_string(y));
    std::sort(opposite.begin(), opposite.end(), [&](std::size_t a, std::size_t b) {
        const double da = d2[static_cast<Eigen::Index>(a)], db = d2[static_cast<Eigen::Index>(b)];
        return da < db || (da == db && a < b);
    });
    if (!cfg.exact && opposite.size() > cfg.candidates) opposite.resize(cfg.candidates);

    // Any z in cell j satisfies ||x - z|| >= (||x - x_j|| - ||x - nn(x)||) / 2.
    const double nn_dist = std::sqrt(d2.minCoeff());
    double best = std::numeric_limits<double>::infinity();
    Vector best_point = x;
    std::size_t best_site = opposite.front();
    for (auto j : opposite) {
        const double lower = 0.5 * (std::sqrt(d2[static_cast<Eigen::Index>(j)]) - nn_dist);
        if (lower >= best) break;
        const auto proj = project_onto_voronoi_cell(model, j, x, cfg);
        const double dist = (proj.point - x).norm();
        if (dist < best) {
            best = dist;
            best_point = proj.point;
            best_site = j;
        }
    }
    const Vector toward = row_vector(model.points, static_cast<Eigen::Index>(best_site)) - best_point;
    if (toward.norm() > 0.0) best_point += cfg.inside_offset * toward / toward.norm();
    const int y_adv = knn_predict(model, best_point);
    return make_example(x, std::move(best_point), cfg.exact ? AttackMethod::rba_exact : AttackMethod::rba_approx, y, y_adv);
}

// ---------------------------------------------------------------------------
// Kernel substitute

/// Smoothed k-NN: class probabilities p_c(x) = sum over training points z of
/// class c of softmax_z(-||z - x||^2 / c).
inline double kernel_substitute_log_prob(const Matrix& points, const std::vector<int>& labels, const Vector& x, int cls, double c) {
    const Eigen::VectorXd a = -detail::squared_distances(points, x) / c;
    const double m_all = a.maxCoeff();
    double s_all = 0.0, s_cls = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double e = std::exp(a[i] - m_all);
        s_all += e;
        if (labels[static_cast<std::size_t>(i)] == cls) s_cls += e;
    }
    return std::log(s_cls) - std::log(s_all);
}

/// Gradient of log p_cls(x): E_{w | cls}[da/dx] - E_w[da/dx] with
/// da_z/dx = 2 (z - x) / c.
inline Eigen::VectorXd kernel_substitute_log_prob_gradient(const Matrix& points, const std::vector<int>& labels, const Vector& x, int cls,
                                                           double c) {
    const Eigen::VectorXd a = -detail::squared_distances(points, x) / c;
    double m_cls = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (labels[static_cast<std::size_t>(i)] == cls) m_cls = std::max(m_cls, a[i]);
    if (!std::isfinite(m_cls)) return Eigen::VectorXd::Zero(x.size());
    const double m_all = a.maxCoeff();
    Eigen::VectorXd mean_all = Eigen::VectorXd::Zero(x.size()), mean_cls = Eigen::VectorXd::Zero(x.size());
    double s_all = 0.0, s_cls = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double e = std::exp(a[i] - m_all);
        const Eigen::VectorXd diff = points.row(i).transpose() - x;
        s_all += e;
        mean_all += e * diff;
        if (labels[static_cast<std::size_t>(i)] == cls) {
            const double ec = std::exp(a[i] - m_cls);
            s_cls += ec;
            mean_cls += ec * diff;
        }
    }
    return (2.0 / c) * (mean_cls / s_cls - mean_all / s_all);
}

/// Median over (up to 200) training points of the squared distance to their
/// 10th nearest neighbour.
inline double kernel_substitute_default_c(const KnnModel& model) {
    const auto n = model.size();
    if (n < 2) return 1.0;
    std::vector<double> d2;
    const std::size_t stride = std::max<std::size_t>(1, n / 200);
    for (std::size_t i = 0; i < n; i += stride) {
        const Vector xi = row_vector(model.points, static_cast<Eigen::Index>(i));
        const auto nn = nearest_indices(model.points, xi, std::min<std::size_t>(n, 11));
        d2.push_back((model.points.row(static_cast<Eigen::Index>(nn.back())) - xi.transpose()).squaredNorm());
    }
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    return *mid > 0.0 ? *mid : 1.0;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

/// One FGSM step of size epsilon on the substitute's cross-entropy at the
/// victim's own label; success is judged on the real k-NN victim.
inline AdversarialExample kernel_substitute_attack(const KnnModel& model, const Vector& x, double epsilon, double c, bool clip_box = false) {
    require(c > 0.0 && std::isfinite(c), ErrorKind::invalid_argument, "kernel substitute temperature c must be > 0");
    require(epsilon >= 0.0, ErrorKind::invalid_argument, "epsilon must be >= 0");
    const int y = knn_predict(model, x);
    const Eigen::VectorXd grad = -kernel_substitute_log_prob_gradient(model.points, model.labels, x, y, c);
    Vector adv = x + epsilon * grad.unaryExpr([](double v) { return sign0(v); });
    if (clip_box) adv = clip_unit_box(std::move(adv));
    const int y_adv = knn_predict(model, adv);
    return make_example(x, std::move(adv), AttackMethod::kernel_sub, y, y_adv);
}

// ---------------------------------------------------------------------------
// Black-box (label-only) optimisation attack

/// Label oracle that counts every invocation.
class CountingOracle {
public:
    explicit CountingOracle(LabelFn f) : f_(std::move(f)) {}
    int operator()(const Vector& x) {
        ++count_;
        return f_(x);
    }
    std::size_t count() const { return count_; }

private:
    LabelFn f_;
    std::size_t count_ = 0;
};

struct BboxConfig {
    std::size_t directions = 200;
    double bs_tol = 1e-5;
    double ray_init = 0.01;
    double ray_growth = 2.0;
    double ray_cap = 1e3;
    std::size_t refine_iterations = 100;
    double refine_step = 0.2;
    std::uint64_t seed = 0;
    std::vector<Vector> start_directions;  // tried before the random ones; need not be unit
};

namespace detail {

/// Distance along unit direction theta to the first label change, to within
/// bs_tol. With a finite `upper`, only checks whether the boundary is closer
/// than `upper` (one query) before bisecting on [0, upper].
inline double boundary_distance(CountingOracle& oracle, const Vector& x, int y, const Vector& theta, const BboxConfig& cfg, double upper) {
    double lo = 0.0, hi;
    if (std::isfinite(upper)) {
        if (oracle(x + upper * theta) == y) return std::numeric_limits<double>::infinity();
        hi = upper;
    } else {
        double lambda = cfg.ray_init;
        for (;;) {
            if (oracle(x + lambda * theta) != y) break;
            lo = lambda;
            lambda *= cfg.ray_growth;
            if (lambda > cfg.ray_cap) return std::numeric_limits<double>::infinity();
        }
        hi = lambda;
    }
    while (hi - lo > cfg.bs_tol) {
        const double mid = 0.5 * (lo + hi);
        if (oracle(x + mid * theta) != y) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace detail

/// Minimises g(theta) = distance to the boundary along theta over the start
/// directions and random ones, then refines the best direction by
/// zeroth-order local search.
inline AdversarialExample bbox_opt_attack(CountingOracle& oracle, const Vector& x, int y, const BboxConfig& cfg = {}) {
    require(cfg.directions + cfg.start_directions.size() >= 1, ErrorKind::invalid_argument, "bbox needs at least one direction");
    require(cfg.bs_tol > 0.0 && cfg.ray_init > 0.0 && cfg.ray_growth > 1.0, ErrorKind::invalid_argument, "bad bbox search parameters");
    const std::size_t start_count = oracle.count();
    Rng rng(cfg.seed);
    const auto d = x.size();
    double best = std::numeric_limits<double>::infinity();
    Vector best_theta = Vector::Zero(d);
    auto random_unit = [&] {
        Vector u = rng.normal_vector(d);
        return Vector(u / u.norm());
    };
    auto try_direction = [&](const Vector& theta) {
        const double g = detail::boundary_distance(oracle, x, y, theta, cfg, best);
        if (g < best) {
            best = g;
            best_theta = theta;
        }
    };
    for (const auto& s : cfg.start_directions) {
        require(s.size() == d, ErrorKind::invalid_argument, "bbox start direction has the wrong dimension");
        const double n = s.norm();
        if (n > 0.0 && std::isfinite(n)) try_direction(s / n);
    }
    for (std::size_t i = 0; i < cfg.directions; ++i) try_direction(random_unit());
    if (!std::isfinite(best)) {
        fail(ErrorKind::attack_infeasible, "no label change within ray cap " + std::to_string(cfg.ray_cap) + " along " +
                                               std::to_string(cfg.directions + cfg.start_directions.size()) + " directions");
    }
    double step = cfg.refine_step;
    int misses = 0;
    for (std::size_t it = 0; it < cfg.refine_iterations; ++it) {
        Vector candidate = best_theta + step * random_unit();
        candidate /= candidate.norm();
        const double g = detail::boundary_distance(oracle, x, y, candidate, cfg, best);
        if (g < best) {
            best = g;
            best_theta = candidate;
            misses = 0;
        } else if (++misses >= 10) {
            step *= 0.5;
            misses = 0;
        }
    }
    Vector adv = x + best * best_theta;
    const int y_adv = oracle(adv);
    auto ex = make_example(x, std::move(adv), AttackMethod::bbox_opt, y, y_adv);
    ex.queries_used = oracle.count() - start_count;
    return ex;
}

// ---------------------------------------------------------------------------
// Gradient attacks on an MLP

inline AdversarialExample fgsm(const MlpModel& model, const Vector& x, int y, double epsilon, bool clip_box = false) {
    require(epsilon >= 0.0, ErrorKind::invalid_argument, "epsilon must be >= 0");
    const Eigen::VectorXd grad = mlp_input_gradient(model, x, y);
    Vector adv = x + epsilon * grad.unaryExpr([](double v) { return sign0(v); });
    if (clip_box) adv = clip_unit_box(std::move(adv));
    const int y0 = mlp_predict(model, x);
    const int y1 = mlp_predict(model, adv);
    return make_example(x, std::move(adv), AttackMethod::fgsm, y0, y1);
}

/// Signed-gradient ascent projected onto the l-inf ball of radius epsilon
/// around x (and the unit box when clip_box).
inline AdversarialExample pgd(const MlpModel& model, const Vector& x, int y, double epsilon, double step_size, int steps,
                              bool clip_box = false, const std::function<void(const Vector&)>& on_iterate = {}) {
    require(epsilon >= 0.0 && step_size >= 0.0, ErrorKind::invalid_argument, "epsilon and step_size must be >= 0");
    require(steps >= 1, ErrorKind::invalid_argument, "pgd needs steps >= 1");
    Vector cur = x;
    for (int t = 0; t < steps; ++t) {
        const Eigen::VectorXd grad = mlp_input_gradient(model, cur, y);
        cur += step_size * grad.unaryExpr([](double v) { return sign0(v); });
        cur = cur.cwiseMax((x.array() - epsilon).matrix()).cwiseMin((x.array() + epsilon).matrix());
        if (clip_box) cur = clip_unit_box(std::move(cur));
        if (on_iterate) on_iterate(cur);
    }
    auto ex = make_example(x, cur, AttackMethod::pgd, mlp_predict(model, x), mlp_predict(model, cur));
    ex.iterations = steps;
    return ex;
}

/// Iterative linearisation toward the closest logit-difference hyperplane.
/// Each step overshoots the linearised boundary by 1e-9 in length so points
/// landing exactly on a tie still cross; the accumulated perturbation is
/// scaled by (1 + overshoot) at the end.
inline AdversarialExample deepfool(const MlpModel& model, const Vector& x, double overshoot = 0.02, int max_iter = 50, bool clip_box = false) {
    require(overshoot >= 0.0, ErrorKind::invalid_argument, "overshoot must be >= 0");
    require(max_iter >= 1, ErrorKind::invalid_argument, "max_iter must be >= 1");
    constexpr double kPush = 1e-9;
    const int y0 = mlp_predict(model, x);
    Vector cur = x;
    int iterations = 0;
    while (iterations < max_iter && mlp_predict(model, cur) == y0) {
        const auto cache = mlp_forward_cache(model, cur);
        const Eigen::MatrixXd jac = mlp_logit_jacobian(model, cur);
        double best_ratio = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_w;
        double best_f = 0.0;
        for (int k = 0; k < model.class_count(); ++k) {
            if (k == y0) continue;
            const Eigen::VectorXd w = (jac.row(k) - jac.row(y0)).transpose();
            const double f = cache.logits[k] - cache.logits[y0];
            const double wn = w.norm();
            if (wn == 0.0) continue;
            const double ratio = std::abs(f) / wn;
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best_w = w;
                best_f = f;
            }
        }
        ++iterations;
        if (!std::isfinite(best_ratio)) break;  // flat logits: no direction to follow
        const double wn = best_w.norm();
        cur += (std::abs(best_f) / wn + kPush) * best_w / wn;
        if (clip_box) cur = clip_unit_box(std::move(cur));
    }
    Vector adv = x + (1.0 + overshoot) * (cur - x);
    if (clip_box) adv = clip_unit_box(std::move(adv));
    auto ex = make_example(x, std::move(adv), AttackMethod::deepfool, y0, -1);
    ex.perturbed_label = mlp_predict(model, ex.perturbed);
    ex.success = ex.perturbed_label != y0;
    ex.iterations = iterations;
    return ex;
}

struct CwConfig {
    std::optional<int> target;      // targeted attack toward this class
    std::optional<int> true_label;  // untargeted: move away from this (default: model prediction)
    double c_lo = 1e-3;
    double c_hi = 1e2;
    int search_steps = 9;
    int iterations = 200;
    double learning_rate = 1e-2;
    double kappa = 0.0;
};

/// Carlini-Wagner L2 in tanh space: minimise ||x' - x||^2 + c f(x') with
/// x' = (tanh(w) + 1) / 2, Adam on w, binary search over c. Returns the
/// smallest-L2 adversarial iterate seen, or the last iterate when none.
inline AdversarialExample cw_l2(const MlpModel& model, const Vector& x, const CwConfig& cfg = {}) {
    require((x.array() >= 0.0).all() && (x.array() <= 1.0).all(), ErrorKind::invalid_argument, "C&W requires x in [0,1]^d");
    require(cfg.c_lo > 0.0 && cfg.c_hi >= cfg.c_lo && cfg.search_steps >= 1 && cfg.iterations >= 1, ErrorKind::invalid_argument, "bad C&W config");
    const int y0 = mlp_predict(model, x);
    const int ref = cfg.target ? *cfg.target : (cfg.true_label ? *cfg.true_label : y0);
    require(ref >= 0 && ref < model.class_count(), ErrorKind::invalid_argument, "C&W label outside model classes");
    const bool targeted = cfg.target.has_value();
    auto adversarial = [&](int pred) { return targeted ? pred == ref : pred != ref; };

    auto finish = [&](Vector adv, int iterations) {
        auto ex = make_example(x, std::move(adv), AttackMethod::cw, y0, -1);
        ex.perturbed_label = mlp_predict(model, ex.perturbed);
        ex.success = ex.perturbed_label != y0;
        ex.iterations = iterations;
        return ex;
    };
    // x itself already satisfies the goal: zero perturbation is optimal.
    if (adversarial(y0)) return finish(x, 0);

    const auto d = x.size();
    const Eigen::VectorXd w0 = ((2.0 * x.array() - 1.0) * (1.0 - 1e-6)).unaryExpr([](double v) { return std::atanh(v); });
    double best_l2 = std::numeric_limits<double>::infinity();
    Vector best_adv = x, last = x;
    double lo = cfg.c_lo, hi = std::numeric_limits<double>::infinity();
    double c = cfg.c_lo;
    int total_iterations = 0;
    for (int step = 0; step < cfg.search_steps; ++step) {
        Eigen::VectorXd w = w0, m = Eigen::VectorXd::Zero(d), v = Eigen::VectorXd::Zero(d);
        bool found = false;
        for (int it = 1; it <= cfg.iterations; ++it) {
            ++total_iterations;
            const Vector xp = 0.5 * (w.array().tanh() + 1.0);
            const auto cache = mlp_forward_cache(model, xp);
            const auto& z = cache.logits;
            Eigen::Index other = -1;
            for (Eigen::Index k = 0; k < z.size(); ++k) {
                if (k == ref) continue;
                if (other < 0 || z[k] > z[other]) other = k;
            }
            const double gap = targeted ? z[other] - z[ref] : z[ref] - z[other];
            int pred = 0;
            for (Eigen::Index k = 1; k < z.size(); ++k)
                if (z[k] > z[pred]) pred = static_cast<int>(k);
            const double l2 = (xp - x).norm();
            if (adversarial(pred)) {
                found = true;
                if (l2 < best_l2) {
                    best_l2 = l2;
                    best_adv = xp;
                }
            }
            last = xp;
            Eigen::VectorXd grad_x = 2.0 * (xp - x);
            if (gap > -cfg.kappa) {
                Eigen::VectorXd dlogit = Eigen::VectorXd::Zero(z.size());
                dlogit[targeted ? other : ref] += 1.0;
                dlogit[targeted ? ref : other] -= 1.0;
                grad_x += c * mlp_backprop_input(model, cache, dlogit);
            }
            const Eigen::VectorXd grad_w = grad_x.array() * 2.0 * xp.array() * (1.0 - xp.array());
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            m = b1 * m + (1.0 - b1) * grad_w;
            v = b2 * v + (1.0 - b2) * grad_w.cwiseAbs2();
            const double c1 = 1.0 - std::pow(b1, it), c2 = 1.0 - std::pow(b2, it);
            w.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        }
        if (found) {
            hi = std::min(hi, c);
            c = 0.5 * (lo + hi);
        } else {
            lo = std::max(lo, c);
            c = std::isfinite(hi) ? 0.5 * (lo + hi) : std::min(c * 10.0, cfg.c_hi);
        }
    }
    return finish(std::isfinite(best_l2) ? best_adv : last, total_iterations);
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string adversarial_to_csv(const std::vector<AdversarialExample>& examples) {
    std::string out = "# schema=v1\nattack,success,l2,linf,queries_used,original_label,perturbed_label";
    const auto d = examples.empty() ? Eigen::Index{0} : examples.front().original.size();
    for (Eigen::Index j = 0; j < d; ++j) out += ",x" + std::to_string(j);
    for (Eigen::Index j = 0; j < d; ++j) out += ",adv" + std::to_string(j);
    out += "\n";
    for (const auto& a : examples) {
        out += std::string(to_string(a.attack)) + "," + (a.success ? "1" : "0") + "," + detail::format_double(a.perturbation_l2) + "," +
               detail::format_double(a.perturbation_linf) + "," + std::to_string(a.queries_used) + "," + std::to_string(a.original_label) + "," +
               std::to_string(a.perturbed_label);
        for (Eigen::Index j = 0; j < d; ++j) out += "," + detail::format_double(a.original[j]);
        for (Eigen::Index j = 0; j < d; ++j) out += "," + detail::format_double(a.perturbed[j]);
        out += "\n";
    }
    return out;
}

inline std::vector<AdversarialExample> adversarial_from_csv(std::string_view text, const std::string& name = "adversarial") {
    std::vector<AdversarialExample> out;
    std::size_t start = 0, line_no = 0;
    std::size_t d = 0;
    bool header = false;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        const auto line = detail::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        start = end == std::string_view::npos ? text.size() : end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto cols = detail::split(line, ',');
        const auto where = name + ":" + std::to_string(line_no);
        if (!header) {
            require(cols.size() >= 7 && (cols.size() - 7) % 2 == 0 && cols[0] == "attack", ErrorKind::parse, where + ": bad header");
            d = (cols.size() - 7) / 2;
            header = true;
            continue;
        }
        require(cols.size() == 7 + 2 * d, ErrorKind::parse, where + ": wrong column count");
        std::vector<double> v;
        for (std::size_t c = 1; c < cols.size(); ++c) {
            const auto x = detail::parse_double(cols[c]);
            require(x.has_value(), ErrorKind::parse, where + ": bad number");
            v.push_back(*x);
        }
        AdversarialExample a;
        a.attack = parse_attack(std::string(cols[0]));
        a.success = v[0] != 0.0;
        a.perturbation_l2 = v[1];
        a.perturbation_linf = v[2];
        a.queries_used = static_cast<std::size_t>(v[3]);
        a.original_label = static_cast<int>(v[4]);
        a.perturbed_label = static_cast<int>(v[5]);
        a.original = Eigen::Map<const Vector>(v.data() + 6, static_cast<Eigen::Index>(d));
        a.perturbed = Eigen::Map<const Vector>(v.data() + 6 + d, static_cast<Eigen::Index>(d));
        out.push_back(std::move(a));
    }
    require(header, ErrorKind::parse, name + ": missing header");
    return out;
}

}  // namespace boundarylab
