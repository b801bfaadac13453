#pragma once

#include "boundarylab/core.hpp"
#include "boundarylab/data.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace boundarylab {

namespace detail {

inline void require_binary(const LabeledDataset& train, const char* who) {
    train.validate();
    require(train.size() >= 1, ErrorKind::invalid_argument, std::string(who) + ": empty training set");
    for (int y : train.labels) {
        require(y == 0 || y == 1, ErrorKind::invalid_argument, std::string(who) + ": labels must be binary {0,1}");
    }
}

inline void require_dim(const Matrix& points, const Vector& x) {
    require(x.size() == points.cols(), ErrorKind::invalid_argument,
            "query has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(points.cols()));
}

inline Eigen::VectorXd squared_distances(const Matrix& points, const Vector& x) {
    Eigen::VectorXd d2(points.rows());
    const auto xt = x.transpose();
    for (Eigen::Index i = 0; i < points.rows(); ++i) d2[i] = (points.row(i) - xt).squaredNorm();
    return d2;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// k-nearest neighbours

struct KnnModel {
    int k = 1;
    Matrix points;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Eigen::Index dim() const { return points.cols(); }
};

inline KnnModel knn_fit(const LabeledDataset& train, int k) {
    detail::require_binary(train, "knn_fit");
    require(k >= 1 && static_cast<std::size_t>(k) <= train.size(), ErrorKind::invalid_argument,
            "k = " + std::to_string(k) + " must lie in [1, n = " + std::to_string(train.size()) + "]");
    return {k, train.points, train.labels};
}

/// Indices of the `count` nearest training points, ordered by distance with
/// ties broken by lower index. Exact full scan.
inline std::vector<std::size_t> nearest_indices(const Matrix& points, const Vector& x, std::size_t count) {
    detail::require_dim(points, x);
    const auto n = static_cast<std::size_t>(points.rows());
    count = std::min(count, n);
    const Eigen::VectorXd d2 = detail::squared_distances(points, x);
    if (count == 1) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (d2[static_cast<Eigen::Index>(i)] < d2[static_cast<Eigen::Index>(best)]) best = i;
        }
        return {best};
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto closer = [&](std::size_t a, std::size_t b) {
        const double da = d2[static_cast<Eigen::Index>(a)], db = d2[static_cast<Eigen::Index>(b)];
        return da < db || (da == db && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), closer);
    idx.resize(count);
    return idx;
}

inline double knn_predict_eta(const KnnModel& model, const Vector& x) {
    const auto nn = nearest_indices(model.points, x, static_cast<std::size_t>(model.k));
    int ones = 0;
    for (auto i : nn) ones += model.labels[i];
    return static_cast<double>(ones) / model.k;
}

inline int knn_predict(const KnnModel& model, const Vector& x) { return knn_predict_eta(model, x) > 0.5 ? 1 : 0; }

// ---------------------------------------------------------------------------
// Nadaraya-Watson

enum class NwKernel { triangular, epanechnikov, boxcar };

inline const char* to_string(NwKernel k) {
    switch (k) {
        case NwKernel::triangular: return "triangular";
        case NwKernel::epanechnikov: return "epanechnikov";
        case NwKernel::boxcar: return "boxcar";
    }
    return "triangular";
}

/// Radial profile of the kernel at u = ||x - x_i|| / h; zero outside the unit ball.
inline double nw_kernel_weight(NwKernel kernel, double u) {
    switch (kernel) {
        case NwKernel::triangular: return std::max(0.0, 1.0 - u);
        case NwKernel::epanechnikov: return u < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        case NwKernel::boxcar: return u < 1.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

struct NwModel {
    double bandwidth = 0.1;
    NwKernel kernel = NwKernel::triangular;
    Matrix points;
    std::vector<int> labels;
};

inline NwModel nw_fit(const LabeledDataset& train, double bandwidth, NwKernel kernel = NwKernel::triangular) {
    detail::require_binary(train, "nw_fit");
    require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorKind::invalid_argument, "bandwidth must be > 0");
    return {bandwidth, kernel, train.points, train.labels};
}

/// Locally weighted label average. An empty neighbourhood (all weights zero)
/// falls back to the 1-NN label.
inline double nw_predict_eta(const NwModel& model, const Vector& x) {
    detail::require_dim(model.points, x);
    const Eigen::VectorXd d2 = detail::squared_distances(model.points, x);
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < d2.size(); ++i) {
        const double w = nw_kernel_weight(model.kernel, std::sqrt(d2[i]) / model.bandwidth);
        if (w > 0.0) {
            num += w * model.labels[static_cast<std::size_t>(i)];
            den += w;
        }
    }
    if (den > 0.0) return num / den;
    const auto nn = nearest_indices(model.points, x, 1);
    return model.labels[nn.front()];
}

inline int nw_predict(const NwModel& model, const Vector& x) { return nw_predict_eta(model, x) > 0.5 ? 1 : 0; }

// ---------------------------------------------------------------------------
// Kernel ridge regression

struct KernelSpec {
    enum class Kind { linear, gaussian };
    Kind kind = Kind::gaussian;
    /// Gaussian: k(a, b) = exp(-gamma ||a - b||^2). Non-positive means "pick by median heuristic".
    double gamma = 0.0;

    static KernelSpec linear() { return {Kind::linear, 0.0}; }
    static KernelSpec gaussian(double gamma = 0.0) { return {Kind::gaussian, gamma}; }

    double operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
        if (kind == Kind::linear) return a.dot(b);
        return std::exp(-gamma * (a - b).squaredNorm());
    }
};

/// gamma = 1 / (2 * median pairwise squared distance), over the first 2000 rows.
inline double median_heuristic_gamma(const Matrix& points) {
    const auto n = std::min<Eigen::Index>(points.rows(), 2000);
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) d2.push_back((points.row(i) - points.row(j)).squaredNorm());
    }
    if (d2.empty()) return 1.0;
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    return *mid > 0.0 ? 1.0 / (2.0 * *mid) : 1.0;
}

struct KrrModel {
    double lambda = 1.0;
    KernelSpec kernel;
    Matrix points;
    Vector alpha;
};

inline Eigen::MatrixXd gram_matrix(const Matrix& points, const KernelSpec& kernel) {
    const auto n = points.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel(points.row(i).transpose(), points.row(j).transpose());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

/// Dual solve (G + lambda I) alpha = y by Cholesky, with iterative
/// refinement until the residual is below 1e-8 ||y||.
inline KrrModel krr_fit(const LabeledDataset& train, double lambda, KernelSpec kernel = KernelSpec::gaussian()) {
    detail::require_binary(train, "krr_fit");
    require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::invalid_argument, "lambda_n must be > 0");
    if (kernel.kind == KernelSpec::Kind::gaussian && !(kernel.gamma > 0.0)) kernel.gamma = median_heuristic_gamma(train.points);
    const Eigen::MatrixXd g = gram_matrix(train.points, kernel);
    require(g.allFinite(), ErrorKind::numeric, "non-finite kernel value in Gram matrix");
    Eigen::MatrixXd a = g;
    a.diagonal().array() += lambda;
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) y[static_cast<Eigen::Index>(i)] = train.labels[i];

    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::ill_conditioned, "Cholesky factorization failed; try a larger lambda_n (now " + detail::format_double(lambda) + ")");
    }
    Eigen::VectorXd alpha = llt.solve(y);
    const double target = 1e-8 * std::max(y.norm(), 1e-300);
    double residual = (a * alpha - y).norm();
    for (int iter = 0; iter < 5 && residual > target; ++iter) {
        alpha += llt.solve(y - a * alpha);
        residual = (a * alpha - y).norm();
    }
    require(alpha.allFinite(), ErrorKind::numeric, "non-finite dual coefficients");
    if (residual > target && y.norm() > 0.0) {
        fail(ErrorKind::ill_conditioned, "dual residual " + std::to_string(residual) + " exceeds 1e-8 ||y||; try a larger lambda_n");
    }
    return {lambda, kernel, train.points, alpha};
}

inline double krr_predict_eta(const KrrModel& model, const Vector& x) {
    detail::require_dim(model.points, x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < model.points.rows(); ++i) s += model.alpha[i] * model.kernel(x, model.points.row(i).transpose());
    return s;
}

inline int krr_predict(const KrrModel& model, const Vector& x) { return krr_predict_eta(model, x) > 0.5 ? 1 : 0; }

/// sum_i (y_i - f(x_i))^2 + lambda ||f||_H^2 for f = sum_j alpha_j k(., x_j).
inline double krr_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, double lambda, const Eigen::VectorXd& alpha) {
    const Eigen::VectorXd fitted = gram * alpha;
    return (y - fitted).squaredNorm() + lambda * alpha.dot(fitted);
}

}  // namespace boundarylab
