#pragma once

#include "boundarylab/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace boundarylab {

enum class Role { train, adversary, test };

inline const char* to_string(Role role) {
    switch (role) {
        case Role::train: return "train";
        case Role::adversary: return "adversary";
        case Role::test: return "test";
    }
    return "train";
}

struct LabeledDataset {
    std::string name;
    Role role = Role::train;
    Matrix points;
    std::vector<int> labels;
    int class_count = 2;

    std::size_t size() const { return labels.size(); }
    Eigen::Index dim() const { return points.cols(); }
    Vector point(std::size_t i) const { return row_vector(points, static_cast<Eigen::Index>(i)); }

    void validate() const {
        require(static_cast<std::size_t>(points.rows()) == labels.size(), ErrorKind::consistency,
                name + ": " + std::to_string(points.rows()) + " points but " + std::to_string(labels.size()) +
                    " labels");
        require(labels.empty() || points.cols() >= 1, ErrorKind::consistency, name + ": dimension must be >= 1");
        require(points.allFinite(), ErrorKind::numeric, name + ": non-finite coordinate");
        for (int y : labels) {
            require(y >= 0 && y < class_count, ErrorKind::consistency,
                    name + ": label " + std::to_string(y) + " outside [0, " + std::to_string(class_count) + ")");
        }
    }

    LabeledDataset subset(const std::vector<std::size_t>& indices) const {
        LabeledDataset out{name, role, Matrix(static_cast<Eigen::Index>(indices.size()), dim()), {}, class_count};
        out.labels.reserve(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            out.points.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(indices[r]));
            out.labels.push_back(labels[indices[r]]);
        }
        return out;
    }
};

struct Box {
    Vector lower;
    Vector upper;

    Eigen::Index dim() const { return lower.size(); }
    double volume() const { return (upper - lower).prod(); }
    bool contains(const Vector& x) const {
        return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
    }
};

/// Analytic posterior of a synthetic problem. Only binary problems carry one.
struct GroundTruthModel {
    std::function<double(const Vector&)> eta;
    Box support;
    int class_count = 2;

    int bayes_label(const Vector& x) const { return eta(x) > 0.5 ? 1 : 0; }
    Eigen::Index dim() const { return support.dim(); }
};

// ---------------------------------------------------------------------------
// Halfmoon

/// Posterior of the two-moons model. Each class density is approximated by
/// an equal-weight mixture of isotropic Gaussians centred on `arc_points`
/// midpoint-rule samples of its arc, which is exact in the limit and keeps
/// the swap symmetry (x, y) -> (1 - x, 0.5 - y) exact at any resolution.
class HalfmoonPosterior {
public:
    explicit HalfmoonPosterior(double sigma, int arc_points = 360) : sigma_(sigma) {
        require(sigma > 0.0, ErrorKind::invalid_argument, "halfmoon sigma must be positive");
        require(arc_points >= 1, ErrorKind::invalid_argument, "arc_points must be >= 1");
        arcs_[0].reserve(static_cast<std::size_t>(arc_points));
        arcs_[1].reserve(static_cast<std::size_t>(arc_points));
        for (int j = 0; j < arc_points; ++j) {
            const double t = std::numbers::pi * (j + 0.5) / arc_points;
            arcs_[0].push_back(upper_arc(t));
            arcs_[1].push_back(lower_arc(t));
        }
    }

    static std::array<double, 2> upper_arc(double t) { return {std::cos(t), std::sin(t)}; }
    static std::array<double, 2> lower_arc(double t) { return {1.0 - std::cos(t), 0.5 - std::sin(t)}; }

    double sigma() const { return sigma_; }

    double operator()(const Vector& x) const {
        require(x.size() == 2, ErrorKind::invalid_argument, "halfmoon posterior expects d = 2");
        const double l0 = log_density(0, x[0], x[1]);
        const double l1 = log_density(1, x[0], x[1]);
        return 1.0 / (1.0 + std::exp(l0 - l1));
    }

private:
    /// Unnormalized log of the class mixture density.
    double log_density(int cls, double px, double py) const {
        const auto& arc = arcs_[static_cast<std::size_t>(cls)];
        const double inv = 1.0 / (2.0 * sigma_ * sigma_);
        double best = std::numeric_limits<double>::infinity();
        thread_local std::vector<double> d2;
        d2.resize(arc.size());
        for (std::size_t j = 0; j < arc.size(); ++j) {
            const double dx = px - arc[j][0];
            const double dy = py - arc[j][1];
            d2[j] = (dx * dx + dy * dy) * inv;
            best = std::min(best, d2[j]);
        }
        // Terms more than e^-45 below the largest cannot change the double sum.
        double sum = 0.0;
        for (double e : d2) {
            const double rel = e - best;
            if (rel < 45.0) sum += std::exp(-rel);
        }
        return -best + std::log(sum);
    }

    double sigma_;
    std::array<std::vector<std::array<double, 2>>, 2> arcs_;
};

inline Box halfmoon_support(double sigma) {
    Vector lo(2), hi(2);
    lo << -1.0 - 3.0 * sigma, -0.5 - 3.0 * sigma;
    hi << 2.0 + 3.0 * sigma, 1.0 + 3.0 * sigma;
    return {lo, hi};
}

inline GroundTruthModel halfmoon_ground_truth(double sigma) {
    auto posterior = std::make_shared<HalfmoonPosterior>(sigma);
    return {[posterior](const Vector& x) { return (*posterior)(x); }, halfmoon_support(sigma), 2};
}

/// Two interleaving moons: class 0 on the upper unit arc, class 1 on the
/// lower arc shifted by (1, -0.5); arc parameter uniform on [0, pi], isotropic
/// Gaussian noise. Rows are shuffled.
inline std::pair<LabeledDataset, GroundTruthModel> generate_halfmoon(std::size_t n, double noise_sigma,
                                                                     std::uint64_t seed) {
    require(n >= 2, ErrorKind::invalid_argument, "halfmoon needs n >= 2");
    require(noise_sigma > 0.0, ErrorKind::invalid_argument, "halfmoon noise_sigma must be positive");
    Rng rng(seed);
    const std::size_t n0 = n / 2;
    LabeledDataset ds{"halfmoon", Role::train, Matrix(static_cast<Eigen::Index>(n), 2), {}, 2};
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < n0 ? 0 : 1;
        const double t = std::numbers::pi * rng.uniform();
        const auto a = cls == 0 ? HalfmoonPosterior::upper_arc(t) : HalfmoonPosterior::lower_arc(t);
        const auto r = static_cast<Eigen::Index>(i);
        ds.points(r, 0) = a[0] + noise_sigma * rng.normal();
        ds.points(r, 1) = a[1] + noise_sigma * rng.normal();
        ds.labels[i] = cls;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    ds = ds.subset(order);
    return {std::move(ds), halfmoon_ground_truth(noise_sigma)};
}

// ---------------------------------------------------------------------------
// File loaders

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::uint32_t read_be32(const std::string& bytes, std::size_t offset) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3]));
}

inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, ptr};
}

}  // namespace detail

/// UCI abalone.data. Label 1 when age (rings + 1.5) exceeds eleven years.
inline LabeledDataset parse_abalone(std::string_view text, const std::string& source = "abalone") {
    std::vector<std::array<double, 8>> rows;
    std::vector<int> labels;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        const auto line = detail::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        ++line_no;
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no);
        const auto cols = detail::split(line, ',');
        require(cols.size() == 9, ErrorKind::parse, where + ": expected 9 columns, got " + std::to_string(cols.size()));
        std::array<double, 8> row{};
        if (cols[0] == "M") row[0] = 0.0;
        else if (cols[0] == "F") row[0] = 0.5;
        else if (cols[0] == "I") row[0] = 1.0;
        else fail(ErrorKind::parse, where + ": sex must be M, F or I");
        for (std::size_t c = 1; c < 8; ++c) {
            const auto v = detail::parse_double(cols[c]);
            require(v.has_value() && std::isfinite(*v), ErrorKind::parse, where + ": bad number in column " + std::to_string(c + 1));
            row[c] = *v;
        }
        const auto rings = detail::parse_double(cols[8]);
        require(rings.has_value() && std::isfinite(*rings), ErrorKind::parse, where + ": bad ring count");
        rows.push_back(row);
        labels.push_back(*rings + 1.5 > 11.0 ? 1 : 0);
    }
    LabeledDataset ds{"abalone", Role::train, Matrix(static_cast<Eigen::Index>(rows.size()), 8), std::move(labels), 2};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < 8; ++c) ds.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return ds;
}

inline LabeledDataset load_abalone(const std::string& path) { return parse_abalone(detail::read_file(path), path); }

/// IDX image/label pair. Pixels are scaled to [0, 1]. With `keep_digits`,
/// only those digits are kept and relabelled by rank (so {1, 7} -> {0, 1}).
inline LabeledDataset load_mnist_idx(const std::string& image_path, const std::string& label_path,
                                     const std::optional<std::set<int>>& keep_digits = std::nullopt) {
    const auto images = detail::read_file(image_path);
    const auto labels = detail::read_file(label_path);
    require(images.size() >= 16, ErrorKind::format, image_path + ": truncated header");
    require(labels.size() >= 8, ErrorKind::format, label_path + ": truncated header");
    require(detail::read_be32(images, 0) == 0x00000803, ErrorKind::format, image_path + ": bad magic, expected 0x00000803");
    require(detail::read_be32(labels, 0) == 0x00000801, ErrorKind::format, label_path + ": bad magic, expected 0x00000801");
    const std::size_t count = detail::read_be32(images, 4);
    const std::size_t rows = detail::read_be32(images, 8);
    const std::size_t cols = detail::read_be32(images, 12);
    const std::size_t label_count = detail::read_be32(labels, 4);
    require(count == label_count, ErrorKind::consistency,
            "image count " + std::to_string(count) + " != label count " + std::to_string(label_count));
    const std::size_t d = rows * cols;
    require(d >= 1, ErrorKind::format, image_path + ": empty image shape");
    require(images.size() >= 16 + count * d, ErrorKind::format, image_path + ": truncated pixel data");
    require(labels.size() >= 8 + count, ErrorKind::format, label_path + ": truncated label data");

    std::vector<int> remap(256, -1);
    int class_count = 10;
    if (keep_digits) {
        require(!keep_digits->empty(), ErrorKind::invalid_argument, "keep_digits is empty");
        int rank = 0;
        for (int digit : *keep_digits) {
            require(digit >= 0 && digit <= 255, ErrorKind::invalid_argument, "digit out of range");
            remap[static_cast<std::size_t>(digit)] = rank++;
        }
        class_count = rank;
    } else {
        for (int i = 0; i < 256; ++i) remap[static_cast<std::size_t>(i)] = i;
    }

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<unsigned char>(labels[8 + i]);
        if (remap[raw] >= 0) kept.push_back(i);
        else require(keep_digits.has_value(), ErrorKind::format, label_path + ": label above 255");
    }
    LabeledDataset ds{"mnist", Role::train, Matrix(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(d)), {}, class_count};
    ds.labels.reserve(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        const std::size_t i = kept[r];
        const int y = remap[static_cast<unsigned char>(labels[8 + i])];
        require(keep_digits.has_value() || y < 10, ErrorKind::format, label_path + ": label outside 0..9");
        ds.labels.push_back(y);
        const char* px = images.data() + 16 + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            ds.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<unsigned char>(px[c]) / 255.0;
        }
    }
    return ds;
}

/// Deterministic stratified split: within each class, rows are shuffled by
/// `seed` and the first ones go to the train part, the next ones to test.
/// Per-class counts are proportional to class frequency (largest remainder).
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds, std::size_t train_size,
                                                                  std::size_t test_size, std::uint64_t seed) {
    require(train_size + test_size <= ds.size(), ErrorKind::invalid_argument,
            "split of " + std::to_string(train_size + test_size) + " rows from " + std::to_string(ds.size()));
    const auto k = static_cast<std::size_t>(ds.class_count);
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    auto allocate = [&](std::size_t total, const std::vector<std::size_t>& cap) {
        std::vector<std::size_t> out(k, 0);
        std::vector<std::pair<double, std::size_t>> rema;
        std::size_t used = 0;
        double avail = 0;
        for (auto c : cap) avail += static_cast<double>(c);
        for (std::size_t c = 0; c < k; ++c) {
            const double share = avail > 0 ? static_cast<double>(total) * static_cast<double>(cap[c]) / avail : 0.0;
            out[c] = std::min(cap[c], static_cast<std::size_t>(share));
            used += out[c];
            rema.emplace_back(share - static_cast<double>(out[c]), c);
        }
        std::stable_sort(rema.begin(), rema.end(), [](auto a, auto b) { return a.first > b.first; });
        for (std::size_t j = 0; used < total; j = (j + 1) % k) {
            const auto c = rema[j].second;
            if (out[c] < cap[c]) {
                ++out[c];
                ++used;
            }
        }
        return out;
    };

    Rng rng(seed);
    std::vector<std::size_t> sizes(k);
    for (std::size_t c = 0; c < k; ++c) {
        rng.shuffle(by_class[c]);
        sizes[c] = by_class[c].size();
    }
    const auto train_counts = allocate(train_size, sizes);
    std::vector<std::size_t> left(k);
    for (std::size_t c = 0; c < k; ++c) left[c] = sizes[c] - train_counts[c];
    const auto test_counts = allocate(test_size, left);

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < train_counts[c]; ++j) train_idx.push_back(by_class[c][j]);
        for (std::size_t j = 0; j < test_counts[c]; ++j) test_idx.push_back(by_class[c][train_counts[c] + j]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    auto train = ds.subset(train_idx);
    auto test = ds.subset(test_idx);
    train.role = Role::train;
    test.role = Role::test;
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Boundary-concentrated sampling

struct BetaSamplerConfig {
    double beta = 0.0;
    double density_floor = 1e-3;
    /// Consecutive rejections tolerated before giving up.
    std::uint64_t max_rejections = 10'000'000;
    std::uint64_t seed = 0;

    void validate() const {
        require(beta >= 0.0 && std::isfinite(beta), ErrorKind::invalid_argument, "beta must be >= 0");
        require(density_floor > 0.0 && density_floor < 0.5, ErrorKind::invalid_argument, "density_floor must lie in (0, 0.5)");
        require(max_rejections >= 1, ErrorKind::invalid_argument, "max_rejections must be >= 1");
    }
};

/// Acceptance probability of the rejection sampler for mu_beta.
inline double beta_acceptance(double eta, double beta, double density_floor) {
    const double margin = std::max(std::abs(eta - 0.5), density_floor);
    return std::pow(density_floor / margin, beta);
}

/// n i.i.d. draws from the density proportional to max(|eta - 1/2|, eps)^-beta
/// on the support box, by uniform proposals and rejection.
inline Matrix sample_beta_concentrated(const GroundTruthModel& gt, const BetaSamplerConfig& cfg, std::size_t n) {
    cfg.validate();
    const auto d = gt.support.dim();
    require(d >= 1 && gt.support.upper.size() == d, ErrorKind::invalid_argument, "support box malformed");
    require(((gt.support.upper - gt.support.lower).array() > 0).all() && gt.support.lower.allFinite() &&
                gt.support.upper.allFinite(),
            ErrorKind::invalid_argument, "support box must be bounded and non-degenerate");
    Rng rng(cfg.seed);
    Matrix out(static_cast<Eigen::Index>(n), d);
    Vector x(d);
    std::uint64_t proposed = 0, accepted = 0, streak = 0;
    while (accepted < n) {
        for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.uniform(gt.support.lower[j], gt.support.upper[j]);
        ++proposed;
        const double p = cfg.beta == 0.0 ? 1.0 : beta_acceptance(gt.eta(x), cfg.beta, cfg.density_floor);
        if (rng.uniform() < p) {
            out.row(static_cast<Eigen::Index>(accepted++)) = x.transpose();
            streak = 0;
        } else if (++streak >= cfg.max_rejections) {
            std::ostringstream msg;
            msg << streak << " consecutive rejections; acceptance rate " << static_cast<double>(accepted) / static_cast<double>(proposed)
                << " (" << accepted << "/" << proposed << ")";
            fail(ErrorKind::sampler_stalled, msg.str());
        }
    }
    return out;
}

/// Labels y ~ Bernoulli(eta(x)).
inline std::vector<int> sample_labels(const GroundTruthModel& gt, const Matrix& points, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> labels(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        labels[static_cast<std::size_t>(i)] = rng.bernoulli(gt.eta(row_vector(points, i))) ? 1 : 0;
    }
    return labels;
}

// ---------------------------------------------------------------------------
// CSV persistence

inline std::string dataset_to_csv(const LabeledDataset& ds) {
    std::string out = "# schema=v1\n";
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out += "x" + std::to_string(j) + ",";
    out += "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) {
            out += detail::format_double(ds.points(static_cast<Eigen::Index>(i), j));
            out += ',';
        }
        out += std::to_string(ds.labels[i]);
        out += '\n';
    }
    return out;
}

inline LabeledDataset dataset_from_csv(std::string_view text, const std::string& name = "csv") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 0, start = 0;
    Eigen::Index d = -1;
    bool header_seen = false;
    int max_label = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        const auto line = detail::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        start = end == std::string_view::npos ? text.size() : end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto cols = detail::split(line, ',');
        const auto where = name + ":" + std::to_string(line_no);
        if (!header_seen) {
            require(cols.size() >= 2 && cols.back() == "label", ErrorKind::parse, where + ": header must end with 'label'");
            d = static_cast<Eigen::Index>(cols.size() - 1);
            header_seen = true;
            continue;
        }
        require(static_cast<Eigen::Index>(cols.size()) == d + 1, ErrorKind::parse, where + ": wrong column count");
        std::vector<double> row;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto v = detail::parse_double(cols[static_cast<std::size_t>(j)]);
            require(v.has_value(), ErrorKind::parse, where + ": bad number");
            row.push_back(*v);
        }
        const auto y = detail::parse_double(cols.back());
        require(y.has_value() && *y >= 0 && *y == std::floor(*y), ErrorKind::parse, where + ": bad label");
        labels.push_back(static_cast<int>(*y));
        max_label = std::max(max_label, labels.back());
        rows.push_back(std::move(row));
    }
    require(header_seen, ErrorKind::parse, name + ": missing header");
    LabeledDataset ds{name, Role::train, Matrix(static_cast<Eigen::Index>(rows.size()), d), std::move(labels), std::max(2, max_label + 1)};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index j = 0; j < d; ++j) ds.points(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
    }
    ds.validate();
    return ds;
}

}  // namespace boundarylab
