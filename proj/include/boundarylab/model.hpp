#pragma once

#include "boundarylab/classifiers.hpp"
#include "boundarylab/neural.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>

namespace boundarylab {

using LabelFn = std::function<int(const Vector&)>;

using FittedClassifier = std::variant<KnnModel, NwModel, KrrModel, MlpModel>;

inline const char* model_kind(const FittedClassifier& clf) {
    switch (clf.index()) {
        case 0: return "knn";
        case 1: return "nw";
        case 2: return "krr";
        default: return "mlp";
    }
}

inline int predict_label(const FittedClassifier& clf, const Vector& x) {
    return std::visit(
        [&](const auto& m) -> int {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(m, x);
            else if constexpr (std::is_same_v<T, NwModel>) return nw_predict(m, x);
            else if constexpr (std::is_same_v<T, KrrModel>) return krr_predict(m, x);
            else return mlp_predict(m, x);
        },
        clf);
}

/// Regression estimate of eta when the model has one; binary MLPs report the
/// class-1 probability.
inline std::optional<double> predict_score(const FittedClassifier& clf, const Vector& x) {
    return std::visit(
        [&](const auto& m) -> std::optional<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) return knn_predict_eta(m, x);
            else if constexpr (std::is_same_v<T, NwModel>) return nw_predict_eta(m, x);
            else if constexpr (std::is_same_v<T, KrrModel>) return krr_predict_eta(m, x);
            else {
                if (m.class_count() != 2) return std::nullopt;
                return mlp_forward(m, x).probabilities[1];
            }
        },
        clf);
}

inline Eigen::Index model_dim(const FittedClassifier& clf) {
    return std::visit(
        [](const auto& m) -> Eigen::Index {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MlpModel>) return m.input_dim();
            else return m.points.cols();
        },
        clf);
}

inline double accuracy(const FittedClassifier& clf, const LabeledDataset& ds) {
    if (ds.size() == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) ok += predict_label(clf, ds.point(i)) == ds.labels[i];
    return static_cast<double>(ok) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Model specs ("knn:1", "nw:0.15", "krr:linear:1", "mlp:32,32")

struct ModelSpec {
    enum class Kind { knn, nw, krr, mlp };
    Kind kind = Kind::knn;
    int k = 1;
    double bandwidth = 0.15;
    NwKernel nw_kernel = NwKernel::triangular;
    double lambda = 1.0;
    KernelSpec krr_kernel = KernelSpec::gaussian();
    TrainConfig train;

    static ModelSpec parse(const std::string& text) {
        const auto parts = detail::split(text, ':');
        ModelSpec s;
        auto number = [&](std::size_t i, double fallback) {
            if (parts.size() <= i) return fallback;
            const auto v = detail::parse_double(parts[i]);
            require(v.has_value(), ErrorKind::invalid_argument, "bad number in model spec '" + text + "'");
            return *v;
        };
        const auto kind = parts.at(0);
        if (kind == "knn") {
            s.kind = Kind::knn;
            s.k = static_cast<int>(number(1, 1));
        } else if (kind == "nw") {
            s.kind = Kind::nw;
            s.bandwidth = number(1, 0.15);
            if (parts.size() > 2) {
                if (parts[2] == "triangular") s.nw_kernel = NwKernel::triangular;
                else if (parts[2] == "epanechnikov") s.nw_kernel = NwKernel::epanechnikov;
                else if (parts[2] == "boxcar") s.nw_kernel = NwKernel::boxcar;
                else fail(ErrorKind::invalid_argument, "unknown NW kernel in '" + text + "'");
            }
        } else if (kind == "krr") {
            s.kind = Kind::krr;
            if (parts.size() > 1 && parts[1] == "linear") s.krr_kernel = KernelSpec::linear();
            else if (parts.size() > 1 && parts[1] != "gaussian") fail(ErrorKind::invalid_argument, "unknown KRR kernel in '" + text + "'");
            s.lambda = number(2, 1.0);
            if (s.krr_kernel.kind == KernelSpec::Kind::gaussian) s.krr_kernel.gamma = number(3, 0.0);
        } else if (kind == "mlp") {
            s.kind = Kind::mlp;
            if (parts.size() > 1) {
                s.train.hidden.clear();
                for (auto w : detail::split(parts[1], ',')) {
                    const auto v = detail::parse_double(w);
                    require(v.has_value() && *v >= 1, ErrorKind::invalid_argument, "bad hidden width in '" + text + "'");
                    s.train.hidden.push_back(static_cast<int>(*v));
                }
            }
        } else {
            fail(ErrorKind::invalid_argument, "unknown model kind '" + std::string(kind) + "' (knn, nw, krr, mlp)");
        }
        return s;
    }
};

inline FittedClassifier fit_model(const ModelSpec& spec, const LabeledDataset& train, std::uint64_t seed = 0) {
    switch (spec.kind) {
        case ModelSpec::Kind::knn: return knn_fit(train, spec.k);
        case ModelSpec::Kind::nw: return nw_fit(train, spec.bandwidth, spec.nw_kernel);
        case ModelSpec::Kind::krr: return krr_fit(train, spec.lambda, spec.krr_kernel);
        case ModelSpec::Kind::mlp: {
            auto cfg = spec.train;
            cfg.seed = seed;
            return mlp_train(train, cfg).model;
        }
    }
    fail(ErrorKind::invalid_argument, "unknown model kind");
}

// ---------------------------------------------------------------------------
// Serialization: versioned JSON. Doubles are written in shortest round-trip
// form, so reading back is bit-exact.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(m.row(i).data(), m.row(i).data() + m.cols());
        rows.push_back(std::move(r));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    require(static_cast<Eigen::Index>(data.size()) == rows, ErrorKind::format, "matrix row count mismatch");
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& r = data.at(static_cast<std::size_t>(i));
        require(static_cast<Eigen::Index>(r.size()) == cols, ErrorKind::format, "matrix column count mismatch");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

inline nlohmann::json model_to_json(const FittedClassifier& clf) {
    nlohmann::json j{{"format", "boundarylab-model"}, {"version", kModelFormatVersion}, {"kind", model_kind(clf)}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) {
                j["k"] = m.k;
                j["points"] = detail::matrix_to_json(m.points);
                j["labels"] = m.labels;
            } else if constexpr (std::is_same_v<T, NwModel>) {
                j["bandwidth"] = m.bandwidth;
                j["kernel"] = to_string(m.kernel);
                j["points"] = detail::matrix_to_json(m.points);
                j["labels"] = m.labels;
            } else if constexpr (std::is_same_v<T, KrrModel>) {
                j["lambda"] = m.lambda;
                j["kernel"] = m.kernel.kind == KernelSpec::Kind::linear ? "linear" : "gaussian";
                j["gamma"] = m.kernel.gamma;
                j["points"] = detail::matrix_to_json(m.points);
                j["alpha"] = detail::vector_to_json(m.alpha);
            } else {
                j["sizes"] = m.sizes;
                nlohmann::json layers = nlohmann::json::array();
                for (std::size_t l = 0; l < m.layer_count(); ++l) {
                    Matrix w = m.weights[l];
                    layers.push_back({{"weights", detail::matrix_to_json(w)}, {"bias", detail::vector_to_json(m.biases[l])}});
                }
                j["layers"] = std::move(layers);
            }
        },
        clf);
    return j;
}

inline FittedClassifier model_from_json(const nlohmann::json& j) {
    try {
        require(j.value("format", "") == "boundarylab-model", ErrorKind::format, "not a boundarylab model");
        const int version = j.at("version").get<int>();
        require(version == kModelFormatVersion, ErrorKind::format, "unsupported model version " + std::to_string(version));
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "knn") {
            return KnnModel{j.at("k").get<int>(), detail::matrix_from_json(j.at("points")), j.at("labels").get<std::vector<int>>()};
        }
        if (kind == "nw") {
            const auto kname = j.at("kernel").get<std::string>();
            NwKernel kernel = kname == "boxcar" ? NwKernel::boxcar : kname == "epanechnikov" ? NwKernel::epanechnikov : NwKernel::triangular;
            return NwModel{j.at("bandwidth").get<double>(), kernel, detail::matrix_from_json(j.at("points")),
                           j.at("labels").get<std::vector<int>>()};
        }
        if (kind == "krr") {
            KernelSpec k = j.at("kernel").get<std::string>() == "linear" ? KernelSpec::linear() : KernelSpec::gaussian(j.at("gamma").get<double>());
            return KrrModel{j.at("lambda").get<double>(), k, detail::matrix_from_json(j.at("points")), detail::vector_from_json(j.at("alpha"))};
        }
        if (kind == "mlp") {
            MlpModel m;
            m.sizes = j.at("sizes").get<std::vector<int>>();
            for (const auto& layer : j.at("layers")) {
                m.weights.emplace_back(detail::matrix_from_json(layer.at("weights")));
                m.biases.push_back(detail::vector_from_json(layer.at("bias")));
            }
            m.validate();
            return m;
        }
        fail(ErrorKind::format, "unknown model kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("malformed model file: ") + e.what());
    }
}

inline std::string serialize_model(const FittedClassifier& clf) { return model_to_json(clf).dump(1) + "\n"; }

inline FittedClassifier deserialize_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("model file is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace boundarylab
