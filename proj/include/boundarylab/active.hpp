#pragma once

#include "boundarylab/attacks.hpp"
#include "boundarylab/data.hpp"
#include "boundarylab/model.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace boundarylab {

enum class Strategy { random, margin, dfal, max_confidence };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::margin: return "margin";
        case Strategy::dfal: return "dfal";
        case Strategy::max_confidence: return "max_confidence";
    }
    return "random";
}

inline Strategy parse_strategy(const std::string& name) {
    if (name == "random") return Strategy::random;
    if (name == "margin") return Strategy::margin;
    if (name == "dfal") return Strategy::dfal;
    if (name == "max_confidence" || name == "maxconf") return Strategy::max_confidence;
    fail(ErrorKind::invalid_argument, "unknown strategy '" + name + "'; valid: random, margin, dfal, max_confidence");
}

// ---------------------------------------------------------------------------
// Selection

/// Uniform without replacement: the first `budget` entries of a seeded
/// permutation, so smaller budgets select prefixes of larger ones.
inline std::vector<std::size_t> select_random(std::size_t pool_size, std::size_t budget, std::uint64_t seed) {
    require(budget <= pool_size, ErrorKind::invalid_argument,
            "budget " + std::to_string(budget) + " exceeds pool size " + std::to_string(pool_size));
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(budget);
    return idx;
}

namespace detail {

inline std::vector<std::size_t> rank_ascending(const std::vector<double>& key, std::size_t budget) {
    require(budget <= key.size(), ErrorKind::invalid_argument,
            "budget " + std::to_string(budget) + " exceeds pool size " + std::to_string(key.size()));
    std::vector<std::size_t> idx(key.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    idx.resize(budget);
    return idx;
}

}  // namespace detail

/// Smallest |eta_hat - 1/2| first; ties by index.
inline std::vector<std::size_t> select_margin(const Matrix& pool, const FittedClassifier& victim, std::size_t budget) {
    std::vector<double> margin(static_cast<std::size_t>(pool.rows()));
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        const auto s = predict_score(victim, row_vector(pool, i));
        if (!s) fail(ErrorKind::unsupported, std::string("margin strategy needs a score output; ") + model_kind(victim) + " victim has none");
        margin[static_cast<std::size_t>(i)] = std::abs(*s - 0.5);
    }
    return detail::rank_ascending(margin, budget);
}

inline std::vector<AdversarialExample> deepfool_pool(const Matrix& pool, const MlpModel& surrogate, unsigned jobs = 1,
                                                     double overshoot = 0.02, int max_iter = 50) {
    require(pool.cols() == surrogate.input_dim(), ErrorKind::invalid_argument,
            "pool dimension " + std::to_string(pool.cols()) + " does not match surrogate input " + std::to_string(surrogate.input_dim()));
    std::vector<AdversarialExample> out(static_cast<std::size_t>(pool.rows()));
    parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = deepfool(surrogate, row_vector(pool, static_cast<Eigen::Index>(i)), overshoot, max_iter); });
    return out;
}

struct DfalSelection {
    std::vector<std::size_t> indices;
    std::vector<AdversarialExample> adversarial;  // one per selected index
};

/// Rank pool points by the L2 norm of their DeepFool perturbation against the
/// surrogate. With a magnitude e, the emitted examples keep the DeepFool
/// direction at L2 norm e.
inline DfalSelection select_dfal(const Matrix& pool, const MlpModel& surrogate, std::size_t budget, std::optional<double> magnitude = {},
                                 unsigned jobs = 1) {
    const auto df = deepfool_pool(pool, surrogate, jobs);
    std::vector<double> key(df.size());
    for (std::size_t i = 0; i < df.size(); ++i) key[i] = df[i].perturbation_l2;
    DfalSelection sel;
    sel.indices = detail::rank_ascending(key, budget);
    for (auto i : sel.indices) {
        auto ex = df[i];
        if (magnitude && ex.perturbation_l2 > 0.0) {
            ex = scale_perturbation(ex, *magnitude / ex.perturbation_l2, [&](const Vector& x) { return mlp_predict(surrogate, x); });
        }
        sel.adversarial.push_back(std::move(ex));
    }
    return sel;
}

/// Rank by the surrogate's top softmax probability at the DeepFool point,
/// highest first.
inline std::vector<std::size_t> select_max_confidence(const Matrix& pool, const MlpModel& surrogate, std::size_t budget, unsigned jobs = 1) {
    const auto df = deepfool_pool(pool, surrogate, jobs);
    std::vector<double> key(df.size());
    for (std::size_t i = 0; i < df.size(); ++i) key[i] = -mlp_forward(surrogate, df[i].perturbed).probabilities.maxCoeff();
    return detail::rank_ascending(key, budget);
}

// ---------------------------------------------------------------------------
// Attack dispatch

struct AttackParams {
    double direct_factor = 1.05;
    RbaConfig rba;
    double kernel_epsilon = 0.15;
    std::optional<double> kernel_c;
    BboxConfig bbox;
    // BBox start directions: toward the nearest reference points whose victim
    // label differs. Without known labels only bbox_reference_scan are queried.
    std::size_t bbox_reference_directions = 0;
    std::size_t bbox_reference_scan = 200;
    double fgsm_epsilon = 0.1;
    double pgd_epsilon = 0.3;
    double pgd_step = 0.01;
    int pgd_steps = 40;
    double deepfool_overshoot = 0.02;
    CwConfig cw;
    bool clip_box = false;
};

/// Per-dataset defaults. MNIST distances are two orders of magnitude larger
/// than Halfmoon ones, and a 1-NN query over 1000 images costs ~0.5 ms, so
/// the black-box search is shortened there.
inline AttackParams default_attack_params(const std::string& dataset) {
    AttackParams p;
    if (dataset == "mnist1v7") {
        p.bbox.directions = 10;
        p.bbox_reference_directions = 5;
        p.bbox.refine_iterations = 20;
        p.bbox.bs_tol = 1e-2;
        p.bbox.ray_init = 0.5;
        p.clip_box = true;
    }
    return p;
}

/// Runs one attack against the victim. k-NN attacks need a k-NN victim;
/// gradient attacks use the victim when it is an MLP, else the surrogate.
/// Labels and success always refer to the victim. `reference` holds points
/// the adversary owns; BBox uses them for start directions, querying their
/// labels unless `reference_labels` already has them.
inline AdversarialExample run_attack(AttackMethod method, const FittedClassifier& victim, const MlpModel* surrogate, const Vector& x,
                                     const AttackParams& prm, std::uint64_t seed, const Matrix* reference = nullptr,
                                     const std::vector<int>* reference_labels = nullptr) {
    AdversarialExample ex;
    if (is_knn_attack(method)) {
        const auto* knn = std::get_if<KnnModel>(&victim);
        if (!knn) fail(ErrorKind::unsupported, std::string(to_string(method)) + " needs a k-NN victim, got " + model_kind(victim));
        switch (method) {
            case AttackMethod::direct: ex = direct_attack(*knn, x, direct_radius(*knn, x, prm.direct_factor)); break;
            case AttackMethod::rba_approx:
            case AttackMethod::rba_exact: {
                auto cfg = prm.rba;
                cfg.exact = method == AttackMethod::rba_exact;
                ex = rba_attack(*knn, x, cfg);
                break;
            }
            default: {
                const double c = prm.kernel_c ? *prm.kernel_c : kernel_substitute_default_c(*knn);
                ex = kernel_substitute_attack(*knn, x, prm.kernel_epsilon, c, prm.clip_box);
            }
        }
    } else if (method == AttackMethod::bbox_opt) {
        CountingOracle oracle([&](const Vector& q) { return predict_label(victim, q); });
        auto cfg = prm.bbox;
        cfg.seed = seed;
        const int y = oracle(x);
        if (reference && prm.bbox_reference_directions > 0 && reference->rows() > 0) {
            detail::require_dim(*reference, x);
            const Eigen::VectorXd d2 = detail::squared_distances(*reference, x);
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(d2.size()));
            std::iota(idx.begin(), idx.end(), Eigen::Index{0});
            const auto scan = reference_labels ? idx.size() : std::min(idx.size(), prm.bbox_reference_scan);
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(scan), idx.end(),
                              [&](Eigen::Index a, Eigen::Index b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
            for (std::size_t j = 0; j < scan && cfg.start_directions.size() < prm.bbox_reference_directions; ++j) {
                if (d2[idx[j]] == 0.0) continue;
                const Vector r = row_vector(*reference, idx[j]);
                const int label = reference_labels ? reference_labels->at(static_cast<std::size_t>(idx[j])) : oracle(r);
                if (label != y) cfg.start_directions.push_back(r - x);
            }
        }
        ex = bbox_opt_attack(oracle, x, y, cfg);
        ex.queries_used = oracle.count();
    } else {
        const auto* mlp = std::get_if<MlpModel>(&victim);
        if (!mlp) mlp = surrogate;
        if (!mlp) fail(ErrorKind::unsupported, std::string(to_string(method)) + " needs an MLP victim or surrogate");
        const int y = mlp_predict(*mlp, x);
        switch (method) {
            case AttackMethod::fgsm: ex = fgsm(*mlp, x, y, prm.fgsm_epsilon, prm.clip_box); break;
            case AttackMethod::pgd: ex = pgd(*mlp, x, y, prm.pgd_epsilon, prm.pgd_step, prm.pgd_steps, prm.clip_box); break;
            case AttackMethod::deepfool: ex = deepfool(*mlp, x, prm.deepfool_overshoot, 50, prm.clip_box); break;
            default: ex = cw_l2(*mlp, x, prm.cw);
        }
    }
    ex.original_label = predict_label(victim, ex.original);
    ex.perturbed_label = predict_label(victim, ex.perturbed);
    ex.success = ex.original_label != ex.perturbed_label;
    return ex;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineInputs {
    std::string dataset;
    LabeledDataset victim_train;
    Matrix pool;  // adversary pool; ground-truth labels are never passed in
    LabeledDataset test;
};

struct PipelineConfig {
    ModelSpec victim = ModelSpec::parse("knn:1");
    ModelSpec shadow = ModelSpec::parse("knn:1");
    Strategy strategy = Strategy::random;
    std::optional<AttackMethod> attack;  // attack the selected points before querying
    AttackParams attack_params;
    double scale = 0.9;
    std::optional<double> dfal_magnitude;
    bool augment = false;  // half clean points, half scaled adversarial copies
    TrainConfig surrogate_train{30, 32, 0.5, 0, {32}};
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct SyntheticDataset {
    Matrix points;
    std::vector<int> labels;
    std::vector<std::string> provenance;  // "clean" or the attack name
    std::size_t queries_used = 0;
};

struct PipelineReport {
    std::string dataset;
    std::string strategy;
    std::string attack = "none";
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    double victim_acc = 0.0;
    double shadow_acc = 0.0;
    double mean_l2 = 0.0;
    std::size_t queries_used = 0;
    bool degenerate = false;
};

inline double majority_rate(const LabeledDataset& ds) {
    if (ds.size() == 0) return 0.0;
    std::map<int, std::size_t> counts;
    for (int y : ds.labels) ++counts[y];
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(ds.size());
}

/// Train -> Generate -> Retrain over several budgets. The victim, surrogate,
/// ranking and per-point attacks are computed once and reused, which is
/// exact because every strategy's selection at a smaller budget is a prefix
/// of its selection at a larger one.
inline std::vector<PipelineReport> run_pipeline_budgets(const PipelineConfig& cfg, const PipelineInputs& in, const std::vector<std::size_t>& budgets) {
    in.victim_train.validate();
    in.test.validate();
    require(in.pool.cols() == in.victim_train.dim() && in.test.dim() == in.victim_train.dim(), ErrorKind::invalid_argument,
            "pool, test and victim training dimensions must match");
    require(cfg.scale >= 0.0, ErrorKind::invalid_argument, "scale must be >= 0");
    const auto pool_n = static_cast<std::size_t>(in.pool.rows());
    for (auto b : budgets) {
        require(b <= pool_n, ErrorKind::invalid_argument, "budget " + std::to_string(b) + " exceeds pool size " + std::to_string(pool_n));
    }
    const std::size_t max_budget = budgets.empty() ? 0 : *std::max_element(budgets.begin(), budgets.end());

    const auto victim = fit_model(cfg.victim, in.victim_train, split_seed(cfg.seed, 1));
    const double victim_acc = accuracy(victim, in.test);
    const LabelFn victim_fn = [&](const Vector& x) { return predict_label(victim, x); };

    const bool needs_surrogate = cfg.strategy == Strategy::dfal || cfg.strategy == Strategy::max_confidence ||
                                 (cfg.attack && is_gradient_attack(*cfg.attack) && !std::holds_alternative<MlpModel>(victim));
    std::optional<MlpModel> surrogate;
    if (needs_surrogate) {
        auto tc = cfg.surrogate_train;
        tc.seed = split_seed(cfg.seed, 2);
        surrogate = mlp_train(in.victim_train, tc).model;
    }

    // Ranked pool, plus DeepFool points for the surrogate-driven strategies.
    std::vector<std::size_t> order;
    std::vector<AdversarialExample> deepfool_points;
    switch (cfg.strategy) {
        case Strategy::random: order = select_random(pool_n, max_budget, split_seed(cfg.seed, 3)); break;
        case Strategy::margin: order = select_margin(in.pool, victim, max_budget); break;
        case Strategy::dfal:
        case Strategy::max_confidence: {
            deepfool_points = deepfool_pool(in.pool, *surrogate, cfg.jobs);
            std::vector<double> key(pool_n);
            for (std::size_t i = 0; i < pool_n; ++i) {
                key[i] = cfg.strategy == Strategy::dfal ? deepfool_points[i].perturbation_l2
                                                        : -mlp_forward(*surrogate, deepfool_points[i].perturbed).probabilities.maxCoeff();
            }
            order = detail::rank_ascending(key, max_budget);
            break;
        }
    }

    // Attack every point any budget can use, once.
    AttackParams prm = cfg.attack_params;
    if (cfg.attack == AttackMethod::kernel_sub && !prm.kernel_c) {
        if (const auto* knn = std::get_if<KnnModel>(&victim)) prm.kernel_c = kernel_substitute_default_c(*knn);
    }
    const std::size_t attacked = cfg.augment ? (max_budget + 1) / 2 : max_budget;
    std::vector<std::optional<AdversarialExample>> adv(attacked);
    std::vector<int> pool_labels;
    if (cfg.attack == AttackMethod::bbox_opt && prm.bbox_reference_directions > 0) {
        pool_labels.resize(pool_n);
        parallel_for(pool_n, cfg.jobs, [&](std::size_t i) { pool_labels[i] = victim_fn(row_vector(in.pool, static_cast<Eigen::Index>(i))); });
    }
    if (cfg.attack) {
        parallel_for(attacked, cfg.jobs, [&](std::size_t r) {
            const auto i = order[r];
            try {
                auto ex = run_attack(*cfg.attack, victim, surrogate ? &*surrogate : nullptr, row_vector(in.pool, static_cast<Eigen::Index>(i)), prm,
                                     split_seed(cfg.seed, 1000 + i), &in.pool,
                                     pool_labels.empty() ? nullptr : &pool_labels);
                adv[r] = scale_perturbation(ex, cfg.scale, victim_fn);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::attack_infeasible) throw;
            }
        });
    }

    std::vector<PipelineReport> reports;
    for (auto budget : budgets) {
        PipelineReport rep;
        rep.dataset = in.dataset;
        rep.strategy = to_string(cfg.strategy);
        if (cfg.attack) rep.attack = to_string(*cfg.attack);
        else if (cfg.strategy == Strategy::max_confidence || (cfg.strategy == Strategy::dfal && cfg.dfal_magnitude)) rep.attack = "deepfool";
        rep.budget = budget;
        rep.seed = cfg.seed;
        rep.victim_acc = victim_acc;

        SyntheticDataset syn;
        syn.points.resize(static_cast<Eigen::Index>(budget), in.pool.cols());
        double l2_sum = 0.0;
        std::size_t l2_count = 0;
        auto push = [&](const Vector& x, const std::string& tag, std::optional<double> l2) {
            const auto r = static_cast<Eigen::Index>(syn.provenance.size());
            syn.points.row(r) = x.transpose();
            syn.provenance.push_back(tag);
            if (l2) {
                l2_sum += *l2;
                ++l2_count;
            }
        };
        const std::size_t clean_count = cfg.augment ? (budget + 1) / 2 : budget;
        for (std::size_t r = 0; r < clean_count; ++r) {
            const auto i = order[r];
            const Vector x = row_vector(in.pool, static_cast<Eigen::Index>(i));
            if (cfg.attack && !cfg.augment && adv[r]) {
                push(adv[r]->perturbed, to_string(*cfg.attack), adv[r]->perturbation_l2);
            } else if (cfg.strategy == Strategy::max_confidence) {
                const auto ex = scale_perturbation(deepfool_points[i], cfg.scale, victim_fn);
                push(ex.perturbed, "deepfool", ex.perturbation_l2);
            } else if (cfg.strategy == Strategy::dfal && cfg.dfal_magnitude && deepfool_points[i].perturbation_l2 > 0.0) {
                const auto& ex = deepfool_points[i];
                push(ex.original + (*cfg.dfal_magnitude / ex.perturbation_l2) * (ex.perturbed - ex.original), "deepfool", *cfg.dfal_magnitude);
            } else {
                push(x, "clean", std::nullopt);
            }
        }
        for (std::size_t r = 0; cfg.augment && syn.provenance.size() < budget; ++r) {
            const auto i = order[r];
            if (cfg.attack && adv[r]) push(adv[r]->perturbed, to_string(*cfg.attack), adv[r]->perturbation_l2);
            else push(row_vector(in.pool, static_cast<Eigen::Index>(i)), "clean", std::nullopt);
        }

        // Labels come only from the counting victim oracle.
        CountingOracle oracle(victim_fn);
        for (Eigen::Index r = 0; r < syn.points.rows(); ++r) syn.labels.push_back(oracle(row_vector(syn.points, r)));
        syn.queries_used = oracle.count();
        rep.queries_used = syn.queries_used;
        rep.mean_l2 = l2_count ? l2_sum / static_cast<double>(l2_count) : 0.0;

        if (budget == 0) {
            rep.degenerate = true;
            rep.shadow_acc = majority_rate(in.test);
        } else {
            LabeledDataset shadow_train{in.dataset + "-synthetic", Role::train, syn.points, syn.labels, in.victim_train.class_count};
            auto spec = cfg.shadow;
            if (spec.kind == ModelSpec::Kind::knn) spec.k = std::min<int>(spec.k, static_cast<int>(budget));
            const auto shadow = fit_model(spec, shadow_train, split_seed(cfg.seed, 4));
            rep.shadow_acc = accuracy(shadow, in.test);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

inline PipelineReport run_pipeline(const PipelineConfig& cfg, const PipelineInputs& in) { return run_pipeline_budgets(cfg, in, {cfg.budget}).front(); }

// ---------------------------------------------------------------------------
// Standard inputs

/// Halfmoon train / adversary pool / test, all drawn from one generator run.
/// The pool is enlarged to min_pool when a budget needs more points.
inline PipelineInputs halfmoon_inputs(std::uint64_t seed, double sigma = 0.2, std::size_t train = 1800, std::size_t pool = 1900,
                                      std::size_t test = 200, std::size_t min_pool = 0) {
    pool = std::max(pool, min_pool);
    auto [ds, gt] = generate_halfmoon(train + pool + test, sigma, seed);
    std::vector<std::size_t> a(train), b(pool), c(test);
    std::iota(a.begin(), a.end(), std::size_t{0});
    std::iota(b.begin(), b.end(), train);
    std::iota(c.begin(), c.end(), train + pool);
    PipelineInputs in{"halfmoon", ds.subset(a), ds.subset(b).points, ds.subset(c)};
    in.victim_train.role = Role::train;
    in.test.role = Role::test;
    return in;
}

/// MNIST 1-vs-7 with a stratified 1000/500 split; the adversary pool is the
/// victim's training images (unlabelled).
inline PipelineInputs mnist17_inputs(const LabeledDataset& mnist17, std::uint64_t seed, std::size_t train = 1000, std::size_t test = 500) {
    auto [tr, te] = stratified_split(mnist17, train, test, seed);
    tr.role = Role::train;
    te.role = Role::test;
    Matrix pool = tr.points;
    return {"mnist1v7", std::move(tr), std::move(pool), std::move(te)};
}

// ---------------------------------------------------------------------------
// Reports

inline std::string pipeline_reports_to_csv(const std::vector<PipelineReport>& reports) {
    std::string out = "# schema=v1\ndataset,strategy,attack,budget,seed,victim_acc,shadow_acc,mean_L2,queries_used\n";
    for (const auto& r : reports) {
        out += r.dataset + "," + r.strategy + "," + r.attack + "," + std::to_string(r.budget) + "," + std::to_string(r.seed) + "," +
               detail::format_double(r.victim_acc) + "," + detail::format_double(r.shadow_acc) + "," + detail::format_double(r.mean_l2) + "," +
               std::to_string(r.queries_used) + "\n";
    }
    return out;
}

inline std::vector<PipelineReport> pipeline_reports_from_csv(std::string_view text, const std::string& name = "report") {
    std::vector<PipelineReport> out;
    std::size_t start = 0, line_no = 0;
    bool header_seen = false;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        const auto line = detail::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        start = end == std::string_view::npos ? text.size() : end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto where = name + ":" + std::to_string(line_no);
        const auto cols = detail::split(line, ',');
        if (!header_seen) {
            require(line == "dataset,strategy,attack,budget,seed,victim_acc,shadow_acc,mean_L2,queries_used", ErrorKind::parse,
                    where + ": not a pipeline report header");
            header_seen = true;
            continue;
        }
        require(cols.size() == 9, ErrorKind::parse, where + ": expected 9 columns");
        std::vector<double> v;
        for (std::size_t c = 3; c < 9; ++c) {
            const auto x = detail::parse_double(cols[c]);
            require(x.has_value(), ErrorKind::parse, where + ": bad number '" + std::string(cols[c]) + "'");
            v.push_back(*x);
        }
        PipelineReport r;
        r.dataset = cols[0];
        r.strategy = cols[1];
        r.attack = cols[2];
        r.budget = static_cast<std::size_t>(v[0]);
        r.seed = std::stoull(std::string(cols[4]));
        r.victim_acc = v[2];
        r.shadow_acc = v[3];
        r.mean_l2 = v[4];
        r.queries_used = static_cast<std::size_t>(v[5]);
        r.degenerate = r.budget == 0;
        out.push_back(std::move(r));
    }
    require(header_seen, ErrorKind::parse, name + ": missing header");
    return out;
}

struct ReportCell {
    double shadow_acc = 0.0;
    double mean_l2 = 0.0;
    double victim_acc = 0.0;
    std::size_t runs = 0;
};

/// Seed means keyed by (strategy/attack label, budget).
inline std::map<std::pair<std::string, std::size_t>, ReportCell> aggregate_reports(const std::vector<PipelineReport>& reports) {
    std::map<std::pair<std::string, std::size_t>, ReportCell> cells;
    for (const auto& r : reports) {
        const std::string label = r.attack == "none" ? r.strategy : r.strategy == "random" ? r.attack : r.strategy + "+" + r.attack;
        auto& c = cells[{label, r.budget}];
        c.shadow_acc += r.shadow_acc;
        c.mean_l2 += r.mean_l2;
        c.victim_acc += r.victim_acc;
        ++c.runs;
    }
    for (auto& [key, c] : cells) {
        c.shadow_acc /= static_cast<double>(c.runs);
        c.mean_l2 /= static_cast<double>(c.runs);
        c.victim_acc /= static_cast<double>(c.runs);
    }
    return cells;
}

/// One row per budget; an "Acc. Perb." column pair per strategy/attack, with
/// accuracies in percent.
inline std::string pipeline_markdown(const std::vector<PipelineReport>& reports) {
    const auto cells = aggregate_reports(reports);
    std::vector<std::string> labels;
    std::vector<std::size_t> budgets;
    for (const auto& r : reports) {
        const std::string label = r.attack == "none" ? r.strategy : r.strategy == "random" ? r.attack : r.strategy + "+" + r.attack;
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
        if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) budgets.push_back(r.budget);
    }
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os << "| dataset | budget | victim |";
    for (const auto& l : labels) os << " " << l << " Acc. | " << l << " Perb. |";
    os << "\n|---|---|---|";
    for (std::size_t i = 0; i < labels.size(); ++i) os << "---|---|";
    os << "\n";
    const std::string dataset = reports.empty() ? "" : reports.front().dataset;
    for (auto b : budgets) {
        double victim = 0.0;
        for (const auto& l : labels) {
            auto it = cells.find({l, b});
            if (it != cells.end()) victim = it->second.victim_acc;
        }
        os.precision(2);
        os << "| " << dataset << " | " << b << " | " << 100.0 * victim << " |";
        for (const auto& l : labels) {
            auto it = cells.find({l, b});
            if (it == cells.end()) {
                os << " - | - |";
                continue;
            }
            os.precision(2);
            os << " " << 100.0 * it->second.shadow_acc << " | ";
            os.precision(3);
            os << it->second.mean_l2 << " |";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace boundarylab
