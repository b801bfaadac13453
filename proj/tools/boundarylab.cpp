// boundarylab command-line driver.
//
// Exit codes: 0 ok, 1 usage / invalid argument, 2 io / parse, 3 numeric or
// any other runtime failure.

#include "boundarylab/boundarylab.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#ifndef BOUNDARYLAB_DEFAULT_DATA_DIR
#define BOUNDARYLAB_DEFAULT_DATA_DIR "data"
#endif

namespace bl = boundarylab;
namespace fs = std::filesystem;

namespace {

// Every output file goes through here. Nothing touches disk until commit(),
// and each file is written to a temporary name and renamed into place.
class OutputWriter {
public:
    void add(const std::string& path, std::string content) { files_.emplace_back(path, std::move(content)); }

    void commit() {
        for (const auto& [path, content] : files_) {
            const fs::path target(path);
            if (target.has_parent_path()) {
                std::error_code ec;
                fs::create_directories(target.parent_path(), ec);
                bl::require(!ec, bl::ErrorKind::io, "cannot create directory " + target.parent_path().string());
            }
            const std::string tmp = path + ".tmp." + std::to_string(::getpid());
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                bl::require(static_cast<bool>(out), bl::ErrorKind::io, "cannot write " + tmp);
                out << content;
                out.flush();
                bl::require(static_cast<bool>(out), bl::ErrorKind::io, "write failed for " + tmp);
            }
            std::error_code ec;
            fs::rename(tmp, target, ec);
            if (ec) {
                fs::remove(tmp, ec);
                bl::fail(bl::ErrorKind::io, "cannot rename into " + path);
            }
        }
        files_.clear();
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto part : bl::detail::split(text, ',')) {
        const auto t = bl::detail::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& s : split_list(text)) {
        const auto v = bl::detail::parse_double(s);
        bl::require(v.has_value(), bl::ErrorKind::invalid_argument, "bad number '" + s + "' in --" + what);
        out.push_back(*v);
    }
    bl::require(!out.empty(), bl::ErrorKind::invalid_argument, "--" + what + " must list at least one value");
    return out;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    for (double v : parse_doubles(text, what)) {
        bl::require(v >= 0 && v == std::floor(v), bl::ErrorKind::invalid_argument, "--" + what + " needs non-negative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string data_dir() {
    const char* env = std::getenv("BOUNDARYLAB_DATA_DIR");
    return env && *env ? env : BOUNDARYLAB_DEFAULT_DATA_DIR;
}

bl::LabeledDataset load_mnist17() {
    const auto dir = fs::path(data_dir());
    return bl::load_mnist_idx((dir / "mnist17-images.idx3-ubyte").string(), (dir / "mnist17-labels.idx1-ubyte").string(), std::set<int>{1, 7});
}

bl::LabeledDataset load_csv(const std::string& path) { return bl::dataset_from_csv(bl::detail::read_file(path), path); }

std::vector<std::uint64_t> seed_list(std::size_t seeds, const std::string& explicit_list) {
    std::vector<std::uint64_t> out;
    if (!explicit_list.empty()) {
        for (auto v : parse_counts(explicit_list, "seed-list")) out.push_back(v);
    } else {
        bl::require(seeds >= 1, bl::ErrorKind::invalid_argument, "--seeds must be >= 1");
        for (std::size_t s = 0; s < seeds; ++s) out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config file: flat key=value, '#' comments. Keys are the long option names of
// the chosen subcommand. Values are injected ahead of the command-line ones,
// and the last occurrence wins, so flags override the file.

std::map<std::string, std::string> read_config(const std::string& path) {
    const auto text = bl::detail::read_file(path);
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto t = bl::detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        bl::require(eq != std::string_view::npos, bl::ErrorKind::parse, path + ":" + std::to_string(line_no) + ": expected key=value");
        kv[std::string(bl::detail::trim(t.substr(0, eq)))] = std::string(bl::detail::trim(t.substr(eq + 1)));
    }
    return kv;
}

// Keys naming input files; they must exist when the config is read.
const std::set<std::string> kPathKeys{"data", "model", "surrogate", "in", "path"};

// Deepest subcommand named in args; pos ends just past its token.
CLI::App* find_subcommand(CLI::App& app, const std::vector<std::string>& args, std::size_t& pos) {
    CLI::App* cur = &app;
    pos = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i].empty() || args[i][0] == '-') continue;
        CLI::App* sub = cur->get_subcommand_no_throw(args[i]);
        if (!sub) continue;
        cur = sub;
        pos = i + 1;
    }
    return cur;
}

std::vector<std::string> splice_config(CLI::App& app, std::vector<std::string> args, const std::string& config_path) {
    if (config_path.empty()) return args;
    const auto kv = read_config(config_path);
    std::size_t pos = 0;
    CLI::App* sub = find_subcommand(app, args, pos);
    bl::require(sub != &app, bl::ErrorKind::invalid_argument, "--config needs a subcommand");
    std::vector<std::string> injected;
    for (const auto& [key, value] : kv) {
        const auto* opt = sub->get_option_no_throw("--" + key);
        bl::require(opt != nullptr, bl::ErrorKind::invalid_argument,
                    "unknown config key '" + key + "' for '" + sub->get_name() + "'");
        if (kPathKeys.count(key)) bl::require(fs::exists(value), bl::ErrorKind::io, "config key '" + key + "': no such file " + value);
        injected.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
    return args;
}

// ---------------------------------------------------------------------------
// Subcommand options

struct DatasetOpts {
    std::string kind, out, path, images, labels;
    std::size_t n = 1800;
    double sigma = 0.2, beta = 0.0;
    std::uint64_t seed = 0;
};

struct TrainOpts {
    std::string data, model = "knn:1", out = "model.json";
    std::uint64_t seed = 0;
    int epochs = 100, batch = 32;
    double lr = 0.5;
};

struct AttackOpts {
    std::string model, data, attack, out = "adversarial.csv", surrogate;
    double radius_factor = 1.05, epsilon = -1.0, step = 0.01, kernel_c = 0.0, overshoot = 0.02;
    int steps = 40, directions = 200, refine = 100, target = -1;
    bool clip = false;
    std::uint64_t seed = 0;
};

struct TheoryOpts {
    std::string beta = "0,1,2", estimator = "knn", out = ".", seed_list;
    std::size_t n = 500, seeds = 10, k = 1, trials = 200, grid = 200, reference = 20000;
    double bandwidth = 0.15, sigma = 0.2, delta = 0.05, h = 0.1, mu = 1.0, lipschitz = -1.0, C = 1.0, t = -1.0, lambda = 1.0,
           alpha = 1.0, c_dp = 1.0, floor = 1e-3;
    int thm = 1, d = 2;
    std::uint64_t seed = 0;
};

struct AlOpts {
    std::string dataset = "halfmoon", victim = "knn:1", shadow = "knn:1", attacks, strategy = "random", budgets = "2000", out = ".",
                seed_list, tag = "al";
    std::size_t seeds = 10, pool = 1900, train = 0, test = 0;
    double scale = 0.9, sigma = 0.2, dfal_magnitude = -1.0, kernel_epsilon = -1.0;
    int bbox_directions = -1, bbox_refine = -1;
    bool augment = false, no_baseline = false;
};

struct ReportOpts {
    std::string in, out;
};

// ---------------------------------------------------------------------------
// Commands

int cmd_dataset(const std::string& mode, const DatasetOpts& o, OutputWriter& w) {
    bl::require(!o.kind.empty(), bl::ErrorKind::invalid_argument, "--kind is required");
    bl::LabeledDataset ds;
    if (mode == "gen") {
        if (o.kind == "halfmoon") {
            ds = bl::generate_halfmoon(o.n, o.sigma, o.seed).first;
        } else if (o.kind == "halfmoon-beta") {
            const auto gt = bl::halfmoon_ground_truth(o.sigma);
            ds = bl::sample_training_set(gt, o.beta, o.n, o.seed);
        } else {
            bl::fail(bl::ErrorKind::invalid_argument, "unknown --kind '" + o.kind + "' for gen (halfmoon, halfmoon-beta)");
        }
    } else {
        if (o.kind == "mnist1v7") {
            ds = o.images.empty() ? load_mnist17() : bl::load_mnist_idx(o.images, o.labels, std::set<int>{1, 7});
        } else if (o.kind == "mnist") {
            bl::require(!o.images.empty() && !o.labels.empty(), bl::ErrorKind::invalid_argument, "mnist needs --images and --labels");
            ds = bl::load_mnist_idx(o.images, o.labels);
        } else if (o.kind == "abalone") {
            bl::require(!o.path.empty(), bl::ErrorKind::invalid_argument, "abalone needs --path");
            ds = bl::load_abalone(o.path);
        } else if (o.kind == "csv") {
            bl::require(!o.path.empty(), bl::ErrorKind::invalid_argument, "csv needs --path");
            ds = load_csv(o.path);
        } else {
            bl::fail(bl::ErrorKind::invalid_argument, "unknown --kind '" + o.kind + "' for load (mnist1v7, mnist, abalone, csv)");
        }
    }
    const std::string out = o.out.empty() ? o.kind + ".csv" : o.out;
    w.add(out, bl::dataset_to_csv(ds));
    std::cout << "wrote " << ds.size() << " rows (d=" << ds.dim() << ") to " << out << "\n";
    return 0;
}

int cmd_train(const TrainOpts& o, OutputWriter& w) {
    const auto train = load_csv(o.data);
    auto spec = bl::ModelSpec::parse(o.model);
    spec.train.epochs = o.epochs;
    spec.train.batch_size = o.batch;
    spec.train.learning_rate = o.lr;
    const auto clf = bl::fit_model(spec, train, o.seed);
    w.add(o.out, bl::serialize_model(clf));
    std::cout << bl::model_kind(clf) << " trained on " << train.size() << " rows; train accuracy "
              << bl::detail::format_double(bl::accuracy(clf, train)) << "\n";
    return 0;
}

int cmd_attack(const AttackOpts& o, OutputWriter& w) {
    const auto method = bl::parse_attack(o.attack);
    const auto victim = bl::deserialize_model(bl::detail::read_file(o.model));
    const auto data = load_csv(o.data);
    std::optional<bl::MlpModel> surrogate;
    if (!o.surrogate.empty()) {
        auto s = bl::deserialize_model(bl::detail::read_file(o.surrogate));
        auto* mlp = std::get_if<bl::MlpModel>(&s);
        bl::require(mlp != nullptr, bl::ErrorKind::invalid_argument, "--surrogate must be an mlp model");
        surrogate = *mlp;
    }
    bl::AttackParams prm;
    prm.direct_factor = o.radius_factor;
    prm.pgd_step = o.step;
    prm.pgd_steps = o.steps;
    prm.deepfool_overshoot = o.overshoot;
    prm.bbox.directions = static_cast<std::size_t>(o.directions);
    prm.bbox.refine_iterations = static_cast<std::size_t>(o.refine);
    prm.clip_box = o.clip;
    if (o.kernel_c > 0) prm.kernel_c = o.kernel_c;
    if (o.epsilon >= 0) prm.kernel_epsilon = prm.fgsm_epsilon = prm.pgd_epsilon = o.epsilon;
    if (o.target >= 0) prm.cw.target = o.target;
    if (method == bl::AttackMethod::kernel_sub && !prm.kernel_c) {
        if (const auto* knn = std::get_if<bl::KnnModel>(&victim)) prm.kernel_c = bl::kernel_substitute_default_c(*knn);
    }
    std::vector<bl::AdversarialExample> out;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        try {
            out.push_back(bl::run_attack(method, victim, surrogate ? &*surrogate : nullptr, data.point(i), prm, bl::split_seed(o.seed, i)));
        } catch (const bl::Error& e) {
            if (e.kind() != bl::ErrorKind::attack_infeasible) throw;
            const auto x = data.point(i);
            const int y = bl::predict_label(victim, x);
            out.push_back(bl::make_example(x, x, method, y, y));
            ++failures;
        }
    }
    w.add(o.out, bl::adversarial_to_csv(out));
    std::size_t ok = 0;
    double l2 = 0.0;
    for (const auto& ex : out) {
        ok += ex.success;
        l2 += ex.perturbation_l2;
    }
    std::cout << bl::to_string(method) << ": " << ok << "/" << out.size() << " successful, mean L2 "
              << bl::detail::format_double(out.empty() ? 0.0 : l2 / static_cast<double>(out.size())) << ", infeasible " << failures << "\n";
    return 0;
}

std::vector<std::pair<std::string, bl::ModelSpec>> theory_estimators(const TheoryOpts& o) {
    std::vector<std::pair<std::string, bl::ModelSpec>> out;
    for (const auto& name : split_list(o.estimator)) {
        if (name == "knn") out.emplace_back("knn:" + std::to_string(o.k), bl::ModelSpec::parse("knn:" + std::to_string(o.k)));
        else if (name == "nw") out.emplace_back("nw:" + bl::detail::format_double(o.bandwidth),
                                                bl::ModelSpec::parse("nw:" + bl::detail::format_double(o.bandwidth)));
        else out.emplace_back(name, bl::ModelSpec::parse(name));
    }
    bl::require(!out.empty(), bl::ErrorKind::invalid_argument, "--estimator must name at least one estimator");
    return out;
}

int cmd_theory(const std::string& mode, const TheoryOpts& o, unsigned jobs, OutputWriter& w) {
    const auto out_dir = fs::path(o.out);
    if (mode == "beta-sweep") {
        bl::BetaExperimentConfig cfg;
        cfg.betas = parse_doubles(o.beta, "beta");
        const auto seeds = seed_list(o.seeds, o.seed_list);
        cfg.n = o.n;
        cfg.seeds = seeds.size();
        cfg.base_seed = o.seed;
        cfg.grid_resolution = static_cast<int>(o.grid);
        cfg.density_floor = o.floor;
        cfg.jobs = jobs;
        const auto rep = bl::beta_monotonicity_experiment(bl::halfmoon_ground_truth(o.sigma), theory_estimators(o), cfg);
        const auto summary = bl::beta_trend_summary(rep);
        w.add((out_dir / "beta_sweep.csv").string(), bl::beta_trend_to_csv(rep));
        w.add((out_dir / "beta_sweep_summary.txt").string(), summary);
        std::cout << summary;
        return 0;
    }
    if (mode == "bounds") {
        std::ostringstream os;
        os.precision(17);
        if (o.thm == 1) {
            bl::Thm1Params p;
            p.n = o.n;
            p.k = o.k;
            p.d = o.d;
            p.delta = o.delta;
            p.alpha = o.alpha;
            p.c_dp = o.c_dp;
            const auto c = bl::thm1_constants(p);
            os << "C0=" << c.c0 << "\ndelta_p=" << c.delta_p << "\np=" << c.p << "\n";
        } else if (o.thm == 2 || o.thm == 3) {
            bl::KernelBoundParams p;
            p.n = static_cast<double>(o.n);
            p.h = o.h;
            p.d = o.d;
            p.lipschitz = o.lipschitz >= 0 ? o.lipschitz : 1.0;
            p.C = o.C;
            if (o.t > 0) p.t = o.t;
            p.lambda = o.lambda;
            const double b = o.thm == 2 ? bl::thm2_bound(p, o.mu) : bl::thm3_bound(p, o.mu);
            os << "t=" << p.t_value() << "\nbound=" << b << "\n";
        } else {
            bl::fail(bl::ErrorKind::invalid_argument, "--thm must be 1, 2 or 3");
        }
        std::cout << os.str();
        return 0;
    }
    // verify
    bl::KnnBoundConfig cfg;
    cfg.beta = parse_doubles(o.beta, "beta").front();
    cfg.n = o.n;
    cfg.k = o.k;
    cfg.delta = o.delta;
    cfg.trials = o.trials;
    cfg.grid_resolution = static_cast<int>(std::min<std::size_t>(o.grid, 1000));
    cfg.alpha = o.alpha;
    if (o.lipschitz >= 0) cfg.lipschitz = o.lipschitz;
    cfg.c_dp = o.c_dp;
    cfg.reference_samples = o.reference;
    cfg.density_floor = o.floor;
    cfg.seed = o.seed;
    cfg.jobs = jobs;
    const auto rep = bl::verify_knn_bound(bl::halfmoon_ground_truth(o.sigma), cfg);
    std::ostringstream os;
    os << "C0=" << bl::detail::format_double(rep.constants.c0) << " p=" << bl::detail::format_double(rep.constants.p)
       << " lipschitz=" << bl::detail::format_double(rep.lipschitz) << " radius_defined=" << (rep.radius_defined ? 1 : 0)
       << " predicted_set_fraction=" << bl::detail::format_double(rep.predicted_set_size)
       << "\nviolation_fraction=" << bl::detail::format_double(rep.violation_fraction)
       << " set_violation_fraction=" << bl::detail::format_double(rep.set_violation_fraction) << "\n";
    w.add((out_dir / "knn_bound.csv").string(), bl::knn_bound_to_csv(rep));
    w.add((out_dir / "knn_bound_summary.txt").string(), os.str());
    std::cout << os.str();
    return 0;
}

int cmd_al(const AlOpts& o, unsigned jobs, OutputWriter& w) {
    const auto budgets = parse_counts(o.budgets, "budgets");
    const auto seeds = seed_list(o.seeds, o.seed_list);
    std::vector<bl::Strategy> strategies;
    for (const auto& s : split_list(o.strategy)) strategies.push_back(bl::parse_strategy(s));
    bl::require(!strategies.empty(), bl::ErrorKind::invalid_argument, "--strategy must list at least one strategy");
    std::vector<std::optional<bl::AttackMethod>> attacks;
    if (!o.no_baseline) attacks.emplace_back(std::nullopt);
    for (const auto& a : split_list(o.attacks)) attacks.emplace_back(bl::parse_attack(a));
    bl::require(!attacks.empty(), bl::ErrorKind::invalid_argument, "nothing to run: --no-baseline without --attacks");
    bl::require(o.dataset == "halfmoon" || o.dataset == "mnist1v7", bl::ErrorKind::invalid_argument,
                "unknown --dataset '" + o.dataset + "' (halfmoon, mnist1v7)");
    const std::size_t max_budget = *std::max_element(budgets.begin(), budgets.end());

    std::optional<bl::LabeledDataset> mnist;
    if (o.dataset == "mnist1v7") mnist = load_mnist17();
    std::vector<bl::PipelineInputs> inputs(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        if (mnist) {
            inputs[s] = bl::mnist17_inputs(*mnist, seeds[s], o.train ? o.train : 1000, o.test ? o.test : 500);
        } else {
            inputs[s] = bl::halfmoon_inputs(seeds[s], o.sigma, o.train ? o.train : 1800, o.pool, o.test ? o.test : 200, max_budget);
        }
    }

    bl::PipelineConfig base;
    base.victim = bl::ModelSpec::parse(o.victim);
    base.shadow = bl::ModelSpec::parse(o.shadow);
    base.attack_params = bl::default_attack_params(o.dataset);
    if (o.kernel_epsilon > 0) base.attack_params.kernel_epsilon = o.kernel_epsilon;
    if (o.bbox_directions > 0) base.attack_params.bbox.directions = static_cast<std::size_t>(o.bbox_directions);
    if (o.bbox_refine >= 0) base.attack_params.bbox.refine_iterations = static_cast<std::size_t>(o.bbox_refine);
    base.scale = o.scale;
    base.augment = o.augment;
    if (o.dfal_magnitude > 0) base.dfal_magnitude = o.dfal_magnitude;

    // One task per (strategy, attack, seed); each covers every budget.
    struct Task {
        bl::Strategy strategy;
        std::optional<bl::AttackMethod> attack;
        std::size_t seed_index;
    };
    std::vector<Task> tasks;
    for (auto st : strategies)
        for (const auto& at : attacks)
            for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({st, at, s});
    std::vector<std::vector<bl::PipelineReport>> results(tasks.size());
    bl::parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        auto cfg = base;
        cfg.strategy = tasks[t].strategy;
        cfg.attack = tasks[t].attack;
        cfg.seed = seeds[tasks[t].seed_index];
        results[t] = bl::run_pipeline_budgets(cfg, inputs[tasks[t].seed_index], budgets);
    });
    std::vector<bl::PipelineReport> reports;
    for (auto& r : results) reports.insert(reports.end(), r.begin(), r.end());

    const auto md = bl::pipeline_markdown(reports);
    const auto out_dir = fs::path(o.out);
    w.add((out_dir / (o.tag + ".csv")).string(), bl::pipeline_reports_to_csv(reports));
    w.add((out_dir / (o.tag + ".md")).string(), md);
    std::cout << md;
    return 0;
}

int cmd_report(const ReportOpts& o, OutputWriter& w) {
    const auto reports = bl::pipeline_reports_from_csv(bl::detail::read_file(o.in), o.in);
    const auto md = bl::pipeline_markdown(reports);
    if (!o.out.empty()) w.add(o.out, md);
    std::cout << md;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundarylab: boundary-concentrated sampling, estimators, attacks and adversarial active learning"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    unsigned jobs = 1;
    app.add_option("--config", config_path, "key=value file; keys are the subcommand's long option names");
    app.add_option("--jobs", jobs, "worker threads for independent (seed, cell) tasks")->check(CLI::Range(1u, 256u));

    auto* dataset = app.add_subcommand("dataset", "generate or load a dataset and write it as CSV");
    dataset->require_subcommand(1);
    DatasetOpts dso;
    for (auto* sub : {dataset->add_subcommand("gen", "synthetic data (halfmoon, halfmoon-beta)"),
                      dataset->add_subcommand("load", "files on disk (mnist1v7, mnist, abalone, csv)")}) {
        sub->add_option("--kind", dso.kind, "dataset kind")->required();
        sub->add_option("--out", dso.out, "output CSV (default <kind>.csv)");
        if (sub->get_name() == "gen") {
            sub->add_option("--n", dso.n, "rows");
            sub->add_option("--sigma", dso.sigma, "halfmoon noise");
            sub->add_option("--beta", dso.beta, "concentration exponent for halfmoon-beta");
            sub->add_option("--seed", dso.seed);
        } else {
            sub->add_option("--path", dso.path, "abalone or csv file");
            sub->add_option("--images", dso.images, "IDX image file (default: mnist17 files in BOUNDARYLAB_DATA_DIR)");
            sub->add_option("--labels", dso.labels, "IDX label file");
        }
    }

    auto* train = app.add_subcommand("train", "fit a model on a CSV dataset and save it as JSON");
    TrainOpts tro;
    train->add_option("--data", tro.data, "training CSV")->required();
    train->add_option("--model", tro.model, "knn:K | nw:H[:kernel] | krr:gaussian|linear:LAMBDA[:GAMMA] | mlp:W1,W2");
    train->add_option("--out", tro.out);
    train->add_option("--seed", tro.seed);
    train->add_option("--epochs", tro.epochs);
    train->add_option("--batch", tro.batch);
    train->add_option("--lr", tro.lr);

    auto* attack = app.add_subcommand("attack", "attack every row of a CSV dataset");
    AttackOpts ato;
    attack->add_option("--model", ato.model, "victim model JSON")->required();
    attack->add_option("--data", ato.data, "points to attack (CSV)")->required();
    attack->add_option("--attack", ato.attack, "direct, rba, rba_exact, kernel_sub, bbox, fgsm, pgd, deepfool, cw")->required();
    attack->add_option("--out", ato.out);
    attack->add_option("--surrogate", ato.surrogate, "MLP used by gradient attacks on non-MLP victims");
    attack->add_option("--radius-factor", ato.radius_factor, "direct: r = factor * half distance to the nearest other-label point");
    attack->add_option("--epsilon", ato.epsilon, "kernel_sub / fgsm / pgd step bound");
    attack->add_option("--step", ato.step, "pgd step size");
    attack->add_option("--steps", ato.steps, "pgd iterations");
    attack->add_option("--kernel-c", ato.kernel_c, "kernel_sub bandwidth (default: median 10-NN squared distance)");
    attack->add_option("--overshoot", ato.overshoot, "deepfool overshoot");
    attack->add_option("--directions", ato.directions, "bbox random directions");
    attack->add_option("--refine", ato.refine, "bbox refinement iterations");
    attack->add_option("--target", ato.target, "cw target class");
    attack->add_flag("--clip", ato.clip, "clip to [0,1]^d");
    attack->add_option("--seed", ato.seed);

    auto* theory = app.add_subcommand("theory", "correctness-set experiments and bound evaluators");
    theory->require_subcommand(1);
    TheoryOpts tho;
    auto* sweep = theory->add_subcommand("beta-sweep", "correct-region fraction against beta");
    auto* bounds = theory->add_subcommand("bounds", "evaluate a bound's constants");
    auto* verify = theory->add_subcommand("verify", "Monte-Carlo check of the k-NN bound");
    for (auto* sub : {sweep, bounds, verify}) {
        sub->add_option("--n", tho.n, "training-set size");
        sub->add_option("--k", tho.k, "neighbours");
        sub->add_option("--delta", tho.delta, "failure probability");
        sub->add_option("--alpha", tho.alpha, "Hoelder exponent");
        sub->add_option("--c-dp", tho.c_dp, "constant in delta_p");
        sub->add_option("--lipschitz", tho.lipschitz, "Lipschitz constant of eta (default: estimated, or 1 for bounds)");
    }
    for (auto* sub : {sweep, verify}) {
        sub->add_option("--beta", tho.beta, "beta values, comma separated");
        sub->add_option("--sigma", tho.sigma, "halfmoon noise");
        sub->add_option("--grid", tho.grid, "grid resolution");
        sub->add_option("--floor", tho.floor, "density floor of the beta sampler");
        sub->add_option("--seed", tho.seed, "base seed");
        sub->add_option("--out", tho.out, "output directory");
    }
    sweep->add_option("--seeds", tho.seeds, "seeds 0..N-1");
    sweep->add_option("--seed-list", tho.seed_list, "explicit seeds, comma separated");
    sweep->add_option("--estimator", tho.estimator, "knn, nw or model specs, comma separated");
    sweep->add_option("--bandwidth", tho.bandwidth, "NW bandwidth");
    verify->add_option("--trials", tho.trials);
    verify->add_option("--reference", tho.reference, "samples used to estimate r_p");
    bounds->add_option("--thm", tho.thm, "1 (k-NN), 2 (Nadaraya-Watson) or 3 (RKHS)");
    bounds->add_option("--d", tho.d, "dimension");
    bounds->add_option("--bandwidth", tho.h, "bandwidth h");
    bounds->add_option("--mu", tho.mu, "density at x");
    bounds->add_option("--C", tho.C, "kernel constant");
    bounds->add_option("--t", tho.t, "confidence parameter (default ln^2 n)");
    bounds->add_option("--lambda", tho.lambda, "RKHS regularisation");

    auto* al = app.add_subcommand("al", "adversarial active learning: train, generate, retrain");
    AlOpts alo;
    al->add_option("--dataset", alo.dataset, "halfmoon or mnist1v7");
    al->add_option("--victim", alo.victim, "victim model spec");
    al->add_option("--shadow", alo.shadow, "shadow model spec");
    al->add_option("--attacks", alo.attacks, "attacks applied to selected points, comma separated");
    al->add_option("--strategy", alo.strategy, "random, margin, dfal, max_confidence (comma separated)");
    al->add_option("--budgets", alo.budgets, "query budgets, comma separated");
    al->add_option("--seeds", alo.seeds, "seeds 0..N-1");
    al->add_option("--seed-list", alo.seed_list, "explicit seeds, comma separated");
    al->add_option("--pool", alo.pool, "halfmoon adversary pool size (raised to the largest budget)");
    al->add_option("--train", alo.train, "victim training size (default 1800 halfmoon, 1000 mnist1v7)");
    al->add_option("--test", alo.test, "test size (default 200 halfmoon, 500 mnist1v7)");
    al->add_option("--sigma", alo.sigma, "halfmoon noise");
    al->add_option("--scale", alo.scale, "perturbation scale applied before querying");
    al->add_option("--dfal-magnitude", alo.dfal_magnitude, "rescale DeepFool perturbations to this L2 norm");
    al->add_option("--kernel-epsilon", alo.kernel_epsilon, "kernel_sub step (default 0.15)");
    al->add_option("--bbox-directions", alo.bbox_directions);
    al->add_option("--bbox-refine", alo.bbox_refine);
    al->add_flag("--augment", alo.augment, "half clean points, half adversarial copies");
    al->add_flag("--no-baseline", alo.no_baseline, "skip the un-attacked run");
    al->add_option("--out", alo.out, "output directory");
    al->add_option("--tag", alo.tag, "output file stem");

    auto* report = app.add_subcommand("report", "markdown table from a pipeline CSV");
    ReportOpts rpo;
    report->add_option("--in", rpo.in, "pipeline CSV")->required();
    report->add_option("--out", rpo.out, "markdown output file");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // --config must be known before parsing so its values can be spliced in.
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
        }
        args = splice_config(app, std::move(args), config_path);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        CLI::App* cur = &app;
        while (!cur->get_subcommands().empty()) cur = cur->get_subcommands().front();
        std::cerr << "error: " << e.what() << "\n\n" << cur->help();
        return 1;
    } catch (const bl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return bl::exit_code(e.kind());
    }

    OutputWriter writer;
    try {
        int rc = 0;
        if (dataset->parsed()) rc = cmd_dataset(dataset->get_subcommands().front()->get_name(), dso, writer);
        else if (train->parsed()) rc = cmd_train(tro, writer);
        else if (attack->parsed()) rc = cmd_attack(ato, writer);
        else if (theory->parsed()) rc = cmd_theory(theory->get_subcommands().front()->get_name(), tho, jobs, writer);
        else if (al->parsed()) rc = cmd_al(alo, jobs, writer);
        else if (report->parsed()) rc = cmd_report(rpo, writer);
        writer.commit();
        return rc;
    } catch (const bl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return bl::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
