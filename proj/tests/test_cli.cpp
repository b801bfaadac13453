#include "boundarylab/active.hpp"
#include "boundarylab/data.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int rc;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("boundarylab_cli_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunResult run(const std::string& args) const {
        const auto log = dir_ / "stdout.txt";
        const std::string cmd = "cd '" + dir_.string() + "' && '" + BOUNDARYLAB_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string file(const std::string& name) const { return slurp(dir_ / name); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

    fs::path dir_;
};

std::size_t data_rows(const std::string& csv) {
    std::size_t n = 0;
    std::istringstream in(csv);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        ++n;
    }
    return n;
}

}  // namespace

TEST_F(Cli, DatasetGenHalfmoon) {
    const auto r = run("dataset gen --kind halfmoon --n 1800 --sigma 0.2 --seed 1 --out hm.csv");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto csv = file("hm.csv");
    EXPECT_EQ(csv.rfind("# schema=v1\n", 0), 0u);
    EXPECT_EQ(data_rows(csv), 1800u);
    const auto ds = boundarylab::dataset_from_csv(csv);
    EXPECT_EQ(ds.dim(), 2);
    ASSERT_EQ(run("dataset gen --kind halfmoon --n 1800 --sigma 0.2 --seed 1 --out again.csv").rc, 0);
    EXPECT_EQ(file("again.csv"), csv);
}

TEST_F(Cli, MissingKindIsUsageError) {
    const auto r = run("dataset gen --n 10");
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.out.find("--kind"), std::string::npos);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
}

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run("").rc, 1); }

TEST_F(Cli, LoadMnistFromDataDir) {
    const auto r = run("dataset load --kind mnist1v7 --out m.csv");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto ds = boundarylab::dataset_from_csv(file("m.csv"));
    EXPECT_EQ(ds.dim(), 784);
    EXPECT_EQ(ds.size(), 2197u);
}

TEST_F(Cli, MissingFileIsIoError) {
    EXPECT_EQ(run("dataset load --kind csv --path nowhere.csv").rc, 2);
    EXPECT_EQ(run("train --data nowhere.csv").rc, 2);
}

TEST_F(Cli, MalformedCsvIsParseError) {
    write("bad.csv", "# schema=v1\nx0,x1,label\n1,abc,0\n");
    const auto r = run("train --data bad.csv");
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.out.find(":3"), std::string::npos) << r.out;
}

TEST_F(Cli, TrainAndAttack) {
    ASSERT_EQ(run("dataset gen --kind halfmoon --n 300 --seed 2 --out train.csv").rc, 0);
    ASSERT_EQ(run("dataset gen --kind halfmoon --n 20 --seed 3 --out q.csv").rc, 0);
    auto r = run("train --data train.csv --model knn:1 --out v.json");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto model = boundarylab::deserialize_model(file("v.json"));
    EXPECT_STREQ(boundarylab::model_kind(model), "knn");
    for (const char* a : {"rba", "direct", "kernel_sub", "bbox"}) {
        r = run(std::string("attack --model v.json --data q.csv --attack ") + a + " --out adv.csv --directions 20");
        ASSERT_EQ(r.rc, 0) << a << r.out;
        const auto adv = boundarylab::adversarial_from_csv(file("adv.csv"));
        EXPECT_EQ(adv.size(), 20u) << a;
    }
    // gradient attacks on a k-NN victim need a surrogate
    EXPECT_NE(run("attack --model v.json --data q.csv --attack fgsm").rc, 0);
    ASSERT_EQ(run("train --data train.csv --model mlp:8 --epochs 5 --out s.json").rc, 0);
    r = run("attack --model v.json --surrogate s.json --data q.csv --attack fgsm --epsilon 0.1 --out f.csv");
    ASSERT_EQ(r.rc, 0) << r.out;
    for (const auto& ex : boundarylab::adversarial_from_csv(file("f.csv"))) EXPECT_LE(ex.perturbation_linf, 0.1 + 1e-12);
}

TEST_F(Cli, UnknownAttackListsValidNames) {
    ASSERT_EQ(run("dataset gen --kind halfmoon --n 50 --out t.csv").rc, 0);
    ASSERT_EQ(run("train --data t.csv --out v.json").rc, 0);
    auto r = run("attack --model v.json --data t.csv --attack lbfgs");
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.out.find("kernel_sub"), std::string::npos);
    r = run("al --dataset halfmoon --attacks lbfgs --budgets 10");
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.out.find("deepfool"), std::string::npos);
}

TEST_F(Cli, TheoryBoundsMatchesHighPrecision) {
    auto r = run("theory bounds --thm 1 --n 1000 --d 2 --k 50 --delta 0.05");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_NE(r.out.find("0.50105181840424"), std::string::npos) << r.out;
    r = run("theory bounds --thm 2 --n 10000 --bandwidth 0.1 --d 2 --mu 1");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_NE(r.out.find("11.2842369877643"), std::string::npos) << r.out;
}

TEST_F(Cli, TheoryEmptyBetaIsUsageError) {
    EXPECT_EQ(run("theory beta-sweep --beta '' --n 50 --seeds 1").rc, 1);
    EXPECT_FALSE(fs::exists(dir_ / "beta_sweep.csv"));
}

TEST_F(Cli, TheoryBetaSweepWritesSummary) {
    const auto r = run("theory beta-sweep --beta 0,1,2 --n 100 --seeds 2 --estimator knn --k 5 --grid 30 --out sweep");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto summary = file("sweep/beta_sweep_summary.txt");
    EXPECT_NE(summary.find("spearman"), std::string::npos) << summary;
    EXPECT_EQ(data_rows(file("sweep/beta_sweep.csv")), 6u);
}

TEST_F(Cli, TheoryVerifyWritesOneRowPerTrial) {
    const auto r = run("theory verify --n 100 --k 10 --trials 5 --grid 10 --reference 1000 --out v");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_EQ(data_rows(file("v/knn_bound.csv")), 5u);
}

TEST_F(Cli, AlMarkdownHasAccAndPerbColumns) {
    const auto r = run("al --dataset halfmoon --victim knn:1 --attacks direct,kernel_sub --budgets 100,200 --seeds 2 "
                       "--train 300 --pool 300 --test 100 --out al");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto md = file("al/al.md");
    for (const char* col : {"direct Acc.", "direct Perb.", "kernel_sub Acc.", "random Acc."}) EXPECT_NE(md.find(col), std::string::npos) << col;
    // strategy x (none + attacks) x seeds x budgets
    EXPECT_EQ(data_rows(file("al/al.csv")), 1u * 3 * 2 * 2);
    EXPECT_NE(r.out.find("| halfmoon |"), std::string::npos);
}

TEST_F(Cli, AlDeterministicAndJobsIndependent) {
    const std::string args = "al --dataset halfmoon --attacks rba,bbox --bbox-directions 20 --budgets 50,100 --seeds 2 --train 200 --pool 200 --test 100";
    ASSERT_EQ(run(args + " --out a").rc, 0);
    ASSERT_EQ(run(args + " --out b").rc, 0);
    ASSERT_EQ(run("--jobs 3 " + args + " --out c").rc, 0);
    EXPECT_EQ(file("a/al.csv"), file("b/al.csv"));
    EXPECT_EQ(file("a/al.csv"), file("c/al.csv"));
    EXPECT_EQ(file("a/al.md"), file("c/al.md"));
}

TEST_F(Cli, AlFailureWritesNothing) {
    const auto r = run("al --dataset halfmoon --shadow krr:linear:1e-300 --budgets 0,50 --train 100 --pool 100 --test 50 --out x");
    EXPECT_NE(r.rc, 0);
    EXPECT_FALSE(fs::exists(dir_ / "x" / "al.csv"));
    EXPECT_FALSE(fs::exists(dir_ / "x" / "al.md"));
}

TEST_F(Cli, ReportRebuildsMarkdown) {
    ASSERT_EQ(run("al --dataset halfmoon --attacks direct --budgets 40 --seeds 2 --train 100 --pool 100 --test 50 --out al").rc, 0);
    const auto r = run("report --in al/al.csv --out table.md");
    ASSERT_EQ(r.rc, 0) << r.out;
    EXPECT_EQ(file("table.md"), file("al/al.md"));
    write("junk.csv", "# schema=v1\nfoo,bar\n");
    EXPECT_EQ(run("report --in junk.csv").rc, 2);
}

TEST_F(Cli, ConfigFilePrecedence) {
    write("gen.cfg", "# halfmoon config\nkind = halfmoon\nn = 40   # rows\nseed = 5\nout = cfg.csv\n");
    ASSERT_EQ(run("--config gen.cfg dataset gen").rc, 0);
    EXPECT_EQ(data_rows(file("cfg.csv")), 40u);
    // the command line wins over the file
    ASSERT_EQ(run("--config gen.cfg dataset gen --n 24").rc, 0);
    EXPECT_EQ(data_rows(file("cfg.csv")), 24u);
    ASSERT_EQ(run("dataset gen --kind halfmoon --n 40 --seed 5 --out direct.csv").rc, 0);
    ASSERT_EQ(run("--config gen.cfg dataset gen").rc, 0);
    EXPECT_EQ(file("cfg.csv"), file("direct.csv"));
}

TEST_F(Cli, ConfigRejectsUnknownKeysAndMissingFiles) {
    write("bad.cfg", "kind = halfmoon\ncolour = blue\n");
    auto r = run("--config bad.cfg dataset gen");
    EXPECT_EQ(r.rc, 1);
    EXPECT_NE(r.out.find("colour"), std::string::npos);
    write("missing.cfg", "data = nowhere.csv\n");
    EXPECT_EQ(run("--config missing.cfg train").rc, 2);
    EXPECT_EQ(run("--config absent.cfg dataset gen --kind halfmoon").rc, 2);
}

TEST_F(Cli, AlMnistRandomImprovesWithBudget) {
    const auto r = run("al --dataset mnist1v7 --strategy random --budgets 400,600,1000 --seeds 2 --out m");
    ASSERT_EQ(r.rc, 0) << r.out;
    const auto reps = boundarylab::pipeline_reports_from_csv(file("m/al.csv"));
    const auto cells = boundarylab::aggregate_reports(reps);
    const double a = cells.at({"random", 400}).shadow_acc, b = cells.at({"random", 600}).shadow_acc, c = cells.at({"random", 1000}).shadow_acc;
    EXPECT_LE(a, b);
    EXPECT_LE(b, c);
}
