#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "engage/csv.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result run(const std::string& args, const fs::path& scratch, const std::string& env = "") {
    const auto out = scratch / "stdout.txt";
    const auto err = scratch / "stderr.txt";
    const std::string cmd = env + " " + std::string(ENGAGE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = engage::csv::read_file(out);
    r.err = engage::csv::read_file(err);
    return r;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

// Small cohort shared by the workflow tests.
struct Workspace {
    engage::test::TempDir dir{"engage_cli"};
    fs::path data = dir / "data";
    Workspace() {
        const auto r = run("synth --days 3 --out " + data.string(), dir.path());
        if (r.code != 0) throw std::runtime_error("synth failed: " + r.err);
        const auto f = run("features --data " + data.string() + " --out " + (dir / "features.csv").string(), dir.path());
        if (f.code != 0) throw std::runtime_error("features failed: " + f.err);
    }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

const std::string kSmallGrid = " --grid-leaves 3,7 --grid-lr 0.1 --grid-rounds 20,50";

}  // namespace

TEST(Cli, HelpExitsZero) {
    engage::test::TempDir dir;
    const auto r = run("--help", dir.path());
    EXPECT_EQ(r.code, 0);
    for (const char* sub : {"synth", "clean", "segment", "eda", "hrv", "features", "train", "eval", "report"}) {
        EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
    }
}

TEST(Cli, MissingScheduleIsIoError) {
    engage::test::TempDir dir;
    const auto r = run("features --data " + dir.path().string(), dir.path());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find((dir / "schedule.csv").string()), std::string::npos) << r.err;
}

TEST(Cli, UnknownOptionIsUsageError) {
    engage::test::TempDir dir;
    EXPECT_EQ(run("synth --bogus 1", dir.path()).code, 1);
    EXPECT_EQ(run("", dir.path()).code, 1);
}

TEST(Cli, UnknownTargetListsChoices) {
    auto& w = workspace();
    const auto r = run("eval --features " + (w.dir / "features.csv").string() + " --target foo", w.dir.path());
    EXPECT_EQ(r.code, 1);
    for (const char* n : {"behavioural", "emotional", "cognitive", "overall", "all"}) {
        EXPECT_NE(r.err.find(n), std::string::npos) << n;
    }
}

TEST(Cli, CleanSegmentAndSessionViews) {
    auto& w = workspace();
    const auto d = " --data " + w.data.string();
    auto r = run("clean" + d + " --out " + (w.dir / "quality.csv").string(), w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto quality = engage::csv::read_file(w.dir / "quality.csv");
    EXPECT_EQ(first_line(quality),
              "participant_id,class_id,role,flat_fraction,n_abrupt_drops,quantization_flag,accepted,reasons");

    r = run("segment" + d + " --out " + (w.dir / "boundaries.csv").string(), w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto b = engage::csv::read_file(w.dir / "boundaries.csv");
    EXPECT_EQ(first_line(b), "class_id,actual_start,actual_end,n_participants_used");
    EXPECT_EQ(std::count(b.begin(), b.end(), '\n'), 16);

    const auto features = engage::csv::read_file(w.dir / "features.csv");
    const auto row = features.substr(features.find('\n') + 1);
    const auto pid = row.substr(0, row.find(','));
    const auto rest = row.substr(pid.size() + 1);
    const auto cid = rest.substr(0, rest.find(','));
    r = run("eda" + d + " --session " + pid + ":" + cid + " --out " + (w.dir / "decomp.csv").string(), w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(engage::csv::read_file(w.dir / "decomp.csv").size(), 1000u);
    r = run("hrv" + d + " --session " + pid + ":" + cid + " --out " + (w.dir / "hrv.csv").string(), w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(engage::csv::read_file(w.dir / "hrv.csv")).substr(0, 29), "participant_id,class_id,hrv_b");
    EXPECT_NE(run("eda" + d + " --session nonsense", w.dir.path()).code, 0);
}

TEST(Cli, TrainWritesModel) {
    auto& w = workspace();
    const auto r = run("train --features " + (w.dir / "features.csv").string() + " --target emotional --out " +
                           (w.dir / "m.ngage").string() + " --n-rounds 20",
                       w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(w.dir / "m.ngage"));
}

TEST(Cli, EvalReportAndRegeneration) {
    auto& w = workspace();
    engage::test::write(w.dir / "regimes.txt", "eda EDA\nall all\n");
    const auto r = run("eval --features " + (w.dir / "features.csv").string() + " --target overall --regimes " +
                           (w.dir / "regimes.txt").string() + " --out " + (w.dir / "rep" / "report.json").string() +
                           kSmallGrid,
                       w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"report.json", "table6.csv", "table7.csv", "per_participant_errors.csv"}) {
        EXPECT_TRUE(fs::exists(w.dir / "rep" / f)) << f;
    }
    const auto rr = run("report --in " + (w.dir / "rep" / "report.json").string() + " --out " +
                            (w.dir / "regen").string(),
                        w.dir.path());
    ASSERT_EQ(rr.code, 0) << rr.err;
    for (const char* f : {"table6.csv", "table7.csv", "regime_table.csv", "per_participant_errors.csv"}) {
        EXPECT_EQ(engage::csv::read_file(w.dir / "rep" / f), engage::csv::read_file(w.dir / "regen" / f)) << f;
    }
}

TEST(Cli, ConfigPrecedence) {
    auto& w = workspace();
    const auto features = (w.dir / "features.csv").string();
    engage::test::write(w.dir / "cfg.toml", "seed = 7\n[eval]\nouter_k = 4\ngrid_leaves = \"3\"\ngrid_lr = \"0.1\"\ngrid_rounds = \"20\"\n");
    const auto base = " --config " + (w.dir / "cfg.toml").string() + " eval --features " + features + " --target overall";
    auto r = run(base + " --outer-k 3 --out " + (w.dir / "a" / "report.json").string(), w.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto a = engage::csv::read_file(w.dir / "a" / "report.json");
    EXPECT_NE(a.find("\"outer_k\": 3"), std::string::npos);
    EXPECT_NE(a.find("\"seed\": 7"), std::string::npos);

    // config beats the environment, the flag beats both
    r = run(base + " --out " + (w.dir / "b" / "report.json").string(), w.dir.path(), "ENGAGE_SEED=9");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto b = engage::csv::read_file(w.dir / "b" / "report.json");
    EXPECT_NE(b.find("\"outer_k\": 4"), std::string::npos);
    EXPECT_NE(b.find("\"seed\": 7"), std::string::npos);
    r = run(base + " --seed 11 --out " + (w.dir / "c" / "report.json").string(), w.dir.path(), "ENGAGE_SEED=9");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(engage::csv::read_file(w.dir / "c" / "report.json").find("\"seed\": 11"), std::string::npos);

    engage::test::write(w.dir / "bad.toml", "no_such_key = 1\n");
    r = run("--config " + (w.dir / "bad.toml").string() + " eval --features " + features, w.dir.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("no_such_key"), std::string::npos) << r.err;
}

TEST(Cli, EnvironmentSeed) {
    auto& w = workspace();
    const auto r = run("eval --features " + (w.dir / "features.csv").string() + " --target overall --out " +
                           (w.dir / "env" / "report.json").string() + kSmallGrid,
                       w.dir.path(), "ENGAGE_SEED=9");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(engage::csv::read_file(w.dir / "env" / "report.json").find("\"seed\": 9"), std::string::npos);
}

TEST(Cli, SynthIsReproducible) {
    engage::test::TempDir dir;
    ASSERT_EQ(run("synth --days 1 --students 4 --out " + (dir / "a").string(), dir.path()).code, 0);
    ASSERT_EQ(run("synth --days 1 --students 4 --out " + (dir / "b").string(), dir.path()).code, 0);
    for (const char* f : {"schedule.csv", "surveys.csv", "env.csv", "latents.csv"}) {
        EXPECT_EQ(engage::csv::read_file(dir / "a" / f), engage::csv::read_file(dir / "b" / f)) << f;
    }
}
