#include <doctest.h>

#include <json.hpp>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "f3m/cli.hpp"
#include "f3m/dataset_io.hpp"
#include "temp_dir.hpp"

using namespace f3m;
using Json = nlohmann::json;
using testing::slurp;
using testing::spit;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "f3m");
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

Json report(const Run& r) {
    REQUIRE(r.code == 0);
    return Json::parse(r.out);
}

}  // namespace

TEST_CASE("gen writes deterministic files") {
    testing::TempDir dir;
    const std::vector<std::string> flags{"gen", "--kind", "uniform", "--n", "5000", "--d", "3", "--seed", "7"};
    auto with_out = [&](const std::string& path) {
        auto args = flags;
        args.insert(args.end(), {"--out", path});
        return run(args);
    };
    CHECK(with_out(dir.file("a.f3m")).code == 0);
    CHECK(with_out(dir.file("b.f3m")).code == 0);
    const Points p = read_f3m(dir.file("a.f3m"));
    CHECK(p.size() == 5000);
    CHECK(p.dim() == 3);
    CHECK(slurp(dir.file("a.f3m")) == slurp(dir.file("b.f3m")));
    const Json summary = report(with_out(dir.file("c.f3m")));
    CHECK(summary["n"] == 5000);
    CHECK(summary["ev"].get<double>() == doctest::Approx(1.0));

    CHECK(run({"gen", "--kind", "fbm", "--hurst", "0.75", "--n", "100", "--out", dir.file("f.f3m")}).code == 0);
    const Run bad = run({"gen", "--kind", "fbm", "--hurst", "1.5", "--n", "100", "--out", dir.file("g.f3m")});
    CHECK(bad.code == kExitInvalidInput);
    CHECK(bad.err.find("Hurst") != std::string::npos);
}

TEST_CASE("matvec reports") {
    testing::TempDir dir;
    REQUIRE(run({"gen", "--n", "3000", "--d", "2", "--seed", "1", "--out", dir.file("x.f3m")}).code == 0);
    const Json exact = report(run({"matvec", "--x", dir.file("x.f3m"), "--exact", "--gamma", "0.2"}));
    CHECK(exact["relative_error"].get<double>() <= 1e-12);
    CHECK(exact["schema"] == "f3m.matvec/1");
    CHECK(exact["config"]["gamma"] == 0.2);
    CHECK(exact["config"]["subset_m"] == 3000);

    const Json approx = report(run({"matvec", "--x", dir.file("x.f3m"), "--r", "16", "--gamma-ev", "1"}));
    CHECK(approx["relative_error"].get<double>() <= 5e-3);
    CHECK(approx["config"]["grid_nodes"] == 16);
    CHECK(approx.contains("time_s"));
    CHECK(approx["manifest"].contains("timestamp"));
    CHECK(approx["depths"].size() >= 1);

    const Json median = report(run({"matvec", "--x", dir.file("x.f3m"), "--gamma", "median", "--subset-m", "100"}));
    CHECK(median["config"]["gamma_method"] == "median");
    CHECK(median["config"]["subset_m"] == 100);
}

TEST_CASE("smaller eta does not hurt accuracy") {
    testing::TempDir dir;
    REQUIRE(run({"gen", "--n", "20000", "--d", "3", "--seed", "2", "--out", dir.file("x.f3m")}).code == 0);
    auto err_at = [&](const char* eta) {
        return report(run({"matvec", "--x", dir.file("x.f3m"), "--r", "64", "--eta", eta, "--gamma-ev", "1",
                           "--seed", "1"}))["relative_error"]
            .get<double>();
    };
    CHECK(err_at("0.1") <= 1.1 * err_at("0.5"));
}

TEST_CASE("deterministic reports are byte-identical") {
    testing::TempDir dir;
    const std::vector<std::string> flags{"matvec", "--n", "4000", "--d", "3", "--seed", "3", "--deterministic",
                                         "--out", dir.file("r.json")};
    REQUIRE(run(flags).code == 0);
    const std::string first = slurp(dir.file("r.json"));
    REQUIRE(run(flags).code == 0);
    CHECK(slurp(dir.file("r.json")) == first);
    CHECK(first.find("time_s") == std::string::npos);
    CHECK(first.find("timestamp") == std::string::npos);

    const std::vector<std::string> to_stdout{"matvec", "--n", "4000", "--d", "3", "--seed", "3", "--deterministic"};
    CHECK(run(to_stdout).out == run(to_stdout).out);
}

TEST_CASE("config files and environment defaults") {
    testing::TempDir dir;
    spit(dir.file("run.cfg"), "# settings\neta = 0.3\nr=27\nexact=false\n\n");
    const Json from_file = report(run({"matvec", "--n", "500", "--d", "3", "--config", dir.file("run.cfg")}));
    CHECK(from_file["config"]["eta"] == 0.3);
    CHECK(from_file["config"]["grid_nodes"] == 27);
    const Json overridden =
        report(run({"matvec", "--config", dir.file("run.cfg"), "--n", "500", "--d", "3", "--eta", "0.2"}));
    CHECK(overridden["config"]["eta"] == 0.2);

    spit(dir.file("bad.cfg"), "no-such-flag=1\n");
    CHECK(run({"matvec", "--n", "100", "--config", dir.file("bad.cfg")}).code == kExitInvalidInput);
    spit(dir.file("junk.cfg"), "eta\n");
    CHECK(run({"matvec", "--n", "100", "--config", dir.file("junk.cfg")}).code == kExitInvalidInput);

    setenv("F3M_THREADS", "2", 1);
    CHECK(report(run({"matvec", "--n", "300"}))["config"]["threads"] == 2);
    CHECK(report(run({"matvec", "--n", "300", "--threads", "1"}))["config"]["threads"] == 1);
    unsetenv("F3M_THREADS");
}

TEST_CASE("krr reports") {
    testing::TempDir dir;
    const Json planted = report(run({"krr", "--n", "4000", "--d", "3", "--seed", "4", "--planted-subset", "200"}));
    CHECK(planted["r2"].get<double>() >= 0.9);
    CHECK(planted["n_test"] == 400);
    CHECK_FALSE(planted.contains("auc"));

    const Json shrunk = report(run({"krr", "--n", "2000", "--d", "3", "--lambda", "1e12", "--planted-subset", "100"}));
    CHECK(std::abs(shrunk["r2"].get<double>()) <= 0.05);

    REQUIRE(run({"gen", "--n", "2000", "--d", "2", "--seed", "5", "--out", dir.file("x.f3m")}).code == 0);
    const Points x = read_f3m(dir.file("x.f3m"));
    std::vector<double> labels(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) labels[i] = x(i, 0) + 0.2 * x(i, 1) > 0.6 ? 1.0 : -1.0;
    write_vector(dir.file("y.f3m"), labels);
    const Json cls = report(run({"krr", "--x", dir.file("x.f3m"), "--labels", dir.file("y.f3m"), "--dense-baseline"}));
    REQUIRE(cls.contains("auc"));
    CHECK(cls["auc"].get<double>() >= 0.0);
    CHECK(cls["auc"].get<double>() <= 1.0);
    CHECK(cls["auc"].get<double>() >= 0.9);
    CHECK(cls["dense_baseline"].contains("speedup"));

    write_vector(dir.file("short.f3m"), std::vector<double>(10, 1.0));
    CHECK(run({"krr", "--x", dir.file("x.f3m"), "--labels", dir.file("short.f3m")}).code == kExitInvalidInput);
}

TEST_CASE("account and bench") {
    const Json acc = report(run({"account", "--kind", "clustered", "--n", "5000", "--d", "2"}));
    CHECK(acc["identity_holds"] == true);
    for (const auto& row : acc["rows"]) {
        CHECK(row["holds"] == true);
        CHECK(row["expanded"].get<std::size_t>() ==
              row["surviving"].get<std::size_t>() + row["removed_empty"].get<std::size_t>() +
                  row["m_far"].get<std::size_t>() + row["m_smooth"].get<std::size_t>() +
                  row["m_small"].get<std::size_t>());
    }

    const Run bench = run({"bench", "--n-list", "1000,2000,4000", "--repeats", "2", "--d", "2"});
    REQUIRE(bench.code == 0);
    std::istringstream lines(bench.out);
    std::string line;
    std::vector<std::string> all;
    while (std::getline(lines, line)) all.push_back(line);
    REQUIRE(all.size() == 1 + 6 + 1);
    CHECK(all.front() == "n,D,kind,r,eta,seed,time_s,rel_err");
    CHECK(all[1].rfind("1000,2,uniform,16,0.5,0,", 0) == 0);
    CHECK(all[2].rfind("1000,2,uniform,16,0.5,1,", 0) == 0);
    CHECK(all.back().rfind("slope,", 0) == 0);
    CHECK(run({"bench", "--n-list", "1000,abc"}).code == kExitInvalidInput);
}

TEST_CASE("ingest through the command line") {
    testing::TempDir dir;
    spit(dir.file("in.csv"), "a,b\n1,2\n3,4\n5,6\n");
    const Json summary = report(run({"ingest", "--csv", dir.file("in.csv"), "--out", dir.file("p.f3m")}));
    CHECK(summary["rows"] == 3);
    CHECK(summary["header_skipped"] == true);
    CHECK(read_f3m(dir.file("p.f3m")) == Points(3, 2, {1, 2, 3, 4, 5, 6}));
    REQUIRE(run({"ingest", "--export", "--x", dir.file("p.f3m"), "--out", dir.file("back.csv")}).code == 0);
    CHECK(slurp(dir.file("back.csv")) == "1,2\n3,4\n5,6\n");
}

TEST_CASE("exit codes") {
    CHECK(run({}).code == kExitInvalidInput);
    CHECK(run({"frobnicate"}).code == kExitInvalidInput);
    CHECK(run({"matvec", "--no-such-flag"}).code == kExitInvalidInput);
    CHECK(run({"matvec", "--x", "/nonexistent/x.f3m"}).code == kExitInvalidInput);
    CHECK(run({"matvec", "--n", "100", "--gamma", "wide"}).code == kExitInvalidInput);
    CHECK(run({"matvec", "--n", "100", "--gamma", "0.5", "--gamma-ev", "1"}).code == kExitInvalidInput);
    CHECK(run({"matvec", "--n", "100", "--grid", "hex"}).code == kExitInvalidInput);
    CHECK(run({"--help"}).code == kExitOk);
    CHECK(run({"--version"}).out.find(kVersion) != std::string::npos);
    // An allocation far beyond the host's memory surfaces as a resource error.
    testing::TempDir dir;
    CHECK(run({"gen", "--n", "1099511627776", "--d", "1", "--out", dir.file("huge.f3m")}).code == kExitResource);
}
