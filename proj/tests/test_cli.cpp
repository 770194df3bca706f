#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef ARWSIM_BIN
#error "ARWSIM_BIN must point at the arwsim executable"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
    fs::path dir;

    Scratch() {
        dir = fs::temp_directory_path() /
              ("arwsim_cli_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const Scratch& s, const std::string& log = "log.txt") {
    const std::string cmd = "cd " + s.dir.string() + " && " + std::string(ARWSIM_BIN) + " " +
                            args + " >" + s.path(log) + " 2>" + s.path("err_" + log);
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int line_count(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    int count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    return count;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 2") {
    Scratch s;
    CHECK(run("frobnicate", s) == 2);
    CHECK(run("stabilize --no-such-flag", s) == 2);
    CHECK(run("", s) == 2);  // a subcommand is required
    CHECK(run("sweep --what nonsense", s) == 2);
    CHECK(run("verify nonsense", s) == 2);
}

TEST_CASE("invalid model parameters are refused with a message") {
    Scratch s;
    CHECK(run("stabilize --d 1 --n 1 --lambda 0 --seed 1", s) == 2);
    const std::string err = slurp(s.path("err_log.txt"));
    CHECK(err.find("sleep rate") != std::string::npos);
    CHECK(run("stabilize --d 0 --n 1 --lambda 1 --seed 1", s) == 2);
}

TEST_CASE("stabilize writes reproducible snapshots") {
    Scratch s;
    CHECK(run("stabilize --d 2 --n 3 --lambda 1 --law poisson --rho 0.6 --seed 42 --out-file a.json",
              s) == 0);
    CHECK(run("stabilize --d 2 --n 3 --lambda 1 --law poisson --rho 0.6 --seed 42 --out-file b.json",
              s) == 0);
    const std::string a = slurp(s.path("a.json"));
    REQUIRE_FALSE(a.empty());
    CHECK(a == slurp(s.path("b.json")));  // byte-identical reruns

    const json snap = json::parse(a);
    CHECK(snap.at("d") == 2);
    CHECK(snap.at("n") == 3);
    CHECK(snap.contains("states"));
    CHECK(snap.contains("odometer"));

    // A different seed must give a different snapshot.
    CHECK(run("stabilize --d 2 --n 3 --lambda 1 --law poisson --rho 0.6 --seed 43 --out-file c.json",
              s) == 0);
    CHECK(a != slurp(s.path("c.json")));
}

TEST_CASE("seeds parse in decimal and hexadecimal") {
    Scratch s;
    CHECK(run("stabilize --d 1 --n 2 --lambda 1 --law poisson --rho 0.5 --seed 0x2A "
              "--out-file hex.json", s) == 0);
    CHECK(run("stabilize --d 1 --n 2 --lambda 1 --law poisson --rho 0.5 --seed 42 "
              "--out-file dec.json", s) == 0);
    CHECK(slurp(s.path("hex.json")) == slurp(s.path("dec.json")));
    CHECK(run("stabilize --seed notanumber", s) == 2);
}

TEST_CASE("verify suites succeed on honest parameters") {
    Scratch s;
    CHECK(run("verify abelian --d 1 --n 2 --lambda 1 --trials 2000 --seed 5", s) == 0);
    CHECK(run("verify coupling --d 1 --n 1 --lambda 1 --trials 400 --seed 6", s) == 0);
    CHECK(run("verify identity --d 1 --n 1 --lambda 1 --law delta --trials 4000 --seed 7 "
              "--out-file id.json", s) == 0);
    const json rep = json::parse(slurp(s.path("id.json")));
    REQUIRE(rep.is_array());
    CHECK(rep[0].at("check") == "identity");
    CHECK(rep[0].at("pass").get<bool>());
    CHECK(run("verify conservation --d 1 --n 2 --lambda 1 --trials 300 --seed 8", s) == 0);
    CHECK(run("verify least-action --d 1 --n 1 --lambda 2 --trials 1000 --seed 9", s) == 0);
    CHECK(run("verify five-step --d 1 --n 3 --lambda 1 --trials 4000 --seed 10", s) == 0);
}

TEST_CASE("returns reports divergence and refuses heavy censoring") {
    Scratch s;
    CHECK(run("returns --d 1 --trials 300 --escape-radius 50 --seed 3 --out-file r1.json", s) ==
          0);
    const json r1 = json::parse(slurp(s.path("r1.json")));
    CHECK(r1.at("divergent").get<bool>());

    // A step cap far below the escape needs censors everything: the refusal
    // is a check failure, not a usage error.
    CHECK(run("returns --d 2 --trials 100 --escape-radius 100000 --max-steps 200 --seed 4", s) ==
          1);
    CHECK(run("returns --d 2 --trials 100 --escape-radius 100000 --max-steps 200 --seed 4 "
              "--allow-censored --out-file r2.json", s) == 0);
    const json r2 = json::parse(slurp(s.path("r2.json")));
    CHECK(r2.at("censoring_rate").get<double>() > 0.5);
    CHECK(r2.at("divergent").get<bool>());
}

TEST_CASE("bounds command emits the report") {
    Scratch s;
    CHECK(run("bounds --d 3 --lambda 1 --er asymptotic --out-file b.json", s) == 0);
    const json b = json::parse(slurp(s.path("b.json")));
    CHECK(b.at("lower").get<double>() == doctest::Approx(0.5399305555555556).epsilon(1e-12));
    CHECK(b.at("e_r_source") == "asymptotic");

    CHECK(run("bounds --d 1 --lambda 1 --er asymptotic --out-file b1.json", s) == 0);
    const json b1 = json::parse(slurp(s.path("b1.json")));
    CHECK(b1.at("upper").is_null());
    CHECK(b1.at("e_r_source") == "divergent");

    CHECK(run("bounds --d 3 --er nonsense", s) == 2);
}

TEST_CASE("sweeps resume by skipping completed cells") {
    Scratch s;
    const std::string cmd =
        "sweep --what occupation --d-list 1 --n-list 1,2 --lambda-list 0.5,1 --rho-list 0 "
        "--law delta --trials 300 --seed 11";
    CHECK(run(cmd, s, "sweep1.txt") == 0);
    const std::string jsonl = s.path("sweep_occupation.jsonl");
    const std::string csv = s.path("sweep_occupation.csv");
    REQUIRE(fs::exists(jsonl));
    REQUIRE(fs::exists(csv));
    CHECK(line_count(jsonl) == 4);
    CHECK(line_count(csv) == 5);  // header plus four cells
    const std::string csv_before = slurp(csv);
    CHECK(slurp(s.path("sweep1.txt")).find("ran 4, skipped 0") != std::string::npos);

    // Second run: all four cells are already on file.
    CHECK(run(cmd, s, "sweep2.txt") == 0);
    CHECK(line_count(jsonl) == 4);
    CHECK(slurp(csv) == csv_before);
    CHECK(slurp(s.path("sweep2.txt")).find("ran 0, skipped 4") != std::string::npos);

    // Widening the grid only runs the new cells.
    const std::string wider =
        "sweep --what occupation --d-list 1 --n-list 1,2,3 --lambda-list 0.5,1 --rho-list 0 "
        "--law delta --trials 300 --seed 11";
    CHECK(run(wider, s, "sweep3.txt") == 0);
    CHECK(line_count(jsonl) == 6);
    CHECK(slurp(s.path("sweep3.txt")).find("ran 2, skipped 4") != std::string::npos);

    // Every record carries its cell config and results.
    std::ifstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        const json rec = json::parse(line);
        CHECK(rec.at("status") == "ok");
        CHECK(rec.at("cell").contains("master_seed"));
        CHECK(rec.at("result").contains("value"));
    }
}

TEST_CASE("run records accumulate in runs.jsonl") {
    Scratch s;
    CHECK(run("bounds --d 3 --lambda 1 --er asymptotic", s) == 0);
    CHECK(run("bounds --d 4 --lambda 1 --er asymptotic", s) == 0);
    const std::string runs = s.path("runs.jsonl");
    REQUIRE(fs::exists(runs));
    CHECK(line_count(runs) == 2);
    std::ifstream in(runs);
    std::string line;
    std::getline(in, line);
    const json rec = json::parse(line);
    CHECK(rec.at("command") == "bounds");
    CHECK(rec.contains("wall_ms"));
    CHECK(rec.at("version") == "0.1.0");
}

TEST_CASE("the output directory honors the environment variable") {
    Scratch s;
    fs::create_directories(s.dir / "envout");
    const std::string cmd = "cd " + s.dir.string() + " && ARWSIM_OUT=" +
                            (s.dir / "envout").string() + " " + std::string(ARWSIM_BIN) +
                            " stabilize --d 1 --n 1 --lambda 1 --seed 2 >out.txt 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(s.dir / "envout" / "snapshot.json"));
    CHECK(fs::exists(s.dir / "envout" / "runs.jsonl"));
}

TEST_CASE("unwritable output paths exit with the i/o code") {
    Scratch s;
    CHECK(run("stabilize --d 1 --n 1 --lambda 1 --seed 2 --out-file /dev/null/nope/x.json", s) ==
          3);
}

TEST_CASE("rhoc writes bracket json and the per-cell table") {
    Scratch s;
    CHECK(run("rhoc --d 1 --n 2 --lambda 1 --trials 400 --seed 12 --rho-min 0.2 --rho-max 4.2 "
              "--rho-step 2.0", s) == 0);
    const json rep = json::parse(slurp(s.path("rhoc.json")));
    CHECK(rep.at("cells").size() == 3);
    CHECK(rep.at("found").get<bool>());
    REQUIRE(fs::exists(s.path("rhoc_cells.csv")));
    CHECK(line_count(s.path("rhoc_cells.csv")) == 4);  // header plus three cells
}

}  // TEST_SUITE
