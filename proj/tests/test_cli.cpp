#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#ifndef PILOTRUN_PATH
#define PILOTRUN_PATH "pilotrun"
#endif

namespace fs = std::filesystem;

namespace {

struct CliScratch {
    fs::path root;
    CliScratch() {
        root = fs::temp_directory_path() /
               ("pilotcli-" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~CliScratch() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    fs::path file(const std::string& name, const std::string& content) const {
        const fs::path p = root / name;
        std::ofstream(p) << content;
        return p;
    }
};

int pilotrun(const std::string& args) {
    const std::string cmd = std::string(PILOTRUN_PATH) + " " + args +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kGoodSim = R"({
  "pilots": [{"id": "p1", "resource": "sim://a", "cores": 2,
              "walltime_s": 100, "affinity": "site-a"}],
  "compute_units": [{"id": "c1", "sim_duration_s": 3},
                    {"id": "c2", "sim_duration_s": 4}],
  "seed": 7
})";

} // namespace

TEST_CASE("exit 0: a valid manifest validates and a clean run drains") {
    CliScratch sc;
    const auto m = sc.file("ok.json", kGoodSim);
    CHECK(pilotrun("validate " + m.string()) == 0);
    CHECK(pilotrun("run " + m.string() + " --backend sim --metrics " +
                   (sc.root / "m.json").string() + " --log " +
                   (sc.root / "e.jsonl").string()) == 0);
}

TEST_CASE("exit 2: violations, malformed JSON, backend mismatch") {
    CliScratch sc;
    const auto bad = sc.file("bad.json", R"({"pilots": [{"id": "p1",
        "resource": "sim://a", "walltime_s": -5, "affinity": "x"}]})");
    CHECK(pilotrun("validate " + bad.string()) == 2);

    const auto junk = sc.file("junk.json", "{ not json");
    CHECK(pilotrun("validate " + junk.string()) == 2);

    const auto ok = sc.file("ok.json", kGoodSim);
    CHECK(pilotrun("run " + ok.string() + " --backend local --log " +
                   (sc.root / "e.jsonl").string()) == 2);
}

TEST_CASE("exit 1: a failing unit marks the run") {
    CliScratch sc;
    const auto m = sc.file("fail.json", R"({
      "pilots": [{"id": "p1", "resource": "sim://a", "cores": 1,
                  "walltime_s": 100, "affinity": "s"}],
      "compute_units": [{"id": "c1", "sim_duration_s": 2, "sim_fail": true}]
    })");
    CHECK(pilotrun("run " + m.string() + " --backend sim --metrics /dev/null" +
                   " --log " + (sc.root / "e.jsonl").string()) == 1);
}

TEST_CASE("exit 3: the budget stop outranks a failure exit") {
    CliScratch sc;
    const auto m = sc.file("budget.json", R"({
      "pilots": [{"id": "p1", "resource": "sim://a", "cores": 1,
                  "walltime_s": 100, "affinity": "s"}],
      "compute_units": [{"id": "c1", "sim_duration_s": 50},
                        {"id": "c2", "sim_duration_s": 2, "sim_fail": true}],
      "t_max_s": 5
    })");
    CHECK(pilotrun("run " + m.string() + " --backend sim --metrics /dev/null" +
                   " --log " + (sc.root / "e.jsonl").string()) == 3);
}

TEST_CASE("exit 64: usage errors") {
    CHECK(pilotrun("") == 64);
    CHECK(pilotrun("bogus-subcommand") == 64);
    CHECK(pilotrun("run") == 64);                       // missing manifest
    CHECK(pilotrun("run x.json") == 64);                // missing --backend
    CHECK(pilotrun("run x.json --backend warp") == 64); // not a backend
}

TEST_CASE("replay emits the same metrics document the run wrote") {
    CliScratch sc;
    const auto m = sc.file("ok.json", kGoodSim);
    const auto live = sc.root / "live.json";
    const auto offline = sc.root / "offline.json";
    const auto log = sc.root / "e.jsonl";
    REQUIRE(pilotrun("run " + m.string() + " --backend sim --seed 5 --metrics " +
                     live.string() + " --log " + log.string()) == 0);
    REQUIRE(pilotrun("replay " + log.string() + " --metrics " +
                     offline.string()) == 0);
    CHECK(slurp(live) == slurp(offline));
    CHECK(pilotrun("replay " + (sc.root / "missing.jsonl").string()) == 2);

    const auto truncated = sc.file("cut.jsonl", slurp(log).substr(0, 40));
    CHECK(pilotrun("replay " + truncated.string()) == 2);
}

TEST_CASE("PILOT_LOG_DIR redirects the event log directory") {
    CliScratch sc;
    const auto m = sc.file("ok.json", kGoodSim);
    const fs::path dir = sc.root / "redirect";
    fs::create_directories(dir);
    const std::string cmd = "PILOT_LOG_DIR=" + dir.string() + " " +
                            PILOTRUN_PATH + " run " + m.string() +
                            " --backend sim --metrics /dev/null --log here.jsonl" +
                            " >/dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "here.jsonl"));
    CHECK_FALSE(fs::exists("here.jsonl"));
}
