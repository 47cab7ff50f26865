// pilotrun — validate workload manifests, execute them on the simulated or
// local backend, and recompute metrics offline from a saved event log.
//
// Exit codes:
//   0  run completed with every compute unit DONE (or: input valid / replay ok)
//   1  run finished but some compute unit failed or could not be scheduled
//   2  invalid input (manifest violations, malformed file, incomplete log)
//   3  the run budget (t_max) stopped the run
//   64 usage error
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pilot/errors.hpp"
#include "pilot/event_log.hpp"
#include "pilot/local_runner.hpp"
#include "pilot/manifest.hpp"
#include "pilot/metrics.hpp"
#include "pilot/sim_runner.hpp"

namespace fs = std::filesystem;
using namespace pilot;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kBadInput = 2;
constexpr int kBudget = 3;
constexpr int kUsage = 64;

/// PILOT_LOG_DIR redirects the event log into that directory, keeping the
/// requested file name.
fs::path resolve_log_path(const fs::path& requested) {
    if (const char* dir = std::getenv("PILOT_LOG_DIR"); dir && *dir)
        return fs::path(dir) / requested.filename();
    return requested;
}

void print_violations(const std::vector<Violation>& vs) {
    for (const auto& v : vs)
        std::cerr << (v.entity.empty() ? std::string("manifest") : v.entity)
                  << ": " << v.rule << "\n";
}

int cmd_validate(const std::string& path) {
    try {
        parse_manifest(path);
    } catch (const ValidationFailed& e) {
        print_violations(e.violations);
        return kBadInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }
    std::cout << "ok\n";
    return kOk;
}

int write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return kBadInput;
    }
    out << j.dump(2) << "\n";
    return kOk;
}

template <typename Runner>
int execute(Runner& run, const fs::path& log_path,
            const std::optional<std::string>& metrics_path) {
    const auto report = run.wait();

    {
        std::ofstream out(log_path);
        if (!out) {
            std::cerr << "error: cannot write " << log_path << "\n";
            return kBadInput;
        }
        run.log().write_jsonl(out, run.header());
    }

    const auto metrics = emit_metrics(run.header(), run.log().snapshot());
    const auto doc = to_json(metrics);
    if (metrics_path) {
        if (int rc = write_json_file(*metrics_path, doc); rc != kOk) return rc;
    } else {
        std::cout << doc.dump(2) << "\n";
    }

    for (const auto& u : report.unschedulable)
        std::cerr << "unschedulable: " << u.cu_id << " (" << u.reason << ")\n";

    if (report.exceeded) return kBudget;
    return report.all_done() ? kOk : kRunFailed;
}

int cmd_run(const std::string& manifest_path, const std::string& backend,
            std::optional<std::int64_t> seed,
            const std::optional<std::string>& metrics_path,
            const std::string& log_name, const std::string& policy,
            const std::optional<std::string>& workdir) {
    WorkloadManifest m;
    try {
        m = parse_manifest(manifest_path);
    } catch (const ValidationFailed& e) {
        print_violations(e.violations);
        return kBadInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }

    const auto kind = manifest_backend(m);
    const auto want = backend == "sim" ? BackendKind::Sim : BackendKind::Local;
    if (kind && *kind != want) {
        std::cerr << "error: manifest targets " << to_string(*kind)
                  << " resources but --backend " << backend << " was given\n";
        return kBadInput;
    }

    RunOptions opt;
    opt.policy = policy == "round-robin" ? BindPolicy::RoundRobin : BindPolicy::Affinity;
    if (seed) opt.seed = *seed;

    const fs::path log_path = resolve_log_path(log_name);
    try {
        if (want == BackendKind::Sim) {
            SimRunner run(m, opt);
            return execute(run, log_path, metrics_path);
        }
        LocalPaths paths;
        if (workdir) paths.run_root = *workdir;
        paths.manifest_dir = fs::path(manifest_path).parent_path();
        if (paths.manifest_dir.empty()) paths.manifest_dir = ".";
        LocalRunner run(m, opt, paths);
        return execute(run, log_path, metrics_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }
}

int cmd_replay(const std::string& log_path,
               const std::optional<std::string>& metrics_path) {
    std::ifstream in(log_path);
    if (!in) {
        std::cerr << "error: cannot read " << log_path << "\n";
        return kBadInput;
    }
    try {
        const auto parsed = EventLog::read_jsonl(in);
        const auto metrics = emit_metrics(parsed.header, parsed.events);
        const auto doc = to_json(metrics);
        if (metrics_path) return write_json_file(*metrics_path, doc);
        std::cout << doc.dump(2) << "\n";
        return kOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pilot-job workload runner"};
    app.require_subcommand(1);

    std::string manifest_path;
    auto* validate = app.add_subcommand("validate", "check a manifest and exit");
    validate->add_option("manifest", manifest_path, "workload manifest (JSON)")
        ->required();

    std::string backend;
    std::optional<std::int64_t> seed;
    std::optional<std::string> metrics_path;
    std::string log_name = "events.jsonl";
    std::string policy = "affinity";
    std::optional<std::string> workdir;
    auto* runc = app.add_subcommand("run", "execute a workload");
    runc->add_option("manifest", manifest_path, "workload manifest (JSON)")
        ->required();
    runc->add_option("--backend", backend, "execution backend")
        ->required()
        ->check(CLI::IsMember({"sim", "local"}));
    runc->add_option("--seed", seed, "deterministic run seed");
    runc->add_option("--metrics", metrics_path, "write the metrics report here");
    runc->add_option("--log", log_name, "event log destination")
        ->capture_default_str();
    runc->add_option("--policy", policy, "binding policy")
        ->capture_default_str()
        ->check(CLI::IsMember({"affinity", "round-robin"}));
    runc->add_option("--workdir", workdir,
                     "run directory for the local backend (default: a fresh "
                     "temporary directory)");

    std::string replay_path;
    auto* replay = app.add_subcommand("replay", "recompute metrics from a saved log");
    replay->add_option("events", replay_path, "event log (JSON lines)")->required();
    replay->add_option("--metrics", metrics_path, "write the metrics report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kUsage;
    }

    if (validate->parsed()) return cmd_validate(manifest_path);
    if (runc->parsed())
        return cmd_run(manifest_path, backend, seed, metrics_path, log_name,
                       policy, workdir);
    return cmd_replay(replay_path, metrics_path);
}
