// echoloop: feedback-loop simulator and risk diagnostics for recommender
// systems with generator-style components.
//
// Subcommands:
//   run            execute ingest -> split -> schedule -> loop -> diagnostics
//   diagnose       recompute diagnostics from a stored trace
//   gen-synthetic  write a planted-partition dataset for experiments

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "echoloop/config.hpp"
#include "echoloop/core.hpp"
#include "echoloop/ingest.hpp"
#include "echoloop/loop.hpp"
#include "echoloop/report.hpp"
#include "echoloop/synthetic.hpp"
#include "echoloop/trace_io.hpp"

namespace fs = std::filesystem;
using namespace echoloop;

namespace {

// One run owns its output directory; concurrent runs need distinct ones.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& directory) : path_(directory / ".echoloop.lock") {
        fs::create_directories(directory);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw UsageError("output directory '" + directory.string() +
                             "' is locked by another run (remove " + path_.string() +
                             " if stale)");
    }
    ~DirectoryLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

int cmd_run(const std::string& config_path) {
    const auto run = config::parse_run_config(config_path);
    const auto dataset = ingest::load_dataset(run.interactions_path, run.user_attributes_path,
                                              run.item_attributes_path);
    log_info("loaded " + std::to_string(dataset.interactions.size()) + " interactions, " +
             std::to_string(dataset.users.size()) + " users, " +
             std::to_string(dataset.items.size()) + " items");

    const fs::path out_dir(run.output_directory);
    DirectoryLock lock(out_dir);

    const auto trace = loop::run_feedback_loop(dataset, run.split, run.pipeline);
    const fs::path trace_dir = out_dir / "trace";
    trace_io::write_trace(trace, trace_dir.string());

    // The report is always computed from the serialized trace, so `diagnose`
    // on this directory reproduces it bit for bit.
    const auto stored = trace_io::read_trace(trace_dir.string());
    const auto bundle = report::build_report(stored, run.diagnostics);
    report::write_report_files(bundle, out_dir.string());

    std::cout << report::summarize(stored, bundle.report);
    std::cout << "report: " << (out_dir / "report.json").string() << "\n";
    return 0;
}

int cmd_diagnose(const std::string& trace_dir, const std::string& phases,
                 const std::string& pop_index, const std::string& out_dir) {
    report::DiagnosticsConfig diagnostics;
    diagnostics.phase1 = phases.find('1') != std::string::npos;
    diagnostics.phase2 = phases.find('2') != std::string::npos;
    diagnostics.phase3 = phases.find('3') != std::string::npos;
    if (pop_index == "accumulated")
        diagnostics.pop_index_mode = report::DiagnosticsConfig::PopIndexMode::accumulated;
    else if (pop_index == "d0")
        diagnostics.pop_index_mode = report::DiagnosticsConfig::PopIndexMode::d0;
    else
        throw UsageError("--popularity-index must be 'accumulated' or 'd0', got '" + pop_index +
                         "'");

    const auto trace = trace_io::read_trace(trace_dir);
    const auto bundle = report::build_report(trace, diagnostics);

    const std::string target =
        out_dir.empty() ? fs::path(trace_dir).parent_path().string() : out_dir;
    report::write_report_files(bundle, target.empty() ? "." : target);

    std::cout << report::summarize(trace, bundle.report);
    std::cout << "report: " << (fs::path(target.empty() ? "." : target) / "report.json").string()
              << "\n";
    return 0;
}

int cmd_gen_synthetic(const synthetic::SyntheticSpec& spec, const std::string& out_dir) {
    const auto dataset = synthetic::generate_planted_partition(spec);
    synthetic::write_dataset_files(dataset, out_dir);
    std::cout << "wrote " << dataset.interactions.size() << " interactions ("
              << dataset.users.size() << " users, " << dataset.items.size() << " items) to "
              << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback-loop simulator and risk diagnostics for recommender systems"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute a full simulation run");
    run->add_option("--config", config_path, "run configuration file")->required();

    std::string trace_dir;
    std::string phases = "1,2,3";
    std::string pop_index = "accumulated";
    std::string diagnose_out;
    auto* diagnose = app.add_subcommand("diagnose", "recompute diagnostics from a trace");
    diagnose->add_option("--trace", trace_dir, "trace directory from a previous run")->required();
    diagnose->add_option("--phases", phases, "phases to compute, e.g. 1,2,3");
    diagnose->add_option("--popularity-index", pop_index, "accumulated|d0");
    diagnose->add_option("--out", diagnose_out, "report output directory");

    synthetic::SyntheticSpec spec;
    std::string synth_out;
    auto* gen = app.add_subcommand("gen-synthetic", "write a planted-partition dataset");
    gen->add_option("--users", spec.users, "number of users")->required();
    gen->add_option("--items", spec.items, "number of items")->required();
    gen->add_option("--communities", spec.communities, "number of communities")->required();
    gen->add_option("--inter-prob", spec.inter_prob, "cross-community interaction probability")
        ->required();
    gen->add_option("--seed", spec.seed, "generator seed")->required();
    gen->add_option("--out", synth_out, "output directory")->required();
    gen->add_option("--per-user", spec.interactions_per_user, "interactions per user");
    gen->add_option("--popularity-skew", spec.popularity_skew,
                    "Zipf exponent for within-community item choice (0 = uniform)");
    gen->add_option("--activity-skew", spec.activity_skew,
                    "Zipf exponent for per-user activity (0 = equal)");
    gen->add_option("--time-span", spec.time_span, "timestamp range");

    try {
        app.parse(argc, argv);
        if (*run) return cmd_run(config_path);
        if (*diagnose) return cmd_diagnose(trace_dir, phases, pop_index, diagnose_out);
        if (*gen) return cmd_gen_synthetic(spec, synth_out);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
