#ifndef ECHOLOOP_REPORT_HPP
#define ECHOLOOP_REPORT_HPP

#include <string>

#include "echoloop/loop.hpp"

#include "json.hpp"

namespace echoloop::report {

struct DiagnosticsConfig {
    bool phase1 = true;
    bool phase2 = true;
    bool phase3 = true;

    // Popularity index for phase-3 period gaps: counts accumulated through
    // D^(n-1), or the fixed initial snapshot D^(0). Phase 2 always uses D^(0).
    enum class PopIndexMode { accumulated, d0 };
    PopIndexMode pop_index_mode = PopIndexMode::accumulated;
};

// The report plus its tidy plot companions, built in one pass so that a
// stored trace re-diagnoses to byte-identical output.
struct ReportBundle {
    nlohmann::json report;
    std::string plots_csv;        // metric,period,subject,value
    std::string projections_csv;  // kind,period,subject,x,y
};

ReportBundle build_report(const loop::LoopTrace& trace, const DiagnosticsConfig& config);

// Writes report.json, plots.csv, projections.csv into `directory`.
void write_report_files(const ReportBundle& bundle, const std::string& directory);

// One-screen run summary for the console.
std::string summarize(const loop::LoopTrace& trace, const nlohmann::json& report);

}  // namespace echoloop::report

#endif  // ECHOLOOP_REPORT_HPP
