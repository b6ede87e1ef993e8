#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "echoloop/report.hpp"
#include "echoloop/synthetic.hpp"
#include "echoloop/trace_io.hpp"

using namespace echoloop;
using namespace echoloop::loop;
using namespace echoloop::report;

namespace {

LoopTrace full_featured_trace(rec::ModelKind kind = rec::ModelKind::matrix_factorization) {
    synthetic::SyntheticSpec spec;
    spec.users = 40;
    spec.items = 30;
    spec.communities = 2;
    spec.inter_prob = 0.1;
    spec.seed = 4;
    const auto dataset = synthetic::generate_planted_partition(spec);

    timeline::SplitConfig split;
    split.cutoff_fraction = 0.5;
    split.num_periods = 2;

    PipelineConfig config;
    config.recommender.kind = kind;
    config.recommender.embedding_dim = 4;
    config.recommender.epochs = 3;
    config.seed = 11;

    riskgen::GeneratorConfig rep;
    rep.fef_probability = 0.2;
    rep.lc_flip_probability = 0.3;
    rep.seed = 5;
    config.representer = rep;

    riskgen::GeneratorConfig dec;
    dec.popularity_temperature = 2.0;
    dec.fef_probability = 0.1;
    dec.seed = 6;
    config.decision = dec;
    config.decision_mode = DecisionMode::open_generation;

    return run_feedback_loop(dataset, split, config);
}

}  // namespace

TEST_CASE("report: schema keys per phase") {
    const auto trace = full_featured_trace();
    DiagnosticsConfig config;
    const auto bundle = build_report(trace, config);
    const auto& r = bundle.report;

    REQUIRE(r.count("phase1") == 1);
    CHECK(r.at("phase1").count("distributions") == 1);
    CHECK(r.at("phase1").count("divergences") == 1);
    CHECK(r.at("phase1").count("fef") == 1);
    CHECK(r.at("phase1").count("lc") == 1);

    REQUIRE(r.count("phase2") == 1);
    CHECK(r.at("phase2").count("gap_stats") == 1);
    CHECK(r.at("phase2").count("catalog_fef") == 1);
    CHECK(r.at("phase2").count("lc") == 1);

    REQUIRE(r.count("phase3") == 1);
    CHECK(r.at("phase3").count("per_period") == 1);
    CHECK(r.at("phase3").count("projections") == 1);
    CHECK(r.at("phase3").at("per_period").size() == 2);
    CHECK(r.at("phase3").at("polarization") == "available");

    // profile:community exists in phase-1 distributions (synthetic user attr)
    CHECK(r.at("phase1").at("distributions").count("profile:community") == 1);
    // community has ground truth -> an FEF entry
    CHECK(r.at("phase1").at("fef").count("profile:community") == 1);

    CHECK(bundle.plots_csv.rfind("metric,period,subject,value\n", 0) == 0);
    CHECK(bundle.projections_csv.rfind("kind,period,subject,x,y\n", 0) == 0);
    CHECK(bundle.plots_csv.find("centroid_distance_user") != std::string::npos);
}

TEST_CASE("report: phase toggles drop keys") {
    const auto trace = full_featured_trace();
    DiagnosticsConfig config;
    config.phase1 = false;
    config.phase3 = false;
    const auto bundle = build_report(trace, config);
    CHECK(bundle.report.count("phase1") == 0);
    CHECK(bundle.report.count("phase2") == 1);
    CHECK(bundle.report.count("phase3") == 0);
}

TEST_CASE("report: polarization unavailable without embeddings") {
    const auto trace = full_featured_trace(rec::ModelKind::most_popular);
    const auto bundle = build_report(trace, DiagnosticsConfig{});
    const auto& phase3 = bundle.report.at("phase3");
    CHECK(phase3.at("polarization") == "unavailable");
    CHECK(phase3.at("projections").is_null());
    for (const auto& entry : phase3.at("per_period"))
        CHECK(entry.at("centroid_distance").is_null());
}

TEST_CASE("report: recomputation from a stored trace is bit-identical") {
    const auto trace = full_featured_trace();
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "echoloop_report_rt";
    fs::remove_all(dir);
    trace_io::write_trace(trace, dir.string());

    const auto restored = trace_io::read_trace(dir.string());
    DiagnosticsConfig config;
    const auto a = build_report(restored, config);
    const auto b = build_report(trace_io::read_trace(dir.string()), config);
    CHECK(a.report.dump() == b.report.dump());
    CHECK(a.plots_csv == b.plots_csv);
    CHECK(a.projections_csv == b.projections_csv);
    fs::remove_all(dir);
}

TEST_CASE("report: popularity index modes change phase-3 gaps") {
    const auto trace = full_featured_trace();
    DiagnosticsConfig accumulated;
    DiagnosticsConfig d0;
    d0.pop_index_mode = DiagnosticsConfig::PopIndexMode::d0;
    const auto a = build_report(trace, accumulated);
    const auto b = build_report(trace, d0);
    // phase 2 always uses d0, so it is identical in both
    CHECK(a.report.at("phase2").dump() == b.report.at("phase2").dump());
}

TEST_CASE("report: summary text mentions the headline numbers") {
    const auto trace = full_featured_trace();
    const auto bundle = build_report(trace, DiagnosticsConfig{});
    const auto text = summarize(trace, bundle.report);
    CHECK(text.find("common users") != std::string::npos);
    CHECK(text.find("injected per period") != std::string::npos);
    CHECK(text.find("centroid distance") != std::string::npos);
}
