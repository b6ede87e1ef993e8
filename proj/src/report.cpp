#include "echoloop/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "echoloop/diagnostics.hpp"
#include "echoloop/rng.hpp"
#include "echoloop/trace_io.hpp"

using nlohmann::json;

namespace echoloop::report {

namespace {

json histogram_to_json(const diag::Histogram& h) {
    json j;
    j["counts"] = h.counts;
    j["total"] = h.total;
    return j;
}

json gap_stats_to_json(const diag::GapStats& stats) {
    json j;
    j["mean"] = stats.summary.mean;
    j["min"] = stats.summary.min;
    j["q1"] = stats.summary.q1;
    j["median"] = stats.summary.median;
    j["q3"] = stats.summary.q3;
    j["max"] = stats.summary.max;
    j["users"] = stats.gaps.size();
    j["skipped_users"] = stats.skipped_users;
    return j;
}

std::vector<riskgen::Profile> trial_profiles(const loop::PeriodTrace& pt, int trial) {
    std::vector<riskgen::Profile> profiles;
    profiles.reserve(pt.profiles.size());
    for (const auto& [user, trials] : pt.profiles)
        profiles.push_back(trials[static_cast<std::size_t>(trial - 1)]);
    return profiles;
}

// Attribute-level FEF of generated profiles against ground-truth user
// attributes, one rate per attribute with available ground truth.
std::map<std::string, double> profile_fef(const loop::PeriodTrace& pt,
                                          const AttributeTable& user_attrs) {
    std::map<std::string, double> rates;
    std::set<std::string> attributes;
    for (const auto& [user, trials] : pt.profiles)
        for (const auto& [attribute, values] : trials[0].attributes)
            attributes.insert(attribute);

    for (const auto& attribute : attributes) {
        std::vector<std::pair<diag::ObservationSet, diag::ObservationSet>> pairs;
        for (const auto& [user, trials] : pt.profiles) {
            const auto rec = user_attrs.records.find(user);
            if (rec == user_attrs.records.end()) continue;
            const auto gt = rec->second.find(attribute);
            if (gt == rec->second.end() || gt->second.empty()) continue;
            const auto emitted = trials[0].attributes.find(attribute);
            if (emitted == trials[0].attributes.end()) continue;
            diag::ObservationSet llm{user, {emitted->second.begin(), emitted->second.end()}};
            diag::ObservationSet ref{user, {gt->second.begin(), gt->second.end()}};
            pairs.emplace_back(std::move(llm), std::move(ref));
        }
        if (!pairs.empty()) rates[attribute] = diag::fef_rate(pairs);
    }
    return rates;
}

// Attribute-level LC over the two profile trials.
std::map<std::string, double> profile_lc(const loop::PeriodTrace& pt) {
    std::map<std::string, double> rates;
    std::set<std::string> attributes;
    for (const auto& [user, trials] : pt.profiles)
        for (const auto& [attribute, values] : trials[0].attributes)
            attributes.insert(attribute);

    for (const auto& attribute : attributes) {
        std::vector<std::pair<diag::TrialObservation, diag::TrialObservation>> trials_list;
        for (const auto& [user, trials] : pt.profiles) {
            const auto a = trials[0].attributes.find(attribute);
            const auto b = trials[1].attributes.find(attribute);
            diag::ObservationSet o1{user, {}};
            diag::ObservationSet o2{user, {}};
            if (a != trials[0].attributes.end()) o1.values.insert(a->second.begin(), a->second.end());
            if (b != trials[1].attributes.end()) o2.values.insert(b->second.begin(), b->second.end());
            trials_list.emplace_back(std::move(o1), std::move(o2));
        }
        if (!trials_list.empty()) rates[attribute] = diag::lc_rate(trials_list);
    }
    return rates;
}

double augmenter_lc(const loop::PeriodTrace& pt) {
    std::map<UserId, std::array<std::set<std::string>, 2>> per_user;
    for (int trial = 0; trial < 2; ++trial)
        for (const auto& pick : pt.augmented[static_cast<std::size_t>(trial)])
            per_user[pick.interaction.user_id][static_cast<std::size_t>(trial)].insert(
                pick.interaction.item_id);
    std::vector<std::pair<diag::TrialObservation, diag::TrialObservation>> trials_list;
    for (const auto& [user, sets] : per_user)
        trials_list.emplace_back(diag::ObservationSet{user, sets[0]},
                                 diag::ObservationSet{user, sets[1]});
    return trials_list.empty() ? 0.0 : diag::lc_rate(trials_list);
}

double ranked_lc(const loop::PeriodTrace& pt) {
    std::vector<std::pair<diag::TrialObservation, diag::TrialObservation>> trials_list;
    for (const auto& [user, trials] : pt.ranked)
        trials_list.emplace_back(trials[0], trials[1]);
    return trials_list.empty() ? 0.0 : diag::lc_rate(trials_list);
}

// Gap between trial-1 lists and the period's ground-truth items, restricted
// to users with a nonempty list on both sides.
std::optional<diag::GapStats> period_gap(const loop::PeriodTrace& pt,
                                         const std::map<UserId, std::vector<ItemId>>& gt_items,
                                         const diag::PopularityIndex& index) {
    std::map<UserId, RankedList> ranked;
    std::map<UserId, std::vector<ItemId>> reference;
    for (const auto& [user, trials] : pt.ranked) {
        const auto gt = gt_items.find(user);
        if (gt == gt_items.end() || gt->second.empty() || trials[0].empty()) continue;
        ranked[user] = trials[0];
        reference[user] = gt->second;
    }
    if (ranked.empty()) return std::nullopt;
    return diag::popularity_gap(ranked, reference, index);
}

std::optional<double> period_catalog_fef(const loop::PeriodTrace& pt,
                                         const std::set<ItemId>& catalog) {
    std::vector<RankedList> lists;
    for (const auto& [user, trials] : pt.ranked)
        if (!trials[0].empty()) lists.push_back(trials[0]);
    if (lists.empty()) return std::nullopt;
    return diag::catalog_fef_rate(lists, catalog);
}

void append_plot_row(std::ostringstream& out, const std::string& metric, int period,
                     const std::string& subject, double value) {
    out << metric << ',' << period << ',' << subject << ',' << trace_io::format_double(value)
        << '\n';
}

}  // namespace

ReportBundle build_report(const loop::LoopTrace& trace, const DiagnosticsConfig& config) {
    ReportBundle bundle;
    json& report = bundle.report;

    const std::set<ItemId> catalog(trace.catalog.begin(), trace.catalog.end());
    diag::PopularityIndex index_d0{trace.popularity_d0};

    // Summary block.
    {
        std::set<UserId> common;
        for (const auto& period : trace.schedule.periods)
            for (const auto& [user, quota] : period.quotas) common.insert(user);
        json summary;
        summary["common_users"] = common.size();
        summary["initial_size"] = trace.initial_size;
        summary["catalog_size"] = trace.catalog.size();
        summary["periods"] = json::array();
        for (const auto& pt : trace.periods) {
            std::size_t flagged = 0;
            for (const auto& [user, trials] : pt.ranked)
                for (const auto& entry : trials[0])
                    if (entry.fabricated) ++flagged;
            summary["periods"].push_back({{"index", pt.index},
                                          {"injected", pt.injected.size()},
                                          {"flagged", flagged},
                                          {"dataset_size", pt.dataset_size}});
        }
        report["summary"] = std::move(summary);
    }

    const bool has_profiles = !trace.periods.empty() && !trace.periods[0].profiles.empty();
    const bool has_augmented = !trace.periods.empty() && !trace.periods[0].augmented[0].empty();

    if (config.phase1 && !trace.periods.empty()) {
        const auto& p1 = trace.periods[0];
        json phase;
        phase["distributions"] = json::object();
        phase["divergences"] = json::object();
        phase["fef"] = json::object();
        phase["lc"] = json::object();

        if (has_profiles) {
            const auto profiles = trial_profiles(p1, 1);
            std::set<std::string> attributes;
            for (const auto& profile : profiles)
                for (const auto& [attribute, values] : profile.attributes)
                    attributes.insert(attribute);
            for (const auto& attribute : attributes) {
                const auto hist = diag::attribute_distribution(profiles, attribute);
                phase["distributions"]["profile:" + attribute] = histogram_to_json(hist);
                if (trace.user_attributes.vocab.count(attribute)) {
                    const auto ref =
                        diag::attribute_distribution(trace.user_attributes, attribute);
                    const auto div = diag::distribution_divergence(hist, ref);
                    phase["divergences"]["profile:" + attribute] = {
                        {"tv_distance", div.tv_distance},
                        {"top1_share_delta", div.top1_share_delta}};
                }
            }
            for (const auto& [attribute, rate] : profile_fef(p1, trace.user_attributes))
                phase["fef"]["profile:" + attribute] = rate;
            for (const auto& [attribute, rate] : profile_lc(p1))
                phase["lc"]["profile:" + attribute] = rate;
        }

        if (has_augmented) {
            // Distribution of attributes over augmented picks, vs the catalog.
            for (const auto& [attribute, vocab] : trace.item_attributes.vocab) {
                diag::Histogram hist;
                hist.attribute_name = attribute;
                for (const auto& pick : p1.augmented[0]) {
                    const auto rec = trace.item_attributes.records.find(pick.interaction.item_id);
                    if (rec == trace.item_attributes.records.end()) continue;
                    const auto values = rec->second.find(attribute);
                    if (values == rec->second.end()) continue;
                    for (const auto& v : values->second) {
                        hist.counts[v] += 1;
                        hist.total += 1;
                    }
                }
                if (hist.total == 0) continue;
                phase["distributions"]["augmented:" + attribute] = histogram_to_json(hist);
                const auto ref = diag::attribute_distribution(trace.item_attributes, attribute);
                const auto div = diag::distribution_divergence(hist, ref);
                phase["divergences"]["augmented:" + attribute] = {
                    {"tv_distance", div.tv_distance},
                    {"top1_share_delta", div.top1_share_delta}};
            }
            phase["lc"]["augmenter:choice"] = augmenter_lc(p1);
        }
        report["phase1"] = std::move(phase);
    }

    if (config.phase2 && !trace.periods.empty()) {
        const auto& p1 = trace.periods[0];
        json phase;
        const auto gap = period_gap(p1, trace.gt_items.at(0), index_d0);
        phase["gap_stats"] = gap ? gap_stats_to_json(*gap) : json();
        const auto fef = period_catalog_fef(p1, catalog);
        phase["catalog_fef"] = fef ? json(*fef) : json();
        phase["lc"] = ranked_lc(p1);
        report["phase2"] = std::move(phase);
    }

    std::ostringstream plots;
    plots << "metric,period,subject,value\n";
    std::ostringstream projections;
    projections << "kind,period,subject,x,y\n";

    if (config.phase3) {
        json phase;
        phase["per_period"] = json::array();

        // Polarization needs embeddings in every period.
        bool embeddings_everywhere = !trace.periods.empty();
        for (const auto& pt : trace.periods)
            if (!pt.embeddings) embeddings_everywhere = false;

        std::optional<diag::PolarizationTrace> user_pol;
        std::optional<diag::PolarizationTrace> item_pol;
        if (embeddings_everywhere) {
            std::vector<rec::EmbeddingMatrix> user_mats;
            std::vector<rec::EmbeddingMatrix> item_mats;
            for (const auto& pt : trace.periods) {
                user_mats.push_back(pt.embeddings->first);
                item_mats.push_back(pt.embeddings->second);
            }
            const std::uint64_t pol_seed =
                Rng::mix(trace.config.seed, Rng::hash_string("polarization"));
            user_pol = diag::polarization_trace(user_mats, 2, pol_seed);
            item_pol = diag::polarization_trace(item_mats, 2, Rng::mix(pol_seed, 1));
        }

        diag::PopularityIndex accumulated{trace.popularity_d0};
        for (std::size_t n = 0; n < trace.periods.size(); ++n) {
            const auto& pt = trace.periods[n];
            const diag::PopularityIndex& index =
                config.pop_index_mode == DiagnosticsConfig::PopIndexMode::accumulated
                    ? accumulated
                    : index_d0;

            json entry;
            entry["period"] = pt.index;

            const auto gap = period_gap(pt, trace.gt_items.at(n), index);
            entry["gap_stats"] = gap ? gap_stats_to_json(*gap) : json();
            if (gap) {
                append_plot_row(plots, "mean_popularity_gap", pt.index, "", gap->summary.mean);
                for (const auto& [user, value] : gap->gaps)
                    append_plot_row(plots, "popularity_gap", pt.index, user, value);
            }

            const auto fef = period_catalog_fef(pt, catalog);
            entry["catalog_fef"] = fef ? json(*fef) : json();
            if (fef) append_plot_row(plots, "catalog_fef", pt.index, "", *fef);

            json lc;
            lc["ranked"] = ranked_lc(pt);
            append_plot_row(plots, "lc_ranked", pt.index, "", lc["ranked"].get<double>());
            if (!pt.profiles.empty()) {
                for (const auto& [attribute, rate] : profile_lc(pt)) {
                    lc["profile:" + attribute] = rate;
                    append_plot_row(plots, "lc_profile:" + attribute, pt.index, "", rate);
                }
            }
            if (!pt.augmented[0].empty()) {
                lc["augmenter:choice"] = augmenter_lc(pt);
                append_plot_row(plots, "lc_augmenter", pt.index, "",
                                lc["augmenter:choice"].get<double>());
            }
            entry["lc"] = std::move(lc);

            json fef_attrs = json::object();
            if (!pt.profiles.empty()) {
                for (const auto& [attribute, rate] : profile_fef(pt, trace.user_attributes)) {
                    fef_attrs["profile:" + attribute] = rate;
                    append_plot_row(plots, "fef_profile:" + attribute, pt.index, "", rate);
                }
            }
            entry["fef"] = std::move(fef_attrs);

            if (user_pol) {
                entry["centroid_distance"] = {
                    {"user", user_pol->centroid_distances[n]},
                    {"item", item_pol->centroid_distances[n]}};
                append_plot_row(plots, "centroid_distance_user", pt.index, "",
                                user_pol->centroid_distances[n]);
                append_plot_row(plots, "centroid_distance_item", pt.index, "",
                                item_pol->centroid_distances[n]);
            } else {
                entry["centroid_distance"] = json();
            }
            phase["per_period"].push_back(std::move(entry));

            for (const auto& x : pt.injected) accumulated.counts[x.item_id] += 1;
        }

        if (user_pol) {
            phase["polarization"] = "available";
            json proj;
            for (const auto* pol : {&*user_pol, &*item_pol}) {
                const bool is_user = pol == &*user_pol;
                const std::string kind = is_user ? "user" : "item";
                json side;
                side["subjects"] = pol->subject_ids;
                side["labels"] = json::array();
                for (const auto& subject : pol->subject_ids)
                    side["labels"].push_back(pol->reference_labels.at(subject));
                side["periods"] = json::array();
                for (std::size_t n = 0; n < pol->projections.size(); ++n) {
                    json coords = json::array();
                    for (std::size_t i = 0; i < pol->projections[n].size(); ++i) {
                        coords.push_back({pol->projections[n][i][0], pol->projections[n][i][1]});
                        projections << kind << ',' << trace.periods[n].index << ','
                                    << pol->subject_ids[i] << ','
                                    << trace_io::format_double(pol->projections[n][i][0]) << ','
                                    << trace_io::format_double(pol->projections[n][i][1]) << '\n';
                    }
                    side["periods"].push_back(std::move(coords));
                }
                proj[kind] = std::move(side);
            }
            phase["projections"] = std::move(proj);
        } else {
            phase["polarization"] = "unavailable";
            phase["projections"] = json();
        }
        report["phase3"] = std::move(phase);
    }

    bundle.plots_csv = plots.str();
    bundle.projections_csv = projections.str();
    return bundle;
}

void write_report_files(const ReportBundle& bundle, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    {
        std::ofstream out(fs::path(directory) / "report.json", std::ios::binary);
        if (!out) throw UsageError("cannot write report.json in '" + directory + "'");
        out << bundle.report.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(directory) / "plots.csv", std::ios::binary);
        out << bundle.plots_csv;
    }
    {
        std::ofstream out(fs::path(directory) / "projections.csv", std::ios::binary);
        out << bundle.projections_csv;
    }
}

std::string summarize(const loop::LoopTrace& trace, const json& report) {
    std::ostringstream out;
    out << "dataset: |D^(0)| = " << trace.initial_size << ", catalog = " << trace.catalog.size()
        << " items\n";
    out << "common users: " << report.at("summary").at("common_users").get<std::size_t>()
        << ", periods: " << trace.periods.size() << "\n";
    out << "injected per period:";
    for (const auto& pt : trace.periods) out << " " << pt.injected.size();
    out << "\n";
    if (report.count("phase2")) {
        const auto& phase2 = report.at("phase2");
        if (phase2.at("gap_stats").is_object())
            out << "phase2 mean popularity gap: "
                << phase2.at("gap_stats").at("mean").get<double>() << "\n";
        if (phase2.at("catalog_fef").is_number())
            out << "phase2 catalog FEF: " << phase2.at("catalog_fef").get<double>()
                << ", ranked LC: " << phase2.at("lc").get<double>() << "\n";
    }
    if (report.count("phase3")) {
        const auto& phase3 = report.at("phase3");
        const auto& per_period = phase3.at("per_period");
        if (!per_period.empty() && per_period.front().at("centroid_distance").is_object()) {
            out << "centroid distance (user): "
                << per_period.front().at("centroid_distance").at("user").get<double>() << " -> "
                << per_period.back().at("centroid_distance").at("user").get<double>() << "\n";
            out << "centroid distance (item): "
                << per_period.front().at("centroid_distance").at("item").get<double>() << " -> "
                << per_period.back().at("centroid_distance").at("item").get<double>() << "\n";
        } else {
            out << "polarization: unavailable (backbone exports no embeddings)\n";
        }
    }
    return out.str();
}

}  // namespace echoloop::report
