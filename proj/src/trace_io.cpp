#include "echoloop/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "echoloop/ingest.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace echoloop::trace_io {

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

namespace {

double parse_double(const std::string& text, const std::string& context) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError(context + ": bad number '" + text + "'");
    return value;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("missing trace file '" + path.string() + "'");
    return in;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

// Generator configs carry a possibly infinite temperature; JSON has no inf,
// so it is stored as the string "inf".
json generator_to_json(const riskgen::GeneratorConfig& g) {
    json j;
    if (std::isinf(g.popularity_temperature))
        j["popularity_temperature"] = "inf";
    else
        j["popularity_temperature"] = g.popularity_temperature;
    j["fef_probability"] = g.fef_probability;
    j["lc_flip_probability"] = g.lc_flip_probability;
    j["seed"] = g.seed;
    j["attribute_skew"] = g.attribute_skew;
    return j;
}

riskgen::GeneratorConfig generator_from_json(const json& j) {
    riskgen::GeneratorConfig g;
    const auto& beta = j.at("popularity_temperature");
    g.popularity_temperature = beta.is_string()
                                   ? std::numeric_limits<double>::infinity()
                                   : beta.get<double>();
    g.fef_probability = j.at("fef_probability").get<double>();
    g.lc_flip_probability = j.at("lc_flip_probability").get<double>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.attribute_skew =
        j.at("attribute_skew").get<std::map<std::string, std::map<std::string, double>>>();
    return g;
}

json pipeline_to_json(const loop::PipelineConfig& c) {
    json j;
    j["recommender"] = {{"kind", rec::to_string(c.recommender.kind)},
                        {"embedding_dim", c.recommender.embedding_dim},
                        {"learning_rate", c.recommender.learning_rate},
                        {"epochs", c.recommender.epochs},
                        {"negatives_per_positive", c.recommender.negatives_per_positive},
                        {"neighbors", c.recommender.neighbors},
                        {"seed", c.recommender.seed}};
    j["decision_mode"] = loop::to_string(c.decision_mode);
    j["augment_each_period"] = c.augment_each_period;
    j["exclude_seen"] = c.exclude_seen;
    j["warm_start"] = c.warm_start;
    j["fixed_training_budget"] = c.fixed_training_budget;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["pairs_per_user"] = c.pairs_per_user;
    j["candidate_pool"] = c.candidate_pool;
    j["seed"] = c.seed;
    if (c.augmenter) j["augmenter"] = generator_to_json(*c.augmenter);
    if (c.representer) j["representer"] = generator_to_json(*c.representer);
    if (c.decision) j["decision"] = generator_to_json(*c.decision);
    return j;
}

loop::PipelineConfig pipeline_from_json(const json& j) {
    loop::PipelineConfig c;
    const auto& r = j.at("recommender");
    c.recommender.kind = rec::model_kind_from_string(r.at("kind").get<std::string>());
    c.recommender.embedding_dim = r.at("embedding_dim").get<int>();
    c.recommender.learning_rate = r.at("learning_rate").get<double>();
    c.recommender.epochs = r.at("epochs").get<int>();
    c.recommender.negatives_per_positive = r.at("negatives_per_positive").get<int>();
    c.recommender.neighbors = r.at("neighbors").get<int>();
    c.recommender.seed = r.at("seed").get<std::uint64_t>();
    c.decision_mode = loop::decision_mode_from_string(j.at("decision_mode").get<std::string>());
    c.augment_each_period = j.at("augment_each_period").get<bool>();
    c.exclude_seen = j.at("exclude_seen").get<bool>();
    c.warm_start = j.at("warm_start").get<bool>();
    c.fixed_training_budget = j.at("fixed_training_budget").get<bool>();
    c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
    c.pairs_per_user = j.at("pairs_per_user").get<int>();
    c.candidate_pool = j.at("candidate_pool").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.count("augmenter")) c.augmenter = generator_from_json(j.at("augmenter"));
    if (j.count("representer")) c.representer = generator_from_json(j.at("representer"));
    if (j.count("decision")) c.decision = generator_from_json(j.at("decision"));
    return c;
}

void write_ranked_csv(const loop::PeriodTrace& pt, const fs::path& path) {
    auto out = open_out(path);
    out << "user_id,trial,rank,item_id,fabricated\n";
    for (const auto& [user, trials] : pt.ranked) {
        for (int trial = 0; trial < 2; ++trial) {
            const auto& list = trials[static_cast<std::size_t>(trial)];
            for (std::size_t rank = 0; rank < list.size(); ++rank)
                out << user << ',' << (trial + 1) << ',' << rank << ',' << list[rank].item_id
                    << ',' << (list[rank].fabricated ? 1 : 0) << '\n';
        }
    }
}

void write_generated_jsonl(const loop::PeriodTrace& pt, const fs::path& path) {
    auto out = open_out(path);
    for (int trial = 0; trial < 2; ++trial) {
        for (const auto& pick : pt.augmented[static_cast<std::size_t>(trial)]) {
            json j;
            j["period"] = pt.index;
            j["role"] = "augmenter";
            j["subject"] = pick.interaction.user_id;
            j["output"] = {{"pair", {pick.option_a, pick.option_b}},
                           {"chosen", pick.interaction.item_id},
                           {"pair_index", pick.pair_index}};
            j["fabricated"] = false;
            j["trial"] = trial + 1;
            out << j.dump() << "\n";
        }
    }
    for (const auto& [user, trials] : pt.profiles) {
        for (int trial = 0; trial < 2; ++trial) {
            const auto& profile = trials[static_cast<std::size_t>(trial)];
            json j;
            j["period"] = pt.index;
            j["role"] = "representer";
            j["subject"] = user;
            j["output"] = profile.attributes;
            j["fabricated"] = profile.fabricated_flags;
            j["trial"] = trial + 1;
            out << j.dump() << "\n";
        }
    }
}

void read_generated_jsonl(loop::PeriodTrace& pt, Timestamp tau, const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " +
                                  e.what());
        }
        const int trial = j.at("trial").get<int>();
        if (trial < 1 || trial > 2)
            throw ValidationError(path.string() + ": unsupported trial " +
                                  std::to_string(trial));
        const auto& role = j.at("role").get_ref<const std::string&>();
        const std::string subject = j.at("subject").get<std::string>();
        if (role == "augmenter") {
            riskgen::AugmentedPick pick;
            pick.interaction =
                Interaction{subject, j.at("output").at("chosen").get<std::string>(), tau};
            pick.option_a = j.at("output").at("pair").at(0).get<std::string>();
            pick.option_b = j.at("output").at("pair").at(1).get<std::string>();
            pick.pair_index = j.at("output").at("pair_index").get<int>();
            pt.augmented[static_cast<std::size_t>(trial - 1)].push_back(std::move(pick));
        } else if (role == "representer") {
            riskgen::Profile profile;
            profile.subject_id = subject;
            profile.provenance = riskgen::Provenance::generated;
            profile.attributes =
                j.at("output").get<std::map<std::string, std::vector<std::string>>>();
            profile.fabricated_flags = j.at("fabricated").get<std::map<std::string, bool>>();
            pt.profiles[subject][static_cast<std::size_t>(trial - 1)] = std::move(profile);
        } else {
            throw ValidationError(path.string() + ": unknown role '" + role + "'");
        }
    }
}

}  // namespace

void write_embedding_matrix(const rec::EmbeddingMatrix& matrix, const std::string& path) {
    auto out = open_out(path);
    out << "subject_id";
    for (std::size_t d = 0; d < matrix.dim; ++d) out << ",dim_" << d;
    out << "\n";
    for (std::size_t i = 0; i < matrix.subject_ids.size(); ++i) {
        out << matrix.subject_ids[i];
        for (std::size_t d = 0; d < matrix.dim; ++d)
            out << ',' << format_double(matrix.vectors[i][d]);
        out << "\n";
    }
}

rec::EmbeddingMatrix read_embedding_matrix(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": missing header");
    const auto header = split_fields(line);
    if (header.empty() || header[0] != "subject_id")
        throw ValidationError(path + ": bad header");

    rec::EmbeddingMatrix matrix;
    matrix.dim = header.size() - 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ValidationError(path + ": row with " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(header.size()));
        matrix.subject_ids.push_back(fields[0]);
        std::vector<double> v(matrix.dim);
        for (std::size_t d = 0; d < matrix.dim; ++d)
            v[d] = parse_double(fields[d + 1], path);
        matrix.vectors.push_back(std::move(v));
    }
    return matrix;
}

void write_trace(const loop::LoopTrace& trace, const std::string& directory) {
    const fs::path dir(directory);
    fs::create_directories(dir);

    {
        json meta;
        meta["initial_size"] = trace.initial_size;
        meta["cutoff_time"] = trace.cutoff_time;
        meta["catalog_size"] = trace.catalog.size();
        meta["warnings"] = trace.warnings;
        meta["config"] = pipeline_to_json(trace.config);
        meta["split"] = {{"cutoff_fraction", trace.split_config.cutoff_fraction},
                         {"num_periods", trace.split_config.num_periods},
                         {"mode", trace.split_config.mode ==
                                          timeline::SplitMode::timeline_fraction
                                      ? "timeline"
                                      : "count"}};
        meta["periods"] = json::array();
        for (const auto& pt : trace.periods) {
            json p;
            p["index"] = pt.index;
            p["tau"] = pt.tau;
            p["dataset_size"] = pt.dataset_size;
            p["injected_count"] = pt.injected.size();
            p["has_embeddings"] = pt.embeddings.has_value();
            p["warnings"] = pt.warnings;
            meta["periods"].push_back(std::move(p));
        }
        open_out(dir / "trace.json") << meta.dump(2) << "\n";
    }

    open_out(dir / "schedule.json") << trace.schedule.to_json().dump(2) << "\n";

    {
        auto out = open_out(dir / "catalog.csv");
        out << "item_id,d0_count\n";
        for (const auto& item : trace.catalog) {
            const auto it = trace.popularity_d0.find(item);
            out << item << ',' << (it == trace.popularity_d0.end() ? 0 : it->second) << '\n';
        }
    }

    {
        auto out = open_out(dir / "user_attributes.csv");
        ingest::write_attribute_table(trace.user_attributes, out);
    }
    {
        auto out = open_out(dir / "item_attributes.csv");
        ingest::write_attribute_table(trace.item_attributes, out);
    }

    for (std::size_t n = 0; n < trace.periods.size(); ++n) {
        const auto& pt = trace.periods[n];
        const fs::path pdir = dir / ("period_" + std::to_string(pt.index));
        fs::create_directories(pdir);

        write_ranked_csv(pt, pdir / "recs.csv");

        {
            auto out = open_out(pdir / "injected.csv");
            ingest::write_interaction_log(pt.injected, out);
        }
        write_generated_jsonl(pt, pdir / "generated.jsonl");

        {
            auto out = open_out(pdir / "gt.csv");
            out << "user_id,item_id\n";
            if (n < trace.gt_items.size())
                for (const auto& [user, items] : trace.gt_items[n])
                    for (const auto& item : items) out << user << ',' << item << '\n';
        }

        if (pt.embeddings) {
            write_embedding_matrix(pt.embeddings->first, (pdir / "embeddings_user.csv").string());
            write_embedding_matrix(pt.embeddings->second,
                                   (pdir / "embeddings_item.csv").string());
        }
    }
}

loop::LoopTrace read_trace(const std::string& directory) {
    const fs::path dir(directory);
    loop::LoopTrace trace;

    json meta;
    {
        auto in = open_in(dir / "trace.json");
        try {
            in >> meta;
        } catch (const json::exception& e) {
            throw ValidationError(std::string("trace.json: ") + e.what());
        }
    }
    trace.initial_size = meta.at("initial_size").get<std::size_t>();
    trace.cutoff_time = meta.at("cutoff_time").get<Timestamp>();
    trace.warnings = meta.at("warnings").get<std::vector<std::string>>();
    trace.config = pipeline_from_json(meta.at("config"));
    trace.split_config.cutoff_fraction = meta.at("split").at("cutoff_fraction").get<double>();
    trace.split_config.num_periods = meta.at("split").at("num_periods").get<int>();
    trace.split_config.mode = meta.at("split").at("mode").get<std::string>() == "count"
                                  ? timeline::SplitMode::interaction_count
                                  : timeline::SplitMode::timeline_fraction;

    {
        auto in = open_in(dir / "schedule.json");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ValidationError(std::string("schedule.json: ") + e.what());
        }
        trace.schedule = timeline::PeriodSchedule::from_json(j);
    }

    {
        auto in = open_in(dir / "catalog.csv");
        std::string line;
        if (!std::getline(in, line) || line != "item_id,d0_count")
            throw ValidationError("catalog.csv: bad header");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fields = split_fields(line);
            if (fields.size() != 2) throw ValidationError("catalog.csv: bad row '" + line + "'");
            trace.catalog.push_back(fields[0]);
            const auto count = static_cast<std::int64_t>(parse_double(fields[1], "catalog.csv"));
            if (count > 0) trace.popularity_d0[fields[0]] = count;
        }
    }

    {
        auto in = open_in(dir / "user_attributes.csv");
        trace.user_attributes = ingest::parse_attribute_table(in, SubjectKind::user);
    }
    {
        auto in = open_in(dir / "item_attributes.csv");
        trace.item_attributes = ingest::parse_attribute_table(in, SubjectKind::item);
    }

    for (const auto& pmeta : meta.at("periods")) {
        loop::PeriodTrace pt;
        pt.index = pmeta.at("index").get<int>();
        pt.tau = pmeta.at("tau").get<Timestamp>();
        pt.dataset_size = pmeta.at("dataset_size").get<std::size_t>();
        pt.warnings = pmeta.at("warnings").get<std::vector<std::string>>();

        const fs::path pdir = dir / ("period_" + std::to_string(pt.index));

        {
            auto in = open_in(pdir / "recs.csv");
            std::string line;
            if (!std::getline(in, line) || line != "user_id,trial,rank,item_id,fabricated")
                throw ValidationError((pdir / "recs.csv").string() + ": bad header");
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto fields = split_fields(line);
                if (fields.size() != 5)
                    throw ValidationError((pdir / "recs.csv").string() + ": bad row '" + line +
                                          "'");
                const int trial = static_cast<int>(parse_double(fields[1], "recs.csv"));
                if (trial < 1 || trial > 2)
                    throw ValidationError((pdir / "recs.csv").string() + ": bad trial");
                auto& list = pt.ranked[fields[0]][static_cast<std::size_t>(trial - 1)];
                list.push_back(RankedEntry{fields[3], fields[4] == "1"});
            }
        }

        {
            auto in = open_in(pdir / "injected.csv");
            pt.injected = ingest::parse_interaction_log(in);
        }

        read_generated_jsonl(pt, pt.tau, pdir / "generated.jsonl");

        {
            auto in = open_in(pdir / "gt.csv");
            std::string line;
            if (!std::getline(in, line) || line != "user_id,item_id")
                throw ValidationError((pdir / "gt.csv").string() + ": bad header");
            std::map<UserId, std::vector<ItemId>> gt;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto fields = split_fields(line);
                if (fields.size() != 2)
                    throw ValidationError((pdir / "gt.csv").string() + ": bad row '" + line +
                                          "'");
                gt[fields[0]].push_back(fields[1]);
            }
            trace.gt_items.push_back(std::move(gt));
        }

        if (pmeta.at("has_embeddings").get<bool>()) {
            pt.embeddings =
                std::make_pair(read_embedding_matrix((pdir / "embeddings_user.csv").string()),
                               read_embedding_matrix((pdir / "embeddings_item.csv").string()));
        }
        trace.periods.push_back(std::move(pt));
    }
    return trace;
}

}  // namespace echoloop::trace_io
