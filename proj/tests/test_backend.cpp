#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "echoloop/backend.hpp"

using namespace echoloop;
using namespace echoloop::backend;

TEST_CASE("prompts are deterministic strings") {
    const riskgen::AttributeSchema schema{{"gender", {"Male", "Female"}}};
    const auto a = build_profile_prompt("u1", {"i1", "i2"}, schema);
    const auto b = build_profile_prompt("u1", {"i1", "i2"}, schema);
    CHECK(a == b);
    CHECK(a != build_profile_prompt("u2", {"i1", "i2"}, schema));
    CHECK(build_item_choice_prompt("u1", "a", "b") != build_item_choice_prompt("u1", "b", "a"));
    CHECK(build_ranked_list_prompt("u1", 3, {"a"}) != build_ranked_list_prompt("u1", 4, {"a"}));
}

TEST_CASE("profile response parser") {
    const riskgen::AttributeSchema schema{{"gender", {"Male", "Female"}},
                                          {"genre", {"Drama", "Comedy"}}};

    const auto ok = parse_profile_response("u1", schema, "gender: Male\ngenre: Drama\n");
    REQUIRE(ok.ok());
    CHECK(ok.value->subject_id == "u1");
    CHECK(ok.value->attributes.at("gender") == std::vector<std::string>{"Male"});
    CHECK_FALSE(ok.value->fabricated_flags.at("gender"));

    // values outside the vocabulary are flagged, not rejected
    const auto outside = parse_profile_response("u1", schema, "gender: Robot\n");
    REQUIRE(outside.ok());
    CHECK(outside.value->fabricated_flags.at("gender"));

    // attribute names absent from the request are a failure
    const auto bad_attr = parse_profile_response("u1", schema, "age: 30\n");
    CHECK_FALSE(bad_attr.ok());
    CHECK(bad_attr.error.find("age") != std::string::npos);

    CHECK_FALSE(parse_profile_response("u1", schema, "").ok());
    CHECK_FALSE(parse_profile_response("u1", schema, "no colon here\n").ok());
    CHECK_FALSE(parse_profile_response("u1", schema, "gender:\n").ok());
}

TEST_CASE("item choice parser enforces the offered pair") {
    CHECK(parse_item_choice_response("a", "b", "a\n").value == "a");
    CHECK(parse_item_choice_response("a", "b", "  b  ").value == "b");
    CHECK_FALSE(parse_item_choice_response("a", "b", "c").ok());
    CHECK_FALSE(parse_item_choice_response("a", "b", "").ok());
}

TEST_CASE("ranked list parser") {
    const auto ok = parse_ranked_list_response("i1\ni2\nFAB::item::7\n");
    REQUIRE(ok.ok());
    REQUIRE(ok.value->size() == 3);
    CHECK_FALSE((*ok.value)[0].fabricated);
    CHECK((*ok.value)[2].fabricated);  // FAB:: namespace is recognized

    CHECK_FALSE(parse_ranked_list_response("i1\ni1\n").ok());
    CHECK_FALSE(parse_ranked_list_response("").ok());
    CHECK_FALSE(parse_ranked_list_response("i1\ni2\ni3\n", 2).ok());
}

namespace {

class EchoBackend : public LlmBackend {
public:
    std::string complete(const std::string& prompt, std::uint64_t seed) override {
        ++calls;
        return "echo:" + std::to_string(seed) + ":" + std::to_string(prompt.size());
    }
    int calls = 0;
};

}  // namespace

TEST_CASE("replay cache: record, save, load, serve") {
    const auto path = std::filesystem::temp_directory_path() / "echoloop_cache_test.jsonl";
    std::filesystem::remove(path);

    auto cache = std::make_shared<ReplayCache>();
    auto inner = std::make_shared<EchoBackend>();
    ReplayBackend recording(cache, inner);

    const auto r1 = recording.complete("prompt-a", 5);
    const auto r2 = recording.complete("prompt-a", 5);
    CHECK(r1 == r2);
    CHECK(inner->calls == 1);  // second call served from cache

    recording.complete("prompt-b", 6);
    cache->save(path.string());

    auto restored = std::make_shared<ReplayCache>();
    restored->load(path.string());
    CHECK(restored->size() == 2);

    ReplayBackend replay_only(restored);  // no inner backend
    CHECK(replay_only.complete("prompt-a", 5) == r1);
    CHECK_THROWS_AS(replay_only.complete("prompt-unknown", 1), DataError);

    std::filesystem::remove(path);
}

TEST_CASE("request hash depends on prompt and seed") {
    CHECK(ReplayCache::request_hash("p", 1) != ReplayCache::request_hash("p", 2));
    CHECK(ReplayCache::request_hash("p", 1) != ReplayCache::request_hash("q", 1));
    CHECK(ReplayCache::request_hash("p", 1) == ReplayCache::request_hash("p", 1));
}
