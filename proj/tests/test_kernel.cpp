#include "mindos/kernel.hpp"
#include "support/helpers.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace mindos;

namespace {

AgentConfig teacher() {
    AgentConfig c;
    c.agent_id = "teacher-1";
    c.name = "Physics Teacher";
    c.profile = "Patient.";
    c.drives.push_back(Drive{"teach", DriveKind::long_term,
                             "As a teacher, your objective is to excel in your teaching duties.", 5,
                             DriveStatus::active, "", MatchMode::substring, ""});
    return c;
}

bool has_violation(const ValidationReport& r, const std::string& field, const std::string& reason) {
    for (const auto& v : r)
        if (v.field == field && v.reason == reason) return true;
    return false;
}

} // namespace

TEST(Validation, TeacherConfigIsValid) { EXPECT_TRUE(validate_agent_config(teacher()).empty()); }

TEST(Validation, EmptyNameAfterNormalization) {
    auto c = teacher();
    c.name = "  \t ";
    EXPECT_TRUE(has_violation(validate_agent_config(c), "name", "empty"));
}

TEST(Validation, ReactiveDriveNeedsPatternAndResponse) {
    auto c = teacher();
    c.drives.push_back(Drive{"r", DriveKind::reactive, "", 0, DriveStatus::active, "", MatchMode::exact, ""});
    const auto r = validate_agent_config(c);
    EXPECT_TRUE(has_violation(r, "drives[1].pattern", "empty"));
    EXPECT_TRUE(has_violation(r, "drives[1].response", "empty"));
}

TEST(Validation, NonPositiveLimitsAndDuplicateIds) {
    auto c = teacher();
    c.step_limit = 0;
    c.retrieval_k = -1;
    c.drives.push_back(c.drives[0]);
    c.tool_ids = {"echo", "echo"};
    const auto r = validate_agent_config(c);
    EXPECT_TRUE(has_violation(r, "step_limit", "must_be_positive"));
    EXPECT_TRUE(has_violation(r, "retrieval_k", "must_be_positive"));
    EXPECT_TRUE(has_violation(r, "drives[1].drive_id", "duplicate"));
    EXPECT_TRUE(has_violation(r, "tool_ids[1]", "duplicate"));
}

TEST(Validation, LongTermDriveCannotBeSatisfied) {
    auto c = teacher();
    c.drives[0].status = DriveStatus::satisfied;
    EXPECT_TRUE(has_violation(validate_agent_config(c), "drives[0].status", "long_term_never_satisfied"));
}

TEST(Validation, AgentIdMustBeUrlSafe) {
    auto c = teacher();
    c.agent_id = "has space";
    EXPECT_TRUE(has_violation(validate_agent_config(c), "agent_id", "not_url_safe"));
}

TEST(ConfigJson, UnknownFieldIsMalformed) {
    try {
        parse_agent_config(R"({"name":"x","bogus":1})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Malformed);
    }
}

TEST(ConfigJson, WrongTypeIsMalformed) {
    EXPECT_THROW(parse_agent_config(R"({"name":"x","step_limit":"20"})"), Error);
    EXPECT_THROW(parse_agent_config("not json"), Error);
}

TEST(ConfigJson, FixtureParses) {
    const auto c = parse_agent_config(testkit::read_file(testkit::fixture("configs/teacher_agent.json")));
    EXPECT_EQ(c.name, "Physics Teacher");
    ASSERT_EQ(c.drives.size(), 2u);
    EXPECT_EQ(c.drives[1].kind, DriveKind::reactive);
    EXPECT_TRUE(c.memory_policy.store_conversation);
    EXPECT_TRUE(validate_agent_config(c).empty());
}

TEST(ConfigJson, RoundTripProperty) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> small(0, 4);
    for (int iter = 0; iter < 200; ++iter) {
        AgentConfig c;
        c.agent_id = "a" + std::to_string(iter);
        c.name = testkit::random_text(rng, 12);
        c.profile = testkit::random_text(rng, 30);
        for (int i = 0, n = small(rng); i < n; ++i) {
            Drive d;
            d.drive_id = "d" + std::to_string(i);
            d.kind = static_cast<DriveKind>(small(rng) % 3);
            d.prompt_text = testkit::random_text(rng, 20);
            d.priority = small(rng) - 2;
            if (d.kind == DriveKind::reactive) {
                d.pattern = "p" + std::to_string(i);
                d.response = testkit::random_text(rng, 10);
                d.match_mode = small(rng) % 2 ? MatchMode::exact : MatchMode::substring;
            }
            c.drives.push_back(d);
        }
        for (int i = 0, n = small(rng); i < n; ++i)
            c.triggers.push_back(Trigger{"t" + std::to_string(i), "pat", MatchMode::exact, "resp", small(rng) % 2 == 0});
        for (int i = 0, n = small(rng); i < n; ++i) c.tool_ids.push_back("tool" + std::to_string(i));
        c.memory_policy = MemoryPolicy{small(rng) % 2 == 0, small(rng) % 2 == 0};
        c.step_limit = 1 + small(rng);
        c.retrieval_k = 1 + small(rng);

        const std::string text = dump_json(to_json(c));
        EXPECT_EQ(parse_agent_config(text), c) << text;
    }
}

TEST(Normalize, Examples) {
    EXPECT_EQ(normalize_text("  Please SHUT   DOWN\tnow "), "please shut down now");
    EXPECT_EQ(normalize_text("ÉCOLE Жук"), "école жук");
    EXPECT_EQ(normalize_text(""), "");
    EXPECT_EQ(normalize_text(" \n\t "), "");
}

TEST(Normalize, IdempotentProperty) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const std::string s = testkit::random_text(rng, 40);
        const std::string once = normalize_text(s);
        EXPECT_EQ(normalize_text(once), once);
        EXPECT_TRUE(once.empty() || (once.front() != ' ' && once.back() != ' '));
        EXPECT_EQ(once.find("  "), std::string::npos);
    }
}

TEST(Normalize, InvalidBytesPassThrough) {
    const std::string bad = "A\xFF" "B";
    EXPECT_EQ(normalize_text(bad), "a\xFF" "b");
}

TEST(Directives, CanonicalShape) {
    EXPECT_EQ(dump_json(to_json(Directive{InvokeTool{"echo", json{{"q", "x"}}}})),
              R"({"action":"invoke_tool","args":{"q":"x"},"tool":"echo"})");
    EXPECT_EQ(action_name(Directive{Finish{"done"}}), "finish");
    EXPECT_EQ(std::size(kActionNames), std::variant_size_v<Directive>);
}

TEST(Ids, MadeIdsAreUrlSafeAndDistinct) {
    std::set<std::string> seen;
    for (int i = 0; i < 500; ++i) {
        const auto id = make_id("ses");
        EXPECT_TRUE(is_url_safe_id(id));
        EXPECT_EQ(id.rfind("ses-", 0), 0u);
        EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_FALSE(is_url_safe_id(""));
    EXPECT_FALSE(is_url_safe_id("a/b"));
}

TEST(Time, Iso8601) {
    EXPECT_EQ(format_iso8601(instant_from_millis(0)), "1970-01-01T00:00:00Z");
    EXPECT_EQ(format_iso8601(instant_from_millis(951782400000)), "2000-02-29T00:00:00Z");
    EXPECT_EQ(format_iso8601(instant_from_millis(1677628800999)), "2023-03-01T00:00:00Z");
    EXPECT_EQ(to_millis(instant_from_millis(1234)), 1234);
}

TEST(Errors, MessageCarriesName) {
    const Error e(ErrorCode::DuplicateToolId, "echo");
    EXPECT_EQ(std::string(e.what()), "DuplicateToolId: echo");
    EXPECT_EQ(to_string(ErrorCode::SessionHalted), "SessionHalted");
}
