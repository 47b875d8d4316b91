#include "mindos/thought_stream.hpp"
#include "support/helpers.hpp"

#include <gtest/gtest.h>

using namespace mindos;

namespace {

ParseErrorReason reason_of(std::string_view completion) {
    const auto out = parse_directive(completion);
    EXPECT_TRUE(std::holds_alternative<ParseError>(out)) << completion;
    return std::holds_alternative<ParseError>(out) ? std::get<ParseError>(out).reason : ParseErrorReason::no_json;
}

Directive directive_of(std::string_view completion) {
    auto out = parse_directive(completion);
    EXPECT_TRUE(std::holds_alternative<Directive>(out)) << completion;
    return std::holds_alternative<Directive>(out) ? std::get<Directive>(out) : Directive{Finish{}};
}

Thought simple_thought() {
    ShortTermStore store;
    ThoughtInputs in;
    in.instructions = "Assist the user.";
    in.perception = "hi";
    return assemble_thought(store, in);
}

} // namespace

TEST(Parse, EachActionKind) {
    EXPECT_EQ(directive_of(R"({"action":"respond","text":"hi"})"), (Directive{Respond{"hi", {}}}));
    EXPECT_EQ(directive_of(R"({"action":"respond","text":"Book?","actions":[{"label":"Yes","action_id":"y"}]})"),
              (Directive{Respond{"Book?", {OfferedAction{"Yes", "y"}}}}));
    EXPECT_EQ(directive_of(R"({"action":"invoke_tool","tool":"echo","args":{"q":1}})"),
              (Directive{InvokeTool{"echo", json{{"q", 1}}}}));
    EXPECT_EQ(directive_of(R"({"action":"query_memory","store":"domain_knowledge","query":"tower"})"),
              (Directive{QueryMemory{StoreKind::domain_knowledge, "tower"}}));
    EXPECT_EQ(directive_of(R"({"action":"plan","subgoals":["a","b"]})"), (Directive{Plan{{"a", "b"}}}));
    const auto chain = directive_of(R"({"action":"chain","steps":[{"tool":"s","args":{},"bind":"r"},{"tool":"t","args":{"x":"${r.text}"}}]})");
    ASSERT_TRUE(std::holds_alternative<Chain>(chain));
    EXPECT_EQ(std::get<Chain>(chain).steps.size(), 2u);
    EXPECT_EQ(std::get<Chain>(chain).steps[0].bind, std::optional<std::string>("r"));
    EXPECT_FALSE(std::get<Chain>(chain).steps[1].bind);
    EXPECT_EQ(directive_of(R"({"action":"finish","result":"done"})"), (Directive{Finish{"done"}}));
}

TEST(Parse, LastObjectInProseWins) {
    const auto d = directive_of("Thinking... {\"action\":\"respond\",\"text\":\"first\"} then "
                                "```json\n{\"action\":\"finish\",\"result\":\"second {braces}\"}\n``` ok");
    EXPECT_EQ(d, (Directive{Finish{"second {braces}"}}));
}

TEST(Parse, NestedObjectsAreNotMistakenForTopLevel) {
    const auto obj = last_json_object(R"(x {"action":"invoke_tool","tool":"a","args":{"k":{"n":1}}} y)");
    ASSERT_TRUE(obj);
    EXPECT_EQ((*obj)["tool"], "a");
}

TEST(Parse, ErrorReasons) {
    EXPECT_EQ(reason_of("no json at all"), ParseErrorReason::no_json);
    EXPECT_EQ(reason_of("{not valid json}"), ParseErrorReason::no_json);
    EXPECT_EQ(reason_of(R"({"action":"dance"})"), ParseErrorReason::unknown_action);
    EXPECT_EQ(reason_of(R"({"text":"x"})"), ParseErrorReason::missing_field);
    EXPECT_EQ(reason_of(R"({"action":"respond"})"), ParseErrorReason::missing_field);
    EXPECT_EQ(reason_of(R"({"action":"invoke_tool","tool":"a","args":[1]})"), ParseErrorReason::malformed_field);
    EXPECT_EQ(reason_of(R"({"action":"plan","subgoals":[]})"), ParseErrorReason::malformed_field);
    EXPECT_EQ(reason_of(R"({"action":"plan","subgoals":["  "]})"), ParseErrorReason::malformed_field);
    EXPECT_EQ(reason_of(R"({"action":"query_memory","store":"attic","query":"q"})"), ParseErrorReason::malformed_field);
    EXPECT_EQ(reason_of(R"({"action":"respond","text":5})"), ParseErrorReason::malformed_field);
}

TEST(Parse, ErrorKeepsRawText) {
    const auto out = parse_directive("garbage");
    EXPECT_EQ(std::get<ParseError>(out).raw, "garbage");
}

TEST(Step, FirstValidReplyUsesOneCall) {
    auto m = testkit::scripted_model(ScriptedScript{{}, R"({"action":"respond","text":"hello"})"});
    const auto r = ThoughtStream(*m.registry).step(simple_thought(), TaskKind::respond);
    EXPECT_EQ(r.directive, (Directive{Respond{"hello", {}}}));
    EXPECT_EQ(r.attempts.size(), 1u);
    EXPECT_FALSE(r.fell_back);
    EXPECT_EQ(m.provider->calls(), 1u);
}

TEST(Step, RepairPromptRecovers) {
    auto m = testkit::scripted_model(
        ScriptedScript{{ScriptedRule{1, "## Format Error", R"({"action":"finish","result":"fixed"})"}}, "oops"});
    const auto r = ThoughtStream(*m.registry).step(simple_thought(), TaskKind::decide);
    EXPECT_EQ(r.directive, (Directive{Finish{"fixed"}}));
    ASSERT_EQ(r.attempts.size(), 2u);
    ASSERT_TRUE(r.attempts[0].error);
    EXPECT_EQ(r.attempts[0].error->reason, ParseErrorReason::no_json);
    EXPECT_NE(r.attempts[1].prompt.find("reason: no_json"), std::string::npos);
    EXPECT_EQ(m.provider->calls(), 2u);
}

TEST(Step, FallsBackAfterRepairBudget) {
    auto m = testkit::scripted_model(ScriptedScript{{}, "never json"});
    const auto r = ThoughtStream(*m.registry).step(simple_thought(), TaskKind::decide);
    EXPECT_TRUE(r.fell_back);
    EXPECT_EQ(r.directive, (Directive{Respond{std::string(kFallbackText), {}}}));
    EXPECT_EQ(r.attempts.size(), static_cast<std::size_t>(1 + kRepairBudget));
    EXPECT_EQ(m.provider->calls(), 3u);
}

TEST(Step, RepairPromptsAreBuiltFromTheOriginal) {
    auto m = testkit::scripted_model(ScriptedScript{{}, "never json"});
    const auto r = ThoughtStream(*m.registry).step(simple_thought(), TaskKind::decide);
    const auto count = [](const std::string& s) {
        std::size_t n = 0;
        for (auto p = s.find("## Format Error"); p != std::string::npos; p = s.find("## Format Error", p + 1)) ++n;
        return n;
    };
    EXPECT_EQ(count(r.attempts[2].prompt), 1u);
}

TEST(Step, TemplateIsApplied) {
    auto m = testkit::scripted_model(
        ScriptedScript{{ScriptedRule{1, "PLAN MODE", R"({"action":"plan","subgoals":["x"]})"}},
                       R"({"action":"respond","text":"no template"})"});
    m.registry->register_template(PromptTemplate{"p", "scripted", TaskKind::plan, "PLAN MODE\n{{thought}}"});
    const ThoughtStream ts(*m.registry);
    EXPECT_EQ(ts.step(simple_thought(), TaskKind::plan).directive, (Directive{Plan{{"x"}}}));
    EXPECT_EQ(ts.step(simple_thought(), TaskKind::decide).directive, (Directive{Respond{"no template", {}}}));
}

TEST(Step, ProviderFailurePropagates) {
    auto m = testkit::scripted_model(ScriptedScript{{}, std::nullopt});
    try {
        ThoughtStream(*m.registry).step(simple_thought(), TaskKind::decide);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoRuleAndNoDefault);
    }
}
