#include "mindos/foundation_model.hpp"
#include "mindos/net.hpp"
#include "support/helpers.hpp"
#include "support/stub_server.hpp"

#include <gtest/gtest.h>

using namespace mindos;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Malformed;
}

} // namespace

TEST(Registry, FirstModelBecomesDefault) {
    ModelRegistry r;
    r.register_model(ModelDescriptor{"a", ProviderKind::scripted, std::nullopt, false});
    r.register_model(ModelDescriptor{"b", ProviderKind::scripted, std::nullopt, false});
    EXPECT_EQ(r.schedule(TaskKind::decide).first.model_id, "a");
}

TEST(Registry, LaterDefaultDemotesEarlier) {
    ModelRegistry r;
    r.register_model(ModelDescriptor{"a", ProviderKind::scripted, std::nullopt, true});
    r.register_model(ModelDescriptor{"b", ProviderKind::scripted, std::nullopt, true});
    EXPECT_EQ(r.schedule(TaskKind::plan).first.model_id, "b");
    int defaults = 0;
    for (const auto& m : r.models()) defaults += m.is_default;
    EXPECT_EQ(defaults, 1);
}

TEST(Registry, Errors) {
    ModelRegistry r;
    EXPECT_EQ(code_of([&] { r.schedule(TaskKind::respond); }), ErrorCode::NoModels);
    r.register_model(ModelDescriptor{"a", ProviderKind::scripted, std::nullopt, true});
    EXPECT_EQ(code_of([&] { r.register_model(ModelDescriptor{"a", ProviderKind::scripted, std::nullopt, false}); }),
              ErrorCode::DuplicateModelId);
    EXPECT_EQ(code_of([&] { r.register_model(ModelDescriptor{"h", ProviderKind::http, std::nullopt, false}); }),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([&] { r.register_template(PromptTemplate{"t", "a", TaskKind::decide, "no placeholder"}); }),
              ErrorCode::InvalidTemplate);
    EXPECT_EQ(code_of([&] {
                  r.register_template(PromptTemplate{"t", "a", TaskKind::decide, "{{thought}} {{thought}}"});
              }),
              ErrorCode::InvalidTemplate);
    EXPECT_EQ(code_of([&] { r.register_template(PromptTemplate{"t", "zzz", TaskKind::decide, "{{thought}}"}); }),
              ErrorCode::UnknownModel);
}

TEST(Registry, TemplateSelectionAndPassthrough) {
    ModelRegistry r;
    r.register_model(ModelDescriptor{"a", ProviderKind::scripted, std::nullopt, true});
    r.register_template(PromptTemplate{"plan-v1", "a", TaskKind::plan, "Plan carefully.\n{{thought}}\nJSON only."});
    EXPECT_EQ(r.schedule(TaskKind::plan).second.template_id, "plan-v1");
    const auto [model, tmpl] = r.schedule(TaskKind::decide);
    EXPECT_EQ(tmpl.template_id, "builtin.passthrough");
    EXPECT_EQ(render_prompt(tmpl, "THOUGHT"), "THOUGHT");
    EXPECT_EQ(render_prompt(r.schedule(TaskKind::plan).second, "X"), "Plan carefully.\nX\nJSON only.");
}

TEST(Templates, SubstitutionIsSinglePass) {
    const PromptTemplate t{"t", "a", TaskKind::decide, "<{{thought}}>"};
    EXPECT_EQ(render_prompt(t, "{{thought}}"), "<{{thought}}>");
}

TEST(Scripted, FirstMatchingRuleByOrderWins) {
    ScriptedProvider p({ScriptedRule{2, "hello", "second"}, ScriptedRule{1, "HELLO   there", "first"}}, "fallback");
    EXPECT_EQ(p.complete("Oh hello there!"), "first");
    EXPECT_EQ(p.complete("hello you"), "second");
    EXPECT_EQ(p.complete("nothing"), "fallback");
    EXPECT_EQ(p.calls(), 3u);
}

TEST(Scripted, NoRuleAndNoDefault) {
    ScriptedProvider p({ScriptedRule{1, "x", "y"}}, std::nullopt);
    EXPECT_EQ(code_of([&] { p.complete("abc"); }), ErrorCode::NoRuleAndNoDefault);
}

TEST(Scripted, RuleFileFormsAreEquivalent) {
    const auto a = parse_scripted_rules(R"([{"order":1,"pattern":"p","completion":"c"},{"default":"d"}])");
    const auto b = parse_scripted_rules(R"({"rules":[{"order":1,"pattern":"p","completion":"c"}],"default":"d"})");
    EXPECT_EQ(a.rules, b.rules);
    EXPECT_EQ(a.default_completion, b.default_completion);
    EXPECT_EQ(dump_json(to_json(a)), dump_json(to_json(b)));
    EXPECT_THROW(parse_scripted_rules("[{\"order\":1}]"), Error);
}

TEST(ModelConfig, LoadsRulesFileRelativeToConfig) {
    ModelRegistry r;
    const auto path = testkit::fixture("configs/models_qa.json");
    load_model_config(r, json::parse(testkit::read_file(path)), path.parent_path());
    const auto [model, tmpl] = r.schedule(TaskKind::decide);
    EXPECT_EQ(model.model_id, "scripted-qa");
    EXPECT_EQ(r.complete(model, "## History\n[agent_action] query_memory ..."),
              R"({"action":"respond","text":"The Eiffel Tower is 330 metres tall."})");
}

TEST(ModelConfig, InlineRulesAndTemplates) {
    ModelRegistry r;
    load_model_config(r, json::parse(R"({
        "models": [{"model_id": "m", "provider_kind": "scripted", "rules": [{"order": 1, "pattern": "ping", "completion": "pong"}],
                    "default_completion": "dflt"}],
        "templates": [{"template_id": "t1", "model_id": "m", "task_kind": "respond", "body": "Reply.\n{{thought}}"}]
    })"));
    const auto [model, tmpl] = r.schedule(TaskKind::respond);
    EXPECT_EQ(tmpl.template_id, "t1");
    EXPECT_EQ(r.complete(model, render_prompt(tmpl, "PING")), "pong");
    EXPECT_EQ(r.complete(model, "other"), "dflt");
}

TEST(ModelConfig, MissingRulesFileIsAnError) {
    ModelRegistry r;
    EXPECT_THROW(load_model_config(r, json::parse(R"({"models":[{"model_id":"m","provider_kind":"scripted",
                                                   "rules_file":"does-not-exist.json"}]})"),
                                   testkit::fixture("")),
                 Error);
}

class HttpProviderTest : public ::testing::Test {
protected:
    void SetUp() override { set_offline_mode(false); }
    void TearDown() override { set_offline_mode(false); }

    static RetryPolicy fast() { return RetryPolicy{2, std::chrono::milliseconds(1), std::chrono::milliseconds(2000)}; }

    testkit::StubServer stub;
};

TEST_F(HttpProviderTest, ReturnsTextField) {
    stub.set_completion("hello from http");
    HttpProvider p(stub.base_url() + "/complete", fast());
    EXPECT_EQ(p.complete("prompt"), "hello from http");
    EXPECT_EQ(p.attempts(), 1u);
    EXPECT_EQ(stub.calls("/complete"), 1u);
}

TEST_F(HttpProviderTest, RetriesOnServerErrorThenGivesUp) {
    HttpProvider p(stub.base_url() + "/unavailable", fast());
    EXPECT_EQ(code_of([&] { p.complete("x"); }), ErrorCode::ProviderUnreachable);
    EXPECT_EQ(p.attempts(), 3u);
    EXPECT_EQ(stub.calls("/unavailable"), 3u);
}

TEST_F(HttpProviderTest, MalformedReplyIsNotRetried) {
    HttpProvider p(stub.base_url() + "/garbage", fast());
    EXPECT_EQ(code_of([&] { p.complete("x"); }), ErrorCode::ProviderUnreachable);
    EXPECT_EQ(p.attempts(), 1u);
}

TEST_F(HttpProviderTest, OfflineRefusesNonLoopbackWithoutTrying) {
    set_offline_mode(true);
    HttpProvider remote("http://203.0.113.7:9/complete", fast());
    EXPECT_EQ(code_of([&] { remote.complete("x"); }), ErrorCode::ProviderUnreachable);
    EXPECT_EQ(remote.attempts(), 0u);

    stub.set_completion("still local");
    HttpProvider local(stub.base_url() + "/complete", fast());
    EXPECT_EQ(local.complete("x"), "still local");
}

TEST_F(HttpProviderTest, RegisteredAsModel) {
    stub.set_completion("via registry");
    ModelRegistry r;
    r.register_model(ModelDescriptor{"h", ProviderKind::http, stub.base_url() + "/complete", true});
    EXPECT_EQ(r.complete(*r.lookup("h"), "x"), "via registry");
    EXPECT_EQ(code_of([&] { r.complete(ModelDescriptor{"nope", ProviderKind::scripted, std::nullopt, false}, "x"); }),
              ErrorCode::UnknownModel);
}
