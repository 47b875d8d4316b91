#include "mindos/net.hpp"
#include "mindos/orchestrator.hpp"
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

AgentConfig basic_config(int step_limit = 20) {
    AgentConfig c;
    c.agent_id = "agent-1";
    c.name = "Helper";
    c.step_limit = step_limit;
    return c;
}

struct Rig {
    testkit::ScriptedModel model;
    std::shared_ptr<Agent> agent;
    std::shared_ptr<Session> session;

    Rig(testkit::ScriptedModel m, AgentConfig cfg, SessionMode mode = SessionMode::goal_directed,
        std::shared_ptr<WorkflowStore> workflows = nullptr)
        : model(std::move(m)) {
        auto memory = std::make_shared<MemoryIndex>(std::nullopt, cfg.memory_policy);
        agent = std::make_shared<Agent>(cfg, memory, std::make_shared<ToolRegistry>(memory), std::move(workflows));
        session = std::make_shared<Session>("ses-test", agent, mode, model.registry,
                                            [] { return instant_from_millis(1'700'000'000'000); });
    }

    std::size_t calls() const { return model.provider->calls(); }
};

std::string text_of(const LayoutPlan& p) { return p.elements.at(0).text; }

std::size_t total_provider_calls(const std::vector<CycleTrace>& trace) {
    std::size_t n = 0;
    for (const auto& t : trace) n += t.provider_calls();
    return n;
}

} // namespace

TEST(Session, QuestionAnsweredFromMemory) {
    Rig rig(testkit::scripted_model_from("qa.json"), basic_config());
    rig.agent->memory().ingest_document(StoreKind::domain_knowledge, "eiffel", "The Eiffel Tower is 330 metres tall.");
    const auto out = rig.session->submit_event(Utterance{"How tall is the Eiffel Tower?"});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(text_of(out[0]), "The Eiffel Tower is 330 metres tall.");
    EXPECT_EQ(rig.session->status(), SessionStatus::idle);
    const auto trace = rig.session->trace();
    ASSERT_EQ(trace.size(), 2u);
    EXPECT_EQ(trace[0].perception, std::optional<std::string>("How tall is the Eiffel Tower?"));
    EXPECT_FALSE(trace[1].perception);
    EXPECT_TRUE(std::holds_alternative<QueryMemory>(*trace[0].directive));
    EXPECT_NE(trace[0].effects.at(0).find("[1] The Eiffel Tower is 330 metres tall."), std::string::npos);
    EXPECT_EQ(rig.calls(), 2u);
    EXPECT_EQ(total_provider_calls(trace), 2u);
    EXPECT_TRUE(rig.session->goal_stack().empty());
}

TEST(Session, ThoughtCarriesGoalAndRetrievedKnowledge) {
    Rig rig(testkit::scripted_model_from("qa.json"), basic_config());
    rig.agent->memory().ingest_document(StoreKind::domain_knowledge, "eiffel", "The Eiffel Tower is 330 metres tall.");
    rig.session->submit_event(Utterance{"How tall is the Eiffel Tower?"});
    const std::string thought = rig.session->trace()[0].thought_text;
    EXPECT_NE(thought.find("## Instructions\nCurrent goal: How tall is the Eiffel Tower?"), std::string::npos);
    EXPECT_NE(thought.find("## Related Memory"), std::string::npos);
    EXPECT_NE(thought.find("330 metres"), std::string::npos);
    EXPECT_NE(thought.find("## Perception\nHow tall is the Eiffel Tower?"), std::string::npos);
}

TEST(Session, PlanDecomposesIntoSubgoals) {
    Rig rig(testkit::scripted_model_from("workflow.json"), basic_config());
    const auto out = rig.session->submit_event(Utterance{"Write an essay about tides"});
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(text_of(out[0]), "Outline done.");
    EXPECT_EQ(text_of(out[1]), "Body written.");
    EXPECT_EQ(text_of(out[2]), "Essay complete.");
    const auto trace = rig.session->trace();
    ASSERT_EQ(trace.size(), 4u);
    EXPECT_EQ(trace[0].verdict, MonitorVerdict(SpawnSubgoals{{"Outline the essay", "Write the essay body"}}));
    ASSERT_EQ(trace[0].goal_stack.size(), 3u);
    EXPECT_EQ(trace[0].goal_stack.back().text, "Outline the essay");
    EXPECT_EQ(trace[0].goal_stack.back().parent, std::optional<std::string>(trace[0].goal_stack.front().goal_id));
    EXPECT_EQ(trace[3].verdict, MonitorVerdict(Halt{HaltReason::finished}));
    EXPECT_EQ(rig.session->status(), SessionStatus::halted);
    EXPECT_EQ(rig.session->step_count(), 4);
    EXPECT_EQ(code_of([&] { rig.session->submit_event(Utterance{"more"}); }), ErrorCode::SessionHalted);
}

TEST(Session, SubgoalsUseDecideTaskKind) {
    auto m = testkit::scripted_model_from("workflow.json");
    m.registry->register_template(PromptTemplate{"decide", "scripted", TaskKind::decide, "DECIDE\n{{thought}}"});
    Rig rig(std::move(m), basic_config());
    rig.session->submit_event(Utterance{"Write an essay about tides"});
    const auto trace = rig.session->trace();
    EXPECT_EQ(trace[0].attempts[0].template_id, "builtin.passthrough");
    EXPECT_EQ(trace[1].attempts[0].template_id, "decide");
    EXPECT_EQ(trace[1].attempts[0].prompt.rfind("DECIDE\n", 0), 0u);
}

TEST(Session, StepLimitHalts) {
    Rig rig(testkit::scripted_model_from("never_finish.json"), basic_config(5));
    EXPECT_TRUE(rig.session->submit_event(Utterance{"loop forever"}).empty());
    EXPECT_EQ(rig.session->status(), SessionStatus::halted);
    EXPECT_EQ(rig.session->step_count(), 5);
    EXPECT_EQ(rig.calls(), 5u);
    EXPECT_EQ(rig.session->trace().back().verdict, MonitorVerdict(Halt{HaltReason::step_limit}));
}

TEST(Session, AlwaysPlanningStillTerminates) {
    auto m = testkit::scripted_model(ScriptedScript{{}, R"({"action":"plan","subgoals":["again"]})"});
    Rig rig(std::move(m), basic_config(3));
    rig.session->submit_event(Utterance{"recurse"});
    EXPECT_EQ(rig.session->status(), SessionStatus::halted);
    EXPECT_EQ(rig.calls(), 3u);
    EXPECT_EQ(rig.session->trace().back().verdict, MonitorVerdict(Halt{HaltReason::step_limit}));
}

TEST(Session, ReactiveDriveBypassesTheModel) {
    const auto cfg = parse_agent_config(testkit::read_file(testkit::fixture("configs/teacher_agent.json")));
    Rig rig(testkit::scripted_model_from("qa.json"), cfg);
    const auto out = rig.session->submit_event(Utterance{"Please shut down."});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(text_of(out[0]), "Shutting down as requested.");
    EXPECT_EQ(rig.calls(), 0u);
    const auto trace = rig.session->trace();
    ASSERT_EQ(trace.size(), 1u);
    EXPECT_EQ(trace[0].verdict, MonitorVerdict(Bypass{"Shutting down as requested."}));
    EXPECT_TRUE(trace[0].thought_text.empty());
    EXPECT_TRUE(rig.session->goal_stack().empty());
    EXPECT_EQ(rig.session->status(), SessionStatus::idle);
}

TEST(Session, TeacherDriveLeadsInstructions) {
    const auto cfg = parse_agent_config(testkit::read_file(testkit::fixture("configs/teacher_agent.json")));
    Rig rig(testkit::scripted_model(ScriptedScript{{}, R"({"action":"respond","text":"Tides are caused by the moon."})"}),
            cfg);
    rig.session->submit_event(Utterance{"Why are there tides?"});
    const std::string thought = rig.session->trace()[0].thought_text;
    EXPECT_EQ(thought.rfind("## Instructions\nAs a teacher, your objective is to excel in your teaching duties.\n"
                            "Current goal: Why are there tides?\n",
                            0),
              0u);
    EXPECT_NE(thought.find("## Agent Profile\nPatient high-school physics teacher."), std::string::npos) << thought;
}

TEST(Session, ButtonsRoundTripThroughClicks) {
    Rig rig(testkit::scripted_model_from("buttons.json"), basic_config());
    const auto first = rig.session->submit_event(Utterance{"Find me a table for two"});
    ASSERT_EQ(first.size(), 1u);
    ASSERT_EQ(first[0].elements.size(), 3u);
    EXPECT_EQ(first[0].elements[1].element_id, "y");
    const auto click = resolve_action(first[0], "y");
    const auto second = rig.session->submit_event(click);
    ASSERT_EQ(second.size(), 1u);
    EXPECT_EQ(text_of(second[0]), "Booked.");
    EXPECT_EQ(rig.session->outputs().size(), 2u);
    const auto stm = rig.session->short_term();
    bool saw_click = false;
    for (const auto& e : stm.events())
        saw_click |= e.kind == EventKind::user_action && e.payload == "User clicked 'Yes'.";
    EXPECT_TRUE(saw_click);
}

TEST(Session, MalformedRepliesFallBack) {
    Rig rig(testkit::scripted_model(ScriptedScript{{}, "I am not JSON"}), basic_config());
    const auto out = rig.session->submit_event(Utterance{"hello"});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(text_of(out[0]), kFallbackText);
    EXPECT_EQ(rig.calls(), 3u);
    EXPECT_EQ(rig.session->trace()[0].provider_calls(), 3u);
}

TEST(Session, InvokesToolsAndChains) {
    set_offline_mode(false);
    testkit::StubServer stub;
    auto m = testkit::scripted_model(ScriptedScript{
        {ScriptedRule{1, "[agent_action] chain", R"({"action":"respond","text":"done"})"},
         ScriptedRule{2, "[agent_action] invoke_tool",
                      R"({"action":"chain","steps":[{"tool":"searchDocs","args":{"q":"tides"},"bind":"s"},)"
                      R"({"tool":"summarize","args":{"text":"${s.text}"}}]})"}},
        R"({"action":"invoke_tool","tool":"echo","args":{"q":"ping"}})"});
    Rig rig(std::move(m), basic_config());
    ImportOptions opts;
    opts.server_variables["port"] = std::to_string(stub.port());
    for (auto& s : import_openapi(testkit::read_file(testkit::fixture("openapi_stub.yaml")), opts))
        rig.agent->tools().register_tool(std::move(s));

    const auto out = rig.session->submit_event(Utterance{"research tides"});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(stub.calls("/echo"), 1u);
    EXPECT_EQ(stub.calls("/search"), 1u);
    EXPECT_EQ(stub.calls("/summarize"), 1u);
    const auto trace = rig.session->trace();
    ASSERT_EQ(trace.size(), 3u);
    EXPECT_EQ(trace[0].effects.at(0), R"(invoke_tool echo {"q":"ping"} -> ok {"q":"ping"})");
    EXPECT_EQ(trace[1].effects.at(0), R"(chain 2 steps -> ok {"summary":"results for tides","text":"results for tides"})");
}

TEST(Session, ToolErrorsAreRecordedNotThrown) {
    auto m = testkit::scripted_model(ScriptedScript{
        {ScriptedRule{1, "unknowntool", R"({"action":"respond","text":"that failed"})"}},
        R"({"action":"invoke_tool","tool":"missing","args":{}})"});
    Rig rig(std::move(m), basic_config());
    const auto out = rig.session->submit_event(Utterance{"try it"});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(rig.session->trace()[0].effects.at(0).rfind("invoke_tool missing {} -> error UnknownTool", 0), 0u);
}

TEST(SelfTaught, AcceptStoresWorkflowAndRecallShortensNextRun) {
    auto workflows = std::make_shared<WorkflowStore>();
    Rig first(testkit::scripted_model_from("learn.json"), basic_config(), SessionMode::self_taught, workflows);
    const auto out = first.session->submit_event(Utterance{"Write a poem about the sea"});
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(first.calls(), 4u);
    EXPECT_EQ(first.session->status(), SessionStatus::running);

    const auto fb = first.session->apply_feedback(Feedback{FeedbackSource::human, FeedbackVerdict::accept, "nice"});
    ASSERT_TRUE(fb.workflow);
    EXPECT_EQ(fb.workflow->goal_text, "Write a poem about the sea");
    ASSERT_EQ(fb.workflow->steps.size(), 2u); // plan, finish
    EXPECT_TRUE(std::holds_alternative<Plan>(fb.workflow->steps[0]));
    EXPECT_TRUE(std::holds_alternative<Finish>(fb.workflow->steps[1]));
    EXPECT_EQ(first.session->status(), SessionStatus::halted);
    EXPECT_EQ(workflows->all().size(), 1u);

    Rig second(testkit::scripted_model_from("learn.json"), basic_config(), SessionMode::self_taught, workflows);
    const auto out2 = second.session->submit_event(Utterance{"Write a poem about the sea"});
    ASSERT_EQ(out2.size(), 1u);
    EXPECT_EQ(text_of(out2[0]), "Poem: waves return to the shore.");
    EXPECT_EQ(second.calls(), 1u);
    EXPECT_NE(second.session->trace()[0].thought_text.find("Learned workflow for 'Write a poem about the sea' (2 steps)"),
              std::string::npos);
}

TEST(SelfTaught, RejectRunsAnotherAttempt) {
    Rig rig(testkit::scripted_model_from("learn.json"), basic_config(), SessionMode::self_taught);
    rig.session->submit_event(Utterance{"Write a poem about the sea"});
    const auto before = rig.calls();
    const auto fb = rig.session->apply_feedback(Feedback{FeedbackSource::tool, FeedbackVerdict::reject, "too short"});
    EXPECT_FALSE(fb.workflow);
    EXPECT_EQ(fb.outputs.size(), 1u);
    EXPECT_GT(rig.calls(), before);
    EXPECT_EQ(rig.session->status(), SessionStatus::running);
    EXPECT_TRUE(rig.agent->workflows().all().empty());
    bool saw = false;
    const auto stm = rig.session->short_term();
    for (const auto& e : stm.events())
        saw |= e.kind == EventKind::agent_action && e.payload == "feedback from tool: reject (too short)";
    EXPECT_TRUE(saw) << stm.snapshot();
    rig.session->apply_feedback(Feedback{FeedbackSource::human, FeedbackVerdict::accept, ""});
    EXPECT_EQ(rig.agent->workflows().all().size(), 1u);
}

TEST(SelfTaught, FeedbackErrors) {
    Rig goal(testkit::scripted_model_from("learn.json"), basic_config());
    EXPECT_EQ(code_of([&] { goal.session->apply_feedback(Feedback{}); }), ErrorCode::WrongMode);
    Rig fresh(testkit::scripted_model_from("learn.json"), basic_config(), SessionMode::self_taught);
    EXPECT_EQ(code_of([&] { fresh.session->apply_feedback(Feedback{}); }), ErrorCode::NoCurrentGoal);
}

TEST(Session, ConversationArchivedPerPolicy) {
    auto cfg = basic_config();
    cfg.memory_policy = MemoryPolicy{false, true};
    Rig rig(testkit::scripted_model_from("workflow.json"), cfg);
    rig.session->submit_event(Utterance{"Write an essay about tides"});
    const auto log = rig.agent->memory().conversation("ses-test");
    ASSERT_EQ(log.size(), 4u);
    EXPECT_EQ(log[0], (Message{"user", "Write an essay about tides"}));
    EXPECT_EQ(log[3], (Message{"agent", "Essay complete."}));
    EXPECT_TRUE(rig.agent->memory().has_document(StoreKind::user_structured, "conversation:ses-test"));

    Rig off(testkit::scripted_model_from("workflow.json"), basic_config());
    off.session->submit_event(Utterance{"Write an essay about tides"});
    EXPECT_TRUE(off.agent->memory().conversation("ses-test").empty());
}

TEST(Session, TraceSinkSeesEveryCycle) {
    Rig rig(testkit::scripted_model_from("workflow.json"), basic_config());
    std::vector<std::size_t> seen;
    rig.session->set_trace_sink([&](const CycleTrace& t) { seen.push_back(t.cycle_index); });
    rig.session->submit_event(Utterance{"Write an essay about tides"});
    EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Session, ProviderFailureLeavesSessionUsable) {
    auto m = testkit::scripted_model(ScriptedScript{{ScriptedRule{1, "works", R"({"action":"respond","text":"ok"})"}},
                                                    std::nullopt});
    Rig rig(std::move(m), basic_config());
    EXPECT_EQ(code_of([&] { rig.session->submit_event(Utterance{"boom"}); }), ErrorCode::NoRuleAndNoDefault);
    EXPECT_EQ(rig.session->status(), SessionStatus::idle);
    EXPECT_EQ(rig.session->submit_event(Utterance{"this works"}).size(), 1u);
}

TEST(CycleTraceJson, RoundTrip) {
    Rig rig(testkit::scripted_model_from("workflow.json"), basic_config());
    rig.session->submit_event(Utterance{"Write an essay about tides"});
    for (const auto& t : rig.session->trace()) {
        const json j = to_json(t);
        EXPECT_EQ(j["provider_calls"], t.provider_calls());
        const CycleTrace back = cycle_trace_from_json(json::parse(dump_json(j)));
        EXPECT_EQ(dump_json(to_json(back)), dump_json(j));
    }
    EXPECT_THROW(cycle_trace_from_json(json{{"cycle_index", "x"}}), Error);
}

TEST(Workflows, RecallThresholdAndPersistence) {
    testkit::TempDir dir;
    const auto file = dir.path() / "workflows.jsonl";
    {
        WorkflowStore store(file);
        store.add(WorkflowTrace{"wf-1", "Write a poem about the sea", embed_text("Write a poem about the sea"),
                                {Directive{Finish{"x"}}}, true, instant_from_millis(5)});
        store.add(WorkflowTrace{"wf-2", "Bake bread", embed_text("Bake bread"), {}, false, instant_from_millis(6)});
    }
    WorkflowStore store(file);
    ASSERT_EQ(store.all().size(), 2u);
    EXPECT_EQ(store.all()[0].steps, (std::vector<Directive>{Finish{"x"}}));
    EXPECT_FALSE(store.all()[1].success);

    const auto hits = store.recall("write a POEM about the sea", 4);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
    EXPECT_TRUE(store.recall("quantum chromodynamics", 4).empty());
    // failed traces are never recalled
    ASSERT_EQ(store.recall("bake bread", 4, 0.0).size(), 1u);
    EXPECT_EQ(store.recall("bake bread", 4, 0.0)[0].trace.trace_id, "wf-1");

    for (const auto& w : store.all()) EXPECT_EQ(workflow_from_json(json::parse(dump_json(to_json(w)))), w);
    EXPECT_EQ(to_json(store.all()[1])["outcome"], "failure");
}

TEST(Runtime, UnknownIds) {
    auto m = testkit::scripted_model_from("qa.json");
    Runtime rt(m.registry);
    EXPECT_EQ(code_of([&] { rt.agent("nope"); }), ErrorCode::UnknownAgent);
    EXPECT_EQ(code_of([&] { rt.start_session("nope", SessionMode::goal_directed); }), ErrorCode::UnknownAgent);
    EXPECT_EQ(code_of([&] { rt.session("nope"); }), ErrorCode::UnknownSession);
    rt.add_agent(std::make_shared<Agent>(basic_config(), nullptr, nullptr, nullptr));
    const auto s = rt.start_session("agent-1", SessionMode::self_taught);
    EXPECT_EQ(rt.session(s->id()), s);
    EXPECT_EQ(rt.agent_ids(), (std::vector<std::string>{"agent-1"}));
}
