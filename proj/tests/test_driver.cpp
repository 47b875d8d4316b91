#include "mindos/driver.hpp"
#include "support/helpers.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

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

Drive long_term(const std::string& id, const std::string& text, int priority) {
    return Drive{id, DriveKind::long_term, text, priority, DriveStatus::active, "", MatchMode::substring, ""};
}

} // namespace

TEST(GoalStack, LongTermDrivesSortedByPriorityStable) {
    GoalStack s({long_term("a", "A", 1), long_term("b", "B", 5),
                 Drive{"r", DriveKind::reactive, "", 9, DriveStatus::active, "x", MatchMode::exact, "y"},
                 long_term("c", "C", 5), Drive{"s", DriveKind::short_term, "S", 9, DriveStatus::active, "", {}, ""}});
    ASSERT_EQ(s.long_term().size(), 3u);
    EXPECT_EQ(s.long_term()[0].drive_id, "b");
    EXPECT_EQ(s.long_term()[1].drive_id, "c");
    EXPECT_EQ(s.long_term()[2].drive_id, "a");
    EXPECT_EQ(compose_instructions(s), "B\nC\nA");
}

TEST(GoalStack, ComposeWithCurrentGoalAndDefault) {
    GoalStack empty;
    EXPECT_EQ(compose_instructions(empty), kDefaultInstruction);
    empty.push_root("Plan a trip");
    EXPECT_EQ(compose_instructions(empty), "Current goal: Plan a trip");

    GoalStack teacher({long_term("t", "As a teacher, your objective is to excel in your teaching duties.", 5)});
    teacher.push_root("Explain tides");
    EXPECT_EQ(compose_instructions(teacher),
              "As a teacher, your objective is to excel in your teaching duties.\nCurrent goal: Explain tides");
}

TEST(GoalStack, InactiveLongTermDrivesAreNotComposed) {
    auto d = long_term("a", "A", 1);
    d.status = DriveStatus::halted;
    GoalStack s({d, long_term("b", "B", 0)});
    EXPECT_EQ(compose_instructions(s), "B");
}

TEST(GoalStack, SubgoalsOrderAndParents) {
    GoalStack s;
    const auto root = s.push_root("Write essay");
    EXPECT_EQ(root.goal_id, "g1");
    s.push_subgoals({"Outline", "Draft"}, "g1");
    EXPECT_EQ(s.current()->text, "Outline");
    EXPECT_EQ(s.current()->parent, std::optional<std::string>("g1"));
    EXPECT_EQ(s.depth(), 3u);
    EXPECT_EQ(s.complete_current_goal().text, "Outline");
    EXPECT_EQ(s.current()->text, "Draft");
    s.complete_current_goal();
    EXPECT_EQ(s.current()->goal_id, "g1");
    s.complete_current_goal();
    EXPECT_TRUE(s.empty());
    EXPECT_EQ(s.satisfied().size(), 3u);
    for (const auto& g : s.satisfied()) EXPECT_EQ(g.status, DriveStatus::satisfied);
    EXPECT_EQ(code_of([&] { s.complete_current_goal(); }), ErrorCode::EmptyStack);
}

TEST(GoalStack, ParentMustBeCurrent) {
    GoalStack s;
    EXPECT_EQ(code_of([&] { s.push_subgoals({"x"}, "g9"); }), ErrorCode::NoCurrentGoal);
    s.push_subgoals({"x"}, std::nullopt);
    EXPECT_EQ(code_of([&] { s.push_subgoals({"y"}, std::nullopt); }), ErrorCode::NoCurrentGoal);
    EXPECT_EQ(code_of([&] { s.push_subgoals({"y"}, "g0"); }), ErrorCode::NoCurrentGoal);
    EXPECT_EQ(code_of([&] { s.push_root("again"); }), ErrorCode::NoCurrentGoal);
    s.push_subgoals({}, s.current()->goal_id);
    EXPECT_EQ(s.depth(), 1u);
}

TEST(GoalStack, ReplayMatchesReferenceModelProperty) {
    std::mt19937_64 rng(41);
    for (int iter = 0; iter < 300; ++iter) {
        GoalStack s;
        std::vector<std::string> model; // texts, bottom first
        std::set<std::string> ids;
        for (int op = 0; op < 40; ++op) {
            const int choice = static_cast<int>(rng() % 3);
            if (model.empty() && choice != 2) {
                s.push_root("root" + std::to_string(op));
                model.push_back("root" + std::to_string(op));
            } else if (choice == 0 && !model.empty()) {
                std::vector<std::string> goals;
                for (int i = 0, n = static_cast<int>(rng() % 4); i < n; ++i)
                    goals.push_back("g" + std::to_string(op) + "." + std::to_string(i));
                s.push_subgoals(goals, s.current()->goal_id);
                for (auto it = goals.rbegin(); it != goals.rend(); ++it) model.push_back(*it);
            } else if (!model.empty()) {
                EXPECT_EQ(s.complete_current_goal().text, model.back());
                model.pop_back();
            } else {
                EXPECT_THROW(s.complete_current_goal(), Error);
            }
            ASSERT_EQ(s.depth(), model.size());
            for (std::size_t i = 0; i < model.size(); ++i) EXPECT_EQ(s.short_term()[i].text, model[i]);
            // every parent is present below its child
            for (std::size_t i = 0; i < s.short_term().size(); ++i) {
                const auto& g = s.short_term()[i];
                ids.insert(g.goal_id);
                if (!g.parent) continue;
                bool found = false;
                for (std::size_t j = 0; j < i; ++j) found |= s.short_term()[j].goal_id == *g.parent;
                EXPECT_TRUE(found) << g.goal_id;
            }
        }
    }
}

TEST(Triggers, MatchingAndOrder) {
    TriggerTable t;
    t.register_trigger(Trigger{"off", "shut down", MatchMode::substring, "first", false});
    t.register_trigger(Trigger{"stop", "SHUT  DOWN", MatchMode::substring, "Shutting down.", true});
    t.register_trigger(Trigger{"hi", "hello", MatchMode::exact, "Hi!", true});
    EXPECT_EQ(check_pre(t, "Please shut down now"), std::optional<Bypass>(Bypass{"Shutting down."}));
    EXPECT_EQ(check_pre(t, "  HELLO "), std::optional<Bypass>(Bypass{"Hi!"}));
    EXPECT_FALSE(check_pre(t, "hello there"));
    EXPECT_FALSE(check_pre(t, "What is the weather?"));
    EXPECT_EQ(code_of([&] { t.register_trigger(Trigger{"hi", "x", MatchMode::exact, "y", true}); }),
              ErrorCode::DuplicateTriggerId);
}

TEST(Monitor, VerdictOrder) {
    EXPECT_EQ(check_post(Directive{Finish{"x"}}, 50, 20), MonitorVerdict(Halt{HaltReason::finished}));
    EXPECT_EQ(check_post(Directive{Plan{{"a"}}}, 50, 20), MonitorVerdict(SpawnSubgoals{{"a"}}));
    EXPECT_EQ(check_post(Directive{Respond{"x", {}}}, 20, 20), MonitorVerdict(Halt{HaltReason::step_limit}));
    EXPECT_EQ(check_post(Directive{Respond{"x", {}}}, 19, 20), MonitorVerdict(Continue{}));
}

TEST(Monitor, VerdictJsonRoundTrip) {
    for (const MonitorVerdict& v : {MonitorVerdict(Continue{}), MonitorVerdict(Bypass{"b"}),
                                    MonitorVerdict(SpawnSubgoals{{"x", "y"}}), MonitorVerdict(Halt{HaltReason::step_limit}),
                                    MonitorVerdict(Halt{HaltReason::finished})})
        EXPECT_EQ(verdict_from_json(to_json(v)), v);
    EXPECT_EQ(dump_json(to_json(MonitorVerdict(Halt{HaltReason::step_limit}))),
              R"({"reason":"step_limit","verdict":"halt"})");
    EXPECT_THROW(verdict_from_json(json{{"verdict", "dance"}}), Error);
}

TEST(Install, ReactiveDrivesThenConfigTriggers) {
    const auto cfg = parse_agent_config(testkit::read_file(testkit::fixture("configs/teacher_agent.json")));
    auto withTrig = cfg;
    withTrig.triggers.push_back(Trigger{"hello", "hello", MatchMode::exact, "Hi.", true});
    const auto installed = install_drives(withTrig);
    ASSERT_EQ(installed.triggers.size(), 2u);
    EXPECT_EQ(installed.triggers.triggers()[0].trigger_id, "stop");
    EXPECT_EQ(installed.triggers.triggers()[1].trigger_id, "hello");
    EXPECT_EQ(check_pre(installed.triggers, "Please shut down."),
              std::optional<Bypass>(Bypass{"Shutting down as requested."}));
    EXPECT_EQ(installed.goals.long_term().size(), 1u);
    EXPECT_EQ(compose_instructions(installed.goals),
              "As a teacher, your objective is to excel in your teaching duties.");
}
