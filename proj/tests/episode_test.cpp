#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "shopbench/episode.hpp"

namespace shopbench {
namespace {

using testing::fixture_task;

class FixedUser : public UserPolicy {
 public:
  explicit FixedUser(std::string opening, std::vector<std::string> replies = {})
      : opening_(std::move(opening)), replies_(std::move(replies)) {}
  std::string opening() override { return opening_; }
  std::string reply(const std::string& msg) override {
    heard.push_back(msg);
    if (next_ < replies_.size()) return replies_[next_++];
    return "OK.";
  }
  std::vector<std::string> heard;

 private:
  std::string opening_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

class ThrowingUser : public UserPolicy {
 public:
  std::string opening() override { return "Hello"; }
  std::string reply(const std::string&) override { throw std::runtime_error("simulator crashed"); }
};

std::string call(const std::string& tool, const json& args, const std::string& thought = "step") {
  return tag("Thought", thought) + tag("Action_input", json{{"tool", tool}, {"arguments", args}}.dump());
}

std::string final_answer(const std::string& text) { return tag("Thought", "done") + tag("Final_Answer", text); }

// --- protocol ------------------------------------------------------------------

TEST(Protocol, ParsesToolCall) {
  const auto turn = parse_agent_output(call("get_order_detail", {{"order_id", "O1"}}, "look it up"));
  ASSERT_TRUE(turn.is_call());
  EXPECT_EQ(turn.thought, "look it up");
  EXPECT_EQ(turn.call().tool, "get_order_detail");
  EXPECT_EQ(turn.call().arguments, (json{{"order_id", "O1"}}));
}

TEST(Protocol, ParsesFinalAnswerWithSurroundingWhitespace) {
  const auto turn = parse_agent_output("\n  <Thought> t </Thought>\n<Final_Answer> All set. </Final_Answer>\n");
  ASSERT_FALSE(turn.is_call());
  EXPECT_EQ(turn.thought, "t");
  EXPECT_EQ(turn.final_answer().text, "All set.");
}

TEST(Protocol, RenderRoundTrips) {
  AgentTurn a{"x", ToolCall{"remark", {{"order_id", "O1"}, {"content", "hi"}}}};
  EXPECT_EQ(parse_agent_output(render_agent_turn(a)), a);
  AgentTurn b{"y", FinalAnswer{"bye"}};
  EXPECT_EQ(parse_agent_output(render_agent_turn(b)), b);
}

TEST(Protocol, RejectsMalformedOutputs) {
  const std::vector<std::string> bad = {
      "",
      "   ",
      "I will check the order.",
      "<Thought>a</Thought>",
      "<Action_input>{\"tool\":\"end_conversation\"}</Action_input><Thought>a</Thought>",
      "<Thought>a</Thought><Action_input>{\"tool\":\"end_conversation\"}</Action_input><Final_Answer>x</Final_Answer>",
      "<Thought>a<Action_input>{\"tool\":\"end_conversation\"}</Action_input>",
      "<Thought>a <Thought>b</Thought></Thought><Final_Answer>x</Final_Answer>",
      "<Thought>a</Thought><Action_input>{\"tool\":</Action_input>",
      "<Thought>a</Thought><Action_input>[1,2]</Action_input>",
      "<Thought>a</Thought><Action_input>{\"tool\":\"x\",\"arguments\":{},\"extra\":1}</Action_input>",
      "<Thought>a</Thought><Action_input>{\"tool\":\"end_conversation\"}</Action_input> trailing",
      "<Thought>a</Thought><Final_Answer>x",
  };
  for (const auto& s : bad) EXPECT_THROW(parse_agent_output(s), ProtocolError) << s;
}

// --- episode -------------------------------------------------------------------

TEST(Episode, OpeningIsTheQuestionAndAttachesMedia) {
  FixedUser user("When will my order O2 arrive? [Image 1]");
  Episode ep(fixture_task(), user);
  EXPECT_EQ(ep.question(), "When will my order O2 arrive? [Image 1]");
  ASSERT_EQ(ep.transcript().size(), 1u);
  EXPECT_EQ(ep.transcript()[0].assets, std::vector<std::string>{"A1"});
  ASSERT_EQ(ep.files().size(), 1u);
  EXPECT_EQ(ep.files()[0].asset_id, "A1");
  EXPECT_EQ(ep.log().front()["role"], "question");
  EXPECT_EQ(ep.log().front()["task_id"], "T-fixture");
}

TEST(Episode, TextOnlyModeKeepsMarkersButAttachesNothing) {
  FixedUser user("Look: [Image 1]");
  EpisodeOptions opts;
  opts.multimodal = false;
  Episode ep(fixture_task(), user, opts);
  EXPECT_TRUE(ep.files().empty());
  EXPECT_EQ(ep.transcript()[0].assets, std::vector<std::string>{"A1"});
}

TEST(Episode, ToolCallProducesObservation) {
  FixedUser user("Hi");
  Episode ep(fixture_task(), user);
  const auto r = ep.submit(call("get_order_detail", {{"order_id", "O2"}}));
  EXPECT_EQ(r.kind, StepResult::Kind::Observation);
  EXPECT_NE(r.text.find("O2"), std::string::npos);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(ep.tool_call_count(), 1);
  ASSERT_EQ(ep.trajectory().size(), 1u);
  EXPECT_EQ(ep.trajectory()[0].kind, StepKind::ToolCall);
}

TEST(Episode, TalkToUserRoutesThroughTheUserPolicy) {
  FixedUser user("Hi", {"Here you go [Video 1]"});
  Episode ep(fixture_task(), user);
  const auto r = ep.submit(call("talk_to_user", {{"content", "Could you show me?"}}));
  EXPECT_EQ(r.kind, StepResult::Kind::UserUtterance);
  EXPECT_EQ(r.text, "Here you go [Video 1]");
  EXPECT_EQ(user.heard, std::vector<std::string>{"Could you show me?"});
  ASSERT_EQ(ep.transcript().size(), 3u);
  EXPECT_EQ(ep.transcript()[1].speaker, TranscriptMessage::Speaker::Assistant);
  EXPECT_EQ(ep.transcript()[2].assets, std::vector<std::string>{"A2"});
  ASSERT_EQ(r.new_files.size(), 1u);
  EXPECT_EQ(r.new_files[0].asset_id, "A2");
  EXPECT_TRUE(ep.trajectory().back().user_reply);
  EXPECT_EQ(ep.log().back()["role"], "user");
}

TEST(Episode, FinalAnswerIsDeliveredButNotTerminal) {
  FixedUser user("Hi");
  Episode ep(fixture_task(), user);
  const auto r = ep.submit(final_answer("It arrives at 09:00 on June 12."));
  EXPECT_EQ(r.kind, StepResult::Kind::FinalAnswer);
  EXPECT_FALSE(ep.done());
  EXPECT_EQ(ep.transcript().back().text, "It arrives at 09:00 on June 12.");
  EXPECT_EQ(ep.transcript().back().speaker, TranscriptMessage::Speaker::Assistant);
}

TEST(Episode, TerminalTools) {
  {
    FixedUser user("Hi");
    Episode ep(fixture_task(), user);
    const auto r = ep.submit(call("end_conversation", json::object()));
    EXPECT_TRUE(r.done);
    EXPECT_EQ(ep.termination(), Termination::Completed);
    EXPECT_TRUE(ep.log().back().contains("final_state_digest"));
    EXPECT_THROW(ep.submit(call("end_conversation", json::object())), std::logic_error);
  }
  {
    FixedUser user("Hi");
    Episode ep(fixture_task(), user);
    ep.submit(call("switch_to_human", {{"reason", "needs a person"}}));
    EXPECT_EQ(ep.termination(), Termination::Escalated);
  }
}

TEST(Episode, WritesChangeStateAndErrorsDoNot) {
  FixedUser user("Hi");
  Episode ep(fixture_task(), user);
  const auto v0 = ep.state_version();
  auto r = ep.submit(call("modify_order_state", {{"order_id", "O9"}, {"state", "Cancelled"}}));
  EXPECT_EQ(r.text.rfind("ERROR", 0), 0u);
  EXPECT_EQ(ep.state_version(), v0);
  r = ep.submit(call("remark", {{"order_id", "O1"}, {"content", "Ship with EcoPost"}}));
  EXPECT_GT(ep.state_version(), v0);
  ep.submit(call("end_conversation", json::object()));
  const auto out = ep.outcome();
  EXPECT_EQ(out.final_snapshot.data().orders.at("O1").remarks.size(), 1u);
}

TEST(Episode, CircuitBreakerOnRepeatedIdenticalErrors) {
  for (int limit : {1, 2, 3, 5}) {
    FixedUser user("Hi");
    EpisodeOptions opts;
    opts.limits.max_repeated_errors = limit;
    Episode ep(fixture_task(), user, opts);
    int turns = 0;
    while (!ep.done() && turns < 100) {
      ep.submit("not a tagged turn");
      ++turns;
    }
    EXPECT_EQ(ep.termination(), Termination::ProtocolFailure);
    EXPECT_LE(turns, limit + 1);
  }
}

TEST(Episode, DifferentErrorsResetTheStreak) {
  FixedUser user("Hi");
  EpisodeOptions opts;
  opts.limits.max_repeated_errors = 2;
  Episode ep(fixture_task(), user, opts);
  ep.submit("garbage one");
  ep.submit(call("get_order_detail", {{"order_id", "O1"}}));
  ep.submit("garbage one");
  EXPECT_FALSE(ep.done());
  ep.submit("garbage one");
  EXPECT_TRUE(ep.done());
}

TEST(Episode, ToolCallLimit) {
  FixedUser user("Hi");
  EpisodeOptions opts;
  opts.limits.max_tool_calls = 2;
  Episode ep(fixture_task(), user, opts);
  ep.submit(call("get_order_detail", {{"order_id", "O1"}}));
  ep.submit(call("get_order_detail", {{"order_id", "O2"}}));
  EXPECT_FALSE(ep.done());
  ep.submit(call("get_order_detail", {{"order_id", "O3"}}));
  EXPECT_EQ(ep.termination(), Termination::TurnLimit);
  EXPECT_EQ(ep.tool_call_count(), 2);
}

TEST(Episode, TurnLimit) {
  FixedUser user("Hi");
  EpisodeOptions opts;
  opts.limits.max_turns = 4;
  Episode ep(fixture_task(), user, opts);
  for (int i = 0; i < 4; ++i) ep.submit(final_answer("still here " + std::to_string(i)));
  EXPECT_EQ(ep.termination(), Termination::TurnLimit);
  EXPECT_EQ(ep.turns(), 4);
}

TEST(Episode, UserFailureEndsTheEpisode) {
  ThrowingUser user;
  Episode ep(fixture_task(), user);
  const auto r = ep.submit(call("talk_to_user", {{"content", "Hello?"}}));
  EXPECT_TRUE(r.done);
  EXPECT_EQ(ep.termination(), Termination::ProtocolFailure);
  EXPECT_NE(ep.outcome().failure.find("simulator crashed"), std::string::npos);
}

// Malformed strings never throw out of the engine and never touch the world.
TEST(Episode, FuzzedOutputsNeverMutateState) {
  const std::vector<std::string> seeds = {
      call("modify_order_state", {{"order_id", "O1"}, {"state", "Cancelled"}}),
      call("remark", {{"order_id", "O1"}, {"content", "x"}}),
      call("modify_logistics_state", {{"logistics_id", "L2"}, {"state", "Intercepted"}}),
      final_answer("ok"),
  };
  std::mt19937_64 rng(2024);
  const std::string alphabet = "<>/{}\":,[] abcdefghijklmnopqrstuvwxyzTAFIO_\n";
  int produced = 0;
  auto task = fixture_task();
  FixedUser user("Hi");
  auto ep = std::make_unique<Episode>(task, user);
  while (produced < 1000) {
    std::string s = seeds[rng() % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      const std::size_t pos = rng() % s.size();
      switch (rng() % 4) {
        case 0: s.erase(pos, 1 + rng() % 5); break;
        case 1: s.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        case 2: s[pos] = alphabet[rng() % alphabet.size()]; break;
        case 3: s.resize(pos); break;
      }
    }
    bool malformed = false;
    try {
      parse_agent_output(s);
    } catch (const ProtocolError&) {
      malformed = true;
    }
    if (!malformed) continue;
    ++produced;
    if (ep->done()) ep = std::make_unique<Episode>(task, user);
    const auto before = ep->state_version();
    StepResult r;
    ASSERT_NO_THROW(r = ep->submit(s)) << s;
    EXPECT_EQ(ep->state_version(), before);
    EXPECT_EQ(ep->trajectory().back().kind, StepKind::ProtocolError);
  }
}

// --- runner, logs, replay --------------------------------------------------------

class ListPolicy : public AgentPolicy {
 public:
  explicit ListPolicy(std::vector<std::string> turns) : turns_(std::move(turns)) {}
  std::string act(const AgentView&) override {
    if (next_ >= turns_.size()) throw PolicyFailure("out of turns");
    return turns_[next_++];
  }
  void on_user_utterance(const AgentView&) override { ++utterances; }
  int utterances = 0;

 private:
  std::vector<std::string> turns_;
  std::size_t next_ = 0;
};

std::vector<std::string> sample_turns() {
  return {
      call("get_logistics_detail", {{"logistics_id", "L2"}}),
      call("calculate_shipping_time", {{"mode", "arrival"}, {"shop_id", "S1"}, {"order_id", "O2"}, {"logistics_id", "L2"}}),
      "oops",
      call("talk_to_user", {{"content", "Your parcel arrives at 09:00 on June 12."}}),
      call("remark", {{"order_id", "O2"}, {"content", "Customer asked for arrival time"}}),
      call("end_conversation", json::object()),
  };
}

TEST(Runner, RunsToCompletionAndNotifiesOnUtterances) {
  ListPolicy policy(sample_turns());
  FixedUser user("When will O2 arrive?", {"Thanks."});
  const auto out = run_episode(fixture_task(), policy, user);
  EXPECT_EQ(out.termination, Termination::Completed);
  EXPECT_EQ(out.tool_call_count, 5);
  EXPECT_EQ(out.turns, 6);
  EXPECT_EQ(policy.utterances, 1);
}

TEST(Runner, PolicyFailureEndsWithProtocolFailure) {
  ListPolicy policy({call("get_order_detail", {{"order_id", "O1"}})});
  FixedUser user("Hi");
  const auto out = run_episode(fixture_task(), policy, user);
  EXPECT_EQ(out.termination, Termination::ProtocolFailure);
  EXPECT_EQ(out.failure, "out of turns");
}

TEST(Runner, OutcomeJsonHidesTheWorld) {
  ListPolicy policy(sample_turns());
  FixedUser user("Hi", {"Thanks."});
  const json j = to_json(run_episode(fixture_task(), policy, user));
  for (const auto& [key, value] : j.items()) {
    EXPECT_EQ(key.find("world"), std::string::npos) << key;
    EXPECT_EQ(key.find("snapshot"), std::string::npos) << key;
  }
  EXPECT_TRUE(j.at("final_state_digest").is_string());
}

std::vector<json> logged_run(const std::vector<std::string>& turns) {
  FixedUser user("When will O2 arrive?", {"Thanks."});
  Episode ep(fixture_task(), user);
  for (const auto& t : turns) {
    if (ep.done()) break;
    ep.submit(t);
  }
  if (!ep.done()) ep.fail("policy stopped");
  return ep.log();
}

TEST(Replay, ReproducesTheLoggedEpisode) {
  const auto log = logged_run(sample_turns());
  const auto out = replay(fixture_task(), log);
  EXPECT_EQ(out.termination, Termination::Completed);
  EXPECT_EQ(state_digest(out.final_snapshot.data()), log.back()["final_state_digest"]);
}

TEST(Replay, PolicyFailureLogsReplay) {
  auto turns = sample_turns();
  turns.resize(2);
  const auto log = logged_run(turns);
  const auto out = replay(fixture_task(), log);
  EXPECT_EQ(out.termination, Termination::ProtocolFailure);
}

TEST(Replay, FileRoundTrip) {
  const auto log = logged_run(sample_turns());
  const auto path = (std::filesystem::temp_directory_path() / "shopbench_replay_test.jsonl").string();
  write_transcript_log(path, log);
  EXPECT_EQ(read_transcript_log(path), log);
  std::remove(path.c_str());
}

TEST(Replay, TamperedObservationIsDetectedAtItsRecord) {
  auto log = logged_run(sample_turns());
  std::size_t target = 0;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i]["role"] == "observation") {
      target = i;
      break;
    }
  ASSERT_GT(target, 0u);
  log[target]["body"] = "something else";
  try {
    replay(fixture_task(), log);
    FAIL() << "expected divergence";
  } catch (const ReplayDivergence& e) {
    EXPECT_EQ(e.seq(), target);
  }
}

TEST(Replay, TamperedDigestIsDetected) {
  auto log = logged_run(sample_turns());
  log.back()["final_state_digest"] = "0000000000000000";
  EXPECT_THROW(replay(fixture_task(), log), ReplayDivergence);
}

TEST(Replay, TamperedActionDiverges) {
  auto log = logged_run(sample_turns());
  for (auto& r : log)
    if (r["role"] == "action" && r["body"].get<std::string>().find("remark") != std::string::npos)
      r["body"] = call("remark", {{"order_id", "O1"}, {"content", "different"}});
  EXPECT_THROW(replay(fixture_task(), log), ReplayDivergence);
}

TEST(Replay, EmptyLogYieldsTheInitialSnapshot) {
  const auto task = fixture_task();
  const auto out = replay(task, {});
  EXPECT_TRUE(diff(out.final_snapshot.data(), task.initial_world).empty());
}

// --- tasks ------------------------------------------------------------------------

TEST(Task, JsonRoundTrip) {
  auto t = fixture_task();
  t.action_chain.push_back({"look", ToolCall{"get_order_detail", {{"order_id", "O2"}}}, "0123456789abcdef"});
  Demand d;
  d.kind = DemandKind::AfterSales;
  d.utterance = "The mug arrived cracked [Image 1]";
  d.order_id = "O3";
  d.reason = AfterSalesReason::TransitDamage;
  d.solution = DesiredSolution::RedEnvelope;
  d.requested_amount = Money::parse("5.00");
  d.evidence_asset = "A1";
  d.used = true;
  d.budget = Money::parse("80.00");
  t.profile.demands.push_back(d);
  EXPECT_EQ(to_json(task_from_json(to_json(t))), to_json(t));
  const auto back = task_from_json(to_json(t));
  EXPECT_EQ(back.profile, t.profile);
  EXPECT_EQ(back.action_chain, t.action_chain);
}

TEST(Task, RejectsUnknownKeysAndMedia) {
  json j = to_json(fixture_task());
  j["surprise"] = 1;
  EXPECT_THROW(task_from_json(j), std::invalid_argument);
  j = to_json(fixture_task());
  j["media"] = {"A404"};
  EXPECT_THROW(task_from_json(j), std::invalid_argument);
  j = to_json(fixture_task());
  j["profile"]["demands"] = json::array();
  EXPECT_THROW(task_from_json(j), std::invalid_argument);
}

TEST(Task, MediaMarkersResolveByModality) {
  const auto t = fixture_task();
  const auto markers = find_media_markers("see [Image 1] and [Video 1] but not [Image 0] or [image 1]");
  ASSERT_EQ(markers.size(), 2u);
  EXPECT_EQ(resolve_marker(markers[0], t.media, t.initial_world), "A1");
  EXPECT_EQ(resolve_marker(markers[1], t.media, t.initial_world), "A2");
  EXPECT_EQ(resolve_marker({Modality::Image, 2}, t.media, t.initial_world), std::nullopt);
}

}  // namespace
}  // namespace shopbench
