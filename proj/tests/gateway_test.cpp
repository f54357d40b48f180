#include <gtest/gtest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "shopbench/forge.hpp"
#include "shopbench/gateway.hpp"

using namespace shopbench;
namespace fs = std::filesystem;

namespace {

const std::vector<TaskSpec>& sample_tasks() {
  static const std::vector<TaskSpec> tasks = [] {
    GenConfig cfg;
    cfg.seed = 11;
    cfg.count = 12;
    cfg.world = world_config_preset("small");
    return generate_tasks(cfg).tasks;
  }();
  return tasks;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("shopbench_gateway_" + name);
  fs::remove_all(p);
  return p;
}

/// A served SessionService on a free local port.
class LiveGateway {
 public:
  explicit LiveGateway(ServiceConfig cfg) : service_(std::move(cfg)), server_(service_) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~LiveGateway() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }
  SessionService& service() { return service_; }
  int port() const { return port_; }

 private:
  SessionService service_;
  GatewayServer server_;
  int port_ = -1;
  std::thread thread_;
};

ServiceConfig service_config() {
  ServiceConfig cfg;
  cfg.tasks = sample_tasks();
  return cfg;
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect = 200) {
  const auto res = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " " << res->body;
  return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
  const auto res = c.Get(path);
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " " << res->body;
  return json::parse(res->body);
}

/// Plays a task's reference turns through the HTTP API; returns the result body.
json play_over_http(httplib::Client& c, const TaskSpec& task, std::vector<std::uint64_t>* versions = nullptr) {
  const json created = post(c, "/sessions", {{"task_id", task.task_id}});
  const std::string id = created.at("session_id");
  for (const auto& turn : reference_turns(task)) {
    const json r = post(c, "/sessions/" + id + "/agent-turn", {{"text", turn}});
    if (versions) versions->push_back(r.at("state_version").get<std::uint64_t>());
    if (r.at("done").get<bool>()) break;
  }
  return get(c, "/sessions/" + id + "/result");
}

}  // namespace

TEST(Gateway, ScriptedClientRunsAnEpisodeToAScoredResult) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const auto& task = sample_tasks().front();
  const json created = post(c, "/sessions", {{"task_id", task.task_id}});
  EXPECT_EQ(created.at("task_id"), task.task_id);
  EXPECT_EQ(created.at("question"), task.profile.demands.front().utterance);
  EXPECT_EQ(created.at("tool_catalog").size(), tool_registry().size());
  EXPECT_EQ(created.at("rules").size(), builtin_rule_catalog().size());

  const std::string id = created.at("session_id");
  json last;
  for (const auto& turn : reference_turns(task)) last = post(c, "/sessions/" + id + "/agent-turn", {{"text", turn}});
  EXPECT_TRUE(last.at("done").get<bool>());
  EXPECT_EQ(last.at("kind"), "terminal");

  const json result = get(c, "/sessions/" + id + "/result");
  EXPECT_EQ(result.at("score").at("score"), 1);
  EXPECT_EQ(result.at("score").at("ka"), 1);
  EXPECT_EQ(result.at("score").at("db"), 1);
  EXPECT_EQ(result.at("outcome").at("task_id"), task.task_id);
}

TEST(Gateway, ServiceAndInProcessRunnerProduceTheSameOutcome) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  for (const auto& task : sample_tasks()) {
    const json result = play_over_http(c, task);
    ScriptedPolicy agent(reference_turns(task));
    ScriptedUser user(task.profile);
    const auto outcome = run_episode(task, agent, user);
    EXPECT_EQ(result.at("outcome"), to_json(outcome)) << task.task_id;
  }
}

TEST(Gateway, StateNeverCarriesDatabaseRecords) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const auto& task = sample_tasks().front();
  const std::string id = post(c, "/sessions", {{"task_id", task.task_id}}).at("session_id");
  std::vector<json> states{get(c, "/sessions/" + id + "/state")};
  for (const auto& turn : reference_turns(task)) {
    post(c, "/sessions/" + id + "/agent-turn", {{"text", turn}});
    states.push_back(get(c, "/sessions/" + id + "/state"));
  }
  const std::set<std::string> allowed = {"session_id",      "task_id",       "status", "turns", "tool_call_count",
                                         "state_version", "transcript_messages", "termination"};
  for (const auto& s : states) {
    for (const auto& [key, value] : s.items()) {
      EXPECT_TRUE(allowed.count(key)) << key;
      EXPECT_FALSE(value.is_object() || value.is_array()) << key;
    }
    const std::string text = s.dump();
    for (const auto& [oid, o] : task.initial_world.orders) {
      EXPECT_EQ(text.find(o.receive_address), std::string::npos);
      EXPECT_EQ(text.find("\"" + oid + "\""), std::string::npos);
    }
  }
  EXPECT_EQ(states.front().at("status"), "awaiting_agent");
  EXPECT_EQ(states.back().at("status"), "terminated");
}

TEST(Gateway, ResultRedactsDiffValues) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const auto& task = sample_tasks().front();
  const std::string id = post(c, "/sessions", {{"task_id", task.task_id}}).at("session_id");
  post(c, "/sessions/" + id + "/agent-turn",
       {{"text", "<Thought>done</Thought><Action_input>{\"tool\": \"end_conversation\", \"arguments\": {}}"
                 "</Action_input>"}});
  const json result = get(c, "/sessions/" + id + "/result");
  EXPECT_FALSE(result.at("score").contains("diffs"));
  EXPECT_TRUE(result.at("score").at("diff_paths").is_array());
}

TEST(Gateway, TurnAfterTerminationIsOutOfPhase) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const auto& task = sample_tasks().front();
  const std::string id = post(c, "/sessions", {{"task_id", task.task_id}}).at("session_id");
  const std::string end =
      "<Thought>x</Thought><Action_input>{\"tool\": \"end_conversation\", \"arguments\": {}}</Action_input>";
  EXPECT_TRUE(post(c, "/sessions/" + id + "/agent-turn", {{"text", end}}).at("done").get<bool>());
  const json err = post(c, "/sessions/" + id + "/agent-turn", {{"text", end}}, 409);
  EXPECT_EQ(err.at("code"), "out_of_phase");
  EXPECT_TRUE(err.at("message").is_string());
}

TEST(Gateway, ResultBeforeTerminationIsOutOfPhase) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const std::string id = post(c, "/sessions", {{"task_id", sample_tasks().front().task_id}}).at("session_id");
  EXPECT_EQ(get(c, "/sessions/" + id + "/result", 409).at("code"), "out_of_phase");
}

TEST(Gateway, ErrorsAreStructured) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  EXPECT_EQ(get(c, "/sessions/nope/state", 404).at("code"), "unknown_session");
  EXPECT_EQ(post(c, "/sessions/nope/agent-turn", {{"text", "x"}}, 404).at("code"), "unknown_session");
  EXPECT_EQ(post(c, "/sessions", {{"task_id", "T9999"}}, 404).at("code"), "unknown_task");
  EXPECT_EQ(post(c, "/sessions", {{"task", 1}}, 400).at("code"), "malformed_body");
  EXPECT_EQ(post(c, "/sessions", {{"task_id", sample_tasks().front().task_id}, {"limits", {{"max_turns", 0}}}}, 400)
                .at("code"),
            "malformed_body");
  const auto raw = c.Post("/sessions", "not json", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 400);
  EXPECT_EQ(json::parse(raw->body).at("code"), "malformed_body");

  const std::string id = post(c, "/sessions", {{"task_id", sample_tasks().front().task_id}}).at("session_id");
  EXPECT_EQ(post(c, "/sessions/" + id + "/agent-turn", {{"output", "x"}}, 400).at("code"), "malformed_body");

  const auto missing = c.Get("/nowhere");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body).at("code"), "not_found");
}

TEST(Gateway, MalformedTurnIsAnObservationNotAnError) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const std::string id = post(c, "/sessions", {{"task_id", sample_tasks().front().task_id}}).at("session_id");
  const json r = post(c, "/sessions/" + id + "/agent-turn", {{"text", "<Thought>oops"}});
  EXPECT_EQ(r.at("kind"), "protocol_error");
  EXPECT_EQ(r.at("state_version"), 0);
  EXPECT_FALSE(r.at("done").get<bool>());
}

TEST(Gateway, DeletedSessionsAreGone) {
  LiveGateway gw(service_config());
  auto c = gw.client();
  const std::string id = post(c, "/sessions", {{"task_id", sample_tasks().front().task_id}}).at("session_id");
  EXPECT_EQ(gw.service().size(), 1u);
  const auto del = c.Delete("/sessions/" + id);
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 200);
  EXPECT_EQ(gw.service().size(), 0u);
  EXPECT_EQ(get(c, "/sessions/" + id + "/state", 404).at("code"), "unknown_session");
  const auto again = c.Delete("/sessions/" + id);
  ASSERT_TRUE(again);
  EXPECT_EQ(again->status, 404);
}

TEST(Gateway, ConcurrentSessionsKeepIndependentVersions) {
  LiveGateway gw(service_config());
  const auto& tasks = sample_tasks();
  std::vector<json> results(tasks.size());
  std::vector<std::vector<std::uint64_t>> versions(tasks.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    threads.emplace_back([&, i] {
      auto c = gw.client();
      results[i] = play_over_http(c, tasks[i], &versions[i]);
    });
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    ScriptedPolicy agent(reference_turns(tasks[i]));
    ScriptedUser user(tasks[i].profile);
    EXPECT_EQ(results[i].at("outcome"), to_json(run_episode(tasks[i], agent, user))) << tasks[i].task_id;
    EXPECT_TRUE(std::is_sorted(versions[i].begin(), versions[i].end()));
    // Each session counts only its own writes.
    const auto writes = diff(WorldState(tasks[i].initial_world).snapshot(),
                             WorldState(tasks[i].ground_truth_world).snapshot());
    EXPECT_LE(versions[i].back(), tasks[i].action_chain.size());
    if (writes.empty()) {
      EXPECT_EQ(versions[i].back(), 0u);
    }
  }
}

TEST(Gateway, TerminatedSessionsAreLoggedWhenConfigured) {
  const auto dir = scratch("logs");
  auto cfg = service_config();
  cfg.log_dir = dir.string();
  LiveGateway gw(cfg);
  auto c = gw.client();
  const auto& task = sample_tasks().front();
  const json result = play_over_http(c, task);
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(dir / "transcripts")) logs.push_back(e.path());
  ASSERT_EQ(logs.size(), 1u);
  const auto replayed = replay(task, read_transcript_log(logs.front().string()));
  EXPECT_EQ(to_json(replayed), result.at("outcome"));
}

// --- batch runner -------------------------------------------------------------

TEST(Runner, ScriptedAgentSolvesGeneratedTasks) {
  RunConfig cfg;
  const auto r = run_tasks(sample_tasks(), cfg);
  ASSERT_EQ(r.episodes.size(), sample_tasks().size());
  for (const auto& e : r.episodes) EXPECT_TRUE(e.score.score) << e.score.task_id;
  EXPECT_EQ(r.report.total.score, static_cast<int>(sample_tasks().size()));
}

TEST(Runner, OutputDoesNotDependOnThreads) {
  RunConfig one;
  RunConfig four;
  four.threads = 4;
  const auto a = run_tasks(sample_tasks(), one);
  const auto b = run_tasks(sample_tasks(), four);
  ASSERT_EQ(a.episodes.size(), b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].log, b.episodes[i].log);
    EXPECT_EQ(to_json(a.episodes[i].score), to_json(b.episodes[i].score));
  }
}

TEST(Runner, ConfigurationRules) {
  RunConfig c;
  c.agent = AgentKind::EReAct;
  c.backend.url = "http://127.0.0.1:1/v1";
  EXPECT_THROW(validate_run_config(c), std::invalid_argument);  // no selector
  c.selector = "category";
  EXPECT_NO_THROW(validate_run_config(c));
  c.agent = AgentKind::ReAct;
  EXPECT_THROW(validate_run_config(c), std::invalid_argument);  // selector without E-variant
  c.selector.clear();
  c.backend.url.clear();
  EXPECT_THROW(validate_run_config(c), std::invalid_argument);  // no backend
  c.agent = AgentKind::External;
  EXPECT_THROW(validate_run_config(c), std::invalid_argument);  // serve only
  for (auto k : {AgentKind::Scripted, AgentKind::ReAct, AgentKind::EReAct, AgentKind::PlanSolve,
                 AgentKind::EPlanSolve, AgentKind::External})
    EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  EXPECT_FALSE(parse_agent_kind("gpt"));
}

TEST(Runner, RunDirectoryRoundTrip) {
  const auto dir = scratch("run");
  RunConfig cfg;
  cfg.tasks_path = "tasks.jsonl";
  const auto r = run_tasks(sample_tasks(), cfg);
  write_run(dir.string(), r, cfg);
  const auto results = results_file(dir.string());
  EXPECT_EQ(results, (dir / "results.jsonl").string());
  const auto records = read_score_records(results);
  ASSERT_EQ(records.size(), sample_tasks().size());
  const auto manifest = read_run_manifest(results);
  EXPECT_EQ(manifest.tasks_path, "tasks.jsonl");
  EXPECT_TRUE(manifest.options.multimodal);

  FallbackJudge judge;
  const auto outcomes = reconstruct_outcomes(records, sample_tasks(), results, judge, manifest.options);
  ASSERT_EQ(outcomes.size(), r.episodes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    EXPECT_EQ(to_json(outcomes[i]), to_json(r.episodes[i].outcome));
}

TEST(Runner, TamperedScoreIsDetectedAgainstItsTranscript) {
  const auto dir = scratch("tamper");
  RunConfig cfg;
  const auto r = run_tasks(sample_tasks(), cfg);
  write_run(dir.string(), r, cfg);
  const auto results = results_file(dir.string());
  auto records = read_score_records(results);
  records.front().tool_call_count += 1;
  FallbackJudge judge;
  EXPECT_THROW(reconstruct_outcomes(records, sample_tasks(), results, judge), std::runtime_error);
}

TEST(Gateway, NoMultimodalSessionsKeepMarkersButAttachNothing) {
  SessionService service(service_config());
  int with_marker = 0;
  for (const auto& task : sample_tasks()) {
    const json on = service.create({{"task_id", task.task_id}});
    const json off = service.create({{"task_id", task.task_id}, {"multimodal", false}});
    EXPECT_EQ(on.at("question"), off.at("question"));
    EXPECT_TRUE(off.at("files").empty());
    if (find_media_markers(on.at("question").get<std::string>()).empty()) continue;
    ++with_marker;
    EXPECT_FALSE(on.at("files").empty()) << task.task_id;
    const std::string id = off.at("session_id");
    for (const auto& turn : reference_turns(task)) {
      const json r = service.agent_turn(id, {{"text", turn}});
      EXPECT_TRUE(r.at("files").empty());
      if (r.at("done").get<bool>()) break;
    }
  }
  EXPECT_GT(with_marker, 0);
}
