#include <regex>

#include "httplib.h"
#include "shopbench/agent.hpp"
#include "shopbench/digest.hpp"

namespace shopbench {

std::string prompt_digest(const ChatRequest& request) {
  json j = {{"system", request.system}, {"seed", request.seed}, {"messages", json::array()}};
  for (const auto& m : request.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return digest(j.dump());
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> completions, bool stamp_prompt)
    : completions_(std::move(completions)), stamp_(stamp_prompt) {}

std::string ScriptedBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (next_ >= completions_.size()) throw BackendError("scripted backend exhausted");
  std::string out = completions_[next_++];
  if (stamp_) {
    const auto pos = out.find("</Thought>");
    if (pos != std::string::npos) out.insert(pos, " [prompt " + prompt_digest(request) + "]");
  }
  return out;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

HttpChatBackend::HttpChatBackend(std::string url, std::string model, std::string api_key)
    : model_(std::move(model)), api_key_(std::move(api_key)) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("backend url must look like http://host:port/path");
  scheme_host_port_ = m[1];
  base_path_ = m[2].matched ? std::string(m[2]) : std::string();
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  json body = {{"model", model_}, {"temperature", 0}, {"seed", request.seed}, {"messages", json::array()}};
  if (!request.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(scheme_host_port_);
  const auto secs = request.timeout_ms / 1000;
  const auto usecs = (request.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw BackendError("backend request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("backend returned HTTP " + std::to_string(res->status));
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed backend reply: ") + e.what());
  }
}

}  // namespace shopbench
