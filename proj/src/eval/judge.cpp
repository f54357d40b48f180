#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "shopbench/digest.hpp"
#include "shopbench/eval.hpp"

namespace shopbench {

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kWords = {
      "a",    "an",   "the",  "is",   "are",  "was",  "were", "be",    "been", "to",   "of",   "for",
      "and",  "or",   "in",   "on",   "at",   "by",   "as",   "with",  "your", "you",  "i",    "we",
      "our",  "my",   "me",   "it",   "its",  "this", "that", "these", "will", "shall", "has", "have",
      "had",  "can",  "could", "please", "from", "so", "do",  "does",  "there", "here", "which", "would",
  };
  return kWords;
}

// Amounts, times, quantities ("x2") and ids ("o2") all carry digits.
bool is_number(const std::string& t) {
  return std::any_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Plural folding for words; numbers are never altered.
std::string fold(std::string t) {
  if (!is_number(t) && t.size() > 3 && t.back() == 's' && t[t.size() - 2] != 's') t.pop_back();
  return t;
}

std::set<std::string> content_tokens(std::string_view text) {
  std::set<std::string> out;
  for (auto& t : judge_tokens(text))
    if (!stopwords().count(t)) out.insert(fold(t));
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> judge_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    const bool joins_digits = (c == '.' || c == ':') && !cur.empty() &&
                              std::isdigit(static_cast<unsigned char>(cur.back())) && i + 1 < text.size() &&
                              std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (joins_digits) {
      cur.push_back(static_cast<char>(c));
      continue;
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool FallbackJudge::contains_key_answer(const std::string& message, const std::string& key_answer) {
  const auto have = content_tokens(message);
  for (const auto& t : content_tokens(key_answer))
    if (!have.count(t)) return false;
  return true;
}

bool FallbackJudge::remarks_equivalent(const std::string& a, const std::string& b,
                                       const std::vector<std::string>& brands) {
  const std::string la = lower(a), lb = lower(b);
  std::set<std::string> brand_tokens;
  for (const auto& brand : brands) {
    const std::string name = lower(brand);
    if (name.empty()) continue;
    if ((la.find(name) != std::string::npos) != (lb.find(name) != std::string::npos)) return false;
    for (auto& t : judge_tokens(name)) brand_tokens.insert(fold(t));
  }
  auto split = [&](const std::string& text, std::set<std::string>& numbers, std::set<std::string>& words) {
    for (const auto& t : content_tokens(text)) {
      if (brand_tokens.count(t)) continue;
      (is_number(t) ? numbers : words).insert(t);
    }
  };
  std::set<std::string> na, wa, nb, wb;
  split(a, na, wa);
  split(b, nb, wb);
  if (na != nb) return false;
  std::size_t common = 0;
  for (const auto& w : wa) common += wb.count(w);
  const std::size_t uni = wa.size() + wb.size() - common;
  return uni == 0 || 2 * common >= uni;
}

// --- model judge ---------------------------------------------------------------

bool ModelJudge::ask(const std::string& system, const std::string& user) {
  ChatRequest req;
  req.system = system;
  req.messages.push_back({"user", user});
  const std::string reply = backend_.complete(req);
  const auto pos = reply.find_first_not_of(" \t\r\n");
  if (pos != std::string::npos && reply[pos] == '1') return true;
  if (pos != std::string::npos && reply[pos] == '0') return false;
  throw BackendError("judge reply is neither 1 nor 0");
}

bool ModelJudge::contains_key_answer(const std::string& message, const std::string& key_answer) {
  return ask(
      "You grade messages written by an online shop's customer service assistant. Reply 1 if the message conveys "
      "the information in the key answer and 0 if it does not. Any amount of money or time in the key answer has "
      "to appear in the message in exactly the same form. Reply with the single digit only.",
      "Message:\n" + message + "\n\nKey answer:\n" + key_answer);
}

bool ModelJudge::remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) {
  std::string known;
  for (const auto& br : brands) known += (known.empty() ? "" : ", ") + br;
  return ask(
      "You compare two notes attached to a shop order. Reply 1 if both notes record the same instruction or "
      "information and 0 otherwise. Delivery brand names must agree exactly. Reply with the single digit only.",
      "Delivery brands: " + known + "\n\nNote 1:\n" + a + "\n\nNote 2:\n" + b);
}

// --- cache ----------------------------------------------------------------------

CachedJudge::CachedJudge(Judge& inner, std::string path) : inner_(inner), path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    cache_[j.at("key").get<std::string>()] = j.at("value").get<bool>();
  }
}

template <typename F>
bool CachedJudge::lookup(const std::string& key, F&& compute) {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const bool value = compute();
  std::lock_guard lock(mu_);
  cache_[key] = value;
  return value;
}

bool CachedJudge::contains_key_answer(const std::string& message, const std::string& key_answer) {
  const std::string key = digest(inner_.name() + "\x1fka\x1f" + message + "\x1f" + key_answer);
  return lookup(key, [&] { return inner_.contains_key_answer(message, key_answer); });
}

bool CachedJudge::remarks_equivalent(const std::string& a, const std::string& b, const std::vector<std::string>& brands) {
  std::string joined;
  for (const auto& br : brands) joined += br + "\x1e";
  const std::string key = digest(inner_.name() + "\x1frm\x1f" + a + "\x1f" + b + "\x1f" + joined);
  return lookup(key, [&] { return inner_.remarks_equivalent(a, b, brands); });
}

std::size_t CachedJudge::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

void CachedJudge::save() const {
  if (path_.empty()) return;
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write judge cache '" + path_ + "'");
  for (const auto& [k, v] : cache_) out << json{{"key", k}, {"value", v}}.dump() << '\n';
}

}  // namespace shopbench
