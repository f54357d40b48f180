#include <cstdio>
#include <iomanip>
#include <sstream>

#include "shopbench/eval.hpp"

namespace shopbench {

namespace {

const Family kColumnOrder[] = {Family::Logistics, Family::AfterSales, Family::PreSales};

void add(Bucket& b, const ScoreRecord& r) {
  ++b.n;
  b.ka += r.ka;
  b.db += r.db;
  b.score += r.score;
}

json bucket_json(const Bucket& b) {
  if (b.n == 0) return nullptr;
  return {{"n", b.n},
          {"ka", std::stod(percent(b.ka, b.n))},
          {"db", std::stod(percent(b.db, b.n))},
          {"score", std::stod(percent(b.score, b.n))}};
}

std::string display_name(Family f) {
  switch (f) {
    case Family::Logistics: return "Logistics";
    case Family::AfterSales: return "After-sales";
    case Family::PreSales: return "Pre-sales";
  }
  return "?";
}

}  // namespace

std::string percent(int count, int n) {
  if (n <= 0) return "-";
  // Tenths of a percent, rounded half up.
  const long long tenths = (2000LL * count + n) / (2LL * n);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

Report aggregate(const std::vector<ScoreRecord>& records) {
  if (records.empty()) throw std::invalid_argument("nothing to aggregate");
  Report rep;
  for (auto f : kColumnOrder) rep.families[f];
  long long calls = 0;
  for (const auto& r : records) {
    add(rep.families[r.family], r);
    add(rep.total, r);
    calls += r.tool_call_count;
    rep.max_tool_calls = std::max(rep.max_tool_calls, r.tool_call_count);
    ++rep.terminations[r.termination];
    rep.judge_fallbacks += r.judge_fallback;
  }
  rep.mean_tool_calls = static_cast<double>(calls) / static_cast<double>(records.size());
  return rep;
}

json to_json(const Report& r) {
  json families = json::object();
  for (const auto& [f, b] : r.families) families[std::string(to_string(f))] = bucket_json(b);
  json terms = json::object();
  for (const auto& [t, n] : r.terminations) terms[std::string(to_string(t))] = n;
  std::ostringstream mean;
  mean << std::fixed << std::setprecision(2) << r.mean_tool_calls;
  return {{"families", families},
          {"total", bucket_json(r.total)},
          {"tool_calls", {{"mean", std::stod(mean.str())}, {"max", r.max_tool_calls}}},
          {"terminations", terms},
          {"judge_fallbacks", r.judge_fallbacks}};
}

std::string render_table(const Report& r, const std::string& label) {
  std::vector<std::pair<std::string, Bucket>> cols;
  for (auto f : kColumnOrder) {
    auto it = r.families.find(f);
    cols.emplace_back(display_name(f), it == r.families.end() ? Bucket{} : it->second);
  }
  cols.emplace_back("Total", r.total);

  const int label_w = std::max<int>(static_cast<int>(label.size()), 5);
  auto cell = [](const std::string& s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%7s", s.c_str());
    return std::string(buf);
  };
  std::ostringstream out;
  out << std::left << std::setw(label_w) << "" << " |";
  for (const auto& [name, b] : cols) {
    std::string head = name;
    const int width = 21;
    const int pad = width - static_cast<int>(head.size());
    out << std::string(pad / 2, ' ') << head << std::string(pad - pad / 2, ' ') << " |";
  }
  out << "\n" << std::setw(label_w) << "" << " |";
  for (std::size_t i = 0; i < cols.size(); ++i) out << cell("KA.") << cell("DB.") << cell("Score") << " |";
  out << "\n" << std::string(label_w + 2 + cols.size() * 23, '-') << "\n";
  out << std::setw(label_w) << label << " |";
  for (const auto& [name, b] : cols) out << cell(percent(b.ka, b.n)) << cell(percent(b.db, b.n)) << cell(percent(b.score, b.n)) << " |";
  out << "\n";
  return out.str();
}

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty()) throw std::invalid_argument("fleiss_kappa: no tasks");
  const std::size_t k = counts.front().size();
  if (k == 0) throw std::invalid_argument("fleiss_kappa: no categories");
  long long raters = -1;
  for (const auto& row : counts) {
    if (row.size() != k) throw std::invalid_argument("fleiss_kappa: ragged matrix");
    long long sum = 0;
    for (int c : row) {
      if (c < 0) throw std::invalid_argument("fleiss_kappa: negative count");
      sum += c;
    }
    if (raters == -1) raters = sum;
    if (sum != raters) throw std::invalid_argument("fleiss_kappa: tasks rated by different numbers of raters");
  }
  if (raters < 2) throw std::invalid_argument("fleiss_kappa: needs at least 2 raters");

  const double n = static_cast<double>(raters);
  const double tasks = static_cast<double>(counts.size());
  double p_bar = 0;
  std::vector<double> col(k, 0.0);
  for (const auto& row : counts) {
    double sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      sq += static_cast<double>(row[j]) * row[j];
      col[j] += row[j];
    }
    p_bar += (sq - n) / (n * (n - 1));
  }
  p_bar /= tasks;
  double p_e = 0;
  for (double c : col) {
    const double p = c / (tasks * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

double fleiss_kappa_from_labels(const std::vector<std::vector<int>>& labels, int categories) {
  if (categories <= 0) throw std::invalid_argument("fleiss_kappa: no categories");
  std::vector<std::vector<int>> counts;
  for (const auto& task : labels) {
    std::vector<int> row(static_cast<std::size_t>(categories), 0);
    for (int l : task) {
      if (l < 0 || l >= categories) throw std::invalid_argument("fleiss_kappa: label out of range");
      ++row[static_cast<std::size_t>(l)];
    }
    counts.push_back(std::move(row));
  }
  return fleiss_kappa(counts);
}

}  // namespace shopbench
