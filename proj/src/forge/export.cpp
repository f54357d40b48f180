#include <fstream>

#include "shopbench/forge.hpp"

namespace shopbench {

std::string render_history(const std::string& question, const Trajectory& trajectory, std::size_t steps) {
  if (steps > trajectory.size()) throw std::out_of_range("history longer than the trajectory");
  std::string out = tag("Question", question) + "\n";
  for (std::size_t i = 0; i < steps; ++i) {
    out += trajectory[i].action + "\n";
    out += tag("Observation", trajectory[i].observation) + "\n";
  }
  return out;
}

std::vector<TrainingSegment> export_training_segments(const std::vector<EpisodeOutcome>& outcomes) {
  std::vector<TrainingSegment> out;
  for (const auto& o : outcomes)
    for (std::size_t i = 0; i < o.trajectory.size(); ++i)
      out.push_back({o.task_id, static_cast<int>(i), render_history(o.question, o.trajectory, i), o.trajectory[i].action});
  return out;
}

json to_json(const TrainingSegment& s) {
  return {{"task_id", s.task_id}, {"step", s.step}, {"instruction", s.instruction}, {"output", s.output}};
}

void write_training_segments(const std::string& path, const std::vector<TrainingSegment>& segments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write segment file '" + path + "'");
  for (const auto& s : segments) out << to_json(s).dump() << '\n';
}

}  // namespace shopbench
