#include "ldrld/cli/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "ldrld/errors.hpp"

namespace ldrld::cli {

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

Json loss_json(const LossBreakdown& l) {
  return Json{{"task", l.task},           {"weighted_pairs", l.weighted_pairs},
              {"llki", l.llki},           {"rntk", l.rntk},
              {"vanilla_kd", l.vanilla_kd}, {"total", l.total}};
}

Json epoch_json(const EpochStats& e) {
  return Json{{"epoch", e.epoch},
              {"lr", e.lr},
              {"loss", loss_json(e.loss)},
              {"train_accuracy", e.train_accuracy},
              {"eval_accuracy", e.eval_accuracy}};
}

Json run_json(std::uint64_t seed, const TrainRecord& record, const std::string& checkpoint) {
  Json epochs = Json::array();
  for (const auto& e : record.epochs) epochs.push_back(epoch_json(e));
  const EpochStats last = record.epochs.empty() ? EpochStats{} : record.epochs.back();
  Json out{{"seed", seed},
           {"final_train_accuracy", last.train_accuracy},
           {"final_eval_accuracy", last.eval_accuracy}};
  if (!checkpoint.empty()) out["checkpoint"] = checkpoint;
  out["epochs"] = std::move(epochs);
  return out;
}

Json summary_json(std::span<const double> values) {
  const Summary s = summarize(values);
  return Json{{"n", values.size()}, {"mean", s.mean}, {"std", s.std}};
}

std::vector<double> final_eval_accuracies(const std::vector<TrainRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.epochs.empty() ? 0.0 : r.epochs.back().eval_accuracy);
  return out;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_curves_csv(const std::filesystem::path& path, const std::vector<CurveSeries>& series) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "run,seed,epoch,lr,task,weighted_pairs,llki,rntk,vanilla_kd,total,train_accuracy,eval_accuracy\n";
  for (const auto& s : series) {
    for (const auto& e : s.record->epochs) {
      out << s.run << ',' << s.seed << ',' << e.epoch;
      for (double v : {e.lr, e.loss.task, e.loss.weighted_pairs, e.loss.llki, e.loss.rntk,
                       e.loss.vanilla_kd, e.loss.total, e.train_accuracy, e.eval_accuracy}) {
        out << ',' << format_double(v);
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

void check_block(const Json& runs, const Json& summary, const std::string& what) {
  std::vector<double> finals;
  for (const auto& r : runs) finals.push_back(r.at("final_eval_accuracy").get<double>());
  const Summary s = summarize(finals);
  if (summary.at("n").get<std::size_t>() != finals.size() ||
      std::abs(summary.at("mean").get<double>() - s.mean) > 1e-12 ||
      std::abs(summary.at("std").get<double>() - s.std) > 1e-12) {
    throw ConfigError(what + " summary does not match its per-seed values");
  }
}

}  // namespace

void check_report_consistency(const Json& report) {
  try {
    const auto& seeds = report.at("config").at("seeds");
    if (report.contains("runs")) {
      const auto& runs = report.at("runs");
      if (runs.size() != seeds.size()) throw ConfigError("run count does not match the seed list");
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].at("seed") != seeds[i]) throw ConfigError("runs are not ordered by the seed list");
      }
      check_block(runs, report.at("summary").at("eval_accuracy"), "distill");
    }
    if (report.contains("baseline")) {
      const auto& b = report.at("baseline");
      check_block(b.at("runs"), b.at("summary").at("eval_accuracy"), "baseline");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace ldrld::cli
