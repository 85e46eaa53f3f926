#include "ldrld/cli/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ldrld/cli/losscheck.hpp"
#include "ldrld/cli/report.hpp"
#include "ldrld/errors.hpp"

namespace ldrld::cli {

namespace fs = std::filesystem;

DataPair load_data(const DatasetConfig& cfg) {
  DataPair out;
  if (cfg.kind == "blobs") {
    BlobSpec eval_spec = cfg.blobs;
    eval_spec.per_class = cfg.eval_per_class;
    out.train = make_blobs(cfg.blobs, cfg.seed, Split::train);
    out.eval = make_blobs(eval_spec, cfg.seed, Split::eval);
  } else if (cfg.kind == "delimited") {
    out.train = load_delimited(cfg.train_path, cfg.delimited, Split::train);
    DelimitedOptions eval_opts = cfg.delimited;
    if (eval_opts.num_classes == 0) eval_opts.num_classes = out.train.num_classes;
    out.eval = load_delimited(cfg.eval_path, eval_opts, Split::eval);
  } else if (cfg.kind == "idx") {
    out.train = load_idx(cfg.train_images, cfg.train_labels, cfg.idx_num_classes, Split::train);
    out.eval = load_idx(cfg.eval_images, cfg.eval_labels,
                        cfg.idx_num_classes ? cfg.idx_num_classes : out.train.num_classes, Split::eval);
  } else {
    throw ConfigError("unknown dataset kind " + cfg.kind);
  }
  if (out.eval.dim != out.train.dim) throw DataError("train and eval feature widths differ");
  if (out.eval.num_classes > out.train.num_classes) {
    throw DataError("eval labels exceed the training class count");
  }
  out.eval.num_classes = out.train.num_classes;
  return out;
}

MlpSpec teacher_spec(const ExperimentConfig& cfg, const Dataset& train) {
  return {train.dim, cfg.teacher.hidden_dims, train.num_classes, cfg.teacher.seed};
}

MlpSpec student_spec(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t seed) {
  return {train.dim, cfg.student.hidden_dims, train.num_classes, seed};
}

TrainResult train_teacher(const ExperimentConfig& cfg, const DataPair& data) {
  TrainSpec t = cfg.teacher.train;
  t.seed = cfg.teacher.seed;
  return train_supervised(teacher_spec(cfg, data.train), t, data.train, &data.eval);
}

std::vector<StudentRun> run_students(const ExperimentConfig& cfg, const DataPair& data, const Mlp* teacher,
                                     std::size_t jobs) {
  std::vector<std::optional<StudentRun>> runs(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  const auto one = [&](std::size_t i) {
    try {
      const auto start = std::chrono::steady_clock::now();
      const std::uint64_t seed = cfg.seeds[i];
      TrainSpec t = cfg.student.train;
      t.seed = seed;
      const MlpSpec spec = student_spec(cfg, data.train, seed);
      TrainResult result = teacher ? distill(*teacher, spec, t, cfg.distill, data.train, &data.eval)
                                   : train_supervised(spec, t, data.train, &data.eval);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::info("{} seed {}: eval accuracy {:.4f} ({:.1f}s)", teacher ? "distill" : "scratch", seed,
                   result.record.epochs.back().eval_accuracy, seconds);
      runs[i] = StudentRun{seed, std::move(result), seconds};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cfg.seeds.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) one(i);
  } else {
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(m);
            if (next == runs.size()) return;
            i = next++;
          }
          one(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<StudentRun> out;
  for (auto& r : runs) out.push_back(std::move(*r));
  return out;
}

std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string seeds;
  std::size_t jobs = 1;
};

ExperimentConfig resolve(const CommonArgs& a, std::vector<std::string> extra = {}) {
  auto overrides = a.sets;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  Json doc = load_config_document(a.config, overrides);
  if (!a.out.empty()) doc["out"] = a.out;
  if (!a.seeds.empty()) doc["seeds"] = parse_seed_list(a.seeds);
  return parse_config(doc);
}

std::string checkpoint_bytes(const Mlp& m) { return serialize_checkpoint(m); }

void write_timing(const fs::path& path, double total, const std::vector<StudentRun>* runs,
                  const std::vector<StudentRun>* baseline) {
  Json t{{"total_seconds", total}};
  const auto add = [&](const char* key, const std::vector<StudentRun>* rs) {
    if (!rs) return;
    Json arr = Json::array();
    for (const auto& r : *rs) arr.push_back(Json{{"seed", r.seed}, {"seconds", r.seconds}});
    t[key] = std::move(arr);
  };
  add("runs", runs);
  add("baseline", baseline);
  write_json(path, t);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_train_teacher(const CommonArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = resolve(a);
  const DataPair data = load_data(cfg.dataset);
  spdlog::info("training teacher on {} samples, {} classes", data.train.num_samples, data.train.num_classes);
  const TrainResult r = train_teacher(cfg, data);
  const fs::path out = cfg.out;
  const std::string bytes = checkpoint_bytes(r.model);
  fs::create_directories(out);
  save_checkpoint(r.model, out / "teacher.ckpt");

  Json report{{"kind", "train-teacher"}, {"version", kReportVersion}, {"config", to_json(cfg)}};
  report["teacher_eval_accuracy"] = r.record.epochs.back().eval_accuracy;
  Json run = run_json(cfg.teacher.seed, r.record, "teacher.ckpt");
  run["fingerprint"] = fingerprint(bytes);
  report["teacher"] = std::move(run);
  write_json(out / "teacher.report.json", report);
  write_curves_csv(out / "teacher.curves.csv", {{"teacher", cfg.teacher.seed, &r.record}});
  write_timing(out / "teacher.timing.json", seconds_since(start), nullptr, nullptr);
  std::cout << "teacher eval accuracy " << format_double(r.record.epochs.back().eval_accuracy) << "\n"
            << "wrote " << (out / "teacher.ckpt").string() << "\n";
  return kOk;
}

Json runs_block(const std::vector<StudentRun>& runs, const char* prefix, const fs::path& out, bool save) {
  Json arr = Json::array();
  for (const auto& r : runs) {
    const std::string name = std::string(prefix) + "_seed" + std::to_string(r.seed) + ".ckpt";
    if (save) save_checkpoint(r.result.model, out / name);
    Json j = run_json(r.seed, r.result.record, save ? name : "");
    if (save) j["fingerprint"] = fingerprint(checkpoint_bytes(r.result.model));
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<double> finals(const std::vector<StudentRun>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.result.record.epochs.back().eval_accuracy);
  return out;
}

struct TeacherInfo {
  Mlp model;
  std::string path;
  std::string fingerprint;
  double eval_accuracy;
};

TeacherInfo load_teacher(const std::string& path, const DataPair& data) {
  if (path.empty()) throw ConfigError("--teacher checkpoint is required");
  Mlp m = load_checkpoint(path);
  if (m.spec().num_classes != data.train.num_classes) {
    throw ConfigError("teacher checkpoint has " + std::to_string(m.spec().num_classes) +
                      " classes but the dataset has " + std::to_string(data.train.num_classes));
  }
  if (m.spec().input_dim != data.train.dim) {
    throw ConfigError("teacher checkpoint expects " + std::to_string(m.spec().input_dim) +
                      " features but the dataset has " + std::to_string(data.train.dim));
  }
  const double acc = accuracy(m, data.eval);
  std::string fp = fingerprint(checkpoint_bytes(m));
  return {std::move(m), path, std::move(fp), acc};
}

/// Runs one distillation experiment and writes its report into cfg.out.
/// Returns the report. `baseline` (if non-null) is reused rather than retrained.
Json distill_experiment(const ExperimentConfig& cfg, const DataPair& data, const TeacherInfo& teacher,
                        const std::vector<StudentRun>* baseline, std::size_t jobs) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path out = cfg.out;
  fs::create_directories(out);
  const auto runs = run_students(cfg, data, &teacher.model, jobs);

  Json report{{"kind", "distill"}, {"version", kReportVersion}, {"config", to_json(cfg)}};
  report["teacher"] = Json{{"checkpoint", teacher.path},
                           {"fingerprint", teacher.fingerprint},
                           {"eval_accuracy", teacher.eval_accuracy}};
  report["runs"] = runs_block(runs, "student", out, true);
  const auto acc = finals(runs);
  report["summary"] = Json{{"eval_accuracy", summary_json(acc)}};
  std::vector<CurveSeries> curves;
  for (const auto& r : runs) curves.push_back({"distill", r.seed, &r.result.record});
  if (baseline) {
    const auto base = finals(*baseline);
    std::vector<double> delta;
    for (std::size_t i = 0; i < acc.size(); ++i) delta.push_back(acc[i] - base[i]);
    Json b{{"runs", runs_block(*baseline, "scratch", out, true)},
           {"summary", Json{{"eval_accuracy", summary_json(base)}}}};
    b["delta"] = Json{{"per_seed", delta}, {"mean", summarize(delta).mean}};
    report["baseline"] = std::move(b);
    for (const auto& r : *baseline) curves.push_back({"scratch", r.seed, &r.result.record});
  }
  check_report_consistency(report);
  write_json(out / "distill.report.json", report);
  write_curves_csv(out / "distill.curves.csv", curves);
  write_timing(out / "distill.timing.json", seconds_since(start), &runs, baseline);
  return report;
}

void print_summary(const Json& report) {
  const auto& s = report["summary"]["eval_accuracy"];
  std::cout << "eval accuracy mean " << format_double(s["mean"].get<double>()) << " std "
            << format_double(s["std"].get<double>()) << " over " << s["n"] << " seed(s)\n";
  if (report.contains("baseline")) {
    std::cout << "delta vs scratch " << format_double(report["baseline"]["delta"]["mean"].get<double>()) << "\n";
  }
}

int cmd_distill(const CommonArgs& a, const std::string& teacher_path, bool with_baseline) {
  const ExperimentConfig cfg = resolve(a);
  const DataPair data = load_data(cfg.dataset);
  const TeacherInfo teacher = load_teacher(teacher_path, data);
  std::vector<StudentRun> baseline;
  if (with_baseline) baseline = run_students(cfg, data, nullptr, a.jobs);
  const Json report = distill_experiment(cfg, data, teacher, with_baseline ? &baseline : nullptr, a.jobs);
  print_summary(report);
  return kOk;
}

int cmd_sweep(const CommonArgs& a, const std::string& teacher_path, const std::string& sweep_text,
              bool with_baseline) {
  const auto start = std::chrono::steady_clock::now();
  const SweepSpec sweep = parse_sweep(sweep_text);
  const ExperimentConfig base_cfg = resolve(a);
  // Validate every point before any training starts.
  std::vector<ExperimentConfig> points;
  for (const auto& v : sweep.values) {
    ExperimentConfig c = resolve(a, {sweep.key + "=" + v});
    c.out = (fs::path(base_cfg.out) / (sweep.key + "=" + v)).string();
    points.push_back(std::move(c));
  }
  const DataPair data = load_data(base_cfg.dataset);
  const TeacherInfo teacher = load_teacher(teacher_path, data);
  const bool shared_baseline = sweep.key.rfind("distill.", 0) == 0;
  std::vector<StudentRun> baseline;
  if (with_baseline && shared_baseline) baseline = run_students(base_cfg, data, nullptr, a.jobs);

  Json summary{{"kind", "sweep"}, {"version", kReportVersion}, {"config", to_json(base_cfg)},
               {"key", sweep.key}};
  Json rows = Json::array();
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    spdlog::info("sweep {}={}", sweep.key, sweep.values[i]);
    std::vector<StudentRun> local;
    const std::vector<StudentRun>* b = nullptr;
    if (with_baseline) {
      if (!shared_baseline) local = run_students(points[i], data, nullptr, a.jobs);
      b = shared_baseline ? &baseline : &local;
    }
    const Json rep = distill_experiment(points[i], data, teacher, b, a.jobs);
    const auto& s = rep["summary"]["eval_accuracy"];
    Json row{{"value", Json::parse(sweep.values[i], nullptr, false).is_discarded()
                           ? Json(sweep.values[i])
                           : Json::parse(sweep.values[i])},
             {"report", (fs::path(sweep.key + "=" + sweep.values[i]) / "distill.report.json").string()},
             {"eval_accuracy", s}};
    if (rep.contains("baseline")) row["delta_mean"] = rep["baseline"]["delta"]["mean"];
    if (s["mean"].get<double>() > best_mean) {
      best_mean = s["mean"].get<double>();
      best = i;
    }
    rows.push_back(std::move(row));
  }
  summary["points"] = std::move(rows);
  summary["best"] = summary["points"][best]["value"];
  write_json(fs::path(base_cfg.out) / "sweep.report.json", summary);
  write_json(fs::path(base_cfg.out) / "sweep.timing.json", Json{{"total_seconds", seconds_since(start)}});
  for (const auto& row : summary["points"]) {
    std::cout << sweep.key << "=" << row["value"].dump() << "  mean "
              << format_double(row["eval_accuracy"]["mean"].get<double>()) << "  std "
              << format_double(row["eval_accuracy"]["std"].get<double>()) << "\n";
  }
  std::cout << "best " << sweep.key << "=" << summary["best"].dump() << "\n";
  return kOk;
}

int cmd_eval(const CommonArgs& a, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const ExperimentConfig cfg = resolve(a);
  const DataPair data = load_data(cfg.dataset);
  const Mlp model = load_checkpoint(checkpoint);
  if (model.spec().num_classes != data.train.num_classes || model.spec().input_dim != data.train.dim) {
    throw ConfigError("checkpoint " + checkpoint + " does not match the dataset shape");
  }
  Json report{{"kind", "eval"}, {"version", kReportVersion}, {"config", to_json(cfg)}};
  report["checkpoint"] = checkpoint;
  report["fingerprint"] = fingerprint(checkpoint_bytes(model));
  report["train_accuracy"] = accuracy(model, data.train);
  report["eval_accuracy"] = accuracy(model, data.eval);
  report["eval_samples"] = data.eval.num_samples;
  write_json(fs::path(cfg.out) / "eval.report.json", report);
  std::cout << report.dump(2) << "\n";
  return kOk;
}

int cmd_losscheck(const LossCheckOptions& opts) {
  const auto results = run_losschecks(opts);
  print_check_table(std::cout, results);
  for (const auto& r : results) {
    if (!r.passed) {
      std::cerr << "check failed: " << r.name << "\n";
      return kCheckFailed;
    }
  }
  return kOk;
}

}  // namespace

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("ldrld");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  });
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("LDRLD_LOG")) {
    const std::string name = env;
    const auto parsed = spdlog::level::from_str(name);
    if (parsed != spdlog::level::off || name == "off") {
      level = parsed;
    } else {
      spdlog::warn("ignoring unknown LDRLD_LOG level '{}'", name);
    }
  }
  spdlog::set_level(level);
}

int run_cli(const std::vector<std::string>& args) {
  configure_logging();
  CLI::App app{"Rank-aware logit distillation toolkit", "ldrld"};
  app.require_subcommand(1);

  CommonArgs common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON experiment config");
    sub->add_option("--set", common.sets, "Override a config value, key=value (repeatable)");
    sub->add_option("--out", common.out, "Output directory (overrides config out)");
    sub->add_option("--seeds", common.seeds, "Seed list, e.g. 0,1,2 or 0..2");
    sub->add_option("--jobs", common.jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber);
  };

  std::string teacher, checkpoint, sweep;
  bool baseline = false;
  LossCheckOptions lc;

  auto* tt = app.add_subcommand("train-teacher", "Train a teacher network and save its checkpoint");
  add_common(tt);
  auto* ds = app.add_subcommand("distill", "Distill students from a teacher, one per seed");
  add_common(ds);
  ds->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  ds->add_flag("--baseline", baseline, "Also train scratch students and report the difference");
  ds->add_option("--sweep", sweep, "Run one distillation per value: key=a..b or key=v1,v2");
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the configured dataset");
  add_common(ev);
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  auto* lcmd = app.add_subcommand("losscheck", "Check the objective against reference implementations");
  lcmd->add_option("--samples", lc.oracle_samples, "Random cases for the oracle comparison");
  lcmd->add_option("--seed", lc.seed, "Seed for the random cases");
  lcmd->add_option("--perturb-epsilon", lc.perturb_epsilon)->group("");
  auto* sw = app.add_subcommand("sweep", "Distill once per value of a config key");
  add_common(sw);
  sw->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  sw->add_option("--sweep", sweep, "key=a..b or key=v1,v2 (d is short for distill.depth)")->required();
  sw->add_flag("--baseline", baseline, "Also train scratch students and report the difference");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*tt) return cmd_train_teacher(common);
    if (*ds) return sweep.empty() ? cmd_distill(common, teacher, baseline) : cmd_sweep(common, teacher, sweep, baseline);
    if (*ev) return cmd_eval(common, checkpoint);
    if (*lcmd) return cmd_losscheck(lc);
    if (*sw) return cmd_sweep(common, teacher, sweep, baseline);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kCheckFailed;
  }
  return kUsageError;
}

int run_cli(int argc, char** argv) { return run_cli(std::vector<std::string>(argv, argv + argc)); }

}  // namespace ldrld::cli
