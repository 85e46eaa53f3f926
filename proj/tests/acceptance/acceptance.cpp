// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ldrld/cli/commands.hpp"
#include "ldrld/cli/losscheck.hpp"
#include "ldrld/cli/report.hpp"
#include "ldrld/losses.hpp"
#include "ldrld/oracle.hpp"
#include "ldrld/pairs.hpp"
#include "support/generators.hpp"

using namespace ldrld;
using ldrld::testing::Gen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Verdict oracle_equivalence() {
  const auto start = Clock::now();
  Gen g(1);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    worst = std::max(worst, std::abs(ldrld_total(zt, zs, label, cfg).total - oracle::ldrld(zt, zs, label, cfg)));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-9 && secs < 30.0,
          "1000 samples, max |diff| " + num(worst, 3) + " (< 1e-9), " + num(secs, 3) + " s (< 30 s)"};
}

Verdict gradient_check() {
  const auto start = Clock::now();
  Gen g(2);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    const RankOrder frozen = rank_by_student(zs);
    Tensor x = Tensor::vector(zs, true);
    backward(sample_loss(zt, x, label, cfg, &frozen).total);
    const auto fd = oracle::fd_gradient(
        [&](std::span<const double> v) {
          NoGradGuard ng;
          return sample_loss(zt, Tensor::vector(v), label, cfg, &frozen).total.item();
        },
        zs);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      diff = std::max(diff, std::abs(x.grad()[i] - fd[i]));
      scale = std::max({scale, std::abs(x.grad()[i]), std::abs(fd[i])});
    }
    worst = std::max(worst, diff / std::max(scale, 1e-8));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          "200 samples, max relative error " + num(worst, 3) + " (< 1e-4), " + num(secs, 3) + " s (< 60 s)"};
}

Verdict pair_structure() {
  for (std::size_t d = 2; d <= 30; ++d) {
    if (generate_pairs(d).size() != d * (d - 1) / 2) return {false, "wrong count at d=" + std::to_string(d)};
  }
  std::set<std::pair<std::size_t, std::size_t>> brute, got;
  for (std::size_t i = 1; i <= 7; ++i) {
    for (std::size_t j = i + 1; j <= 7; ++j) brute.emplace(i, j);
  }
  const auto pairs = generate_pairs(7);
  for (const auto& p : pairs) got.emplace(p.first, p.second);
  return {pairs.size() == 21 && got == brute, "d(d-1)/2 for d=2..30; d=7 gives 21 pairs equal to brute force"};
}

Verdict adw_values() {
  const AdwParams p;  // 1.5, 2.0, 0.05
  const double i12 = irw(1, 2, p), e12 = erd(1, 2, p), w12 = adw(1, 2, p);
  bool ok = std::abs(i12 - 0.4) < 1e-12 && std::abs(e12 - 2.0 * std::exp(-0.15)) < 1e-12 &&
            std::abs(w12 - cli::kAdwGolden12) < 1e-6;
  std::size_t comparisons = 0;
  for (std::size_t a1 = 1; a1 <= 20; ++a1) {
    for (std::size_t a2 = a1 + 1; a2 <= 20; ++a2) {
      for (std::size_t b1 = 1; b1 <= 20; ++b1) {
        for (std::size_t b2 = b1 + 1; b2 <= 20; ++b2) {
          const bool same_sum = a1 + a2 == b1 + b2, same_gap = a2 - a1 == b2 - b1;
          const bool a_first = (same_sum && a2 - a1 < b2 - b1) || (same_gap && a1 + a2 < b1 + b2);
          if (!a_first) continue;
          ++comparisons;
          ok = ok && adw(a1, a2, p) > adw(b1, b2, p);
        }
      }
    }
  }
  return {ok, "IRW(1,2)=" + num(i12, 10) + " ERD(1,2)=" + num(e12, 10) + " Omega(1,2)=" + num(w12, 10) + "; " +
                  std::to_string(comparisons) + " monotonicity comparisons"};
}

Verdict loss_identities() {
  Gen g(5);
  double negative = 0.0, at_equal = 0.0, shift = 0.0;
  for (int n = 0; n < 500; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    const auto parts = ldrld_total(zt, zs, label, cfg);
    negative = std::min({negative, parts.weighted_pairs, parts.llki, parts.rntk});
    const auto same = ldrld_total(zs, zs, label, cfg);
    at_equal = std::max({at_equal, std::abs(same.weighted_pairs), std::abs(same.llki), std::abs(same.rntk)});
    const double k = g.uniform(-10.0, 10.0);
    auto zt2 = zt, zs2 = zs;
    for (auto& v : zt2) v += k;
    for (auto& v : zs2) v += k;
    const auto moved = ldrld_total(zt2, zs2, label, cfg);
    shift = std::max({shift, std::abs(moved.weighted_pairs - parts.weighted_pairs),
                      std::abs(moved.llki - parts.llki), std::abs(moved.rntk - parts.rntk)});
  }
  return {negative >= 0.0 && at_equal <= 1e-10 && shift <= 1e-10,
          "500 configs: min term " + num(negative, 3) + ", max at teacher==student " + num(at_equal, 3) +
              ", max shift change " + num(shift, 3) + " (tol 1e-10)"};
}

cli::ExperimentConfig desk_config() {
  return cli::parse_config(cli::load_config_document(std::string(LDRLD_SOURCE_DIR) + "/configs/desk.json", {}));
}

Verdict reductions(const cli::ExperimentConfig& desk, const cli::DataPair& data, const Mlp& teacher) {
  // alpha = beta = 0 against plain supervised training, full desk student, seed 0.
  auto zero = desk;
  zero.distill.alpha = zero.distill.beta = 0.0;
  zero.seeds = {0};
  const auto distilled = cli::run_students(zero, data, &teacher);
  const auto scratch = cli::run_students(zero, data, nullptr);
  bool same = distilled[0].result.model.flat_parameters() == scratch[0].result.model.flat_parameters();
  const auto& ea = distilled[0].result.record.epochs;
  const auto& eb = scratch[0].result.record.epochs;
  same = same && ea.size() == eb.size();
  for (std::size_t i = 0; same && i < ea.size(); ++i) {
    same = ea[i].loss.total == eb[i].loss.total && ea[i].loss.task == eb[i].loss.task &&
           ea[i].train_accuracy == eb[i].train_accuracy && ea[i].eval_accuracy == eb[i].eval_accuracy;
  }

  // Unweighted pair loss against the oracle and against a literal pair sum.
  Gen g(6);
  double worst = 0.0;
  for (int n = 0; n < 300; ++n) {
    const std::size_t d = g.index(2, 20);
    auto cfg = g.config(d);
    cfg.adw_enabled = false;
    const auto t = g.vec(d), s = g.vec(d);
    const double prod = pair_loss(t, s, cfg);
    double literal = 0.0;
    for (const auto& p : generate_pairs(d)) {
      const std::vector<double> tt{t[p.first - 1], t[p.second - 1]}, ss{s[p.first - 1], s[p.second - 1]};
      literal += oracle::softmax_kl(tt, ss, cfg.tau);
    }
    if (cfg.tau_square_scaling) literal *= cfg.tau * cfg.tau;
    worst = std::max({worst, std::abs(prod - oracle::pair_term(t, s, cfg) * (cfg.tau_square_scaling ? cfg.tau * cfg.tau : 1.0)),
                      std::abs(prod - literal)});
  }
  return {same && worst < 1e-9, std::string("alpha=beta=0 trajectory ") + (same ? "bit-identical" : "DIFFERS") +
                                    " to supervised (" + std::to_string(ea.size()) +
                                    " epochs); unweighted pair loss max |diff| " + num(worst, 3)};
}

struct DeskResults {
  double scratch, full, local_only, rntk_only;
  double seconds;
};

Verdict desk_experiment(const cli::ExperimentConfig& desk, const cli::DataPair& data, const Mlp& teacher,
                        double teacher_seconds, DeskResults& out) {
  const auto start = Clock::now();
  const auto finals = [](const std::vector<cli::StudentRun>& runs) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.result.record.epochs.back().eval_accuracy);
    return v;
  };
  auto local = desk, rntk = desk;
  local.distill.beta = 0.0;
  rntk.distill.alpha = 0.0;
  out.scratch = mean(finals(cli::run_students(desk, data, nullptr)));
  out.full = mean(finals(cli::run_students(desk, data, &teacher)));
  out.local_only = mean(finals(cli::run_students(local, data, &teacher)));
  out.rntk_only = mean(finals(cli::run_students(rntk, data, &teacher)));
  out.seconds = seconds_since(start) + teacher_seconds;
  const bool a = out.full >= out.scratch;
  const bool b = out.full >= out.local_only && out.full >= out.rntk_only;
  return {a && b && out.seconds < 600.0,
          "3 seeds, mean eval accuracy: scratch " + num(out.scratch) + ", LDRLD " + num(out.full) + ", local only " +
              num(out.local_only) + ", RNTK only " + num(out.rntk_only) + "; (a) " + (a ? "holds" : "fails") +
              ", (b) " + (b ? "holds" : "fails") + "; " + num(out.seconds, 3) + " s (< 600 s)"};
}

Verdict depth_sweep(const cli::ExperimentConfig& desk, const cli::DataPair& data, const Mlp& teacher) {
  std::string detail = "mean eval accuracy by depth:";
  double best = -1.0, at2 = 0.0;
  std::size_t best_d = 0;
  for (std::size_t d : {2, 3, 5, 7, 10}) {
    auto cfg = desk;
    cfg.distill.depth = d;
    std::vector<double> acc;
    for (const auto& r : cli::run_students(cfg, data, &teacher)) acc.push_back(r.result.record.epochs.back().eval_accuracy);
    const double m = mean(acc);
    if (d == 2) at2 = m;
    if (m > best) {
      best = m;
      best_d = d;
    }
    detail += " d=" + std::to_string(d) + ":" + num(m);
  }
  detail += "; best d=" + std::to_string(best_d);
  return {best_d != 2 && best > at2, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "ldrld_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = LDRLD_CLI_PATH;
  const std::string config = std::string(LDRLD_SOURCE_DIR) + "/configs/smoke.json";
  const fs::path out = root / "out";
  const std::string teacher = (out / "teacher" / "teacher.ckpt").string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"train-teacher", "train-teacher --config " + config + " --out " + (out / "teacher").string()},
      {"distill", "distill --config " + config + " --teacher " + teacher + " --baseline --out " +
                      (out / "distill").string()},
      {"sweep", "sweep --config " + config + " --teacher " + teacher + " --sweep d=2,3,5 --out " +
                    (out / "sweep").string()},
      {"eval", "eval --config " + config + " --checkpoint " + teacher + " --out " + (out / "eval").string()},
      {"losscheck", "losscheck --samples 200"},
  };
  std::map<std::string, std::string> first;
  std::size_t compared = 0;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(out);
    for (const auto& [name, args] : commands) {
      const fs::path log = root / (name + ".stdout");
      if (shell("LDRLD_LOG=off " + cli + " " + args + " > " + log.string()) != 0) {
        return {false, name + " exited non-zero"};
      }
      const std::string text = slurp(log);
      if (name == "losscheck" || name == "sweep" || name == "distill") {
        if (round == 0) first[log.string()] = text;
        else if (first[log.string()] != text) return {false, name + " stdout differs between runs"};
      }
    }
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const auto name = entry.path().filename().string();
      if (name.find(".timing.") != std::string::npos) continue;  // wall-clock only
      const std::string bytes = slurp(entry.path());
      if (round == 0) {
        first[entry.path().string()] = bytes;
      } else {
        auto it = first.find(entry.path().string());
        if (it == first.end() || it->second != bytes) return {false, entry.path().string() + " differs"};
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  return {compared > 0, std::to_string(compared) +
                            " checkpoints, reports and curve files byte-identical across two CLI runs of "
                            "train-teacher, distill, sweep, eval; losscheck/distill/sweep stdout identical"};
}

}  // namespace

int main() {
  cli::configure_logging();
  int failures = 0;
  const auto report = [&](int id, const char* name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << v.detail << std::endl;
    failures += !v.pass;
  };
  const auto guarded = [&](int id, const char* name, const std::function<Verdict()>& fn) {
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, "oracle equivalence", oracle_equivalence);
  guarded(2, "gradient correctness", gradient_check);
  guarded(3, "combination structure", pair_structure);
  guarded(4, "ADW golden values and monotonicity", adw_values);
  guarded(5, "loss-term identities", loss_identities);

  // Criteria 6 to 8 share the desk benchmark and its teacher.
  try {
    const auto desk = desk_config();
    const auto data = cli::load_data(desk.dataset);
    const auto t0 = Clock::now();
    const Mlp teacher = cli::train_teacher(desk, data).model;
    const double teacher_seconds = seconds_since(t0);
    std::cout << "      desk teacher eval accuracy " << num(accuracy(teacher, data.eval)) << std::endl;
    guarded(6, "reduction checks", [&] { return reductions(desk, data, teacher); });
    DeskResults dr{};
    guarded(7, "desk-scale ablation", [&] { return desk_experiment(desk, data, teacher, teacher_seconds, dr); });
    guarded(8, "depth-sweep shape", [&] { return depth_sweep(desk, data, teacher); });
  } catch (const std::exception& e) {
    for (int id : {6, 7, 8}) report(id, "desk benchmark", {false, std::string("setup threw: ") + e.what()});
  }
  guarded(9, "determinism", determinism);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
