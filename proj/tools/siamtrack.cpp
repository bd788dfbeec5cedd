// Command-line entry point: gen-data, train, eval, sweep, report.
#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "siamtrack/checkpoint.hpp"
#include "siamtrack/config.hpp"
#include "siamtrack/perturb.hpp"
#include "siamtrack/trackeval.hpp"
#include "siamtrack/train.hpp"

namespace fs = std::filesystem;
using namespace siamtrack;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Relative output paths land under $SIAMTRACK_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& out) {
  const fs::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("SIAMTRACK_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
  return p;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_experiment_config("{}") : load_experiment_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// A dataset directory, or a gen-data output holding <dir>/<sub>.
std::vector<Sequence> load_data(const fs::path& dir, const std::string& sub) {
  if (fs::exists(dir / "manifest.json")) return read_dataset(dir);
  if (fs::exists(dir / sub / "manifest.json")) return read_dataset(dir / sub);
  throw std::runtime_error("no dataset found at " + dir.string() + " (expected manifest.json or " + sub + "/)");
}

// Settings the checkpoint was trained with; --config overrides them.
ExperimentConfig config_for_checkpoint(const Checkpoint& ck, const std::string& config_path) {
  if (!config_path.empty()) return load_experiment_config(config_path);
  auto it = ck.metadata.find("train_config");
  if (it == ck.metadata.end()) return parse_experiment_config("{}");
  return parse_experiment_config(it->second);
}

int cmd_gen_data(const std::string& config_path, const std::string& out_arg, std::uint64_t seed) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.data.train.seed = mix_seed(seed, cfg.data.train.seed);
  cfg.data.eval.seed = mix_seed(seed, cfg.data.eval.seed);
  const fs::path out = output_path(out_arg);
  fs::create_directories(out);
  write_dataset(out / "train", generate_dataset(cfg.data.train));
  write_dataset(out / "eval", generate_dataset(cfg.data.eval));
  write_text(out / "config.json", experiment_config_to_string(cfg) + "\n");
  std::cout << "wrote " << (out / "train").string() << " and " << (out / "eval").string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& variant,
              std::uint64_t seed, const std::string& out_arg, const std::string& resume, bool quiet) {
  ExperimentConfig cfg = config_or_default(config_path);
  cfg.train.variant = variant_from_string(variant);
  cfg.train.seed = seed;
  if (cfg.train.variant == Variant::no_detector) cfg.train.weights.detector = 0.0;
  const fs::path run_dir = output_path(out_arg) / std::to_string(seed);
  const auto train_data = load_data(data, "train");
  std::vector<Sequence> eval_data;
  if (fs::exists(fs::path(data) / "eval" / "manifest.json")) eval_data = read_dataset(fs::path(data) / "eval");
  fs::create_directories(run_dir);
  write_text(run_dir / "experiment.json", experiment_config_to_string(cfg) + "\n");
  TrainOptions options;
  options.run_dir = run_dir;
  options.verbose = !quiet;
  if (!resume.empty()) options.resume = fs::path(resume);
  const RunRecord record = train_run(cfg.train, train_data, eval_data, options);
  std::cout << "wrote " << (run_dir / "metrics.csv").string() << " (" << record.rows.size() << " rows)\n";
  if (!record.checkpoints.empty()) std::cout << "final checkpoint " << record.checkpoints.back().string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& mode, std::uint64_t seed,
             const std::string& config_path, const std::string& out_arg) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  ExperimentConfig cfg = config_for_checkpoint(ck, config_path);
  EvalConfig eval = cfg.train.eval;
  eval.target_mode = target_mode_from_string(mode);
  eval.seed = seed;
  const TrackerModel model{ck.config, ck.params};
  const auto dataset = load_data(data, "eval");
  const EvalResult result = supervised_evaluate(model, dataset, cfg.train.geometry, eval, cfg.train.select);

  const fs::path out = output_path(out_arg);
  fs::create_directories(out);
  const std::string model_name = fs::path(checkpoint).stem().string();
  write_sequence_csv(out / "sequences.csv", model_name, seed, result);
  // Per-split and overall R / A for this single model.
  std::map<std::string, std::vector<SequenceResult>> by_split;
  for (const auto& s : result.sequences) by_split[s.split].push_back(s);
  std::ofstream summary(out / "summary.csv", std::ios::trunc);
  summary << "model,target_mode,split,n_sequences,R,A,zero_failure_fraction\n";
  auto row = [&](const std::string& split, const std::vector<SequenceResult>& seqs) {
    const EvalResult r = aggregate(seqs);
    const auto clean = std::count_if(seqs.begin(), seqs.end(), [](const auto& s) { return s.failures == 0; });
    summary << model_name << "," << to_string(eval.target_mode) << "," << split << "," << seqs.size() << ","
            << num(r.robustness) << "," << num(r.accuracy) << ","
            << num(seqs.empty() ? 0.0 : static_cast<double>(clean) / seqs.size()) << "\n";
  };
  for (const auto& [split, seqs] : by_split) row(split, seqs);
  row("all", result.sequences);
  std::cout << "R " << result.robustness << " A " << result.accuracy << " -> " << out.string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& checkpoint, const std::string& data, const std::string& kind,
              const std::string& config_path, const std::string& out_arg) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const ExperimentConfig cfg = config_for_checkpoint(ck, config_path);
  const TrackerModel model{ck.config, ck.params};
  const auto dataset = load_data(data, "eval");
  const fs::path out = output_path(out_arg);
  if (kind == "search") {
    write_grid_report(out, "search", search_sweep(model, dataset, cfg.sweep, cfg.train.geometry, cfg.train.select));
  } else if (kind == "target") {
    write_grid_report(out, "target", target_sweep(model, dataset, cfg.sweep, cfg.train.geometry, cfg.train.select));
  } else {
    write_curve_report(out, "staleness",
                       staleness_sweep(model, dataset, cfg.sweep, cfg.train.geometry, cfg.train.select));
  }
  std::cout << "wrote " << (out / (kind + ".csv")).string() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_arg) {
  // Every metrics.csv under the given directories is one run.
  std::vector<fs::path> files;
  for (const auto& r : runs) {
    const fs::path root(r);
    if (fs::is_regular_file(root)) {
      files.push_back(root);
      continue;
    }
    if (!fs::is_directory(root)) throw std::runtime_error("no such run directory: " + r);
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && e.path().filename() == "metrics.csv") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no metrics.csv found under the given runs");
  std::map<std::string, std::vector<RunRecord>> by_variant;
  for (const auto& f : files) {
    RunRecord rec = read_metrics_csv(f);
    by_variant[rec.variant].push_back(std::move(rec));
  }
  for (auto& [variant, recs] : by_variant) {
    std::sort(recs.begin(), recs.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  }

  const fs::path out = output_path(out_arg);
  fs::create_directories(out);
  std::ofstream curves(out / "curves.csv", std::ios::trunc);
  curves << "variant,step,n_seeds,R_mean,R_se,A_mean,A_se,loss_mean,loss_se\n";
  std::ofstream table(out / "ablation.csv", std::ios::trunc);
  table << "variant,step,n_seeds,R_mean,R_se,A_mean,A_se\n";
  std::map<std::string, std::vector<CurvePoint>> aggregated;
  for (const auto& [variant, recs] : by_variant) {
    if (recs.size() < 2) {
      std::cerr << "warning: variant " << variant << " has a single run; standard errors left empty\n";
      for (const auto& r : recs.front().rows) {
        curves << variant << "," << r.step << ",1," << num(r.robustness) << ",," << num(r.accuracy) << ",,"
               << num(r.loss.total) << ",\n";
      }
      const auto& last = recs.front().rows.back();
      table << variant << "," << last.step << ",1," << num(last.robustness) << ",," << num(last.accuracy) << ",\n";
      continue;
    }
    const auto points = multi_seed(recs);
    aggregated[variant] = points;
    for (const auto& p : points) {
      curves << variant << "," << p.step << "," << p.robustness.n << "," << num(p.robustness.mean) << ","
             << num(p.robustness.se) << "," << num(p.accuracy.mean) << "," << num(p.accuracy.se) << ","
             << num(p.loss_total.mean) << "," << num(p.loss_total.se) << "\n";
    }
    const auto& last = points.back();
    table << variant << "," << last.step << "," << last.robustness.n << "," << num(last.robustness.mean) << ","
          << num(last.robustness.se) << "," << num(last.accuracy.mean) << "," << num(last.accuracy.se) << "\n";
  }
  // Paired difference at the final eval point when both variants share seeds.
  if (by_variant.count("with_detector") && by_variant.count("no_detector")) {
    const auto& w = by_variant["with_detector"];
    const auto& n = by_variant["no_detector"];
    if (w.size() == n.size() && w.size() >= 2) {
      std::vector<double> dr, da;
      for (std::size_t i = 0; i < w.size(); ++i) {
        dr.push_back(w[i].rows.back().robustness - n[i].rows.back().robustness);
        da.push_back(w[i].rows.back().accuracy - n[i].rows.back().accuracy);
      }
      const MeanSE r = mean_and_se(dr), a = mean_and_se(da);
      table << "with_detector-no_detector," << w.front().rows.back().step << "," << r.n << "," << num(r.mean) << ","
            << num(r.se) << "," << num(a.mean) << "," << num(a.se) << "\n";
    }
    // Eval points where the detector variant is worse (the early reversal).
    const auto wi = aggregated.find("with_detector");
    const auto ni = aggregated.find("no_detector");
    if (wi != aggregated.end() && ni != aggregated.end() && wi->second.size() == ni->second.size()) {
      std::ofstream rev(out / "crossover.csv", std::ios::trunc);
      rev << "step,R_with_detector,R_no_detector,detector_worse\n";
      for (std::size_t i = 0; i < wi->second.size(); ++i) {
        const double a = wi->second[i].robustness.mean, b = ni->second[i].robustness.mean;
        rev << wi->second[i].step << "," << num(a) << "," << num(b) << "," << (a > b ? 1 : 0) << "\n";
      }
    }
  }
  std::cout << "wrote " << (out / "ablation.csv").string() << " and " << (out / "curves.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Siamese tracker with an auxiliary instance detector: data, training, evaluation, sweeps"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

  std::string config, out, data, variant = "with_detector", resume, checkpoint, mode = "gt", kind;
  std::uint64_t seed = 0;
  bool quiet = false;
  std::vector<std::string> runs;

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset (train/ and eval/)");
  gen->add_option("--config", config, "Experiment config (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Dataset seed");

  auto* train = app.add_subcommand("train", "Train one run; writes <out>/<seed>/");
  train->add_option("--config", config, "Experiment config (JSON)");
  train->add_option("--data", data, "Dataset directory from gen-data")->required();
  train->add_option("--variant", variant, "with_detector or no_detector")
      ->check(CLI::IsMember({"with_detector", "no_detector"}));
  train->add_option("--seed", seed, "Run seed (data order and initialization)");
  train->add_option("--out", out, "Run directory root")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_flag("--quiet", quiet, "No progress lines");

  auto* eval = app.add_subcommand("eval", "Supervised (reset-based) evaluation");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--target-mode", mode, "gt or random_patch")->check(CLI::IsMember({"gt", "random_patch"}));
  eval->add_option("--seed", seed, "Random-patch seed");
  eval->add_option("--config", config, "Override the checkpoint's settings");
  eval->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Perturbation sweep");
  sweep->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  sweep->add_option("--data", data, "Dataset directory")->required();
  sweep->add_option("--kind", kind, "search, target or staleness")
      ->required()
      ->check(CLI::IsMember({"search", "target", "staleness"}));
  sweep->add_option("--config", config, "Override the checkpoint's settings");
  sweep->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Ablation table and seed-averaged curves");
  report->add_option("--runs", runs, "Run directories (searched for metrics.csv)")->required();
  report->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (workers > 0) omp_set_num_threads(workers);

  try {
    if (*gen) return cmd_gen_data(config, out, seed);
    if (*train) return cmd_train(config, data, variant, seed, out, resume, quiet);
    if (*eval) return cmd_eval(checkpoint, data, mode, seed, config, out);
    if (*sweep) return cmd_sweep(checkpoint, data, kind, config, out);
    if (*report) return cmd_report(runs, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
