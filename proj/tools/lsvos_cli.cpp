// lsvos: generate data, train, evaluate, ablate and render reports.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsvos/pipeline.hpp"
#include "lsvos/synthgen.hpp"

namespace fs = std::filesystem;
using namespace lsvos;
using ojson = nlohmann::ordered_json;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kBadInput = 2;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", args.overrides, "override a config key (key=value, repeatable)");
}

ConfigMap resolve_map(const ConfigArgs& args) {
  ConfigMap m = args.config_path.empty() ? ConfigMap{} : load_config_file(args.config_path);
  apply_overrides(m, args.overrides);
  return m;
}

fs::path output_root() {
  const char* env = std::getenv("LSVOS_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

void print_table(std::ostream& os, const std::vector<MethodMetrics>& methods) {
  os << "method                 AUROC    AUPR   FPR95     ECE\n";
  for (const auto& m : methods) {
    std::string name = m.method;
    name.resize(std::max<std::size_t>(name.size(), 20), ' ');
    os << name << "  " << pct(m.auroc) << "  " << pct(m.aupr_id) << "  " << pct(m.fpr95) << "  "
       << (m.ece ? pct(*m.ece) : std::string("     -")) << '\n';
  }
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << s;
  if (!os) throw std::runtime_error("write to '" + p.string() + "' failed");
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  ConfigArgs cfg;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<double> fp_overlap;
  std::string out;
  std::size_t scenes = 0;
  std::size_t boxes_per_scene = 8;
  double jitter = 0.05;
  bool csv = false;
};

int cmd_generate(const GenerateArgs& a) {
  ConfigMap m = resolve_map(a.cfg);
  m["gen.preset"] = a.preset;
  if (a.seed) m["gen.seed"] = std::to_string(*a.seed);
  if (a.fp_overlap) m["gen.fp_overlap"] = format_double(*a.fp_overlap);
  const ExperimentConfig cfg = ExperimentConfig::from_map(m);
  const GeneratorSpec& spec = cfg.generator;

  const fs::path dir = a.out.empty() ? output_root() / ("data-" + a.preset + "-seed" + std::to_string(spec.seed))
                                     : fs::path(a.out);
  ensure_dir(dir);
  const auto data = generate_features(spec);
  write_feature_file((dir / "train.vosf").string(), data.train);
  write_feature_file((dir / "val.vosf").string(), data.val);
  if (a.csv) {
    for (const auto* ds : {&data.train, &data.val}) {
      std::ostringstream os;
      write_feature_csv(os, *ds);
      write_text(dir / (ds == &data.train ? "train.csv" : "val.csv"), os.str());
    }
  }

  ojson meta;
  meta["preset"] = a.preset;
  meta["seed"] = spec.seed;
  meta["rng"] = std::string(Rng::kAlgorithm);
  meta["feature_dim"] = spec.dim;
  meta["num_classes"] = spec.num_classes;
  meta["class_names"] = data.train.class_names;
  meta["fp_overlap"] = spec.fp_overlap;
  meta["fp_displacement"] = spec.fp_displacement;
  meta["class_separation"] = spec.class_separation;
  meta["counts"] = {{"train", {{"id", data.train.count(FeatureLabel::id)}, {"fp", data.train.count(FeatureLabel::fp)}}},
                    {"val", {{"id", data.val.count(FeatureLabel::id)}, {"fp", data.val.count(FeatureLabel::fp)}}}};

  std::size_t n_pred = 0, n_id = 0;
  if (a.scenes > 0) {
    const fs::path sdir = dir / "scenes";
    ensure_dir(sdir);
    const auto scenes = generate_scenes(a.scenes, a.boxes_per_scene, a.jitter, spec.seed);
    std::ostringstream labels;
    labels << "scene,prediction,class_id,iou,label,intended\n";
    const auto th = default_iou_thresholds();
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const auto& sc = scenes[s].scene;
      char name[32];
      std::snprintf(name, sizeof name, "scene_%04zu.csv", s);
      std::ostringstream os;
      write_scene_csv(os, sc);
      write_text(sdir / name, os.str());
      const auto lab = label_detections(sc.predictions, sc.ground_truths, th);
      for (std::size_t i = 0; i < lab.size(); ++i) {
        double best = 0.0;
        for (const auto& g : sc.ground_truths) {
          if (g.class_id == sc.predictions[i].class_id) best = std::max(best, iou_3d(sc.predictions[i].box, g.box));
        }
        labels << s << ',' << i << ',' << sc.predictions[i].class_id << ',' << format_double(best) << ','
               << to_string(lab[i]) << ',' << to_string(scenes[s].intended[i]) << '\n';
        ++n_pred;
        n_id += lab[i] == FeatureLabel::id;
      }
    }
    write_text(sdir / "labels.csv", labels.str());
    meta["scenes"] = {{"count", a.scenes}, {"boxes_per_scene", a.boxes_per_scene}, {"jitter", a.jitter},
                      {"predictions", n_pred}, {"labeled_id", n_id}};
  }
  write_text(dir / "dataset.json", meta.dump(2) + "\n");

  std::cout << "wrote " << dir.string() << '\n'
            << "  train: " << data.train.count(FeatureLabel::id) << " ID, " << data.train.count(FeatureLabel::fp)
            << " FP\n"
            << "  val:   " << data.val.count(FeatureLabel::id) << " ID, " << data.val.count(FeatureLabel::fp) << " FP\n"
            << "  D=" << spec.dim << " K=" << spec.num_classes << " fp_overlap=" << format_double(spec.fp_overlap)
            << '\n';
  if (a.scenes > 0) std::cout << "  scenes: " << a.scenes << " (" << n_pred << " predictions, " << n_id << " ID)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigArgs cfg;
  std::string out;
  bool dry_run = false;
};

int cmd_train(const TrainArgs& a) {
  const ExperimentConfig cfg = ExperimentConfig::from_map(resolve_map(a.cfg));
  const std::string hash = config_hash(cfg);
  const RunPaths paths{a.out.empty() ? output_root() / ("run-" + hash) : fs::path(a.out)};
  if (a.dry_run) {
    std::cout << "config ok (hash " << hash << ")\n" << serialize_config(cfg.to_map());
    std::cout << "phase 1: " << cfg.effective_epochs(cfg.phase1_epochs) << " epochs, phase 2: "
              << cfg.effective_epochs(cfg.phase2_epochs) << " epochs\n"
              << "would write " << paths.dir.string() << '\n';
    return kOk;
  }
  ensure_dir(paths.dir);
  const auto t0 = std::chrono::steady_clock::now();
  const DataSplits data = load_data(cfg);
  std::cerr << "training " << hash << " on " << data.train.records.size() << " train / " << data.val.records.size()
            << " val features\n";
  const RunResult r = run_experiment(cfg, data);
  write_run_outputs(paths, cfg, data, r);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(paths, cfg, secs);
  print_table(std::cout, r.report.methods);
  std::cout << "run dir: " << paths.dir.string() << "  (" << std::fixed << std::setprecision(1) << secs << " s)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string run;
  std::vector<std::string> overrides;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const RunPaths paths{fs::path(a.run)};
  ConfigMap m = load_config_file(paths.config().string());
  apply_overrides(m, a.overrides);
  const ExperimentConfig cfg = ExperimentConfig::from_map(m);
  const ModelBundle bundle = load_bundle(paths.checkpoint().string());
  const DataSplits data = load_data(cfg);
  if (bundle.ae.feature_dim() != data.val.dim || bundle.ae.num_classes() != data.val.num_classes) {
    throw InvalidInput("checkpoint dimensions do not match the evaluation data");
  }
  const EvaluationReport rep = evaluate_bundle(cfg, data, bundle);
  write_text(paths.dir / "evaluation.json", report_json(rep, false).dump(2) + "\n");
  print_table(std::cout, rep.methods);
  return kOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  ConfigArgs cfg;
  std::vector<std::string> sweeps;
  std::string table;
  std::size_t jobs = 1;
  std::string out;
};

int cmd_ablate(const AblateArgs& a) {
  const ConfigMap base = resolve_map(a.cfg);
  const ExperimentConfig base_cfg = ExperimentConfig::from_map(base);
  std::vector<ConfigMap> sweep;
  if (a.table == "iv") {
    sweep = noise_ablation_grid();
  } else if (a.table == "v") {
    sweep = lambda_ablation_grid();
  } else if (!a.table.empty()) {
    throw InvalidInput("--table must be iv or v");
  }
  for (const auto& m : zip_sweeps(a.sweeps)) sweep.push_back(m);
  if (sweep.empty()) throw InvalidInput("nothing to sweep: give --sweep or --table");

  const fs::path dir = a.out.empty() ? output_root() / ("ablate-" + config_hash(base_cfg)) : fs::path(a.out);
  ensure_dir(dir);
  const auto rows = ablate(base, sweep, a.jobs, [&](std::size_t i, const AblationRow& row) {
    std::string desc;
    for (const auto& [k, v] : row.overrides) desc += (desc.empty() ? "" : " ") + k + "=" + v;
    std::cerr << "[" << i + 1 << "/" << sweep.size() << "] " << (desc.empty() ? "(base)" : desc) << ": "
              << (row.report ? "ok" : "FAILED " + row.error) << '\n';
  });
  write_text(dir / "ablation.csv", ablation_csv(rows));
  write_text(dir / "ablation.json", ablation_json(rows).dump(2) + "\n");

  std::size_t failed = 0;
  for (const auto& row : rows) {
    std::string desc;
    for (const auto& [k, v] : row.overrides) desc += (desc.empty() ? "" : " ") + k + "=" + v;
    std::cout << "== " << (desc.empty() ? "(base)" : desc) << '\n';
    if (row.report) {
      print_table(std::cout, row.report->methods);
    } else {
      std::cout << "failed: " << row.error << '\n';
      ++failed;
    }
  }
  std::cout << rows.size() << " runs, " << failed << " failed; tables in " << dir.string() << '\n';
  return failed == 0 ? kOk : kRunFailed;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string run;
  std::string out;
};

std::string md_cell(const ojson& v) {
  if (v.is_null()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v.get<double>());
  return buf;
}

void md_methods(std::ostream& os, const ojson& methods) {
  os << "| Method | AUROC | AUPR | FPR95 | ECE |\n|---|---|---|---|---|\n";
  for (const auto& [name, m] : methods.items()) {
    os << "| " << name << " | " << md_cell(m["auroc"]) << " | " << md_cell(m["aupr"]) << " | " << md_cell(m["fpr95"])
       << " | " << md_cell(m["ece"]) << " |\n";
  }
}

int cmd_report(const ReportArgs& a) {
  const fs::path dir(a.run);
  std::ostringstream os;
  if (fs::exists(dir / "ablation.json")) {
    const ojson rows = ojson::parse(read_text(dir / "ablation.json"));
    os << "# Ablation\n\n";
    for (const auto& row : rows) {
      std::string desc;
      for (const auto& [k, v] : row["overrides"].items()) desc += (desc.empty() ? "" : ", ") + k + " = " + v.get<std::string>();
      os << "## " << (desc.empty() ? "base" : desc) << "\n\n";
      if (row["status"] == "ok") {
        md_methods(os, row["report"]["methods"]);
      } else {
        os << "Run failed: " << row["error"].get<std::string>() << '\n';
      }
      os << '\n';
    }
  } else {
    const ojson rep = ojson::parse(read_text(RunPaths{dir}.report()));
    os << "# Run " << rep["config_hash"].get<std::string>() << "\n\n"
       << "seed " << rep["seed"] << ", synthesis " << rep["synthesis_method"].get<std::string>() << ", "
       << rep["counts"]["id"] << " ID / " << rep["counts"]["ood"] << " FP held-out items. "
       << "Values in %, AUPR with ID as positive, FPR at " << md_cell(rep["target_tpr"]) << "% TPR.\n\n";
    md_methods(os, rep["methods"]);
    os << "\nCurves: roc.csv, pr.csv. Score histograms: histogram.csv. Feature projection: pca.csv.\n";
  }
  if (a.out.empty()) {
    std::cout << os.str();
  } else {
    write_text(a.out, os.str());
    std::cout << "wrote " << a.out << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsvos: latent-space virtual outlier synthesis for detector false-positive filtering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic feature dataset (and optional box scenes)");
  add_config_flags(g, gen.cfg);
  g->add_option("--preset", gen.preset, "generator preset")->check(CLI::IsMember({"desk"}));
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--fp-overlap", gen.fp_overlap, "FP/ID overlap in [0, 1]")->check(CLI::Range(0.0, 1.0));
  g->add_option("-o,--out", gen.out, "output directory (default $LSVOS_OUT/data-<preset>-seed<seed>)");
  g->add_option("--scenes", gen.scenes, "also write this many labeled box scenes");
  g->add_option("--boxes-per-scene", gen.boxes_per_scene, "ground-truth boxes per scene")->check(CLI::PositiveNumber);
  g->add_option("--jitter", gen.jitter, "relative pose jitter of predictions")->check(CLI::NonNegativeNumber);
  g->add_flag("--csv", gen.csv, "also write train.csv and val.csv");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train both phases and evaluate; writes a run directory");
  add_config_flags(t, tr.cfg);
  t->add_option("-o,--out", tr.out, "run directory (default $LSVOS_OUT/run-<config hash>)");
  t->add_flag("--dry-run", tr.dry_run, "validate the config and exit");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "re-score a trained run's checkpoint on its held-out split");
  e->add_option("run", ev.run, "run directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("-s,--set", ev.overrides, "override a config key, e.g. dataset=DIR or methods=default");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "one full run per override set; consolidated CSV/JSON tables");
  add_config_flags(b, ab.cfg);
  b->add_option("--sweep", ab.sweeps, "key=v1,v2,... (several --sweep flags are zipped)");
  b->add_option("--table", ab.table, "built-in grid: iv (alpha, beta) or v (lambda)")->check(CLI::IsMember({"iv", "v"}));
  b->add_option("-j,--jobs", ab.jobs, "runs in parallel")->check(CLI::PositiveNumber);
  b->add_option("-o,--out", ab.out, "output directory (default $LSVOS_OUT/ablate-<config hash>)");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "render a run or ablation directory as Markdown");
  r->add_option("dir", rp.run, "run or ablation directory")->required()->check(CLI::ExistingDirectory);
  r->add_option("-o,--out", rp.out, "write to this file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_evaluate(ev);
    if (b->parsed()) return cmd_ablate(ab);
    if (r->parsed()) return cmd_report(rp);
  } catch (const InvalidInput& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    if (std::string(ex.what()).find("unknown config key") != std::string::npos) {
      std::cerr << "\nvalid keys:\n";
      for (const auto& k : config_schema()) {
        std::cerr << "  " << k.name << std::string(k.name.size() < 26 ? 26 - k.name.size() : 1, ' ') << k.help
                  << " [" << k.default_value << "]\n";
      }
    }
    return kBadInput;
  } catch (const FormatError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kBadInput;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kRunFailed;
  }
  return kBadInput;
}
