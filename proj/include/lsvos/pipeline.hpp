#pragma once

// Two-phase training (lambda = 0, then the configured lambda), evaluation of
// every configured scorer on held-out ID vs FP features, run outputs, and
// ablation sweeps.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvos/config.hpp"
#include "lsvos/errors.hpp"
#include "lsvos/feature_store.hpp"
#include "lsvos/metrics.hpp"
#include "lsvos/models.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"
#include "lsvos/scoring.hpp"
#include "lsvos/synthesis.hpp"
#include "lsvos/synthgen.hpp"

namespace lsvos {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct DataSplits {
  FeatureDataset train;
  FeatureDataset val;
};

/// Generated from the config's generator spec, or read from
/// <dataset>/train.vosf and <dataset>/val.vosf.
inline DataSplits load_data(const ExperimentConfig& cfg) {
  if (cfg.dataset == "generate") {
    auto g = generate_features(cfg.generator);
    return {std::move(g.train), std::move(g.val)};
  }
  const std::filesystem::path dir(cfg.dataset);
  DataSplits d{read_feature_file((dir / "train.vosf").string(), "train"),
               read_feature_file((dir / "val.vosf").string(), "val")};
  if (d.train.dim != d.val.dim || d.train.num_classes != d.val.num_classes) {
    throw InvalidInput("train and val feature files disagree on D or K");
  }
  return d;
}

struct PhaseStats {
  std::size_t steps = 0;
  std::size_t ae_steps = 0;
  double last_det_loss = 0.0;
  double last_ae_loss = 0.0;
  double last_unc_loss = 0.0;
  double last_total_loss = 0.0;
};

struct TrainingTrace {
  PhaseStats phase1;
  PhaseStats phase2;
  /// Queue occupancy summed over classes after every step.
  std::vector<std::size_t> queue_occupancy;
};

struct EvaluationReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string synthesis_method;
  double target_tpr = 0.95;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  std::vector<MethodMetrics> methods;
  std::vector<ScoreSet> score_sets;
  TrainingTrace training;

  const MethodMetrics& method(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.method == name) return m;
    }
    throw InvalidInput("report has no method '" + name + "'");
  }
};

struct RunResult {
  EvaluationReport report;
  ModelBundle bundle;
  /// Virtual outliers synthesized from the val ID features after training
  /// (for the 2-D projection); empty if synthesis was not possible.
  Matrix val_synth;
};

namespace detail {

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline std::vector<int> gather(const std::vector<int>& v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

inline Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

inline void check_finite(double v, const char* what, int phase, std::size_t step) {
  if (!std::isfinite(v)) {
    throw Divergence(std::string("non-finite ") + what + " in phase " + std::to_string(phase) + " at step " +
                     std::to_string(step));
  }
}

inline std::string display_name(const std::string& scorer, SynthMethod m) {
  if (scorer == "default") return "default";
  if (scorer == "mahalanobis") return "mahalanobis";
  return to_string(m);
}

}  // namespace detail

/// Optimizer state for the four networks trained jointly.
struct Optimizers {
  AdamState encoder, decoder, head, classifier;

  static Optimizers create(const ModelBundle& b, double lr) {
    AdamConfig c;
    c.learning_rate = lr;
    return {AdamState(c, b.ae.encoder().parameter_count()), AdamState(c, b.ae.decoder().parameter_count()),
            AdamState(c, b.head.net.parameter_count()), AdamState(c, b.classifier.net.parameter_count())};
  }
};

/// Runs both training phases in place on `bundle`.
inline TrainingTrace train_models(const ExperimentConfig& cfg, const DataSplits& data, ModelBundle& bundle, Rng& rng) {
  const Matrix train_id = data.train.features(FeatureLabel::id);
  const std::vector<int> train_id_cls = data.train.classes(FeatureLabel::id);
  const Matrix train_fp = data.train.features(FeatureLabel::fp);
  if (train_id.rows() == 0) throw InvalidInput("training set has no ID features");

  Optimizers opt = Optimizers::create(bundle, cfg.learning_rate);
  FeatureQueue queue(data.train.dim, data.train.num_classes, cfg.queue_capacity);
  SynthParams sp;
  sp.noise = cfg.noise;
  sp.mix_weight = cfg.mix_weight;
  sp.vos_candidates = cfg.vos_candidates;

  const auto n_id = static_cast<std::size_t>(train_id.rows());
  const auto n_fp = static_cast<std::size_t>(train_fp.rows());
  const std::size_t batch = std::min(cfg.batch_size, n_id);
  // FP companions per step, in proportion to the FP:ID ratio of the split.
  const std::size_t fp_per_step =
      n_fp == 0 ? 0 : std::max<std::size_t>(1, (batch * n_fp + n_id - 1) / n_id);

  std::vector<std::size_t> id_order(n_id);
  std::iota(id_order.begin(), id_order.end(), std::size_t{0});
  std::vector<std::size_t> fp_order(n_fp);
  std::iota(fp_order.begin(), fp_order.end(), std::size_t{0});
  std::size_t fp_cursor = n_fp;

  TrainingTrace trace;
  std::size_t global_step = 0;
  for (int phase = 1; phase <= 2; ++phase) {
    const double lambda = phase == 1 ? 0.0 : cfg.lambda;
    const std::size_t epochs = cfg.effective_epochs(phase == 1 ? cfg.phase1_epochs : cfg.phase2_epochs);
    PhaseStats& stats = phase == 1 ? trace.phase1 : trace.phase2;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      shuffle(id_order, rng);
      for (std::size_t start = 0; start < n_id; start += batch) {
        const std::size_t len = std::min(batch, n_id - start);
        const std::span<const std::size_t> idx(id_order.data() + start, len);
        const Matrix u_id = detail::gather_rows(train_id, idx);
        const std::vector<int> cls = detail::gather(train_id_cls, idx);
        queue.push_batch(u_id, cls);
        try {
          // L_det (surrogate): classifier cross-entropy on the ID batch.
          auto det = detection_surrogate_gradients(bundle.classifier, u_id, cls);
          detail::check_finite(det.loss, "detection loss", phase, stats.steps);
          adam_step(bundle.classifier.net, det.grads, opt.classifier);
          stats.last_det_loss = det.loss;

          // L_AE on a class-stratified sample of the queue.
          double ae_value = 0.0;
          if (queue.ready()) {
            const Matrix x = queue.sample(cfg.n_per_class, rng);
            auto ae = ae_gradients(bundle.ae, x);
            detail::check_finite(ae.loss, "auto-encoder loss", phase, stats.steps);
            adam_step(bundle.ae.encoder(), ae.encoder, opt.encoder);
            adam_step(bundle.ae.decoder(), ae.decoder, opt.decoder);
            bundle.ae.mark_trained_step();
            stats.ae_steps += 1;
            ae_value = ae.loss;
            stats.last_ae_loss = ae.loss;
          }

          // lambda * L_uncertainty; with lambda = 0 the head gets no update.
          double unc_value = 0.0;
          if (lambda > 0.0) {
            Matrix u_fp(0, train_id.cols());
            if (fp_per_step > 0) {
              std::vector<std::size_t> fidx;
              for (std::size_t i = 0; i < fp_per_step; ++i) {
                if (fp_cursor == n_fp) {
                  shuffle(fp_order, rng);
                  fp_cursor = 0;
                }
                fidx.push_back(fp_order[fp_cursor++]);
              }
              u_fp = detail::gather_rows(train_fp, fidx);
            }
            Matrix virtual_outliers(0, train_id.cols());
            try {
              SynthInputs in{&bundle.ae, &u_id, &cls, &u_fp, &queue};
              virtual_outliers = synthesize(cfg.synthesis, in, sp, rng).vectors;
            } catch (const NotReady&) {
              // Not enough state yet (e.g. AE never stepped); train on FP only.
            }
            const Matrix u_ood = detail::vstack(virtual_outliers, u_fp);
            auto unc = uncertainty_gradients(bundle.head, u_id, u_ood, cfg.bce_loss);
            detail::check_finite(unc.loss, "uncertainty loss", phase, stats.steps);
            unc.grads *= lambda;
            adam_step(bundle.head.net, unc.grads, opt.head);
            unc_value = unc.loss;
            stats.last_unc_loss = unc.loss;
          }
          stats.last_total_loss = total_loss(det.loss, ae_value, unc_value, lambda);
        } catch (const NumericalFailure& e) {
          throw Divergence("phase " + std::to_string(phase) + " step " + std::to_string(stats.steps) + ": " + e.what());
        }
        std::size_t occ = 0;
        for (std::size_t k = 0; k < queue.num_classes(); ++k) occ += queue.size(k);
        trace.queue_occupancy.push_back(occ);
        stats.steps += 1;
        global_step += 1;
      }
    }
  }
  return trace;
}

/// Scores held-out ID vs FP features with every configured scorer.
inline EvaluationReport evaluate_bundle(const ExperimentConfig& cfg, const DataSplits& data, const ModelBundle& bundle) {
  EvaluationReport rep;
  rep.config_hash = config_hash(cfg);
  rep.seed = cfg.seed;
  rep.synthesis_method = to_string(cfg.synthesis);
  rep.target_tpr = cfg.eval_tpr;

  const Matrix val_id = data.val.features(FeatureLabel::id);
  const Matrix val_fp = data.val.features(FeatureLabel::fp);
  const std::vector<int> val_id_cls = data.val.classes(FeatureLabel::id);
  const std::vector<int> val_fp_cls = data.val.classes(FeatureLabel::fp);
  const Matrix u = detail::vstack(val_id, val_fp);
  std::vector<Truth> truth(static_cast<std::size_t>(val_id.rows()), Truth::id);
  truth.resize(static_cast<std::size_t>(u.rows()), Truth::ood);
  std::vector<int> pred_cls = val_id_cls;
  pred_cls.insert(pred_cls.end(), val_fp_cls.begin(), val_fp_cls.end());
  rep.n_id = static_cast<std::size_t>(val_id.rows());
  rep.n_ood = static_cast<std::size_t>(val_fp.rows());

  for (const auto& scorer : cfg.methods) {
    ScoreSet s;
    s.method = detail::display_name(scorer, cfg.synthesis);
    s.truth = truth;
    std::optional<double> ece_value;
    if (scorer == "default") {
      s.scores = default_outlier_scores(bundle.classifier, u);
      s.orientation = "negated max softmax probability";
      const Matrix probs = softmax(bundle.classifier.logits(u));
      std::vector<double> conf;
      std::vector<std::uint8_t> correct;
      for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index arg = 0;
        conf.push_back(probs.row(i).maxCoeff(&arg));
        correct.push_back(truth[static_cast<std::size_t>(i)] == Truth::id && arg == pred_cls[static_cast<std::size_t>(i)]);
      }
      ece_value = ece(conf, correct, cfg.ece_bins);
    } else if (scorer == "mahalanobis") {
      MahalanobisScorer maha(data.train.features(FeatureLabel::id), data.train.classes(FeatureLabel::id),
                             data.train.num_classes);
      s.scores = maha.score(u);
      s.orientation = "min squared Mahalanobis distance";
    } else {
      s.scores = uncertainty_scores(bundle.head, u);
      s.orientation = "uncertainty head output";
      std::vector<double> conf;
      std::vector<std::uint8_t> correct;
      for (std::size_t i = 0; i < s.scores.size(); ++i) {
        conf.push_back(1.0 - sigmoid(s.scores[i]));
        correct.push_back(truth[i] == Truth::id);
      }
      ece_value = ece(conf, correct, cfg.ece_bins);
    }
    MethodMetrics mm = evaluate_scores(s, cfg.eval_tpr);
    mm.ece = ece_value;
    rep.methods.push_back(mm);
    rep.score_sets.push_back(std::move(s));
  }
  return rep;
}

inline Matrix synthesize_for_projection(const ExperimentConfig& cfg, const DataSplits& data, const ModelBundle& bundle) {
  const Matrix val_id = data.val.features(FeatureLabel::id);
  const std::vector<int> cls = data.val.classes(FeatureLabel::id);
  const Matrix val_fp = data.val.features(FeatureLabel::fp);
  if (val_id.rows() == 0) return {};
  Rng rng(cfg.seed ^ 0x5eed5eedULL);
  FeatureQueue queue(data.train.dim, data.train.num_classes, cfg.queue_capacity);
  queue.push_batch(data.train.features(FeatureLabel::id), data.train.classes(FeatureLabel::id));
  SynthParams sp;
  sp.noise = cfg.noise;
  sp.mix_weight = cfg.mix_weight;
  sp.vos_candidates = cfg.vos_candidates;
  try {
    SynthInputs in{&bundle.ae, &val_id, &cls, &val_fp, &queue};
    return synthesize(cfg.synthesis, in, sp, rng).vectors;
  } catch (const NotReady&) {
    return {};
  }
}

/// Trains from scratch and evaluates. Pure in (config, data).
inline RunResult run_experiment(const ExperimentConfig& cfg, const DataSplits& data) {
  data.train.validate();
  data.val.validate();
  if (data.train.dim != data.val.dim || data.train.num_classes != data.val.num_classes) {
    throw InvalidInput("train and val splits disagree on D or K");
  }
  ModelDims dims = cfg.dims;
  dims.feature_dim = data.train.dim;
  dims.num_classes = data.train.num_classes;
  Rng init_rng(cfg.seed);
  RunResult r;
  r.bundle = ModelBundle::create(dims, init_rng);
  Rng train_rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL);
  TrainingTrace trace = train_models(cfg, data, r.bundle, train_rng);
  r.report = evaluate_bundle(cfg, data, r.bundle);
  r.report.training = std::move(trace);
  r.val_synth = synthesize_for_projection(cfg, data, r.bundle);
  return r;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_data(cfg)); }

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json metrics_json(const MethodMetrics& m) {
  nlohmann::ordered_json j;
  j["auroc"] = m.auroc;
  j["aupr"] = m.aupr_id;
  j["aupr_ood"] = m.aupr_ood;
  j["fpr95"] = m.fpr95;
  j["ece"] = m.ece ? nlohmann::ordered_json(*m.ece) : nlohmann::ordered_json(nullptr);
  j["tau"] = m.tau;
  j["n_id"] = m.n_id;
  j["n_ood"] = m.n_ood;
  return j;
}

inline nlohmann::ordered_json report_json(const EvaluationReport& r, bool include_curves = true) {
  nlohmann::ordered_json j;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["synthesis_method"] = r.synthesis_method;
  j["aupr_positive"] = "ID";
  j["target_tpr"] = r.target_tpr;
  j["counts"] = {{"id", r.n_id}, {"ood", r.n_ood}};
  j["methods"] = nlohmann::ordered_json::object();
  for (const auto& m : r.methods) j["methods"][m.method] = metrics_json(m);
  auto phase = [](const PhaseStats& p) {
    return nlohmann::ordered_json{{"steps", p.steps},
                                  {"ae_steps", p.ae_steps},
                                  {"last_det_loss", p.last_det_loss},
                                  {"last_ae_loss", p.last_ae_loss},
                                  {"last_unc_loss", p.last_unc_loss},
                                  {"last_total_loss", p.last_total_loss}};
  };
  j["training"] = {{"phase1", phase(r.training.phase1)}, {"phase2", phase(r.training.phase2)}};
  j["notes"] = "L_det is the surrogate classifier cross-entropy; scores are oriented higher = more anomalous";
  if (include_curves) {
    nlohmann::ordered_json curves = nlohmann::ordered_json::object();
    nlohmann::ordered_json hists = nlohmann::ordered_json::object();
    for (const auto& s : r.score_sets) {
      nlohmann::ordered_json roc = nlohmann::ordered_json::array();
      for (const auto& p : roc_curve(s)) roc.push_back({p.x, p.y});
      nlohmann::ordered_json pr = nlohmann::ordered_json::array();
      for (const auto& p : pr_curve(s, Truth::id)) pr.push_back({p.x, p.y});
      curves[s.method] = {{"orientation", s.orientation}, {"roc", roc}, {"pr", pr}};
      nlohmann::ordered_json h = nlohmann::ordered_json::array();
      for (const auto& b : score_histogram(s)) h.push_back({b.lo, b.hi, b.id_count, b.ood_count});
      hists[s.method] = h;
    }
    j["curves"] = curves;
    j["histograms"] = hists;
  }
  return j;
}

/// Top two principal directions of `all`, as a D x 2 matrix.
inline Eigen::MatrixXd pca_basis(const Matrix& all) {
  const RowVector mean = all.colwise().mean();
  const Matrix centered = all.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(all.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::MatrixXd basis(all.cols(), 2);
  basis.col(0) = es.eigenvectors().col(all.cols() - 1);
  basis.col(1) = es.eigenvectors().col(std::max<Eigen::Index>(0, all.cols() - 2));
  // Fix the sign so the largest-magnitude loading is positive.
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }
  return basis;
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw std::runtime_error("write to '" + p.string() + "' failed");
}

inline std::string num(double v) { return format_double(v); }

}  // namespace detail

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path report() const { return dir / "report.json"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.bin"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path config() const { return dir / "config.cfg"; }
  std::filesystem::path model_card() const { return dir / "model_card.json"; }
  std::filesystem::path scores() const { return dir / "scores.csv"; }
  std::filesystem::path roc() const { return dir / "roc.csv"; }
  std::filesystem::path pr() const { return dir / "pr.csv"; }
  std::filesystem::path histogram() const { return dir / "histogram.csv"; }
  std::filesystem::path projection() const { return dir / "pca.csv"; }
};

inline void write_score_csv(std::ostream& os, const std::vector<ScoreSet>& sets) {
  os << "item_id,method,score,truth\n";
  for (const auto& s : sets) {
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      os << i << ',' << s.method << ',' << detail::num(s.scores[i]) << ',' << to_string(s.truth[i]) << '\n';
    }
  }
}

inline void write_report(const RunPaths& paths, const EvaluationReport& rep) {
  detail::write_text(paths.report(), report_json(rep).dump(2) + "\n");
  std::ostringstream scores, roc, pr, hist;
  write_score_csv(scores, rep.score_sets);
  roc << "method,fpr,tpr\n";
  pr << "method,recall,precision\n";
  hist << "method,bin_lo,bin_hi,id_count,ood_count\n";
  for (const auto& s : rep.score_sets) {
    for (const auto& p : roc_curve(s)) roc << s.method << ',' << detail::num(p.x) << ',' << detail::num(p.y) << '\n';
    for (const auto& p : pr_curve(s)) pr << s.method << ',' << detail::num(p.x) << ',' << detail::num(p.y) << '\n';
    for (const auto& b : score_histogram(s)) {
      hist << s.method << ',' << detail::num(b.lo) << ',' << detail::num(b.hi) << ',' << b.id_count << ','
           << b.ood_count << '\n';
    }
  }
  detail::write_text(paths.scores(), scores.str());
  detail::write_text(paths.roc(), roc.str());
  detail::write_text(paths.pr(), pr.str());
  detail::write_text(paths.histogram(), hist.str());
}

/// Writes every run artifact except the manifest.
inline void write_run_outputs(const RunPaths& paths, const ExperimentConfig& cfg, const DataSplits& data,
                              const RunResult& r) {
  std::filesystem::create_directories(paths.dir);
  write_report(paths, r.report);
  save_bundle(paths.checkpoint().string(), r.bundle);
  detail::write_text(paths.config(), serialize_config(cfg.to_map()));

  nlohmann::ordered_json card;
  card["feature_dim"] = r.bundle.ae.feature_dim();
  card["num_classes"] = r.bundle.ae.num_classes();
  card["class_names"] = data.train.class_names;
  card["encoder_dims"] = r.bundle.ae.encoder().dims();
  card["decoder_dims"] = r.bundle.ae.decoder().dims();
  card["head_dims"] = r.bundle.head.net.dims();
  card["classifier_dims"] = r.bundle.classifier.net.dims();
  card["latent_dim"] = r.bundle.ae.latent_dim();
  card["lambda"] = cfg.lambda;
  card["alpha"] = cfg.noise.alpha;
  card["beta"] = cfg.noise.beta;
  card["synthesis_method"] = to_string(cfg.synthesis);
  card["uncertainty_loss"] = cfg.bce_loss ? "bce" : "sigmoid";
  card["seed"] = cfg.seed;
  card["generator_seed"] = cfg.generator.seed;
  card["rng"] = std::string(Rng::kAlgorithm);
  card["ae_trained_steps"] = r.bundle.ae.trained_steps();
  detail::write_text(paths.model_card(), card.dump(2) + "\n");

  // 2-D projection of ID, FP and synthesized features (first 500 of each).
  const Matrix id = data.val.features(FeatureLabel::id);
  const Matrix fp = data.val.features(FeatureLabel::fp);
  const auto take = [](const Matrix& m) { return Matrix(m.topRows(std::min<Eigen::Index>(500, m.rows()))); };
  const Matrix a = take(id), b = take(fp), c = r.val_synth.rows() > 0 ? take(r.val_synth) : Matrix(0, id.cols());
  const Matrix all = detail::vstack(detail::vstack(a, b), c);
  std::ostringstream pca;
  pca << "kind,pc1,pc2\n";
  if (all.rows() > 1) {
    const Eigen::MatrixXd basis = pca_basis(all);
    const RowVector mean = all.colwise().mean();
    auto emit = [&](const Matrix& m, const char* kind) {
      const Eigen::MatrixXd proj = (m.rowwise() - mean) * basis;
      for (Eigen::Index i = 0; i < proj.rows(); ++i) {
        pca << kind << ',' << detail::num(proj(i, 0)) << ',' << detail::num(proj(i, 1)) << '\n';
      }
    };
    emit(a, "ID");
    emit(b, "FP");
    if (c.rows() > 0) emit(c, "SYNTH");
  }
  detail::write_text(paths.projection(), pca.str());
}

inline void write_manifest(const RunPaths& paths, const ExperimentConfig& cfg, double wall_seconds) {
  nlohmann::ordered_json m;
  m["config_hash"] = config_hash(cfg);
  m["artifact_version"] = kArtifactVersion;
  m["checkpoint_version"] = kCheckpointVersion;
  m["bundle_version"] = kBundleVersion;
  m["feature_file_version"] = kFeatureFileVersion;
  m["wall_clock_seconds"] = wall_seconds;
  m["seed"] = cfg.seed;
  m["outputs"] = {{"report", paths.report().filename().string()},
                  {"checkpoint", paths.checkpoint().filename().string()},
                  {"config", paths.config().filename().string()},
                  {"model_card", paths.model_card().filename().string()},
                  {"scores", paths.scores().filename().string()},
                  {"roc", paths.roc().filename().string()},
                  {"pr", paths.pr().filename().string()},
                  {"histogram", paths.histogram().filename().string()},
                  {"projection", paths.projection().filename().string()}};
  detail::write_text(paths.manifest(), m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  ConfigMap overrides;
  std::optional<EvaluationReport> report;
  std::string error;
};

/// One full run per override set; failures are recorded and the sweep
/// continues. Runs execute on up to `jobs` threads, each with its own state.
inline std::vector<AblationRow> ablate(const ConfigMap& base, const std::vector<ConfigMap>& sweep, std::size_t jobs = 1,
                                       const std::function<void(std::size_t, const AblationRow&)>& on_done = {}) {
  if (sweep.empty()) throw InvalidInput("ablate: empty sweep");
  std::vector<AblationRow> rows(sweep.size());
  auto run_one = [&](std::size_t i) {
    AblationRow row;
    row.overrides = sweep[i];
    try {
      ConfigMap m = base;
      for (const auto& [k, v] : sweep[i]) m[k] = v;
      const auto cfg = ExperimentConfig::from_map(m);
      row.report = run_experiment(cfg).report;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    return row;
  };
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < sweep.size(); start += jobs) {
    std::vector<std::future<AblationRow>> futs;
    const std::size_t end = std::min(sweep.size(), start + jobs);
    for (std::size_t i = start; i < end; ++i) futs.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_one, i));
    for (std::size_t i = start; i < end; ++i) {
      rows[i] = futs[i - start].get();
      if (on_done) on_done(i, rows[i]);
    }
  }
  return rows;
}

/// Zips `key=v1,v2,...` sweeps of equal length into override sets.
inline std::vector<ConfigMap> zip_sweeps(const std::vector<std::string>& sweeps) {
  std::vector<std::pair<std::string, std::vector<std::string>>> cols;
  for (const auto& s : sweeps) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidInput("sweep '" + s + "' is not key=v1,v2,...");
    cols.emplace_back(detail::trim(s.substr(0, eq)), detail::split(s.substr(eq + 1), ','));
  }
  if (cols.empty()) return {};
  ConfigMap keys;
  for (const auto& [k, v] : cols) keys[k] = "";
  check_keys(keys);
  const std::size_t n = cols.front().second.size();
  for (const auto& [k, v] : cols) {
    if (v.size() != n) throw InvalidInput("sweeps must all list the same number of values");
  }
  std::vector<ConfigMap> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [k, v] : cols) out[i][k] = v[i];
  }
  return out;
}

/// Noise-parameter grid (alpha, beta).
inline std::vector<ConfigMap> noise_ablation_grid() {
  const std::vector<std::pair<std::string, std::string>> ab = {
      {"0", "0.1"}, {"0", "0.5"}, {"0", "1"}, {"0.25", "1"}, {"0.25", "5"}, {"0.25", "10"}};
  std::vector<ConfigMap> out;
  for (const auto& [a, b] : ab) out.push_back({{"noise.alpha", a}, {"noise.beta", b}});
  return out;
}

/// Outlier-loss weight grid.
inline std::vector<ConfigMap> lambda_ablation_grid() {
  std::vector<ConfigMap> out;
  for (const char* l : {"0.1", "0.5", "1", "2", "5"}) out.push_back({{"loss.lambda", l}});
  return out;
}

/// Consolidated table: swept keys, method, metrics, status.
inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::vector<std::string> keys;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.overrides) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  std::ostringstream os;
  for (const auto& k : keys) os << k << ',';
  os << "method,auroc,aupr,aupr_ood,fpr95,ece,status\n";
  for (const auto& r : rows) {
    auto prefix = [&] {
      for (const auto& k : keys) {
        const auto it = r.overrides.find(k);
        os << (it == r.overrides.end() ? "" : it->second) << ',';
      }
    };
    if (!r.report) {
      prefix();
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      os << ",,,,,,error: " << err << '\n';
      continue;
    }
    for (const auto& m : r.report->methods) {
      prefix();
      os << m.method << ',' << detail::num(m.auroc) << ',' << detail::num(m.aupr_id) << ',' << detail::num(m.aupr_ood)
         << ',' << detail::num(m.fpr95) << ',' << (m.ece ? detail::num(*m.ece) : "") << ",ok\n";
    }
  }
  return os.str();
}

inline nlohmann::ordered_json ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["overrides"] = r.overrides;
    if (r.report) {
      j["status"] = "ok";
      j["report"] = report_json(*r.report, false);
    } else {
      j["status"] = "error";
      j["error"] = r.error;
    }
    arr.push_back(j);
  }
  return arr;
}

}  // namespace lsvos
