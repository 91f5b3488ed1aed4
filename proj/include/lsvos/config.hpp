#pragma once

// Flat declarative experiment configuration.
//
// File syntax: one `key = value` per line, `#` starts a comment. Keys are
// dotted names from the table in `config_schema()`; unknown keys are
// rejected. Lists are comma separated.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/synthesis.hpp"
#include "lsvos/synthgen.hpp"

namespace lsvos {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"dataset", "generate", "`generate` or a directory holding train.vosf and val.vosf"},
      {"gen.preset", "desk", "generator preset (desk)"},
      {"gen.d", "64", "feature dimension D"},
      {"gen.k", "3", "number of classes K"},
      {"gen.fp_overlap", "0.5", "FP/ID overlap in [0, 1]"},
      {"gen.fp_displacement", "10", "FP offset from ID means at overlap 0, in std-devs"},
      {"gen.class_separation", "3", "norm of generated class means"},
      {"gen.n_train_id", "6000", "train ID features"},
      {"gen.n_train_fp", "2000", "train FP features"},
      {"gen.n_val_id", "2000", "val ID features"},
      {"gen.n_val_fp", "700", "val FP features"},
      {"gen.seed", "", "generator seed (defaults to `seed`)"},
      {"model.encoder", "256,128,128", "encoder widths; last is the latent dim"},
      {"model.decoder", "128,256", "decoder hidden widths (output width D appended)"},
      {"model.head", "256,256", "uncertainty head hidden widths (output width 1 appended)"},
      {"model.classifier", "128", "surrogate classifier hidden width"},
      {"noise.alpha", "0.25", "LS-VOS noise offset alpha"},
      {"noise.beta", "1", "LS-VOS noise scale beta"},
      {"loss.lambda", "1", "uncertainty loss weight in phase 2"},
      {"loss.form", "sigmoid", "uncertainty loss: sigmoid (bounded, no logs) or bce"},
      {"synthesis.method", "lsvos", "lsvos | vos | linear_mix | random_noise | noisy_id"},
      {"synthesis.mix_weight", "0.5", "LinearMix weight on the ID feature"},
      {"synthesis.vos_candidates", "10000", "VOS candidates drawn per class"},
      {"train.phase1_epochs", "50", "epochs with lambda = 0"},
      {"train.phase2_epochs", "20", "epochs with lambda = loss.lambda"},
      {"train.epoch_scale", "1", "multiplier applied to both epoch counts"},
      {"train.batch_size", "256", "ID features per step"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"queue.capacity", "1000", "feature queue capacity per class"},
      {"sample.n_per_class", "500", "queue samples per class for each AE step"},
      {"seed", "0", "master seed"},
      {"methods", "default,mahalanobis,uncertainty", "scorers to evaluate"},
      {"eval.tpr", "0.95", "ID acceptance rate for tau / FPR"},
      {"eval.ece_bins", "10", "ECE bin count"},
  };
  return keys;
}

/// Ordered key/value map; std::map keeps serialization order-independent.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  return out;
}

inline bool known_key(const std::string& key) {
  const auto& schema = config_schema();
  return std::any_of(schema.begin(), schema.end(), [&](const ConfigKey& k) { return k.name == key; });
}

}  // namespace detail

/// Throws InvalidInput naming every unknown key.
inline void check_keys(const ConfigMap& m) {
  std::string bad;
  for (const auto& [k, v] : m) {
    if (!detail::known_key(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw InvalidInput("unknown config key(s): " + bad);
}

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap m;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  std::string errors;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors += "\n  line " + std::to_string(line_no) + ": expected key = value";
      continue;
    }
    m[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  if (!errors.empty()) throw InvalidInput("config parse error(s):" + errors);
  check_keys(m);
  return m;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

/// Applies `key=value` overrides.
inline void apply_overrides(ConfigMap& m, const std::vector<std::string>& overrides) {
  ConfigMap extra;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InvalidInput("override '" + o + "' is not key=value");
    extra[detail::trim(o.substr(0, eq))] = detail::trim(o.substr(eq + 1));
  }
  check_keys(extra);
  for (auto& [k, v] : extra) m[k] = v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

/// Typed, validated view of a ConfigMap.
struct ExperimentConfig {
  std::string dataset = "generate";
  GeneratorSpec generator = desk_preset(0);
  bool generator_seed_explicit = false;
  ModelDims dims;
  NoiseSpec noise;
  double lambda = 1.0;
  bool bce_loss = false;
  SynthMethod synthesis = SynthMethod::lsvos;
  double mix_weight = 0.5;
  std::size_t vos_candidates = 10000;
  std::size_t phase1_epochs = 50;
  std::size_t phase2_epochs = 20;
  double epoch_scale = 1.0;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t queue_capacity = 1000;
  std::size_t n_per_class = 500;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"default", "mahalanobis", "uncertainty"};
  double eval_tpr = 0.95;
  std::size_t ece_bins = 10;

  std::size_t effective_epochs(std::size_t epochs) const {
    if (epochs == 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(epochs) * epoch_scale)));
  }

  static ExperimentConfig from_map(const ConfigMap& user) {
    check_keys(user);
    ConfigMap m;
    for (const auto& k : config_schema()) m[k.name] = k.default_value;
    for (const auto& [k, v] : user) m[k] = v;

    std::string errors;
    auto fail = [&](const std::string& key, const std::string& why) { errors += "\n  " + key + ": " + why; };
    auto get_double = [&](const std::string& key) {
      const std::string& s = m.at(key);
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
        fail(key, "expected a number, got '" + s + "'");
        return 0.0;
      }
      return v;
    };
    auto get_uint = [&](const std::string& key) -> std::uint64_t {
      const std::string& s = m.at(key);
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        fail(key, "expected a non-negative integer, got '" + s + "'");
        return 0;
      }
      return v;
    };
    auto get_list = [&](const std::string& key) {
      std::vector<std::size_t> out;
      for (const auto& part : detail::split(m.at(key), ',')) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || p != part.data() + part.size() || v == 0) {
          fail(key, "expected comma-separated positive integers");
          return out;
        }
        out.push_back(v);
      }
      return out;
    };

    ExperimentConfig c;
    c.dataset = m.at("dataset");
    if (c.dataset.empty()) fail("dataset", "must not be empty");
    if (m.at("gen.preset") != "desk") fail("gen.preset", "unknown preset '" + m.at("gen.preset") + "'");
    c.seed = get_uint("seed");
    c.generator = desk_preset(c.seed);
    c.generator.dim = get_uint("gen.d");
    c.generator.num_classes = get_uint("gen.k");
    if (c.generator.num_classes != 3) c.generator.class_names.clear();
    c.generator.fp_overlap = get_double("gen.fp_overlap");
    c.generator.fp_displacement = get_double("gen.fp_displacement");
    c.generator.class_separation = get_double("gen.class_separation");
    c.generator.n_train_id = get_uint("gen.n_train_id");
    c.generator.n_train_fp = get_uint("gen.n_train_fp");
    c.generator.n_val_id = get_uint("gen.n_val_id");
    c.generator.n_val_fp = get_uint("gen.n_val_fp");
    if (!m.at("gen.seed").empty()) {
      c.generator.seed = get_uint("gen.seed");
      c.generator_seed_explicit = true;
    }
    if (c.dataset == "generate") {
      try {
        c.generator.validate();
      } catch (const InvalidInput& e) {
        fail("gen.*", e.what());
      }
    }
    c.dims.encoder_widths = get_list("model.encoder");
    c.dims.decoder_hidden = get_list("model.decoder");
    c.dims.head_hidden = get_list("model.head");
    c.dims.classifier_hidden = get_uint("model.classifier");
    if (c.dims.encoder_widths.empty()) fail("model.encoder", "needs at least one width");
    if (c.dims.classifier_hidden == 0) fail("model.classifier", "must be positive");
    c.noise.alpha = get_double("noise.alpha");
    c.noise.beta = get_double("noise.beta");
    if (c.noise.alpha < 0.0) fail("noise.alpha", "must be >= 0");
    if (c.noise.beta < 0.0) fail("noise.beta", "must be >= 0");
    c.lambda = get_double("loss.lambda");
    if (c.lambda < 0.0) fail("loss.lambda", "must be >= 0");
    if (m.at("loss.form") == "bce") {
      c.bce_loss = true;
    } else if (m.at("loss.form") != "sigmoid") {
      fail("loss.form", "expected sigmoid or bce");
    }
    try {
      c.synthesis = parse_synth_method(m.at("synthesis.method"));
    } catch (const InvalidInput& e) {
      fail("synthesis.method", e.what());
    }
    c.mix_weight = get_double("synthesis.mix_weight");
    if (c.mix_weight < 0.0 || c.mix_weight > 1.0) fail("synthesis.mix_weight", "must be in [0, 1]");
    c.vos_candidates = get_uint("synthesis.vos_candidates");
    if (c.vos_candidates == 0) fail("synthesis.vos_candidates", "must be positive");
    c.phase1_epochs = get_uint("train.phase1_epochs");
    c.phase2_epochs = get_uint("train.phase2_epochs");
    c.epoch_scale = get_double("train.epoch_scale");
    if (c.epoch_scale <= 0.0) fail("train.epoch_scale", "must be positive");
    c.batch_size = get_uint("train.batch_size");
    if (c.batch_size == 0) fail("train.batch_size", "must be positive");
    c.learning_rate = get_double("train.lr");
    if (c.learning_rate <= 0.0) fail("train.lr", "must be positive");
    c.queue_capacity = get_uint("queue.capacity");
    if (c.queue_capacity == 0) fail("queue.capacity", "must be positive");
    c.n_per_class = get_uint("sample.n_per_class");
    if (c.n_per_class == 0) fail("sample.n_per_class", "must be positive");
    c.methods = detail::split(m.at("methods"), ',');
    for (const auto& meth : c.methods) {
      if (meth != "default" && meth != "mahalanobis" && meth != "uncertainty") {
        fail("methods", "unknown scorer '" + meth + "' (default, mahalanobis, uncertainty)");
      }
    }
    if (c.methods.empty()) fail("methods", "at least one scorer required");
    c.eval_tpr = get_double("eval.tpr");
    if (!(c.eval_tpr > 0.0 && c.eval_tpr <= 1.0)) fail("eval.tpr", "must be in (0, 1]");
    c.ece_bins = get_uint("eval.ece_bins");
    if (c.ece_bins == 0) fail("eval.ece_bins", "must be positive");
    if (!errors.empty()) throw InvalidInput("invalid configuration:" + errors);
    return c;
  }

  /// Canonical, fully resolved key/value form.
  ConfigMap to_map() const {
    auto join = [](const std::vector<std::size_t>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    ConfigMap m;
    m["dataset"] = dataset;
    m["gen.preset"] = "desk";
    m["gen.d"] = std::to_string(generator.dim);
    m["gen.k"] = std::to_string(generator.num_classes);
    m["gen.fp_overlap"] = format_double(generator.fp_overlap);
    m["gen.fp_displacement"] = format_double(generator.fp_displacement);
    m["gen.class_separation"] = format_double(generator.class_separation);
    m["gen.n_train_id"] = std::to_string(generator.n_train_id);
    m["gen.n_train_fp"] = std::to_string(generator.n_train_fp);
    m["gen.n_val_id"] = std::to_string(generator.n_val_id);
    m["gen.n_val_fp"] = std::to_string(generator.n_val_fp);
    m["gen.seed"] = generator_seed_explicit ? std::to_string(generator.seed) : "";
    m["model.encoder"] = join(dims.encoder_widths);
    m["model.decoder"] = join(dims.decoder_hidden);
    m["model.head"] = join(dims.head_hidden);
    m["model.classifier"] = std::to_string(dims.classifier_hidden);
    m["noise.alpha"] = format_double(noise.alpha);
    m["noise.beta"] = format_double(noise.beta);
    m["loss.lambda"] = format_double(lambda);
    m["loss.form"] = bce_loss ? "bce" : "sigmoid";
    m["synthesis.method"] = to_string(synthesis);
    m["synthesis.mix_weight"] = format_double(mix_weight);
    m["synthesis.vos_candidates"] = std::to_string(vos_candidates);
    m["train.phase1_epochs"] = std::to_string(phase1_epochs);
    m["train.phase2_epochs"] = std::to_string(phase2_epochs);
    m["train.epoch_scale"] = format_double(epoch_scale);
    m["train.batch_size"] = std::to_string(batch_size);
    m["train.lr"] = format_double(learning_rate);
    m["queue.capacity"] = std::to_string(queue_capacity);
    m["sample.n_per_class"] = std::to_string(n_per_class);
    m["seed"] = std::to_string(seed);
    std::string meth;
    for (std::size_t i = 0; i < methods.size(); ++i) meth += (i ? "," : "") + methods[i];
    m["methods"] = meth;
    m["eval.tpr"] = format_double(eval_tpr);
    m["eval.ece_bins"] = std::to_string(ece_bins);
    return m;
  }
};

inline std::string serialize_config(const ConfigMap& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + " = " + v + "\n";
  return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical resolved config; independent of key order and of
/// how numbers were spelled in the file.
inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(c.to_map()))));
  return buf;
}

}  // namespace lsvos
