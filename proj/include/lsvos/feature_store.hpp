#pragma once

// Feature records, the per-class FIFO queue of class-augmented ID features,
// and the binary/CSV feature-file formats.
//
// Binary feature file (little-endian):
//   magic "VOSF" | version u32 | D u32 | K u32 | count u64
//   per record: class_id u16 | label u8 | D x f32
//
// CSV feature file: header `class_id,label,f0,...,f{D-1}`; label is one of
// ID, FP, SYNTH_OUTLIER (or the numeric codes 0, 1, 2).

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lsvos/binary_io.hpp"
#include "lsvos/errors.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

enum class FeatureLabel : std::uint8_t { id = 0, fp = 1, synth_outlier = 2 };

inline std::string to_string(FeatureLabel l) {
  switch (l) {
    case FeatureLabel::id: return "ID";
    case FeatureLabel::fp: return "FP";
    case FeatureLabel::synth_outlier: return "SYNTH_OUTLIER";
  }
  return "?";
}

inline FeatureLabel parse_feature_label(const std::string& s) {
  if (s == "ID" || s == "0") return FeatureLabel::id;
  if (s == "FP" || s == "1") return FeatureLabel::fp;
  if (s == "SYNTH_OUTLIER" || s == "2") return FeatureLabel::synth_outlier;
  throw FormatError("unknown feature label '" + s + "'");
}

struct FeatureRecord {
  std::vector<double> vector;
  int class_id = 0;
  FeatureLabel label = FeatureLabel::id;
  std::string source_id;
};

struct FeatureDataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<FeatureRecord> records;
  std::string split = "train";

  void validate() const {
    if (dim == 0 || num_classes == 0) throw InvalidInput("dataset: D and K must be positive");
    if (!class_names.empty() && class_names.size() != num_classes) {
      throw InvalidInput("dataset: class_names must have K entries");
    }
    for (const auto& r : records) {
      if (r.vector.size() != dim) throw InvalidInput("dataset: record '" + r.source_id + "' has wrong dimension");
      if (r.class_id < 0 || static_cast<std::size_t>(r.class_id) >= num_classes) {
        throw InvalidInput("dataset: record '" + r.source_id + "' class id out of range");
      }
      for (double v : r.vector) {
        if (!std::isfinite(v)) throw InvalidInput("dataset: record '" + r.source_id + "' has non-finite entry");
      }
    }
  }

  std::size_t count(FeatureLabel l) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.label == l;
    return n;
  }

  /// Rows of all records carrying `l`, in dataset order.
  Matrix features(FeatureLabel l) const {
    Matrix m(static_cast<Eigen::Index>(count(l)), static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    for (const auto& r : records) {
      if (r.label != l) continue;
      for (std::size_t j = 0; j < dim; ++j) m(row, static_cast<Eigen::Index>(j)) = r.vector[j];
      ++row;
    }
    return m;
  }

  std::vector<int> classes(FeatureLabel l) const {
    std::vector<int> out;
    for (const auto& r : records) {
      if (r.label == l) out.push_back(r.class_id);
    }
    return out;
  }
};

/// concat(vector, one_hot(class_id)).
inline std::vector<double> augment_one_hot(const FeatureRecord& rec, std::size_t num_classes) {
  if (rec.class_id < 0 || static_cast<std::size_t>(rec.class_id) >= num_classes) {
    throw InvalidInput("augment_one_hot: class id " + std::to_string(rec.class_id) +
                       " outside [0, " + std::to_string(num_classes) + ")");
  }
  std::vector<double> out(rec.vector);
  out.resize(rec.vector.size() + num_classes, 0.0);
  out[rec.vector.size() + static_cast<std::size_t>(rec.class_id)] = 1.0;
  return out;
}

/// Batch form: appends K one-hot columns to `features`.
inline Matrix augment_one_hot(const Matrix& features, const std::vector<int>& classes,
                              std::size_t num_classes) {
  if (static_cast<std::size_t>(features.rows()) != classes.size()) {
    throw InvalidInput("augment_one_hot: one class id per row required");
  }
  const auto d = features.cols();
  Matrix out = Matrix::Zero(features.rows(), d + static_cast<Eigen::Index>(num_classes));
  out.leftCols(d) = features;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int c = classes[static_cast<std::size_t>(i)];
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw InvalidInput("augment_one_hot: class id out of range");
    }
    out(i, d + c) = 1.0;
  }
  return out;
}

/// Per-class FIFO of one-hot augmented ID features with fixed capacity.
class FeatureQueue {
 public:
  FeatureQueue(std::size_t dim, std::size_t num_classes, std::size_t capacity_per_class)
      : dim_(dim), num_classes_(num_classes), capacity_(capacity_per_class), buffers_(num_classes) {
    if (dim == 0 || num_classes == 0 || capacity_per_class == 0) {
      throw InvalidInput("FeatureQueue: dim, classes and capacity must be positive");
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size(std::size_t class_id) const { return buffers_.at(class_id).size(); }

  /// Oldest first.
  const std::deque<std::vector<double>>& buffer(std::size_t class_id) const {
    return buffers_.at(class_id);
  }

  void push(const FeatureRecord& rec) {
    if (rec.label != FeatureLabel::id) {
      throw InvalidInput("FeatureQueue::push: only ID features may enter the queue (got " +
                         to_string(rec.label) + ")");
    }
    if (rec.vector.size() != dim_) throw InvalidInput("FeatureQueue::push: wrong feature dimension");
    push_augmented(augment_one_hot(rec, num_classes_), static_cast<std::size_t>(rec.class_id));
  }

  /// Pushes rows of an ID batch with their classes.
  void push_batch(const Matrix& features, const std::vector<int>& classes) {
    const Matrix aug = augment_one_hot(features, classes, num_classes_);
    if (static_cast<std::size_t>(features.cols()) != dim_) {
      throw InvalidInput("FeatureQueue::push_batch: wrong feature dimension");
    }
    for (Eigen::Index i = 0; i < aug.rows(); ++i) {
      push_augmented(std::vector<double>(aug.row(i).data(), aug.row(i).data() + aug.cols()),
                     static_cast<std::size_t>(classes[static_cast<std::size_t>(i)]));
    }
  }

  bool ready() const {
    for (const auto& b : buffers_) {
      if (b.empty()) return false;
    }
    return true;
  }

  /// n_per_class rows per class, drawn uniformly with replacement; rows are
  /// grouped by class in ascending class order.
  Matrix sample(std::size_t n_per_class, Rng& rng) const {
    for (std::size_t k = 0; k < num_classes_; ++k) {
      if (buffers_[k].empty()) {
        throw NotReady("FeatureQueue::sample: class " + std::to_string(k) +
                       " buffer is empty; defer auto-encoder training until every class has features");
      }
    }
    const auto width = static_cast<Eigen::Index>(dim_ + num_classes_);
    Matrix out(static_cast<Eigen::Index>(n_per_class * num_classes_), width);
    Eigen::Index row = 0;
    for (const auto& buf : buffers_) {
      for (std::size_t i = 0; i < n_per_class; ++i) {
        const auto& v = buf[static_cast<std::size_t>(rng.index(buf.size()))];
        out.row(row++) = Eigen::Map<const RowVector>(v.data(), width);
      }
    }
    return out;
  }

  /// Feature part (no one-hot) of every stored vector, with class ids.
  std::pair<Matrix, std::vector<int>> snapshot() const {
    std::size_t n = 0;
    for (const auto& b : buffers_) n += b.size();
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_));
    std::vector<int> classes;
    classes.reserve(n);
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < num_classes_; ++k) {
      for (const auto& v : buffers_[k]) {
        m.row(row++) = Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(dim_));
        classes.push_back(static_cast<int>(k));
      }
    }
    return {std::move(m), std::move(classes)};
  }

 private:
  void push_augmented(std::vector<double> v, std::size_t class_id) {
    auto& buf = buffers_[class_id];
    if (buf.size() == capacity_) buf.pop_front();
    buf.push_back(std::move(v));
  }

  std::size_t dim_;
  std::size_t num_classes_;
  std::size_t capacity_;
  std::vector<std::deque<std::vector<double>>> buffers_;
};

// ---------------------------------------------------------------------------
// Feature files

inline constexpr std::uint32_t kFeatureFileVersion = 1;

inline void write_feature_file(std::ostream& os, const FeatureDataset& ds) {
  ds.validate();
  if (ds.num_classes > 65536) throw InvalidInput("feature file: K exceeds u16 class ids");
  io::write_magic(os, "VOSF");
  io::write_le<std::uint32_t>(os, kFeatureFileVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.dim));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes));
  io::write_le<std::uint64_t>(os, ds.records.size());
  for (const auto& r : ds.records) {
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(r.class_id));
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.label));
    for (double v : r.vector) io::write_f32(os, static_cast<float>(v));
  }
}

inline FeatureDataset read_feature_file(std::istream& is, const std::string& split = "train") {
  io::expect_magic(is, "VOSF");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kFeatureFileVersion) {
    throw FormatError("unsupported feature file version " + std::to_string(version));
  }
  FeatureDataset ds;
  ds.split = split;
  ds.dim = io::read_le<std::uint32_t>(is);
  ds.num_classes = io::read_le<std::uint32_t>(is);
  if (ds.dim == 0 || ds.num_classes == 0) throw FormatError("feature file: D and K must be positive");
  const auto count = io::read_le<std::uint64_t>(is);
  for (std::size_t k = 0; k < ds.num_classes; ++k) ds.class_names.push_back("class" + std::to_string(k));
  ds.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.class_id = io::read_le<std::uint16_t>(is);
    const auto code = io::read_le<std::uint8_t>(is);
    if (code > 2) throw FormatError("feature file: unknown label code " + std::to_string(code));
    r.label = static_cast<FeatureLabel>(code);
    r.vector.resize(ds.dim);
    for (auto& v : r.vector) v = io::read_f32(is);
    r.source_id = split + ":" + std::to_string(i);
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

inline void write_feature_file(const std::string& path, const FeatureDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_feature_file(os, ds);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline FeatureDataset read_feature_file(const std::string& path, const std::string& split = "train") {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_feature_file(is, split);
}

/// Values are printed with max_digits10 so CSV round-trips are exact.
inline void write_feature_csv(std::ostream& os, const FeatureDataset& ds) {
  ds.validate();
  os << "class_id,label";
  for (std::size_t j = 0; j < ds.dim; ++j) os << ",f" << j;
  os << '\n';
  std::ostringstream cell;
  cell.precision(17);
  for (const auto& r : ds.records) {
    os << r.class_id << ',' << to_string(r.label);
    for (double v : r.vector) {
      cell.str("");
      cell << v;
      os << ',' << cell.str();
    }
    os << '\n';
  }
}

inline FeatureDataset read_feature_csv(std::istream& is, std::size_t num_classes,
                                       const std::string& split = "train") {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("feature CSV: missing header");
  FeatureDataset ds;
  ds.split = split;
  ds.num_classes = num_classes;
  {
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(hs, cell, ',')) cols.push_back(cell);
    if (cols.size() < 3 || cols[0] != "class_id" || cols[1] != "label") {
      throw FormatError("feature CSV: header must start with class_id,label");
    }
    ds.dim = cols.size() - 2;
  }
  for (std::size_t k = 0; k < num_classes; ++k) ds.class_names.push_back("class" + std::to_string(k));
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != ds.dim + 2) {
      throw FormatError("feature CSV line " + std::to_string(line_no) + ": wrong column count");
    }
    FeatureRecord r;
    try {
      r.class_id = std::stoi(cells[0]);
      r.label = parse_feature_label(cells[1]);
      r.vector.reserve(ds.dim);
      for (std::size_t j = 0; j < ds.dim; ++j) r.vector.push_back(std::stod(cells[j + 2]));
    } catch (const std::logic_error&) {
      throw FormatError("feature CSV line " + std::to_string(line_no) + ": unparsable value");
    }
    r.source_id = split + ":" + std::to_string(ds.records.size());
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

}  // namespace lsvos
