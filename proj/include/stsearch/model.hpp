#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stsearch/binary_io.hpp"
#include "stsearch/error.hpp"
#include "stsearch/features.hpp"

namespace stsearch {

inline constexpr char kProductTypeTask[] = "product_type";
inline constexpr char kColorTask[] = "color";

struct TaskSpec {
  std::string name;
  int num_classes = 2;
  double weight = 0.1;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

enum class Variant { kV1, kV2, kV3 };

// Class counts for the attribute tasks; product type is sized by the caller
// from the taxonomy.
struct AttributeClassCounts {
  int color = 12;
  int other = 6;
};

// V1: product type only. V2: adds colour. V3: adds 13 further attributes.
inline std::vector<TaskSpec> variant_config(Variant v, int product_types,
                                            AttributeClassCounts counts = {}) {
  std::vector<TaskSpec> specs{{kProductTypeTask, product_types, 1.0}};
  if (v == Variant::kV1) return specs;
  specs.push_back({kColorTask, counts.color, 0.3});
  if (v == Variant::kV2) return specs;
  for (const char* name :
       {"pattern", "shape", "shoulder_type", "neck_type", "sleeve_type", "length", "fit",
        "material", "closure", "occasion", "collar", "waist", "embellishment"})
    specs.push_back({name, counts.other, 0.1});
  return specs;
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "V1" || s == "v1") return Variant::kV1;
  if (s == "V2" || s == "v2") return Variant::kV2;
  if (s == "V3" || s == "v3") return Variant::kV3;
  return std::nullopt;
}

struct ModelDims {
  int input = kFeatureDim;
  int embed = kFeatureDim;
  int branch = kTaskFeatureDim;
};

struct TaskHead {
  Eigen::MatrixXd branch_w;      // branch x embed
  Eigen::VectorXd branch_b;
  Eigen::MatrixXd classifier_w;  // classes x branch
  Eigen::VectorXd classifier_b;
};

// Shared embedding layer followed by one fc branch and softmax classifier
// per task.
struct MultiTaskModel {
  ModelDims dims;
  std::vector<TaskSpec> tasks;
  Eigen::MatrixXd shared_w;  // embed x input
  Eigen::VectorXd shared_b;
  std::vector<TaskHead> heads;

  int task_index(std::string_view name) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

inline void validate_specs(const std::vector<TaskSpec>& specs) {
  if (specs.empty()) fail(ErrorKind::kUsage, "model needs at least one task");
  for (const auto& s : specs) {
    if (s.num_classes < 2) fail(ErrorKind::kUsage, "task '" + s.name + "' needs >= 2 classes");
    if (!(s.weight >= 0) || !std::isfinite(s.weight))
      fail(ErrorKind::kUsage, "task '" + s.name + "' has an invalid weight");
  }
}

// All-zero parameters.
inline MultiTaskModel zero_model(std::vector<TaskSpec> specs, ModelDims dims = {}) {
  validate_specs(specs);
  MultiTaskModel m;
  m.dims = dims;
  m.tasks = std::move(specs);
  m.shared_w = Eigen::MatrixXd::Zero(dims.embed, dims.input);
  m.shared_b = Eigen::VectorXd::Zero(dims.embed);
  for (const auto& t : m.tasks) {
    m.heads.push_back({Eigen::MatrixXd::Zero(dims.branch, dims.embed),
                       Eigen::VectorXd::Zero(dims.branch),
                       Eigen::MatrixXd::Zero(t.num_classes, dims.branch),
                       Eigen::VectorXd::Zero(t.num_classes)});
  }
  return m;
}

// Identity shared layer, zero heads: the embedding is relu(feature).
inline MultiTaskModel identity_model(std::vector<TaskSpec> specs, ModelDims dims = {}) {
  if (dims.embed != dims.input) fail(ErrorKind::kUsage, "identity model needs embed == input");
  auto m = zero_model(std::move(specs), dims);
  m.shared_w.setIdentity();
  return m;
}

enum class SharedInit { kRandom, kIdentity };

// He-initialised heads. The shared layer is either He-random or the identity
// (the latter keeps the untrained embedding equal to the raw descriptor).
inline MultiTaskModel random_model(std::vector<TaskSpec> specs, std::uint64_t seed,
                                   ModelDims dims = {}, SharedInit shared = SharedInit::kRandom) {
  auto m = zero_model(std::move(specs), dims);
  std::mt19937_64 rng(seed);
  auto fill = [&](Eigen::MatrixXd& w) {
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = nd(rng);
  };
  if (shared == SharedInit::kIdentity)
    m.shared_w.setIdentity();
  else
    fill(m.shared_w);
  for (auto& h : m.heads) {
    fill(h.branch_w);
    fill(h.classifier_w);
  }
  return m;
}

inline Eigen::Map<const Eigen::VectorXd> as_eigen(const RawFeature& f) {
  return {f.data(), static_cast<Eigen::Index>(f.size())};
}

struct ForwardResult {
  Eigen::VectorXd embedding;
  std::vector<Eigen::VectorXd> branch;  // relu(branch) per task
  std::vector<Eigen::VectorXd> logits;  // per task, in model task order
};

inline ForwardResult forward(const MultiTaskModel& m, const RawFeature& f) {
  if (static_cast<int>(f.size()) != m.dims.input)
    fail(ErrorKind::kData, "feature dimension does not match the model");
  ForwardResult r;
  r.embedding = (m.shared_w * as_eigen(f) + m.shared_b).cwiseMax(0.0);
  for (const auto& h : m.heads) {
    r.branch.push_back((h.branch_w * r.embedding + h.branch_b).cwiseMax(0.0));
    r.logits.push_back(h.classifier_w * r.branch.back() + h.classifier_b);
  }
  return r;
}

// Numerically stable softmax.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

// -log softmax(logits)[label] via log-sum-exp.
inline double cross_entropy(const Eigen::VectorXd& logits, int label) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(label);
}

// Label per task; missing tasks are simply absent.
using TaskLabels = std::map<std::string, int>;

struct TrainSample {
  RawFeature feature;
  TaskLabels labels;
};

struct LossBreakdown {
  double total = 0;
  std::map<std::string, double> per_task;
};

// Weighted multi-task loss over a set of samples: each task's cross-entropy
// is averaged over the samples that carry its label, unlabeled tasks add 0.
inline LossBreakdown multitask_loss(const std::vector<std::vector<Eigen::VectorXd>>& logits,
                                    const std::vector<TaskLabels>& labels,
                                    const std::vector<TaskSpec>& specs) {
  if (logits.size() != labels.size()) fail(ErrorKind::kUsage, "logits/labels size mismatch");
  LossBreakdown out;
  bool any = false;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    double sum = 0;
    int n = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      auto it = labels[s].find(specs[t].name);
      if (it == labels[s].end()) continue;
      if (it->second < 0 || it->second >= specs[t].num_classes)
        fail(ErrorKind::kData, "label out of range for task '" + specs[t].name + "'");
      sum += cross_entropy(logits[s][t], it->second);
      ++n;
    }
    const double li = n > 0 ? sum / n : 0.0;
    any = any || n > 0;
    out.per_task[specs[t].name] = li;
    out.total += specs[t].weight * li;
  }
  if (!any) fail(ErrorKind::kData, "no task carries a label");
  return out;
}

struct Gradients {
  Eigen::MatrixXd shared_w;
  Eigen::VectorXd shared_b;
  std::vector<TaskHead> heads;
};

struct BatchResult {
  double loss = 0;
  Gradients grad;
};

// Loss and analytic gradients for a mini-batch, columns processed in order.
inline BatchResult loss_and_gradients(const MultiTaskModel& m,
                                      const std::vector<const TrainSample*>& batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const std::size_t num_tasks = m.tasks.size();
  Eigen::MatrixXd x(m.dims.input, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (static_cast<int>(batch[j]->feature.size()) != m.dims.input)
      fail(ErrorKind::kData, "feature dimension does not match the model");
    x.col(j) = as_eigen(batch[j]->feature);
  }
  const Eigen::MatrixXd z0 = (m.shared_w * x).colwise() + m.shared_b;
  const Eigen::MatrixXd e = z0.cwiseMax(0.0);

  BatchResult r;
  r.grad.shared_w = Eigen::MatrixXd::Zero(m.dims.embed, m.dims.input);
  r.grad.shared_b = Eigen::VectorXd::Zero(m.dims.embed);
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(m.dims.embed, n);
  bool any = false;

  for (std::size_t t = 0; t < num_tasks; ++t) {
    const auto& h = m.heads[t];
    const auto& spec = m.tasks[t];
    const Eigen::MatrixXd z1 = (h.branch_w * e).colwise() + h.branch_b;
    const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
    const Eigen::MatrixXd logits = (h.classifier_w * a1).colwise() + h.classifier_b;

    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(spec.num_classes, n);
    int labeled = 0;
    double sum = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      auto it = batch[j]->labels.find(spec.name);
      if (it == batch[j]->labels.end()) continue;
      const int label = it->second;
      if (label < 0 || label >= spec.num_classes)
        fail(ErrorKind::kData, "label out of range for task '" + spec.name + "'");
      const Eigen::VectorXd col = logits.col(j);
      sum += cross_entropy(col, label);
      dlogits.col(j) = softmax(col);
      dlogits(label, j) -= 1.0;
      ++labeled;
    }
    TaskHead g{Eigen::MatrixXd::Zero(h.branch_w.rows(), h.branch_w.cols()),
               Eigen::VectorXd::Zero(h.branch_b.size()),
               Eigen::MatrixXd::Zero(h.classifier_w.rows(), h.classifier_w.cols()),
               Eigen::VectorXd::Zero(h.classifier_b.size())};
    if (labeled > 0) {
      any = true;
      r.loss += spec.weight * sum / labeled;
      dlogits *= spec.weight / labeled;
      g.classifier_w = dlogits * a1.transpose();
      g.classifier_b = dlogits.rowwise().sum();
      const Eigen::MatrixXd dz1 =
          (h.classifier_w.transpose() * dlogits).cwiseProduct((z1.array() > 0).cast<double>().matrix());
      g.branch_w = dz1 * e.transpose();
      g.branch_b = dz1.rowwise().sum();
      de += h.branch_w.transpose() * dz1;
    }
    r.grad.heads.push_back(std::move(g));
  }
  if (!any) fail(ErrorKind::kData, "no task carries a label");
  const Eigen::MatrixXd dz0 = de.cwiseProduct((z0.array() > 0).cast<double>().matrix());
  r.grad.shared_w = dz0 * x.transpose();
  r.grad.shared_b = dz0.rowwise().sum();
  return r;
}

// Triangular cyclical schedule.
struct CyclicLRSchedule {
  double base_lr = 0.001;
  double max_lr = 0.01;
  std::int64_t step_size = 100;  // iterations per half cycle
  int num_cycles = 2;

  void validate() const {
    if (!(base_lr > 0) || !(base_lr < max_lr))
      fail(ErrorKind::kUsage, "cyclic schedule needs 0 < base_lr < max_lr");
    if (step_size < 1) fail(ErrorKind::kUsage, "cyclic schedule needs step_size >= 1");
    if (num_cycles < 1) fail(ErrorKind::kUsage, "cyclic schedule needs num_cycles >= 1");
  }
};

// cycle = floor(1 + t/2s), x = |t/s - 2 cycle + 1|, lr = base + (max-base) max(0,1-x),
// evaluated in integer phase so the endpoints and the period are exact.
inline double lr_at(const CyclicLRSchedule& s, std::int64_t t) {
  const std::int64_t period = 2 * s.step_size;
  const std::int64_t phase = t % period;
  const double x = static_cast<double>(phase > s.step_size ? phase - s.step_size
                                                          : s.step_size - phase) /
                   static_cast<double>(s.step_size);
  const double a = std::max(0.0, 1.0 - x);
  return s.base_lr * (1.0 - a) + s.max_lr * a;
}

struct TrainOptions {
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

inline void sgd_step(MultiTaskModel& m, const Gradients& g, double lr) {
  m.shared_w -= lr * g.shared_w;
  m.shared_b -= lr * g.shared_b;
  for (std::size_t t = 0; t < m.heads.size(); ++t) {
    m.heads[t].branch_w -= lr * g.heads[t].branch_w;
    m.heads[t].branch_b -= lr * g.heads[t].branch_b;
    m.heads[t].classifier_w -= lr * g.heads[t].classifier_w;
    m.heads[t].classifier_b -= lr * g.heads[t].classifier_b;
  }
}

// Plain mini-batch SGD with the cyclic schedule. The global iteration
// counter drives the learning rate across epochs.
inline TrainReport train(MultiTaskModel& m, const std::vector<TrainSample>& samples,
                         const CyclicLRSchedule& schedule, const TrainOptions& opt) {
  schedule.validate();
  if (opt.epochs < 0 || opt.batch_size < 1) fail(ErrorKind::kUsage, "bad training options");
  TrainReport report;
  if (opt.epochs == 0) return report;
  if (samples.empty()) fail(ErrorKind::kData, "no training samples");

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::int64_t iteration = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng() % (i + 1)]);
    double sum = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      std::vector<const TrainSample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + opt.batch_size); ++k)
        batch.push_back(&samples[order[k]]);
      bool labeled = false;
      for (const auto* s : batch)
        for (const auto& [task, _] : s->labels) labeled = labeled || m.task_index(task) >= 0;
      if (!labeled) continue;
      auto r = loss_and_gradients(m, batch);
      if (!std::isfinite(r.loss))
        fail(ErrorKind::kConvergence,
             "training diverged at epoch " + std::to_string(epoch));
      sgd_step(m, r.grad, lr_at(schedule, iteration++));
      sum += r.loss;
      ++batches;
    }
    report.epoch_loss.push_back(batches ? sum / batches : 0.0);
  }
  return report;
}

// Task index -> class with the highest logit (lower index on ties).
inline int predict(const MultiTaskModel& m, const RawFeature& f, int task = 0) {
  const auto r = forward(m, f);
  Eigen::Index best = 0;
  r.logits[task].maxCoeff(&best);
  return static_cast<int>(best);
}

inline Embedding extract_embedding(const MultiTaskModel& m, const RawFeature& f) {
  const auto r = forward(m, f);
  if (!(r.embedding.norm() > 0)) fail(ErrorKind::kData, "embedding is the zero vector");
  Embedding e;
  const Eigen::VectorXd unit = r.embedding / r.embedding.norm();
  e.base.assign(unit.data(), unit.data() + unit.size());
  for (std::size_t t = 0; t < m.tasks.size(); ++t)
    e.task_features[m.tasks[t].name].assign(r.branch[t].data(),
                                            r.branch[t].data() + r.branch[t].size());
  return e;
}

// Checkpoint layout: "STMD", u16 version, u16 input/embed/branch dims,
// u32 task count, per task (string name, u32 classes, f64 weight), then f32
// parameter blocks: shared W, shared b, and per task branch W, branch b,
// classifier W, classifier b (row-major); trailing CRC-32.
inline constexpr char kModelMagic[4] = {'S', 'T', 'M', 'D'};
inline constexpr std::uint16_t kModelVersion = 1;

namespace detail {

inline void put_block(io::ByteWriter& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<float>(static_cast<float>(m(i, j)));
}

inline void get_block(io::ByteReader& r, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<float>();
}

inline void get_block(io::ByteReader& r, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = r.get<float>();
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_model(const MultiTaskModel& m) {
  io::ByteWriter w;
  w.put_bytes({kModelMagic, 4});
  w.put<std::uint16_t>(kModelVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(m.dims.input));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(m.dims.embed));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(m.dims.branch));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.tasks.size()));
  for (const auto& t : m.tasks) {
    w.put_string(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.num_classes));
    w.put<double>(t.weight);
  }
  detail::put_block(w, m.shared_w);
  detail::put_block(w, m.shared_b);
  for (const auto& h : m.heads) {
    detail::put_block(w, h.branch_w);
    detail::put_block(w, h.branch_b);
    detail::put_block(w, h.classifier_w);
    detail::put_block(w, h.classifier_b);
  }
  w.put_checksum();
  return w.bytes();
}

inline MultiTaskModel deserialize_model(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < 4 || r.get_bytes(4) != std::string(kModelMagic, 4))
    fail(ErrorKind::kFormat, "not a model checkpoint");
  if (r.get<std::uint16_t>() != kModelVersion)
    fail(ErrorKind::kFormat, "unsupported checkpoint version");
  ModelDims dims;
  dims.input = r.get<std::uint16_t>();
  dims.embed = r.get<std::uint16_t>();
  dims.branch = r.get<std::uint16_t>();
  const auto count = r.get<std::uint32_t>();
  std::vector<TaskSpec> specs;
  for (std::uint32_t i = 0; i < count; ++i) {
    TaskSpec s;
    s.name = r.get_string();
    s.num_classes = static_cast<int>(r.get<std::uint32_t>());
    s.weight = r.get<double>();
    specs.push_back(std::move(s));
  }
  std::size_t params = static_cast<std::size_t>(dims.embed) * (dims.input + 1);
  for (const auto& s : specs)
    params += static_cast<std::size_t>(dims.branch) * (dims.embed + 1) +
              static_cast<std::size_t>(s.num_classes) * (dims.branch + 1);
  r.require(params * sizeof(float) + 4);
  if (!io::checksum_matches(bytes)) fail(ErrorKind::kChecksum, "checkpoint checksum mismatch");
  auto m = zero_model(std::move(specs), dims);
  detail::get_block(r, m.shared_w);
  detail::get_block(r, m.shared_b);
  for (auto& h : m.heads) {
    detail::get_block(r, h.branch_w);
    detail::get_block(r, h.branch_b);
    detail::get_block(r, h.classifier_w);
    detail::get_block(r, h.classifier_b);
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const MultiTaskModel& m) {
  io::write_file_atomic(path, serialize_model(m));
}

inline MultiTaskModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path));
}

}  // namespace stsearch
