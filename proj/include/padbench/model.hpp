#pragma once

// PADNet: a pretrained MobileNetV2-style backbone with its classifier removed,
// a frozen prefix of convolution layers, and a dense head ending in two
// sigmoid units (unit 0 = bona fide, unit 1 = attack).

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "padbench/archive.hpp"
#include "padbench/backbone.hpp"
#include "padbench/dataset.hpp"
#include "padbench/error.hpp"
#include "padbench/image.hpp"
#include "padbench/metrics.hpp"
#include "padbench/nn.hpp"
#include "padbench/rng.hpp"

namespace padbench {

// ---- model description types ----

// Inclusive, 1-based backbone layer interval.
struct LayerRange {
  int first = 1;
  int last = 1;

  int size() const { return last - first + 1; }
  bool operator==(const LayerRange&) const = default;
};

// Frozen layers form a prefix of the backbone; the rest is trainable. Either
// range may be absent (nothing frozen / whole backbone frozen). Head layers are
// always trainable.
struct FreezePlan {
  std::optional<LayerRange> frozen;
  std::optional<LayerRange> trainable;

  static FreezePlan freeze_through(int last_frozen) {
    FreezePlan p;
    if (last_frozen >= 1) p.frozen = LayerRange{1, last_frozen};
    if (last_frozen < backbone_layer_count) p.trainable = LayerRange{last_frozen + 1, backbone_layer_count};
    return p;
  }

  int frozen_count() const { return frozen ? frozen->size() : 0; }

  bool is_frozen(int layer) const { return frozen && layer >= frozen->first && layer <= frozen->last; }

  void validate() const {
    auto check = [](const LayerRange& r, const char* what) {
      if (r.first < 1 || r.last > backbone_layer_count || r.first > r.last)
        throw domain_error(std::string(what) + " range " + std::to_string(r.first) + "-" + std::to_string(r.last) +
                           " is outside layers 1-" + std::to_string(backbone_layer_count));
    };
    if (frozen) check(*frozen, "frozen");
    if (trainable) check(*trainable, "trainable");
    if (frozen && frozen->first != 1) throw domain_error("frozen layers must start at layer 1");
    const int split = frozen_count();
    if (trainable ? (trainable->first != split + 1 || trainable->last != backbone_layer_count)
                  : split != backbone_layer_count)
      throw domain_error("frozen and trainable ranges must cover layers 1-" + std::to_string(backbone_layer_count) +
                         " exactly once");
  }

  bool operator==(const FreezePlan&) const = default;
};

struct HeadLayer {
  int width = 0;
  nn::Activation activation = nn::Activation::relu;

  bool operator==(const HeadLayer&) const = default;
};

struct HeadSpec {
  std::vector<HeadLayer> layers;

  // Dense 1024 / 1024 / 512 with ReLU, then 2 sigmoid units.
  static HeadSpec padnet() {
    using nn::Activation;
    return {{{1024, Activation::relu}, {1024, Activation::relu}, {512, Activation::relu}, {2, Activation::sigmoid}}};
  }

  void validate() const {
    if (layers.empty()) throw domain_error("head has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].width <= 0) throw domain_error("head layer widths must be positive");
      if (i + 1 < layers.size() && layers[i].activation != nn::Activation::relu)
        throw domain_error("hidden head layers must use relu");
    }
    if (layers.back().width != 2 || layers.back().activation != nn::Activation::sigmoid)
      throw domain_error("final head layer must be 2 sigmoid units, got " + std::to_string(layers.back().width) +
                         " " + nn::to_string(layers.back().activation));
  }

  bool operator==(const HeadSpec&) const = default;
};

enum class OptimizerKind { adam, sgd_momentum };

NLOHMANN_JSON_SERIALIZE_ENUM(OptimizerKind, {{OptimizerKind::adam, "adam"},
                                             {OptimizerKind::sgd_momentum, "sgd_momentum"}})

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;  // Adam default unless configured
  double momentum = 0.0;        // sgd_momentum only
  int batch_size = 32;
  int epochs = 50;
  std::array<int, 3> input_size{input_side, input_side, input_channels};
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::symmetric;

  void validate() const {
    if (!(learning_rate > 0.0)) throw domain_error("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw domain_error("momentum must lie in [0, 1)");
    if (batch_size < 1) throw domain_error("batch size must be positive");
    if (epochs < 1) throw domain_error("epochs must be positive");
    if (input_size != std::array<int, 3>{input_side, input_side, input_channels})
      throw domain_error("input size must be 224x224x3");
  }

  bool operator==(const TrainConfig&) const = default;
};

enum class Variant { padnet1, padnet2 };

NLOHMANN_JSON_SERIALIZE_ENUM(Variant, {{Variant::padnet1, "padnet1"}, {Variant::padnet2, "padnet2"}})

struct PADNetSpec {
  Variant variant = Variant::padnet1;
  FreezePlan freeze_plan;
  HeadSpec head;
  TrainConfig train_config;

  bool operator==(const PADNetSpec&) const = default;
};

// PADNet-1: layers 1-26 frozen, Adam, batch 32, 50 epochs.
// PADNet-2: layers 1-16 frozen, SGD (lr 1e-4, momentum 0.9), batch 64.
inline PADNetSpec padnet_spec(Variant v) {
  PADNetSpec s;
  s.variant = v;
  s.head = HeadSpec::padnet();
  if (v == Variant::padnet1) {
    s.freeze_plan = FreezePlan::freeze_through(26);
    s.train_config.optimizer = OptimizerKind::adam;
    s.train_config.learning_rate = 1e-3;
    s.train_config.batch_size = 32;
    s.train_config.epochs = 50;
  } else {
    s.freeze_plan = FreezePlan::freeze_through(16);
    s.train_config.optimizer = OptimizerKind::sgd_momentum;
    s.train_config.learning_rate = 1e-4;
    s.train_config.momentum = 0.9;
    s.train_config.batch_size = 64;
    s.train_config.epochs = 50;
  }
  return s;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"optimizer", c.optimizer},       {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},         {"batch_size", c.batch_size},
          {"epochs", c.epochs},             {"input_size", c.input_size},
          {"seed", c.seed},                 {"normalization", to_string(c.normalization)},
          {"adam", {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-7}}}};
}

// Missing keys keep the values already in `c`.
inline void merge_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("optimizer")) {
    const auto name = j.at("optimizer").get<std::string>();
    if (name != "adam" && name != "sgd_momentum") throw domain_error("unknown optimizer '" + name + "'");
    c.optimizer = name == "adam" ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
  }
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("input_size")) c.input_size = j.at("input_size").get<std::array<int, 3>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("normalization")) c.normalization = normalization_from_string(j.at("normalization"));
}

inline nlohmann::json to_json(const PADNetSpec& s) {
  nlohmann::json head = nlohmann::json::array();
  for (const auto& l : s.head.layers) head.push_back({{"width", l.width}, {"activation", nn::to_string(l.activation)}});
  auto range = [](const std::optional<LayerRange>& r) {
    return r ? nlohmann::json{r->first, r->last} : nlohmann::json(nullptr);
  };
  return {{"variant", s.variant},
          {"freeze_plan", {{"frozen", range(s.freeze_plan.frozen)}, {"trainable", range(s.freeze_plan.trainable)}}},
          {"head", head},
          {"train_config", to_json(s.train_config)}};
}

inline PADNetSpec padnet_spec_from_json(const nlohmann::json& j) {
  PADNetSpec s;
  s.variant = j.at("variant").get<Variant>();
  auto range = [](const nlohmann::json& r) -> std::optional<LayerRange> {
    if (r.is_null()) return std::nullopt;
    return LayerRange{r.at(0).get<int>(), r.at(1).get<int>()};
  };
  s.freeze_plan.frozen = range(j.at("freeze_plan").at("frozen"));
  s.freeze_plan.trainable = range(j.at("freeze_plan").at("trainable"));
  for (const auto& l : j.at("head"))
    s.head.layers.push_back({l.at("width").get<int>(), nn::activation_from_string(l.at("activation"))});
  merge_json(j.at("train_config"), s.train_config);
  return s;
}

// ---- network ------------------------------------------------------------------

// Backbone + dense head, with backbone units [0, trainable_from) frozen.
struct TransferNet {
  Backbone backbone;
  int trainable_from = 0;  // 0-based index of the first trainable unit
  std::vector<nn::DenseLayer> head;
  Normalization normalization = Normalization::symmetric;

  bool has_trainable_backbone() const { return trainable_from < static_cast<int>(backbone.units.size()); }

  // First stage whose output depends on trainable parameters.
  std::size_t prefix_stage() const {
    return has_trainable_backbone() ? backbone.stage_of(trainable_from) : backbone.stages.size();
  }

  bool operator==(const TransferNet&) const = default;
};

// Frozen units get empty gradient buffers.
struct Gradients {
  std::vector<nn::ConvGrad> units;
  std::vector<nn::DenseGrad> head;

  explicit Gradients(const TransferNet& net) {
    for (std::size_t u = 0; u < net.backbone.units.size(); ++u) {
      if (static_cast<int>(u) >= net.trainable_from)
        units.emplace_back(net.backbone.units[u]);
      else
        units.emplace_back();
    }
    for (const auto& l : net.head) head.emplace_back(l);
  }
};

// Trainable tensors in a fixed order: backbone units (weight, gamma, beta),
// then head layers (weight, bias).
inline std::vector<nn::ParamSlot> param_slots(TransferNet& net, const Gradients& g) {
  std::vector<nn::ParamSlot> slots;
  for (std::size_t u = static_cast<std::size_t>(net.trainable_from); u < net.backbone.units.size(); ++u) {
    auto& unit = net.backbone.units[u];
    const auto& gu = g.units[u];
    slots.push_back({unit.weight, gu.weight});
    slots.push_back({unit.gamma, gu.gamma});
    slots.push_back({unit.beta, gu.beta});
  }
  for (std::size_t k = 0; k < net.head.size(); ++k) {
    slots.push_back({net.head[k].weight, g.head[k].weight});
    slots.push_back({net.head[k].bias, g.head[k].bias});
  }
  return slots;
}

// Activations entering the first stage that contains trainable units. Frozen
// stages are evaluated once per input.
inline nn::Tensor3 frozen_prefix(const TransferNet& net, const nn::Tensor3& input) {
  return run_stages(net.backbone, input, 0, net.prefix_stage());
}

inline std::vector<double> features_from_prefix(const TransferNet& net, const nn::Tensor3& prefix) {
  return global_average_pool(run_stages(net.backbone, prefix, net.prefix_stage(), net.backbone.stages.size()));
}

inline nn::Matrix stack_rows(const std::vector<std::vector<double>>& rows) {
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

// Pooled backbone features, one row per input.
inline nn::Matrix extract_features(const TransferNet& net, std::span<const nn::Tensor3> inputs) {
  std::vector<std::vector<double>> rows;
  for (const auto& x : inputs) rows.push_back(global_average_pool(run_stages(net.backbone, x, 0, net.backbone.stages.size())));
  return stack_rows(rows);
}

inline nn::Matrix forward_logits(const TransferNet& net, std::span<const nn::Tensor3> inputs) {
  return nn::dense_forward(net.head, extract_features(net, inputs));
}

struct BatchResult {
  double loss = 0.0;
  nn::Matrix logits;
};

// Loss and accumulated gradients for the rows `rows` of `prefix`/`targets`.
inline BatchResult loss_and_gradients(const TransferNet& net, std::span<const nn::Tensor3> prefix,
                                      std::span<const std::size_t> rows, const nn::Matrix& targets, Gradients& g) {
  const auto first_stage = net.prefix_stage();
  const auto n_stages = net.backbone.stages.size();
  const auto batch = static_cast<Eigen::Index>(rows.size());

  std::vector<std::vector<double>> feats;
  nn::Matrix batch_targets(batch, targets.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    feats.push_back(features_from_prefix(net, prefix[rows[b]]));
    batch_targets.row(b) = targets.row(static_cast<Eigen::Index>(rows[b]));
  }

  nn::DenseCache cache;
  BatchResult r;
  r.logits = nn::dense_forward(net.head, stack_rows(feats), &cache);
  nn::Matrix d_logits;
  r.loss = nn::bce_with_logits(r.logits, batch_targets, &d_logits);
  const nn::Matrix d_feat = nn::dense_backward(net.head, cache, std::move(d_logits), g.head);

  if (net.has_trainable_backbone()) {
    std::vector<nn::UnitCache> caches(net.backbone.units.size());
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto out = run_stages(net.backbone, prefix[rows[b]], first_stage, n_stages, &caches, net.trainable_from);
      nn::Tensor3 d_out(out.h, out.w, out.c);
      const double inv = 1.0 / out.pixels();
      for (std::size_t i = 0; i < d_out.data.size(); i += out.c)
        for (int c = 0; c < out.c; ++c) d_out.data[i + c] = d_feat(b, c) * inv;
      backprop_stages(net.backbone, caches, std::move(d_out), first_stage, n_stages, net.trainable_from, g.units);
    }
  }
  return r;
}

// Index of the largest value; ties resolve to the later index.
inline Eigen::Index argmax_row(const nn::Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(r, c) >= m(r, best)) best = c;
  return best;
}

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const EpochStats&) const = default;
};

using History = std::vector<EpochStats>;

// Mini-batch training of every parameter at or after `trainable_from` plus the
// head. Loss and accuracy per epoch are running averages over the epoch's
// batches, measured before each update.
inline History fit(TransferNet& net, std::span<const nn::Tensor3> inputs, const nn::Matrix& targets,
                   const TrainConfig& config) {
  config.validate();
  if (inputs.empty()) throw domain_error("no training inputs");
  if (targets.rows() != static_cast<Eigen::Index>(inputs.size()))
    throw domain_error("targets and inputs differ in length");

  std::vector<nn::Tensor3> prefix;
  prefix.reserve(inputs.size());
  for (const auto& x : inputs) prefix.push_back(frozen_prefix(net, x));

  std::variant<nn::Adam, nn::SgdMomentum> optimizer =
      config.optimizer == OptimizerKind::adam
          ? std::variant<nn::Adam, nn::SgdMomentum>(nn::Adam(nn::AdamOptions{config.learning_rate}))
          : std::variant<nn::Adam, nn::SgdMomentum>(nn::SgdMomentum(config.learning_rate, config.momentum));

  Rng rng(mix_seed(config.seed, 0xf17));
  std::vector<std::size_t> order(inputs.size());
  History history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      Gradients g(net);
      const auto r = loss_and_gradients(net, prefix, rows, targets, g);
      loss_sum += r.loss * static_cast<double>(rows.size());
      for (Eigen::Index b = 0; b < r.logits.rows(); ++b)
        if (argmax_row(r.logits, b) == argmax_row(targets, static_cast<Eigen::Index>(rows[b]))) ++correct;
      const auto slots = param_slots(net, g);
      std::visit([&](auto& opt) { opt.step(slots); }, optimizer);
    }
    history.push_back({loss_sum / static_cast<double>(inputs.size()),
                       static_cast<double>(correct) / static_cast<double>(inputs.size())});
  }
  return history;
}

// ---- PADNet -------------------------------------------------------------------

struct ParameterReport {
  std::size_t backbone_trainable = 0;
  std::size_t backbone_frozen = 0;
  std::size_t backbone_buffers = 0;  // batch-norm running statistics
  std::size_t head_trainable = 0;

  std::size_t trainable() const { return backbone_trainable + head_trainable; }
};

struct PadNet {
  PADNetSpec spec;
  TransferNet net;

  ParameterReport parameters() const {
    ParameterReport r;
    for (std::size_t u = 0; u < net.backbone.units.size(); ++u) {
      const auto& unit = net.backbone.units[u];
      (static_cast<int>(u) < net.trainable_from ? r.backbone_frozen : r.backbone_trainable) += unit.trainable_count();
      r.backbone_buffers += unit.buffer_count();
    }
    for (const auto& l : net.head) r.head_trainable += l.parameter_count();
    return r;
  }
};

inline void check_backbone(const Backbone& b) {
  if (b.architecture != backbone_architecture || b.units.size() != backbone_layer_count)
    throw config_error("backbone must be a " + std::string(backbone_architecture) + " network with " +
                       std::to_string(backbone_layer_count) + " convolution layers");
}

inline PadNet build_padnet(const PADNetSpec& spec, const Backbone& pretrained) {
  spec.freeze_plan.validate();
  spec.head.validate();
  spec.train_config.validate();
  check_backbone(pretrained);
  PadNet m;
  m.spec = spec;
  m.net.backbone = pretrained;
  m.net.trainable_from = spec.freeze_plan.frozen_count();
  m.net.normalization = spec.train_config.normalization;
  Rng rng(mix_seed(spec.train_config.seed, 0x4ead));
  int width = pretrained.output_width();
  for (const auto& l : spec.head.layers) {
    auto layer = nn::DenseLayer::make(width, l.width, l.activation);
    layer.init(rng);
    m.net.head.push_back(std::move(layer));
    width = l.width;
  }
  return m;
}

// ---- backbone checkpoints -------------------------------------------------------

inline constexpr const char* backbone_file_name = "mobilenetv2-28.pbk";

inline void append_backbone_tensors(const Backbone& b, Archive& a) {
  for (std::size_t u = 0; u < b.units.size(); ++u) {
    const auto& unit = b.units[u];
    const auto p = "backbone." + std::to_string(u + 1) + ".";
    a.tensors.emplace_back(p + "weight", unit.weight);
    a.tensors.emplace_back(p + "gamma", unit.gamma);
    a.tensors.emplace_back(p + "beta", unit.beta);
    a.tensors.emplace_back(p + "mean", unit.mean);
    a.tensors.emplace_back(p + "var", unit.var);
  }
}

inline Backbone backbone_from_archive(const Archive& a) {
  if (a.meta.value("architecture", std::string()) != backbone_architecture)
    throw format_error("archive does not hold a " + std::string(backbone_architecture) + " backbone");
  Backbone b = mobilenet_v2_28();
  for (std::size_t u = 0; u < b.units.size(); ++u) {
    auto& unit = b.units[u];
    const auto p = "backbone." + std::to_string(u + 1) + ".";
    auto load = [&](const std::string& name, std::vector<double>& dst) {
      const auto& src = a.tensor(p + name);
      if (src.size() != dst.size()) throw format_error("tensor '" + p + name + "' has the wrong size");
      dst = src;
    };
    load("weight", unit.weight);
    load("gamma", unit.gamma);
    load("beta", unit.beta);
    load("mean", unit.mean);
    load("var", unit.var);
  }
  return b;
}

inline void save_backbone(const Backbone& b, const std::filesystem::path& path) {
  Archive a;
  a.meta = {{"kind", "backbone"}, {"architecture", b.architecture}};
  append_backbone_tensors(b, a);
  write_archive(path, a);
}

inline Backbone load_backbone(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw config_error("backbone checkpoint '" + path.string() + "' not found");
  const auto a = read_archive(path);
  if (a.meta.value("kind", std::string()) != "backbone")
    throw format_error("'" + path.string() + "' is not a backbone checkpoint");
  return backbone_from_archive(a);
}

// $PADBENCH_CACHE (a directory holding the checkpoint, or the file itself),
// falling back to ~/.cache/padbench.
inline std::filesystem::path default_backbone_path() {
  namespace fs = std::filesystem;
  if (const char* env = std::getenv("PADBENCH_CACHE"); env && *env) {
    const fs::path p(env);
    std::error_code ec;
    return fs::is_directory(p, ec) ? p / backbone_file_name : p;
  }
  const char* home = std::getenv("HOME");
  return fs::path(home ? home : ".") / ".cache" / "padbench" / backbone_file_name;
}

inline PadNet build_padnet(const PADNetSpec& spec, const std::filesystem::path& backbone_checkpoint) {
  spec.freeze_plan.validate();
  spec.head.validate();
  return build_padnet(spec, load_backbone(backbone_checkpoint));
}

// ---- training and inference -------------------------------------------------------

inline std::vector<nn::Tensor3> load_inputs(const Manifest& m, std::span<const SampleRecord> samples,
                                            Normalization norm) {
  std::vector<nn::Tensor3> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(preprocess(load_rgb(m.resolve(s)), norm));
  return out;
}

// One-hot rows: column 0 = bona fide, column 1 = attack.
inline nn::Matrix label_targets(std::span<const SampleRecord> samples) {
  nn::Matrix t = nn::Matrix::Zero(static_cast<Eigen::Index>(samples.size()), 2);
  for (std::size_t i = 0; i < samples.size(); ++i)
    t(static_cast<Eigen::Index>(i), samples[i].label == Label::attack ? 1 : 0) = 1.0;
  return t;
}

struct TrainResult {
  History history;
  EpochStats final;  // trained model evaluated on the training set, inference mode
};

inline EpochStats evaluate_fit(const TransferNet& net, std::span<const nn::Tensor3> inputs, const nn::Matrix& targets) {
  const auto logits = forward_logits(net, inputs);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) correct += argmax_row(logits, r) == argmax_row(targets, r);
  return {nn::bce_with_logits(logits, targets), static_cast<double>(correct) / static_cast<double>(logits.rows())};
}

inline TrainResult train(PadNet& model, const Manifest& train_manifest, const TrainConfig& config) {
  config.validate();
  const auto c = train_manifest.counts();
  if (c.bona_fide == 0 || c.bona_fide == train_manifest.samples.size())
    throw domain_error("training manifest must contain both bona fide and attack samples");
  const auto inputs = load_inputs(train_manifest, train_manifest.samples, config.normalization);
  model.net.normalization = config.normalization;
  model.spec.train_config = config;
  const auto targets = label_targets(train_manifest.samples);
  TrainResult r;
  r.history = fit(model.net, inputs, targets, config);
  r.final = evaluate_fit(model.net, inputs, targets);
  return r;
}

// s_attack / (s_attack + s_bona_fide); 0.5 when both vanish.
inline double renormalized_score(double s_bona_fide, double s_attack) {
  const double sum = s_attack + s_bona_fide;
  return sum > 0.0 ? s_attack / sum : 0.5;
}

struct ScoreRecord {
  std::string sample_id;
  GroundTruth ground_truth = GroundTruth::bona_fide;
  std::optional<std::string> pais;
  double score = 0.5;
  double s_bona_fide = 0.0;
  double s_attack = 0.0;

  Decision decision(double tau = default_tau) const { return {sample_id, score, ground_truth, pais, tau}; }

  bool operator==(const ScoreRecord&) const = default;
};

// Attack-likelihood scores for preprocessed inputs, in input order.
inline std::vector<double> score_inputs(const TransferNet& net, std::span<const nn::Tensor3> inputs) {
  const auto logits = forward_logits(net, inputs);
  std::vector<double> out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    out.push_back(renormalized_score(nn::sigmoid(logits(r, 0)), nn::sigmoid(logits(r, 1))));
  return out;
}

inline std::vector<ScoreRecord> predict(const PadNet& model, const Manifest& m, std::span<const SampleRecord> samples,
                                        std::size_t batch_size = 16) {
  std::vector<ScoreRecord> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const auto chunk = samples.subspan(start, std::min(batch_size, samples.size() - start));
    const auto inputs = load_inputs(m, chunk, model.net.normalization);
    const auto logits = forward_logits(model.net, inputs);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& s = chunk[i];
      ScoreRecord r;
      r.sample_id = s.path;
      r.ground_truth = s.label == Label::attack ? GroundTruth::attack : GroundTruth::bona_fide;
      if (s.pais) r.pais = s.pais->abbreviation;
      r.s_bona_fide = nn::sigmoid(logits(static_cast<Eigen::Index>(i), 0));
      r.s_attack = nn::sigmoid(logits(static_cast<Eigen::Index>(i), 1));
      r.score = renormalized_score(r.s_bona_fide, r.s_attack);
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::vector<ScoreRecord> predict(const PadNet& model, const Manifest& m) {
  return predict(model, m, m.samples);
}

// ---- model files --------------------------------------------------------------------

inline constexpr int model_schema_version = 1;

inline void save_model(const PadNet& model, const std::filesystem::path& path) {
  Archive a;
  nlohmann::json head = nlohmann::json::array();
  for (const auto& l : model.net.head)
    head.push_back({{"in", l.in}, {"out", l.out}, {"activation", nn::to_string(l.activation)}});
  a.meta = {{"kind", "padnet"},
            {"schema_version", model_schema_version},
            {"architecture", model.net.backbone.architecture},
            {"spec", to_json(model.spec)},
            {"trainable_from_layer", model.net.trainable_from + 1},
            {"head_layers", head},
            {"class_index", {{"0", "bona_fide"}, {"1", "attack"}}},
            {"preprocessing",
             {{"resize", "bilinear"},
              {"input_size", {input_side, input_side, input_channels}},
              {"normalization", to_string(model.net.normalization)}}}};
  append_backbone_tensors(model.net.backbone, a);
  for (std::size_t k = 0; k < model.net.head.size(); ++k) {
    a.tensors.emplace_back("head." + std::to_string(k) + ".weight", model.net.head[k].weight);
    a.tensors.emplace_back("head." + std::to_string(k) + ".bias", model.net.head[k].bias);
  }
  write_archive(path, a);
}

inline PadNet load_model(const std::filesystem::path& path) {
  const auto a = read_archive(path);
  try {
    if (a.meta.value("kind", std::string()) != "padnet")
      throw format_error("'" + path.string() + "' is not a PADNet model file");
    if (a.meta.at("schema_version").get<int>() != model_schema_version)
      throw format_error("unsupported model schema_version " + a.meta.at("schema_version").dump());
    if (a.meta.at("class_index").at("1").get<std::string>() != "attack")
      throw format_error("unsupported class-index convention");
    PadNet m;
    m.spec = padnet_spec_from_json(a.meta.at("spec"));
    m.net.backbone = backbone_from_archive(a);
    m.net.trainable_from = a.meta.at("trainable_from_layer").get<int>() - 1;
    m.net.normalization = normalization_from_string(a.meta.at("preprocessing").at("normalization"));
    std::size_t k = 0;
    for (const auto& l : a.meta.at("head_layers")) {
      auto layer = nn::DenseLayer::make(l.at("in").get<int>(), l.at("out").get<int>(),
                                        nn::activation_from_string(l.at("activation")));
      const auto& w = a.tensor("head." + std::to_string(k) + ".weight");
      const auto& b = a.tensor("head." + std::to_string(k) + ".bias");
      if (w.size() != layer.weight.size() || b.size() != layer.bias.size())
        throw format_error("head layer " + std::to_string(k) + " has the wrong size");
      layer.weight = w;
      layer.bias = b;
      m.net.head.push_back(std::move(layer));
      ++k;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("malformed model metadata: ") + e.what());
  } catch (const domain_error& e) {
    throw format_error(std::string("invalid model metadata: ") + e.what());
  }
}

}  // namespace padbench
