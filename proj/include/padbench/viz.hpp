#pragma once

// Two-neuron embedding, t-SNE / PCA projections and static scatter plots.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "padbench/dataset.hpp"
#include "padbench/error.hpp"
#include "padbench/model.hpp"
#include "padbench/tsne.hpp"

namespace padbench {

struct EmbeddingPoint {
  std::string sample_id;
  Point2 coords{0.0, 0.0};
  std::string label;

  bool operator==(const EmbeddingPoint&) const = default;
};

// Subject id when known, otherwise the PAIS abbreviation, otherwise "bona_fide".
inline std::string embedding_label(const SampleRecord& s) {
  if (s.subject_id) return *s.subject_id;
  if (s.pais) return s.pais->abbreviation;
  return "bona_fide";
}

struct Embedder {
  TransferNet net;  // head: [2 linear, K sigmoid]; the K-unit layer is only a training target
  std::vector<std::string> classes;
  History history;

  // 2-D coordinates per input: pooled features through the linear 2-unit layer.
  std::vector<Point2> embed(std::span<const nn::Tensor3> inputs) const {
    const auto feats = extract_features(net, inputs);
    const auto z = nn::dense_forward(std::span(net.head).first(1), feats);
    std::vector<Point2> out;
    for (Eigen::Index r = 0; r < z.rows(); ++r) out.push_back({z(r, 0), z(r, 1)});
    return out;
  }
};

// Trains backbone tail + 2-unit embedding + temporary K-way layer on the
// labels of `samples`. Backbone layers 1-26 stay frozen.
inline Embedder build_embedder(const Backbone& backbone, std::span<const nn::Tensor3> inputs,
                               std::span<const std::string> labels, const TrainConfig& config) {
  if (inputs.size() != labels.size()) throw domain_error("inputs and labels differ in length");
  const std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2)
    throw domain_error("embedding needs at least 2 classes, found " + std::to_string(distinct.size()));
  check_backbone(backbone);
  config.validate();

  Embedder e;
  e.classes.assign(distinct.begin(), distinct.end());
  e.net.backbone = backbone;
  e.net.trainable_from = FreezePlan::freeze_through(26).frozen_count();
  e.net.normalization = config.normalization;
  Rng rng(mix_seed(config.seed, 0xe3b));
  auto embed = nn::DenseLayer::make(backbone.output_width(), 2, nn::Activation::linear);
  embed.init(rng);
  auto classify = nn::DenseLayer::make(2, static_cast<int>(e.classes.size()), nn::Activation::sigmoid);
  classify.init(rng);
  e.net.head = {std::move(embed), std::move(classify)};

  std::map<std::string, Eigen::Index> index;
  for (std::size_t k = 0; k < e.classes.size(); ++k) index[e.classes[k]] = static_cast<Eigen::Index>(k);
  nn::Matrix targets = nn::Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                                        static_cast<Eigen::Index>(e.classes.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) targets(static_cast<Eigen::Index>(i), index[labels[i]]) = 1.0;
  e.history = fit(e.net, inputs, targets, config);
  return e;
}

inline std::vector<EmbeddingPoint> embed_manifest(const Backbone& backbone, const Manifest& m,
                                                  const TrainConfig& config) {
  std::vector<std::string> labels;
  for (const auto& s : m.samples) labels.push_back(embedding_label(s));
  const auto inputs = load_inputs(m, m.samples, config.normalization);
  const auto e = build_embedder(backbone, inputs, labels, config);
  const auto coords = e.embed(inputs);
  std::vector<EmbeddingPoint> out;
  for (std::size_t i = 0; i < coords.size(); ++i) out.push_back({m.samples[i].path, coords[i], labels[i]});
  return out;
}

// Projection on the first two principal axes. Each axis is signed so that its
// largest-magnitude loading is positive.
inline std::vector<Point2> pca_project(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw domain_error("PCA needs at least 2 samples");
  const Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(features.cols(), 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, svd.matrixV().cols()); ++k) {
    Eigen::VectorXd v = svd.matrixV().col(k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  const Eigen::MatrixXd y = centered * axes;
  std::vector<Point2> out;
  for (Eigen::Index r = 0; r < y.rows(); ++r) out.push_back({y(r, 0), y(r, 1)});
  return out;
}

// Mean fraction of each point's k nearest neighbours (self excluded) that
// share its label.
inline double knn_label_purity(std::span<const Point2> points, std::span<const std::string> labels, int k) {
  const auto n = points.size();
  if (n != labels.size()) throw domain_error("points and labels differ in length");
  if (k < 1 || static_cast<std::size_t>(k) >= n) throw domain_error("k must lie in [1, n-1]");
  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back({std::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]), j});
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    int same = 0;
    for (int t = 0; t < k; ++t) same += labels[d[static_cast<std::size_t>(t)].second] == labels[i];
    total += static_cast<double>(same) / k;
  }
  return total / static_cast<double>(n);
}

namespace detail {

// BGR
inline cv::Scalar palette_color(std::size_t i) {
  static constexpr unsigned char base[10][3] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                                                {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
                                                {188, 189, 34}, {23, 190, 207}};
  const auto* c = base[i % 10];
  const double shade = 1.0 - 0.35 * static_cast<double>((i / 10) % 3);
  return {c[2] * shade, c[1] * shade, c[0] * shade};
}

}  // namespace detail

struct PlotOptions {
  int width = 900;
  int height = 640;
  std::string title;
};

// Writes a PNG. Labels get palette colours in sorted order.
inline void scatter_plot(std::span<const EmbeddingPoint> points, const std::filesystem::path& out_path,
                         const PlotOptions& opt = {}) {
  if (points.empty()) throw domain_error("scatter plot needs at least one point");
  for (const auto& p : points)
    if (!std::isfinite(p.coords[0]) || !std::isfinite(p.coords[1]))
      throw domain_error("non-finite coordinates for '" + p.sample_id + "'");

  std::set<std::string> label_set;
  for (const auto& p : points) label_set.insert(p.label);
  std::map<std::string, std::size_t> color_of;
  for (const auto& l : label_set) color_of.emplace(l, color_of.size());

  const int legend_w = 220, margin = 40;
  cv::Mat canvas(opt.height, opt.width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Rect plot(margin, margin, opt.width - legend_w - 2 * margin, opt.height - 2 * margin);
  cv::rectangle(canvas, plot, cv::Scalar(0, 0, 0), 1, cv::LINE_8);

  double x0 = points[0].coords[0], x1 = x0, y0 = points[0].coords[1], y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.coords[0]);
    x1 = std::max(x1, p.coords[0]);
    y0 = std::min(y0, p.coords[1]);
    y1 = std::max(y1, p.coords[1]);
  }
  const double sx = x1 > x0 ? (plot.width - 20) / (x1 - x0) : 0.0;
  const double sy = y1 > y0 ? (plot.height - 20) / (y1 - y0) : 0.0;
  for (const auto& p : points) {
    const int px = plot.x + 10 + static_cast<int>(std::lround(sx > 0 ? (p.coords[0] - x0) * sx : (plot.width - 20) / 2.0));
    const int py = plot.y + plot.height - 10 -
                   static_cast<int>(std::lround(sy > 0 ? (p.coords[1] - y0) * sy : (plot.height - 20) / 2.0));
    cv::circle(canvas, {px, py}, 4, detail::palette_color(color_of[p.label]), cv::FILLED, cv::LINE_8);
  }

  if (!opt.title.empty())
    cv::putText(canvas, opt.title, {margin, margin - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1,
                cv::LINE_8);
  int ly = margin + 10;
  const int lx = opt.width - legend_w - margin / 2;
  for (const auto& [label, idx] : color_of) {
    if (ly > opt.height - margin) {
      cv::putText(canvas, "...", {lx, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
      break;
    }
    cv::circle(canvas, {lx + 6, ly - 4}, 5, detail::palette_color(idx), cv::FILLED, cv::LINE_8);
    cv::putText(canvas, label.substr(0, 24), {lx + 18, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1,
                cv::LINE_8);
    ly += 18;
  }

  const auto parent = out_path.has_parent_path() ? out_path.parent_path() : std::filesystem::path(".");
  if (!std::filesystem::is_directory(parent)) throw io_error("cannot write '" + out_path.string() + "'");
  bool ok = false;
  try {
    ok = cv::imwrite(out_path.string(), canvas, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw io_error("cannot write '" + out_path.string() + "'");
}

}  // namespace padbench
