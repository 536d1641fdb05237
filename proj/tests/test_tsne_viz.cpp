#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>

#include "padbench/fixture.hpp"
#include "padbench/viz.hpp"
#include "test_support.hpp"

using namespace padbench;
using padbench::testing::TempDir;

namespace {

std::vector<std::string> as_strings(const std::vector<int>& v) {
  std::vector<std::string> out;
  for (int x : v) out.push_back(std::to_string(x));
  return out;
}

TsneOptions blob_options(std::uint64_t seed) {
  TsneOptions o;
  o.perplexity = 10;
  o.iterations = 500;
  o.seed = seed;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Tsne, AffinitiesHitTargetPerplexity) {
  std::vector<int> labels;
  const auto x = padbench::testing::gaussian_blobs(padbench::testing::three_blob_centers(5), 10, 1.0, 2, labels);
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  const auto p = detail::conditional_affinities(d, 7.0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(p(i, i), 0.0);
    double h = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0) h -= p(i, j) * std::log(p(i, j));
    EXPECT_NEAR(std::exp(h), 7.0, 0.05);
  }
}

TEST(Tsne, SeparatesGaussianBlobsAcrossSeeds) {
  std::vector<int> labels;
  const auto x = padbench::testing::gaussian_blobs(padbench::testing::three_blob_centers(50), 30, 0.1, 17, labels);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto y = tsne_project(x, blob_options(seed));
    ASSERT_EQ(y.size(), 90u);
    for (const auto& p : y) {
      EXPECT_TRUE(std::isfinite(p[0]));
      EXPECT_TRUE(std::isfinite(p[1]));
    }
    const double purity = padbench::testing::oracle_knn_purity(y, labels, 10);
    EXPECT_GE(purity, 0.9) << "seed " << seed;
    const auto s = as_strings(labels);
    EXPECT_NEAR(knn_label_purity(y, s, 10), purity, 1e-12);
  }
}

TEST(Tsne, PurityStableUnderRotation) {
  std::vector<int> labels;
  const auto x = padbench::testing::gaussian_blobs(padbench::testing::three_blob_centers(20), 20, 0.5, 4, labels);
  const Eigen::MatrixXd xr = x * padbench::testing::random_rotation(20, 9);
  const auto o = blob_options(3);
  const double a = padbench::testing::oracle_knn_purity(tsne_project(x, o), labels, 5);
  const double b = padbench::testing::oracle_knn_purity(tsne_project(xr, o), labels, 5);
  EXPECT_NEAR(a, b, 0.05);
}

TEST(Tsne, IdenticalRowsLandTogether) {
  std::vector<int> labels;
  Eigen::MatrixXd x = padbench::testing::gaussian_blobs(padbench::testing::three_blob_centers(10), 12, 1.0, 5, labels);
  x.row(7) = x.row(3);
  const auto y = tsne_project(x, blob_options(2));
  double spread = 0.0, n = 0.0;
  for (const auto& p : y)
    for (const auto& q : y) {
      spread += std::hypot(p[0] - q[0], p[1] - q[1]);
      n += 1;
    }
  spread /= n;
  EXPECT_LT(std::hypot(y[7][0] - y[3][0], y[7][1] - y[3][1]), 0.05 * spread);
}

TEST(Tsne, DeterministicForSeed) {
  std::vector<int> labels;
  const auto x = padbench::testing::gaussian_blobs(padbench::testing::three_blob_centers(4), 8, 1.0, 1, labels);
  auto o = blob_options(6);
  o.perplexity = 5;
  o.iterations = 100;
  EXPECT_EQ(tsne_project(x, o), tsne_project(x, o));
}

TEST(Tsne, Errors) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 4);
  TsneOptions o;
  o.perplexity = 50;
  EXPECT_THROW(tsne_project(x, o), domain_error);
  o.perplexity = 5;
  o.iterations = 0;
  EXPECT_THROW(tsne_project(x, o), domain_error);
  Eigen::MatrixXd bad = x;
  bad(2, 1) = std::nan("");
  EXPECT_THROW(tsne_project(bad, TsneOptions{5.0}), domain_error);
}

TEST(Pca, RecoversDominantAxes) {
  // points on a line along (1, 2, 0); z noise has zero mean and no correlation with i
  const double z[6] = {0.01, -0.01, 0.0, 0.0, -0.01, 0.01};
  Eigen::MatrixXd x(6, 3);
  for (int i = 0; i < 6; ++i) x.row(i) << i, 2 * i, z[i];
  const auto y = pca_project(x);
  ASSERT_EQ(y.size(), 6u);
  const double mean = 2.5;
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(y[i][0], (i - mean) * std::sqrt(5.0), 1e-9);
  for (int i = 0; i < 6; ++i) EXPECT_LT(std::abs(y[i][1]), 0.02);
  EXPECT_THROW(pca_project(Eigen::MatrixXd::Zero(1, 3)), domain_error);
}

TEST(Purity, MatchesOracleAndValidates) {
  std::vector<Point2> pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}, {0, 2}};
  std::vector<std::string> labels{"a", "a", "b", "b", "b"};
  const std::vector<std::array<double, 2>> same(pts.begin(), pts.end());
  EXPECT_NEAR(knn_label_purity(pts, labels, 2), padbench::testing::oracle_knn_purity(same, {0, 0, 1, 1, 1}, 2), 1e-12);
  EXPECT_THROW(knn_label_purity(pts, labels, 5), domain_error);
  EXPECT_THROW(knn_label_purity(pts, std::vector<std::string>{"a"}, 1), domain_error);
}

TEST(Scatter, WritesDeterministicPng) {
  TempDir d("plot");
  std::vector<EmbeddingPoint> pts;
  for (int i = 0; i < 30; ++i)
    pts.push_back({"s" + std::to_string(i), {std::cos(i * 0.3) * i, std::sin(i * 0.3) * i}, "class" + std::to_string(i % 4)});
  scatter_plot(pts, d / "a.png", {640, 480, "test plot"});
  scatter_plot(pts, d / "b.png", {640, 480, "test plot"});
  ASSERT_TRUE(std::filesystem::exists(d / "a.png"));
  EXPECT_EQ(slurp(d / "a.png"), slurp(d / "b.png"));
  const cv::Mat img = cv::imread((d / "a.png").string());
  EXPECT_EQ(img.cols, 640);
  EXPECT_EQ(img.rows, 480);
  // single point, all coordinates equal
  scatter_plot(std::vector<EmbeddingPoint>{{"x", {1, 1}, "l"}}, d / "one.png");
  EXPECT_TRUE(std::filesystem::exists(d / "one.png"));
}

TEST(Scatter, Errors) {
  TempDir d("plot-err");
  EXPECT_THROW(scatter_plot(std::vector<EmbeddingPoint>{}, d / "e.png"), domain_error);
  const std::vector<EmbeddingPoint> one{{"x", {0, 0}, "l"}};
  EXPECT_THROW(scatter_plot(one, d / "missing" / "e.png"), io_error);
  EXPECT_THROW(scatter_plot(std::vector<EmbeddingPoint>{{"x", {std::nan(""), 0}, "l"}}, d / "n.png"), domain_error);
}

TEST(Embedder, LabelsFollowSubjectThenPais) {
  SampleRecord s;
  EXPECT_EQ(embedding_label(s), "bona_fide");
  s.pais = pais_from_abbreviation("S3D-GS9").pais;
  EXPECT_EQ(embedding_label(s), "S3D-GS9");
  s.subject_id = "subject007";
  EXPECT_EQ(embedding_label(s), "subject007");
}

TEST(Embedder, RejectsSingleClass) {
  const auto b = init_backbone(2, 1, 64);
  std::vector<nn::Tensor3> inputs(3, nn::Tensor3(32, 32, 3, 0.1));
  const std::vector<std::string> labels(3, "only");
  TrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(build_embedder(b, inputs, labels, c), domain_error);
  EXPECT_THROW(build_embedder(b, inputs, std::vector<std::string>{"a", "b"}, c), domain_error);
}

TEST(Embedder, OnePointPerImageAndDeterministic) {
  TempDir d("embed");
  FixtureConfig fc;
  fc.n_subjects = 10;
  fc.n_bonafide_per_subject = 10;
  fc.n_attack_per_pais = 1;
  fc.image_size = 48;
  auto fx = synthesize_fixture(fc, d.path());
  std::erase_if(fx.manifest.samples, [](const SampleRecord& s) { return s.label == Label::attack; });
  const auto b = init_backbone(2, 1, 64);
  TrainConfig c;
  c.epochs = 2;
  c.seed = 5;
  const auto pts = embed_manifest(b, fx.manifest, c);
  ASSERT_EQ(pts.size(), 100u);
  std::set<std::string> labels;
  for (const auto& p : pts) {
    labels.insert(p.label);
    EXPECT_TRUE(std::isfinite(p.coords[0]) && std::isfinite(p.coords[1]));
  }
  EXPECT_EQ(labels.size(), 10u);

  // determinism on a smaller slice
  Manifest small = fx.manifest;
  small.samples.resize(20);
  EXPECT_EQ(embed_manifest(b, small, c), embed_manifest(b, small, c));
}
