#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>

#include "padbench/fixture.hpp"
#include "padbench/image.hpp"
#include "test_support.hpp"

using namespace padbench;
using padbench::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Fixture, DefaultCountsAndFiles) {
  TempDir d("fx");
  const auto fx = synthesize_fixture({}, d.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(fx.image_dir)) files += e.is_regular_file();
  EXPECT_EQ(files, 12u);
  const auto c = fx.manifest.counts();
  EXPECT_EQ(c.bona_fide, 8u);
  EXPECT_EQ(c.per_pais.at("Dell-GA7"), 4u);
  EXPECT_EQ(load_manifest(fx.manifest_path), fx.manifest);
  EXPECT_TRUE(validate_manifest(fx.manifest).empty());
}

TEST(Fixture, RoundTripsThroughIngestion) {
  TempDir d("fxrt");
  FixtureConfig c;
  c.n_subjects = 3;
  c.pais_list = {"Dell-GA7", "S3D-NL1020", "Print-GA7"};
  c.n_attack_per_pais = 3;
  const auto fx = synthesize_fixture(c, d.path());
  EXPECT_EQ(build_manifest(fx.image_dir), fx.manifest);
}

TEST(Fixture, ByteIdenticalForSameSeed) {
  TempDir a("fxa"), b("fxb");
  FixtureConfig c;
  c.pais_list = {"Dell-GA7", "Print-GA7"};
  const auto fa = synthesize_fixture(c, a.path());
  const auto fb = synthesize_fixture(c, b.path());
  for (const auto& s : fa.manifest.samples) EXPECT_EQ(slurp(fa.manifest.resolve(s)), slurp(fb.manifest.resolve(s)));
  c.seed = 8;
  TempDir e("fxc");
  const auto fc = synthesize_fixture(c, e.path());
  EXPECT_NE(slurp(fa.manifest.resolve(fa.manifest.samples[0])), slurp(fc.manifest.resolve(fc.manifest.samples[0])));
}

TEST(Fixture, SeparableByNearestCentroidOnPixels) {
  TempDir d("fxsep");
  FixtureConfig c;
  c.n_subjects = 4;
  c.n_bonafide_per_subject = 4;
  c.n_attack_per_pais = 16;
  const auto fx = synthesize_fixture(c, d.path());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(fx.manifest.samples.size()), 64 * 64 * 3);
  std::vector<int> y;
  for (std::size_t i = 0; i < fx.manifest.samples.size(); ++i) {
    const cv::Mat img = cv::imread(fx.manifest.resolve(fx.manifest.samples[i]).string(), cv::IMREAD_COLOR);
    ASSERT_EQ(img.rows, 64);
    for (int k = 0; k < 64 * 64 * 3; ++k) x(static_cast<Eigen::Index>(i), k) = img.data[k];
    y.push_back(fx.manifest.samples[i].label == Label::attack);
  }
  EXPECT_GE(padbench::testing::nearest_centroid_accuracy(x, y), 0.95);
}

TEST(Fixture, ConfigErrors) {
  TempDir d("fxerr");
  FixtureConfig c;
  c.image_size = 16;
  EXPECT_THROW(synthesize_fixture(c, d.path()), domain_error);
  c = {};
  c.n_subjects = 0;
  EXPECT_THROW(synthesize_fixture(c, d.path()), domain_error);
  c = {};
  c.pais_list = {"Nope-GA7"};
  EXPECT_THROW(synthesize_fixture(c, d.path()), domain_error);
  c = {};
  std::ofstream(d / "file") << "x";
  EXPECT_THROW(synthesize_fixture(c, d / "file"), io_error);
}

TEST(Preprocess, ConstantImageStaysConstant) {
  const cv::Mat img(448, 448, CV_8UC3, cv::Scalar(10, 128, 255));
  const auto t = preprocess(img);
  ASSERT_EQ(t.h, 224);
  ASSERT_EQ(t.w, 224);
  ASSERT_EQ(t.c, 3);
  const double expect[3] = {10 / 127.5 - 1.0, 128 / 127.5 - 1.0, 255 / 127.5 - 1.0};
  for (int y = 0; y < 224; y += 17)
    for (int x = 0; x < 224; x += 13)
      for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(t.at(y, x, c), expect[c]);
  const auto u = preprocess(img, Normalization::unit);
  EXPECT_DOUBLE_EQ(u.at(0, 0, 2), 1.0);
}

TEST(Preprocess, IdentityResizeKeepsContent) {
  cv::Mat img(224, 224, CV_8UC3);
  cv::randu(img, 0, 256);
  const auto t = preprocess(img);
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_DOUBLE_EQ(t.at(y, x, c), img.at<cv::Vec3b>(y, x)[c] / 127.5 - 1.0);
}

TEST(Preprocess, MatchesReferenceBilinear) {
  cv::Mat img(100, 300, CV_8UC3);
  cv::RNG rng(3);
  rng.fill(img, cv::RNG::UNIFORM, 0, 256);
  cv::GaussianBlur(img, img, cv::Size(5, 5), 1.5);
  const auto ref = padbench::testing::oracle_resize(img, 224, 224);
  const auto t = preprocess(img, Normalization::unit);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(t.data[i] * 255.0 - ref[i]));
  EXPECT_LE(worst, 1.0);
}

TEST(Preprocess, Errors) {
  EXPECT_THROW(preprocess(cv::Mat()), domain_error);
  EXPECT_THROW(preprocess(cv::Mat(10, 10, CV_8UC1, cv::Scalar(0))), domain_error);
  EXPECT_THROW(preprocess(cv::Mat(10, 10, CV_32FC3, cv::Scalar(0))), domain_error);
  EXPECT_THROW(load_rgb("/nonexistent/x.jpg"), io_error);
}
