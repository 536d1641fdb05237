#pragma once

// Deterministic synthetic ear-PAD corpus for desk-scale testing.
//
// Bona fide images are procedural "ears" (skin-toned ellipses with a darker
// concha on a per-subject background). Display attacks re-render a subject and
// add a screen-like colour cast plus a fixed moire grating; print attacks add
// desaturation, a paper tint and a halftone dot screen. The two classes are
// separable by construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "padbench/archive.hpp"
#include "padbench/dataset.hpp"
#include "padbench/error.hpp"
#include "padbench/rng.hpp"

namespace padbench {

struct FixtureConfig {
  int n_subjects = 2;
  int n_bonafide_per_subject = 4;
  std::vector<std::string> pais_list{"Dell-GA7"};
  int n_attack_per_pais = 4;
  int image_size = 64;
  std::uint64_t seed = 7;
  double artifact_strength = 3.0;  // scales attack colour casts, moire and halftone contrast

  void validate() const {
    if (n_subjects < 1 || n_bonafide_per_subject < 1 || n_attack_per_pais < 1)
      throw domain_error("fixture counts must be at least 1");
    if (pais_list.empty()) throw domain_error("fixture needs at least one PAIS");
    if (std::set<std::string>(pais_list.begin(), pais_list.end()).size() != pais_list.size())
      throw domain_error("fixture PAIS list contains duplicates");
    if (image_size < 32) throw domain_error("fixture image size must be at least 32");
    if (!(artifact_strength >= 0.0 && artifact_strength <= 4.0))
      throw domain_error("fixture artifact strength must lie in [0, 4]");
    for (const auto& p : pais_list) pais_from_abbreviation(p);
  }
};

struct Fixture {
  std::filesystem::path image_dir;
  std::filesystem::path manifest_path;
  Manifest manifest;  // ground truth
};

namespace detail {

inline constexpr std::array<Position, 5> fixture_positions{Position::up, Position::down, Position::front,
                                                           Position::forward, Position::back};

inline std::string position_token(Position p) {
  switch (p) {
    case Position::up: return "up";
    case Position::down: return "down";
    case Position::front: return "front";
    case Position::forward: return "forward";
    case Position::back: return "back";
    case Position::unknown: break;
  }
  return "unknown";
}

inline std::string zero_pad(int v, int width) {
  auto s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

inline std::string subject_token(int subject) { return "subject" + zero_pad(subject + 1, 3); }

struct SubjectLook {
  cv::Vec3d skin, background;
  double axis_x, axis_y, concha;
};

inline SubjectLook subject_look(std::uint64_t seed, int subject) {
  Rng rng(mix_seed(seed, 0x5b1, static_cast<std::uint64_t>(subject)));
  SubjectLook s;
  s.skin = {rng.uniform(175, 225), rng.uniform(125, 170), rng.uniform(95, 140)};
  const double bg = rng.uniform(45, 95);
  s.background = {bg + rng.uniform(-10, 10), bg + rng.uniform(-10, 10), bg + rng.uniform(-10, 10)};
  s.axis_x = rng.uniform(0.24, 0.32);
  s.axis_y = rng.uniform(0.36, 0.44);
  s.concha = rng.uniform(0.45, 0.6);
  return s;
}

// RGB, CV_64FC3, values roughly in [0, 255].
inline cv::Mat render_ear(const SubjectLook& look, Rng& rng, int size) {
  cv::Mat img(size, size, CV_64FC3, cv::Scalar(look.background[0], look.background[1], look.background[2]));
  const double s = size;
  const cv::Point center(static_cast<int>(s * (0.5 + rng.uniform(-0.05, 0.05))),
                         static_cast<int>(s * (0.5 + rng.uniform(-0.05, 0.05))));
  const double angle = rng.uniform(-15.0, 15.0);
  const double shade = rng.uniform(-12.0, 12.0);
  const cv::Scalar skin(look.skin[0] + shade, look.skin[1] + shade, look.skin[2] + shade);
  const cv::Size outer(static_cast<int>(s * look.axis_x), static_cast<int>(s * look.axis_y));
  cv::ellipse(img, center, outer, angle, 0, 360, skin, cv::FILLED, cv::LINE_8);
  const cv::Size inner(static_cast<int>(outer.width * look.concha), static_cast<int>(outer.height * look.concha));
  cv::ellipse(img, center, inner, angle, 0, 360, skin * 0.7, cv::FILLED, cv::LINE_8);
  cv::ellipse(img, center, outer, angle, 200, 340, skin * 0.85, std::max(1, size / 24), cv::LINE_8);
  cv::GaussianBlur(img, img, cv::Size(0, 0), s / 64.0);
  for (int y = 0; y < size; ++y) {
    auto* row = img.ptr<cv::Vec3d>(y);
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) row[x][c] += rng.normal(0.0, 3.0);
  }
  return img;
}

struct PaisLook {
  double fx, fy, phase;
};

inline PaisLook pais_look(const std::string& abbreviation) {
  Rng rng(fnv1a(abbreviation.data(), abbreviation.size()));
  const double period = rng.uniform(3.5, 5.0);
  const double theta = rng.uniform(0.2, 1.3);
  return {std::cos(theta) / period, std::sin(theta) / period, rng.uniform(0.0, 2 * std::numbers::pi)};
}

inline void apply_display_attack(cv::Mat& img, const PaisLook& look, double k) {
  const double gain = std::max(0.2, 1.0 - 0.2 * k);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3d>(y);
    for (int x = 0; x < img.cols; ++x) {
      const double moire = 24.0 * k * std::sin(2 * std::numbers::pi * (look.fx * x + look.fy * y) + look.phase);
      row[x][0] = gain * row[x][0] + 10 * k + moire;
      row[x][1] = gain * row[x][1] + 22 * k + moire;
      row[x][2] = gain * row[x][2] + 48 * k + moire;
    }
  }
}

inline void apply_print_attack(cv::Mat& img, const PaisLook& look, double k) {
  const double period = 1.0 / std::hypot(look.fx, look.fy);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3d>(y);
    for (int x = 0; x < img.cols; ++x) {
      const double gray = (row[x][0] + row[x][1] + row[x][2]) / 3.0;
      const double dx = std::fmod(x, period) - period / 2, dy = std::fmod(y, period) - period / 2;
      const double dot = std::hypot(dx, dy) < period * 0.3 ? 1.0 - 0.35 * k : 1.0;
      const double mix = 0.5 * std::min(k, 2.0);
      row[x][0] = ((1 - mix) * row[x][0] + mix * gray + 30 * k) * dot;
      row[x][1] = ((1 - mix) * row[x][1] + mix * gray + 26 * k) * dot;
      row[x][2] = ((1 - mix) * row[x][2] + mix * gray - 5 * k) * dot;
    }
  }
}

inline void write_rgb(const cv::Mat& rgb64, const std::filesystem::path& path) {
  cv::Mat rgb8, bgr8;
  rgb64.convertTo(rgb8, CV_8UC3);  // saturating
  cv::cvtColor(rgb8, bgr8, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr8, {cv::IMWRITE_JPEG_QUALITY, 95});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw io_error("cannot write image '" + path.string() + "'");
}

}  // namespace detail

// Writes images to <out_dir>/images and the ground-truth manifest to
// <out_dir>/ground_truth.json. Identical configs give byte-identical files.
inline Fixture synthesize_fixture(const FixtureConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  config.validate();
  Fixture fx;
  fx.image_dir = out_dir / "images";
  fx.manifest_path = out_dir / "ground_truth.json";
  std::error_code ec;
  fs::create_directories(fx.image_dir, ec);
  if (ec || !fs::is_directory(fx.image_dir)) throw io_error("cannot create '" + fx.image_dir.string() + "'");

  std::vector<detail::SubjectLook> looks;
  for (int s = 0; s < config.n_subjects; ++s) looks.push_back(detail::subject_look(config.seed, s));

  std::vector<SampleRecord> samples;
  for (int s = 0; s < config.n_subjects; ++s)
    for (int k = 0; k < config.n_bonafide_per_subject; ++k) {
      const auto side = k % 2 == 0 ? Side::left : Side::right;
      const auto position = detail::fixture_positions[static_cast<std::size_t>(k / 2) % 5];
      const auto name = detail::subject_token(s) + (side == Side::left ? "_L_" : "_R_") +
                        detail::position_token(position) + "_" + detail::zero_pad(k + 1, 2) + ".jpg";
      Rng rng(mix_seed(config.seed, 0xb0a, static_cast<std::uint64_t>(s) * 100003 + k));
      detail::write_rgb(detail::render_ear(looks[s], rng, config.image_size), fx.image_dir / name);
      samples.push_back(record_from_name(name, parse_filename(name)));
    }

  for (std::size_t p = 0; p < config.pais_list.size(); ++p) {
    const auto codes = pais_from_abbreviation(config.pais_list[p]);
    const auto look = detail::pais_look(codes.pais.abbreviation);
    const bool print = codes.pais.attack_type == AttackType::photo_print;
    for (int k = 0; k < config.n_attack_per_pais; ++k) {
      const int subject = k % config.n_subjects;
      const auto name = "Cap_" + codes.capture_code + (print ? "_Print_" : "_Disp_") + codes.representor_code + "_" +
                        detail::subject_token(subject) + "_" + detail::zero_pad(k + 1, 4) + ".jpg";
      Rng rng(mix_seed(config.seed, 0xa77 + p, static_cast<std::uint64_t>(k)));
      auto img = detail::render_ear(looks[subject], rng, config.image_size);
      if (print)
        detail::apply_print_attack(img, look, config.artifact_strength);
      else
        detail::apply_display_attack(img, look, config.artifact_strength);
      detail::write_rgb(img, fx.image_dir / name);
      samples.push_back(record_from_name(name, parse_filename(name)));
    }
  }

  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  fx.manifest.root = fx.image_dir.string();
  fx.manifest.samples = std::move(samples);
  fx.manifest.pais_catalog = derive_catalog(fx.manifest.samples);
  save_manifest(fx.manifest, fx.manifest_path);
  return fx;
}

}  // namespace padbench
