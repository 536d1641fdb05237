#pragma once

#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "padbench/error.hpp"
#include "padbench/nn.hpp"

namespace padbench {

inline constexpr int input_side = 224;
inline constexpr int input_channels = 3;

// How 8-bit pixels map to network inputs. The default matches the MobileNetV2
// pretraining convention.
enum class Normalization { symmetric, unit };

inline std::string to_string(Normalization n) { return n == Normalization::symmetric ? "[-1,1]" : "[0,1]"; }

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "[-1,1]" || s == "symmetric") return Normalization::symmetric;
  if (s == "[0,1]" || s == "unit") return Normalization::unit;
  throw domain_error("unknown normalization '" + s + "'");
}

inline double normalize_pixel(double v, Normalization n) {
  return n == Normalization::symmetric ? v / 127.5 - 1.0 : v / 255.0;
}

// Decodes an image file into 8-bit RGB.
inline cv::Mat load_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw io_error("cannot read image '" + path.string() + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

// Bilinear resize of an 8-bit RGB image to 224x224, then per-pixel scaling.
inline nn::Tensor3 preprocess(const cv::Mat& rgb, Normalization norm = Normalization::symmetric) {
  if (rgb.empty() || rgb.rows < 1 || rgb.cols < 1) throw domain_error("cannot preprocess an empty image");
  if (rgb.channels() != input_channels)
    throw domain_error("expected a 3-channel RGB image, got " + std::to_string(rgb.channels()) + " channel(s)");
  if (rgb.depth() != CV_8U) throw domain_error("expected 8-bit pixels");
  cv::Mat resized;
  if (rgb.rows == input_side && rgb.cols == input_side)
    resized = rgb;
  else
    cv::resize(rgb, resized, cv::Size(input_side, input_side), 0.0, 0.0, cv::INTER_LINEAR);
  nn::Tensor3 out(input_side, input_side, input_channels);
  for (int y = 0; y < input_side; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(y);
    for (int x = 0; x < input_side; ++x)
      for (int c = 0; c < input_channels; ++c) out.at(y, x, c) = normalize_pixel(row[x][c], norm);
  }
  return out;
}

}  // namespace padbench
