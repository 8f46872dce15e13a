#include "tspkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tspkit/png_io.hpp"

namespace tspkit::drd {

Tensor images_to_tensor(std::span<const AnnotatedImage> images) {
  if (images.empty()) throw std::invalid_argument("no images");
  const std::size_t h = images.front().image.height, w = images.front().image.width;
  std::vector<double> values(images.size() * 3 * h * w);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const RgbImage& img = images[b].image;
    if (img.width != w || img.height != h || img.pixels.size() != w * h * 3) {
      throw std::invalid_argument("image '" + images[b].image_id + "' has mismatched extents");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < h * w; ++p) {
        values[((b * 3 + c) * h * w) + p] = (img.pixels[p * 3 + c] / 255.0 - 0.5) / 0.25;
      }
    }
  }
  return Tensor::from({images.size(), 3, h, w}, std::move(values));
}

std::vector<std::uint8_t> downsample_labels(const LabelMap& label, std::size_t factor) {
  if (factor == 0 || label.width % factor != 0 || label.height % factor != 0) {
    throw std::invalid_argument("label extents are not divisible by " + std::to_string(factor));
  }
  const std::size_t h = label.height / factor, w = label.width / factor;
  std::vector<std::uint8_t> out(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      out[i * w + j] = label.at(factor * j + factor / 2, factor * i + factor / 2);
    }
  }
  return out;
}

std::vector<std::uint8_t> downsample_labels(std::span<const AnnotatedImage> images,
                                            std::size_t factor) {
  std::vector<std::uint8_t> out;
  for (const AnnotatedImage& img : images) {
    auto part = downsample_labels(img.label, factor);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::uint8_t> argmax_labels(const Tensor& logits) {
  if (logits.rank() != 4) throw ShapeError("argmax expects [B,K,h,w] logits");
  const std::size_t b = logits.extent(0), k = logits.extent(1);
  const std::size_t hw = logits.extent(2) * logits.extent(3);
  auto d = logits.data();
  std::vector<std::uint8_t> out(b * hw);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (d[(n * k + c) * hw + p] > d[(n * k + best) * hw + p]) best = c;
      }
      out[n * hw + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

double pixel_accuracy(const Tensor& logits, std::span<const std::uint8_t> target) {
  const auto pred = argmax_labels(logits);
  if (pred.size() != target.size()) {
    throw ShapeError("pixel_accuracy: " + std::to_string(target.size()) + " targets for " +
                     std::to_string(pred.size()) + " predictions");
  }
  std::size_t hit = 0, counted = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] == kIgnoreLabel) continue;
    ++counted;
    if (pred[i] == target[i]) ++hit;
  }
  if (counted == 0) throw std::invalid_argument("pixel_accuracy: every target pixel is ignored");
  return static_cast<double>(hit) / static_cast<double>(counted);
}

TrainResult train_toy(std::span<const AnnotatedImage> images, const DrdConfig& config,
                      const TrainOptions& options) {
  return train_toy(images, config, init_toy_params(config, options), options);
}

DrdParams init_toy_params(const DrdConfig& config, const TrainOptions& options) {
  DrdParams p = DrdParams::init(config, options.seed);
  for (double& v : p.final_proj.weight.mutable_data()) v *= options.final_proj_gain;
  return p;
}

TrainResult train_toy(std::span<const AnnotatedImage> images, const DrdConfig& config,
                      const DrdParams& initial, const TrainOptions& options) {
  config.validate();
  const Tensor input = images_to_tensor(images);
  const std::vector<std::uint8_t> target = downsample_labels(images, 8);

  TrainResult result{initial.clone(), {}};
  const NamedTensors params = result.params.named_parameters();
  result.losses.reserve(options.steps);
  for (std::size_t step = 0; step < options.steps; ++step) {
    Tensor loss;
    try {
      loss = cross_entropy_loss(drd_forward(input, result.params, config).logits, target);
      backward(loss);
    } catch (const NumericError& e) {
      throw TrainingDiverged(step, "non-finite value at step " + std::to_string(step) + ": " +
                                       e.what());
    }
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingDiverged(step, "loss is not finite at step " + std::to_string(step));
    }
    result.losses.push_back(value);
    double norm2 = 0.0;
    for (const auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (double g : t.grad()) norm2 += g * g;
    }
    if (!std::isfinite(norm2)) {
      throw TrainingDiverged(step, "gradient is not finite at step " + std::to_string(step));
    }
    const double norm = std::sqrt(norm2);
    const double step_size =
        options.clip_norm > 0.0 && norm > options.clip_norm ? options.lr * options.clip_norm / norm
                                                            : options.lr;
    for (const auto& [name, t] : params) {
      Tensor p = t;
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto d = p.mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= step_size * g[i];
    }
    reset_grads(loss);
  }
  return result;
}

std::string loss_csv(std::span<const double> losses) {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  return out.str();
}

std::vector<std::uint8_t> normalize_attention_row(std::span<const double> row) {
  std::vector<std::uint8_t> out(row.size(), 0);
  if (row.empty()) return out;
  const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround((row[i] - *lo) / range * 255.0));
  }
  return out;
}

std::vector<std::filesystem::path> export_attention_maps(const Tensor& A, std::size_t h,
                                                         std::size_t w,
                                                         const std::filesystem::path& out_dir) {
  if (A.rank() != 2 || A.extent(1) != h * w) {
    throw ShapeError("attention maps " + shape_to_string(A.shape()) + " do not match " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  const auto d = A.data();
  for (std::size_t i = 0; i < A.extent(0); ++i) {
    const auto gray = normalize_attention_row(d.subspan(i * h * w, h * w));
    const auto path = out_dir / ("token_" + std::to_string(i) + ".png");
    png::write_gray8(path, w, h, gray);
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::string> preset_names() {
  return {"setting1", "setting2", "setting3", "setting4"};
}

DrdConfig preset(const std::string& name, std::size_t num_classes) {
  DrdConfig c;
  c.num_classes = num_classes;
  if (name == "setting1") {
    c.num_tokens = 1;
    c.num_heads = 12;
  } else if (name == "setting2") {
    c.num_tokens = 5;
    c.num_heads = 12;
  } else if (name == "setting3") {
    c.num_tokens = 20;
    c.num_heads = 12;
  } else if (name == "setting4") {
    c.num_tokens = 20;
    c.num_heads = 24;
    c.channels = 48;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (setting1..setting4)");
  }
  return c;
}

}  // namespace tspkit::drd
