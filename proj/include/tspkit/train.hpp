#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspkit/annotation.hpp"
#include "tspkit/drd.hpp"

namespace tspkit::drd {

// Non-finite loss during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// [B,3,H,W] tensor, channels scaled to (v/255 - 0.5) / 0.25.
Tensor images_to_tensor(std::span<const AnnotatedImage> images);

// Nearest sampling at cell centres: output pixel (i,j) takes the label at
// (factor*j + factor/2, factor*i + factor/2).
std::vector<std::uint8_t> downsample_labels(const LabelMap& label, std::size_t factor);
std::vector<std::uint8_t> downsample_labels(std::span<const AnnotatedImage> images,
                                            std::size_t factor);

// Per-pixel argmax over [B,K,h,w] logits.
std::vector<std::uint8_t> argmax_labels(const Tensor& logits);

// Fraction of non-ignored target pixels whose argmax matches.
double pixel_accuracy(const Tensor& logits, std::span<const std::uint8_t> target);

struct TrainOptions {
  std::size_t steps = 500;
  double lr = 0.05;
  std::uint64_t seed = 0;
  // Global gradient-norm clip; 0 disables it (unclipped gradient descent).
  double clip_norm = 1.0;
  // Multiplier on the final projection's initial weights. Near-uniform
  // attention rows scale S by roughly 1/(h*w), which leaves the logits tiny.
  double final_proj_gain = 32.0;
};

// DrdParams::init followed by the final_proj_gain rescale.
DrdParams init_toy_params(const DrdConfig& config, const TrainOptions& options);

struct TrainResult {
  DrdParams params;
  std::vector<double> losses;  // loss before each update; size == steps
};

// Full-batch gradient descent with a fixed learning rate. Throws
// TrainingDiverged on a non-finite loss or gradient.
TrainResult train_toy(std::span<const AnnotatedImage> images, const DrdConfig& config,
                      const TrainOptions& options);
// Same loop starting from the given parameters (which are left untouched).
TrainResult train_toy(std::span<const AnnotatedImage> images, const DrdConfig& config,
                      const DrdParams& initial, const TrainOptions& options);

std::string loss_csv(std::span<const double> losses);

// Rows of A ([N, h*w]) min-max normalized to 0..255 and written as
// token_<i>.png. A constant row gives an all-zero image. Returns the paths.
std::vector<std::filesystem::path> export_attention_maps(const Tensor& A, std::size_t h,
                                                         std::size_t w,
                                                         const std::filesystem::path& out_dir);
std::vector<std::uint8_t> normalize_attention_row(std::span<const double> row);

// Token/head ablation presets, "setting1".."setting4".
DrdConfig preset(const std::string& name, std::size_t num_classes);
std::vector<std::string> preset_names();

}  // namespace tspkit::drd
