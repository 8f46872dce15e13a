#pragma once

// On-disk dataset format:
//   root/registry.txt                           class table (see ClassRegistry::parse)
//   root/manifest.json                          {"images": [{id, split, scene_id, weather}]}
//   root/{train,val,test}/images/<id>.png       8-bit RGB
//   root/{train,val,test}/labels/<id>.png       8-bit gray class ids
//   root/{train,val,test}/instances/<id>.png    u32 ids packed big-endian into RGBA8
//
// Instance maps are also accepted as 16-bit or 8-bit grayscale on load.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspkit/annotation.hpp"
#include "tspkit/registry.hpp"

namespace tspkit {

class AnnotationFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LabelMap load_label_map(const std::filesystem::path& path, std::size_t num_classes);
void save_label_map(const std::filesystem::path& path, const LabelMap& label);

InstanceMap load_instance_map(const std::filesystem::path& path);
void save_instance_map(const std::filesystem::path& path, const InstanceMap& instances);

RgbImage load_rgb_image(const std::filesystem::path& path);
void save_rgb_image(const std::filesystem::path& path, const RgbImage& image);

std::filesystem::path split_dir(const std::filesystem::path& root, Split split);

// Writes images, labels, instances, manifest.json and registry.txt.
void save_dataset(const std::filesystem::path& root, const std::vector<AnnotatedImage>& images,
                  const ClassRegistry& registry);

struct SplitLoadResult {
  std::vector<AnnotatedImage> images;  // sorted by image_id
  std::vector<std::string> errors;     // one line per unreadable or invalid file
};

// Loads every annotated image of a split. Metadata comes from manifest.json
// when present; otherwise ids are discovered from the labels directory.
// RGB images are loaded only when with_images is set.
SplitLoadResult load_split(const std::filesystem::path& root, Split split,
                           const ClassRegistry& registry, bool with_images = false);

// Registry stored with the dataset, or the default registry when absent.
ClassRegistry load_dataset_registry(const std::filesystem::path& root);

// Sorted ids (file stems) of the *.png files in a directory.
std::vector<std::string> list_png_ids(const std::filesystem::path& dir);

}  // namespace tspkit
