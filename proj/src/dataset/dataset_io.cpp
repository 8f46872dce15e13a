#include "tspkit/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "tspkit/png_io.hpp"

namespace tspkit {

namespace fs = std::filesystem;
using nlohmann::json;

LabelMap load_label_map(const fs::path& path, std::size_t num_classes) {
  png::Raster r = png::read(path);
  if (r.palette || r.channels != 1 || r.bit_depth != 8) {
    throw AnnotationFormatError(path.string() + ": label maps must be single-channel 8-bit, got " +
                                std::to_string(r.channels) + " channel(s) at " +
                                std::to_string(r.bit_depth) + " bits");
  }
  LabelMap m(r.width, r.height);
  for (std::size_t i = 0; i < m.pixels.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(r.samples[i]);
    if (v != kIgnoreClass && v >= num_classes) {
      throw AnnotationFormatError(path.string() + ": class id " + std::to_string(v) +
                                  " at (x=" + std::to_string(i % r.width) +
                                  ", y=" + std::to_string(i / r.width) + ") is not below " +
                                  std::to_string(num_classes));
    }
    m.pixels[i] = v;
  }
  return m;
}

void save_label_map(const fs::path& path, const LabelMap& label) {
  png::write_gray8(path, label.width, label.height, label.pixels);
}

InstanceMap load_instance_map(const fs::path& path) {
  png::Raster r = png::read(path);
  InstanceMap m(r.width, r.height);
  const std::size_t n = m.pixels.size();
  if (!r.palette && r.channels == 4 && r.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint16_t* s = r.samples.data() + 4 * i;
      m.pixels[i] = (std::uint32_t{s[0]} << 24) | (std::uint32_t{s[1]} << 16) |
                    (std::uint32_t{s[2]} << 8) | std::uint32_t{s[3]};
    }
  } else if (!r.palette && r.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) m.pixels[i] = r.samples[i];
  } else {
    throw AnnotationFormatError(path.string() +
                                ": instance maps must be packed RGBA8 or single-channel gray");
  }
  return m;
}

void save_instance_map(const fs::path& path, const InstanceMap& instances) {
  std::vector<std::uint8_t> bytes(instances.pixels.size() * 4);
  for (std::size_t i = 0; i < instances.pixels.size(); ++i) {
    const std::uint32_t v = instances.pixels[i];
    bytes[4 * i] = static_cast<std::uint8_t>(v >> 24);
    bytes[4 * i + 1] = static_cast<std::uint8_t>(v >> 16);
    bytes[4 * i + 2] = static_cast<std::uint8_t>(v >> 8);
    bytes[4 * i + 3] = static_cast<std::uint8_t>(v);
  }
  png::write_rgba8(path, instances.width, instances.height, bytes);
}

RgbImage load_rgb_image(const fs::path& path) {
  png::Raster r = png::read(path);
  if (r.bit_depth != 8 || r.channels < 3) {
    throw AnnotationFormatError(path.string() + ": images must be 8-bit RGB");
  }
  RgbImage img{r.width, r.height, std::vector<std::uint8_t>(r.width * r.height * 3)};
  for (std::size_t i = 0; i < r.width * r.height; ++i) {
    for (int c = 0; c < 3; ++c) {
      img.pixels[3 * i + c] = static_cast<std::uint8_t>(r.samples[i * r.channels + c]);
    }
  }
  return img;
}

void save_rgb_image(const fs::path& path, const RgbImage& image) {
  png::write_rgb8(path, image.width, image.height, image.pixels);
}

fs::path split_dir(const fs::path& root, Split split) { return root / to_string(split); }

void save_dataset(const fs::path& root, const std::vector<AnnotatedImage>& images,
                  const ClassRegistry& registry) {
  fs::create_directories(root);
  {
    std::ofstream reg(root / "registry.txt", std::ios::binary);
    reg << registry.to_text();
  }
  json manifest;
  manifest["images"] = json::array();
  for (const AnnotatedImage& a : images) {
    const fs::path dir = split_dir(root, a.split);
    for (const char* sub : {"images", "labels", "instances"}) fs::create_directories(dir / sub);
    const std::string file = a.image_id + ".png";
    if (!a.image.pixels.empty()) save_rgb_image(dir / "images" / file, a.image);
    save_label_map(dir / "labels" / file, a.label);
    save_instance_map(dir / "instances" / file, a.instances);
    manifest["images"].push_back({{"id", a.image_id},
                                  {"split", to_string(a.split)},
                                  {"scene_id", a.scene_id},
                                  {"weather", to_string(a.weather)}});
  }
  std::ofstream out(root / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

std::vector<std::string> list_png_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClassRegistry load_dataset_registry(const fs::path& root) {
  const fs::path p = root / "registry.txt";
  return fs::exists(p) ? ClassRegistry::load(p) : ClassRegistry::default_registry();
}

SplitLoadResult load_split(const fs::path& root, Split split, const ClassRegistry& registry,
                           bool with_images) {
  struct Meta {
    std::string scene_id;
    Weather weather = Weather::kSunny;
  };
  std::map<std::string, Meta> metas;
  SplitLoadResult result;
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json manifest = json::parse(in);
    for (const json& e : manifest.at("images")) {
      if (parse_split(e.at("split").get<std::string>()) != split) continue;
      metas[e.at("id").get<std::string>()] = {e.value("scene_id", std::string()),
                                              parse_weather(e.value("weather", "sunny"))};
    }
  } else {
    for (const std::string& id : list_png_ids(split_dir(root, split) / "labels")) metas[id] = {};
  }
  const fs::path dir = split_dir(root, split);
  for (const auto& [id, meta] : metas) {
    const std::string file = id + ".png";
    AnnotatedImage a;
    a.image_id = id;
    a.split = split;
    a.scene_id = meta.scene_id;
    a.weather = meta.weather;
    try {
      a.label = load_label_map(dir / "labels" / file, registry.size());
      a.instances = load_instance_map(dir / "instances" / file);
      if (with_images) a.image = load_rgb_image(dir / "images" / file);
      PairReport report = validate_pair(a.label, a.instances, registry);
      if (!report.empty()) {
        const PairIssue& first = report.issues.front();
        result.errors.push_back(id + ": " + std::to_string(report.total_issues) +
                                " label/instance inconsistencies, first " +
                                to_string(first.kind) + " at (x=" + std::to_string(first.x) +
                                ", y=" + std::to_string(first.y) + ")");
        continue;
      }
    } catch (const std::exception& e) {
      result.errors.push_back(id + ": " + e.what());
      continue;
    }
    result.images.push_back(std::move(a));
  }
  return result;
}

}  // namespace tspkit
