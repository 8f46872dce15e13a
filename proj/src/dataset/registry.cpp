#include "tspkit/registry.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tspkit {

ClassRegistry::ClassRegistry(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  if (classes_.empty()) throw std::invalid_argument("class registry is empty");
  if (classes_.size() > 255) throw std::invalid_argument("at most 255 classes are supported");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassInfo& c = classes_[i];
    if (c.id != i) {
      throw std::invalid_argument("class ids must be contiguous from 0; entry " +
                                  std::to_string(i) + " has id " + std::to_string(c.id));
    }
    if (c.name.empty()) throw std::invalid_argument("class " + std::to_string(i) + " has no name");
    if (c.is_traffic_participant() && !c.has_instances) {
      throw std::invalid_argument("traffic participant class '" + c.name +
                                  "' must carry instances");
    }
    if (i == 0 && c.has_instances) {
      throw std::invalid_argument("class 0 cannot carry instances (ids below 1000 are stuff)");
    }
  }
}

namespace {

ClassInfo stuff(std::uint8_t id, std::string name, bool road = false) {
  return {id, std::move(name), false, road, ParticipantKind::kNone};
}

ClassInfo thing(std::uint8_t id, std::string name, ParticipantKind kind) {
  return {id, std::move(name), true, false, kind};
}

}  // namespace

ClassRegistry ClassRegistry::default_registry() {
  using K = ParticipantKind;
  return ClassRegistry({
      stuff(0, "road", true),
      stuff(1, "sidewalk"),
      stuff(2, "building"),
      stuff(3, "wall"),
      stuff(4, "fence"),
      stuff(5, "pole"),
      stuff(6, "traffic light"),
      stuff(7, "traffic sign"),
      stuff(8, "vegetation"),
      stuff(9, "terrain"),
      stuff(10, "sky"),
      thing(11, "person", K::kHuman),
      thing(12, "rider", K::kHuman),
      thing(13, "car", K::kVehicle),
      thing(14, "truck", K::kVehicle),
      thing(15, "bus", K::kVehicle),
      stuff(16, "crosswalk"),
      stuff(17, "driving indication"),
      stuff(18, "lane"),
      thing(19, "motorcycle", K::kVehicle),
      thing(20, "bicycle", K::kVehicle),
  });
}

ClassRegistry ClassRegistry::toy_registry() {
  using K = ParticipantKind;
  return ClassRegistry({
      stuff(0, "road", true),
      stuff(1, "background"),
      thing(2, "car", K::kVehicle),
      thing(3, "person", K::kHuman),
  });
}

ClassRegistry ClassRegistry::parse(const std::string& text) {
  std::vector<ClassInfo> classes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw std::invalid_argument("registry line " + std::to_string(lineno) +
                                  ": expected id<TAB>name<TAB>flags");
    }
    ClassInfo c;
    try {
      std::size_t used = 0;
      const unsigned long id = std::stoul(fields[0], &used);
      if (used != fields[0].size() || id > 254) throw std::invalid_argument("range");
      c.id = static_cast<std::uint8_t>(id);
    } catch (const std::exception&) {
      throw std::invalid_argument("registry line " + std::to_string(lineno) + ": bad id '" +
                                  fields[0] + "'");
    }
    c.name = fields[1];
    if (fields[2] != "-") {
      std::istringstream flags(fields[2]);
      std::string flag;
      while (std::getline(flags, flag, ',')) {
        if (flag == "instances") {
          c.has_instances = true;
        } else if (flag == "road") {
          c.is_road = true;
        } else if (flag == "human") {
          c.participant = ParticipantKind::kHuman;
        } else if (flag == "vehicle") {
          c.participant = ParticipantKind::kVehicle;
        } else {
          throw std::invalid_argument("registry line " + std::to_string(lineno) +
                                      ": unknown flag '" + flag + "'");
        }
      }
    }
    classes.push_back(std::move(c));
  }
  return ClassRegistry(std::move(classes));
}

ClassRegistry ClassRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open registry " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ClassRegistry::to_text() const {
  std::ostringstream out;
  for (const ClassInfo& c : classes_) {
    std::vector<std::string> flags;
    if (c.has_instances) flags.emplace_back("instances");
    if (c.is_road) flags.emplace_back("road");
    if (c.participant == ParticipantKind::kHuman) flags.emplace_back("human");
    if (c.participant == ParticipantKind::kVehicle) flags.emplace_back("vehicle");
    out << static_cast<int>(c.id) << '\t' << c.name << '\t';
    if (flags.empty()) out << '-';
    for (std::size_t i = 0; i < flags.size(); ++i) out << (i ? "," : "") << flags[i];
    out << '\n';
  }
  return out.str();
}

const ClassInfo& ClassRegistry::at(std::size_t id) const {
  if (id >= classes_.size()) {
    throw std::out_of_range("class id " + std::to_string(id) + " not in registry of " +
                            std::to_string(classes_.size()) + " classes");
  }
  return classes_[id];
}

std::optional<std::uint8_t> ClassRegistry::find(const std::string& name) const {
  for (const ClassInfo& c : classes_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

std::optional<std::uint8_t> ClassRegistry::road_class() const {
  for (const ClassInfo& c : classes_) {
    if (c.is_road) return c.id;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> ClassRegistry::participant_classes() const {
  std::vector<std::uint8_t> out;
  for (const ClassInfo& c : classes_) {
    if (c.is_traffic_participant()) out.push_back(c.id);
  }
  return out;
}

std::vector<std::uint8_t> ClassRegistry::instance_classes() const {
  std::vector<std::uint8_t> out;
  for (const ClassInfo& c : classes_) {
    if (c.has_instances) out.push_back(c.id);
  }
  return out;
}

bool ClassRegistry::operator==(const ClassRegistry& other) const {
  if (classes_.size() != other.classes_.size()) return false;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassInfo& a = classes_[i];
    const ClassInfo& b = other.classes_[i];
    if (a.id != b.id || a.name != b.name || a.has_instances != b.has_instances ||
        a.is_road != b.is_road || a.participant != b.participant) {
      return false;
    }
  }
  return true;
}

}  // namespace tspkit
