#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tspkit {

enum class ParticipantKind { kNone, kHuman, kVehicle };

struct ClassInfo {
  std::uint8_t id = 0;
  std::string name;
  bool has_instances = false;
  bool is_road = false;
  ParticipantKind participant = ParticipantKind::kNone;

  bool is_traffic_participant() const { return participant != ParticipantKind::kNone; }
};

// Ordered class table. IDs are contiguous from 0 and below 255 (the ignore
// value). Class 0 may not carry instances, since id < 1000 decodes as a stuff
// pixel.
class ClassRegistry {
 public:
  explicit ClassRegistry(std::vector<ClassInfo> classes);

  // 21 classes: 16 retained Cityscapes classes, crosswalk, driving
  // indication, lane, motorcycle, bicycle.
  static ClassRegistry default_registry();
  // 4 classes used by the toy training set: road, background, car, person.
  static ClassRegistry toy_registry();

  // Text table, one class per line: id<TAB>name<TAB>flags. flags is a
  // comma-separated subset of {instances, road, human, vehicle} or "-".
  // Blank lines and lines starting with '#' are skipped.
  static ClassRegistry parse(const std::string& text);
  static ClassRegistry load(const std::filesystem::path& path);
  std::string to_text() const;

  std::size_t size() const { return classes_.size(); }
  const ClassInfo& at(std::size_t id) const;
  const std::vector<ClassInfo>& classes() const { return classes_; }
  bool contains(std::size_t id) const { return id < classes_.size(); }
  std::optional<std::uint8_t> find(const std::string& name) const;
  std::optional<std::uint8_t> road_class() const;
  std::vector<std::uint8_t> participant_classes() const;
  std::vector<std::uint8_t> instance_classes() const;

  bool operator==(const ClassRegistry& other) const;

 private:
  std::vector<ClassInfo> classes_;
};

}  // namespace tspkit
