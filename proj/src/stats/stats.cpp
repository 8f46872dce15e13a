#include "tspkit/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tspkit/dataset_io.hpp"
#include "tspkit/parallel.hpp"

namespace tspkit::stats {

namespace {

// (class, index) -> pixel area, restricted to traffic participants.
std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> participant_areas(
    const InstanceMap& instances, const ClassRegistry& registry) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> areas;
  for (std::uint32_t id : instances.pixels) {
    if (id < kInstanceIdFactor) continue;
    const DecodedInstance d = split_instance_id(id);
    if (!registry.contains(d.class_id) || !registry.at(d.class_id).is_traffic_participant()) {
      continue;
    }
    ++areas[{d.class_id, d.instance_index}];
  }
  return areas;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

ParticipantCount count_participants(const InstanceMap& instances, const ClassRegistry& registry) {
  ParticipantCount out;
  for (const auto& [key, area] : participant_areas(instances, registry)) {
    const auto cls = static_cast<std::uint8_t>(key.first);
    ++out.per_class[cls];
    ++out.total;
    if (registry.at(cls).participant == ParticipantKind::kHuman) ++out.humans;
    if (registry.at(cls).participant == ParticipantKind::kVehicle) ++out.vehicles;
  }
  return out;
}

std::size_t size_bin(std::uint64_t area) {
  std::size_t bin = 0;
  while (bin + 1 < kSizeBins && (area >> (bin + 1)) != 0) ++bin;
  return bin;
}

double DatasetReport::avg_tp() const {
  return num_images ? static_cast<double>(total_participants) / static_cast<double>(num_images)
                    : 0.0;
}

double DatasetReport::humans_per_image() const {
  return num_images ? static_cast<double>(humans_total) / static_cast<double>(num_images) : 0.0;
}

double DatasetReport::vehicles_per_image() const {
  return num_images ? static_cast<double>(vehicles_total) / static_cast<double>(num_images) : 0.0;
}

void DatasetReport::merge(const DatasetReport& other) {
  num_images += other.num_images;
  total_participants += other.total_participants;
  humans_total += other.humans_total;
  vehicles_total += other.vehicles_total;
  for (std::size_t i = 0; i < tp_gt.size(); ++i) tp_gt[i] += other.tp_gt[i];
  for (const auto& [c, n] : other.per_class_instance_counts) per_class_instance_counts[c] += n;
  for (std::size_t i = 0; i < kSizeBins; ++i) size_histogram[i] += other.size_histogram[i];
  for (const auto& [count, images] : other.participants_per_image) {
    participants_per_image[count] += images;
  }
}

DatasetReport image_report(const InstanceMap& instances, const ClassRegistry& registry) {
  DatasetReport r;
  r.num_images = 1;
  const auto areas = participant_areas(instances, registry);
  for (const auto& [key, area] : areas) {
    const auto cls = static_cast<std::uint8_t>(key.first);
    ++r.per_class_instance_counts[cls];
    ++r.size_histogram[size_bin(area)];
    if (registry.at(cls).participant == ParticipantKind::kHuman) ++r.humans_total;
    if (registry.at(cls).participant == ParticipantKind::kVehicle) ++r.vehicles_total;
  }
  r.total_participants = areas.size();
  for (std::size_t i = 0; i < kCrowdThresholds.size(); ++i) {
    if (r.total_participants > kCrowdThresholds[i]) r.tp_gt[i] = 1;
  }
  r.participants_per_image[r.total_participants] = 1;
  return r;
}

DatasetReport dataset_report(std::span<const InstanceMap> instances, const ClassRegistry& registry,
                             std::size_t threads) {
  if (instances.empty()) throw std::invalid_argument("dataset report needs at least one image");
  auto parts = parallel_map(instances.size(), threads,
                            [&](std::size_t i) { return image_report(instances[i], registry); });
  DatasetReport total;
  for (const DatasetReport& p : parts) total.merge(p);
  return total;
}

nlohmann::ordered_json to_json(const DatasetReport& report, const ClassRegistry& registry) {
  nlohmann::ordered_json j;
  j["num_images"] = report.num_images;
  j["total_participants"] = report.total_participants;
  j["avg_tp"] = report.avg_tp();
  j["tp_gt_50"] = report.tp_gt[0];
  j["tp_gt_75"] = report.tp_gt[1];
  j["tp_gt_100"] = report.tp_gt[2];
  j["humans_total"] = report.humans_total;
  j["vehicles_total"] = report.vehicles_total;
  j["humans_per_image"] = report.humans_per_image();
  j["vehicles_per_image"] = report.vehicles_per_image();
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::uint8_t c : registry.participant_classes()) {
    auto it = report.per_class_instance_counts.find(c);
    per_class[registry.at(c).name] = it == report.per_class_instance_counts.end() ? 0 : it->second;
  }
  j["per_class_instance_counts"] = per_class;
  nlohmann::ordered_json hist;
  hist["bin_edges"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k <= kSizeBins; ++k) hist["bin_edges"].push_back(std::uint64_t{1} << k);
  hist["counts"] = report.size_histogram;
  j["instance_size_histogram"] = hist;
  nlohmann::ordered_json per_image = nlohmann::ordered_json::array();
  for (const auto& [count, images] : report.participants_per_image) {
    per_image.push_back({{"participants", count}, {"images", images}});
  }
  j["participants_per_image"] = per_image;
  return j;
}

std::string render_table(const DatasetReport& report, const std::string& name) {
  const std::vector<std::string> headers{"Dataset", "#Images", "Avg TP", "TP>50", "TP>75",
                                         "TP>100", "#Humans", "#Vehicles", "#H./img",
                                         "#V./img"};
  const std::vector<std::string> row{name,
                                     std::to_string(report.num_images),
                                     fixed(report.avg_tp(), 1),
                                     std::to_string(report.tp_gt[0]),
                                     std::to_string(report.tp_gt[1]),
                                     std::to_string(report.tp_gt[2]),
                                     std::to_string(report.humans_total),
                                     std::to_string(report.vehicles_total),
                                     fixed(report.humans_per_image(), 1),
                                     fixed(report.vehicles_per_image(), 1)};
  std::ostringstream out;
  for (int line = 0; line < 2; ++line) {
    const auto& cells = line == 0 ? headers : row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t width = std::max(headers[i].size(), row[i].size());
      if (i) out << "  ";
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width)) << cells[i];
      } else {
        out << std::right << std::setw(static_cast<int>(width)) << cells[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

CrowdRate crowd_rate(const LabelMap& label, const ClassRegistry& registry) {
  const auto road = registry.road_class();
  CrowdRate r;
  for (std::uint8_t c : label.pixels) {
    if (c == kIgnoreClass || !registry.contains(c)) continue;
    if (road && c == *road) {
      ++r.road_area;
    } else if (registry.at(c).is_traffic_participant()) {
      ++r.participant_area;
    }
  }
  const std::uint64_t denom = r.participant_area + r.road_area;
  r.defined = denom > 0;
  r.rate = r.defined ? static_cast<double>(r.participant_area) / static_cast<double>(denom) : 0.0;
  return r;
}

double CrowdRateSeries::min_rate() const {
  double m = entries.empty() ? 0.0 : entries.front().value.rate;
  for (const auto& e : entries) m = std::min(m, e.value.rate);
  return m;
}

double CrowdRateSeries::max_rate() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.value.rate);
  return m;
}

double CrowdRateSeries::mean_rate() const {
  if (entries.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : entries) s += e.value.rate;
  return s / static_cast<double>(entries.size());
}

CrowdRateSeries crowd_rate_series(std::vector<std::pair<std::string, LabelMap>> labels,
                                  const ClassRegistry& registry) {
  std::sort(labels.begin(), labels.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  CrowdRateSeries s;
  for (const auto& [id, label] : labels) s.entries.push_back({id, crowd_rate(label, registry)});
  return s;
}

CrowdRateSeries crowd_rate_series_from_dir(const std::filesystem::path& dir,
                                           const ClassRegistry& registry, std::size_t threads,
                                           const std::vector<std::string>& expected_ids) {
  CrowdRateSeries s;
  if (!std::filesystem::is_directory(dir)) {
    s.problems.push_back(dir.string() + ": not a directory");
    return s;
  }
  const std::vector<std::string> ids = list_png_ids(dir);
  struct Outcome {
    bool ok = false;
    CrowdRate rate;
    std::string error;
  };
  auto outcomes = parallel_map(ids.size(), threads, [&](std::size_t i) {
    Outcome o;
    try {
      o.rate = crowd_rate(load_label_map(dir / (ids[i] + ".png"), registry.size()), registry);
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    return o;
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (outcomes[i].ok) {
      s.entries.push_back({ids[i], outcomes[i].rate});
    } else {
      s.problems.push_back(outcomes[i].error);
    }
  }
  const std::set<std::string> present(ids.begin(), ids.end());
  for (const std::string& id : expected_ids) {
    if (!present.count(id)) s.problems.push_back((dir / (id + ".png")).string() + ": missing");
  }
  return s;
}

std::string to_csv(const CrowdRateSeries& series) {
  std::ostringstream out;
  out << "image_id,S_t,S_r,rate\n";
  for (const auto& e : series.entries) {
    out << e.image_id << ',' << e.value.participant_area << ',' << e.value.road_area << ','
        << fixed(e.value.rate, 6) << '\n';
  }
  return out.str();
}

std::string to_svg(const CrowdRateSeries& series) {
  const std::size_t n = series.entries.size();
  const double bar = 6.0, gap = 2.0, plot_h = 200.0, left = 40.0, top = 20.0;
  const double width = left + 20.0 + static_cast<double>(std::max<std::size_t>(n, 1)) * (bar + gap);
  const double height = top + plot_h + 40.0;
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <title>Crowd rate per image</title>\n";
  out << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 10.0
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = top + plot_h - plot_h * tick / 4.0;
    out << "  <text x=\"" << left - 4.0 << "\" y=\"" << y + 3.0
        << "\" font-size=\"9\" text-anchor=\"end\">" << tick * 0.25 << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = series.entries[i];
    const double h = plot_h * e.value.rate;
    const double x = left + 10.0 + static_cast<double>(i) * (bar + gap);
    out << "  <rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar
        << "\" height=\"" << h << "\" fill=\"#3b6ea5\"><title>" << e.image_id << ": "
        << fixed(e.value.rate, 6) << "</title></rect>\n";
  }
  out << "  <text x=\"" << left + 10.0 << "\" y=\"" << height - 12.0
      << "\" font-size=\"11\">images sorted by id (n=" << n << ")</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace tspkit::stats
