#include "shrimpmorph/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Splits

CorpusSplit make_split(const std::vector<SampleRecord>& corpus, SplitFractions fractions,
                       std::uint64_t seed) {
  if (corpus.empty()) throw EmptyCorpus("cannot split an empty corpus");
  const double parts[3] = {fractions.train, fractions.val, fractions.test};
  for (double f : parts) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw InvalidArgument("split fractions must be positive");
    }
  }
  if (std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }

  std::vector<std::string> specimens;
  for (const auto& s : corpus) specimens.push_back(s.specimen_id);
  std::sort(specimens.begin(), specimens.end());
  specimens.erase(std::unique(specimens.begin(), specimens.end()), specimens.end());

  Rng rng(seed);
  rng.shuffle(specimens.begin(), specimens.end());

  // Largest remainder: floor each share, then hand the leftover groups to the
  // largest fractional parts (ties go to the earlier subset).
  const auto groups = specimens.size();
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = parts[i] * static_cast<double>(groups);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < groups) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::map<std::string, int> subset_of;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < counts[i]; ++k) subset_of[specimens[pos++]] = i;
  }

  CorpusSplit split;
  split.seed = seed;
  for (const auto& s : corpus) {
    switch (subset_of.at(s.specimen_id)) {
      case 0: split.train_ids.insert(s.sample_id); break;
      case 1: split.val_ids.insert(s.sample_id); break;
      default: split.test_ids.insert(s.sample_id); break;
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// COCO keypoints

namespace {

int category_id(Variant v) {
  return (v.view == View::Lateral ? 1 : 3) + (v.rostrum == RostrumState::Intact ? 0 : 1);
}

// Accepts "lateral-23" as well as prefixed names such as "shrimp-lateral-23".
Variant variant_from_category(const std::string& name) {
  const auto last = name.rfind('-');
  if (last == std::string::npos || last == 0) {
    throw SchemaError("category '" + name + "' does not carry a view/keypoint suffix");
  }
  const auto prev = name.rfind('-', last - 1);
  const std::string tail = prev == std::string::npos ? name : name.substr(prev + 1);
  try {
    return parse_variant_name(tail);
  } catch (const ParseError&) {
    throw SchemaError("category '" + name + "' does not carry a view/keypoint suffix");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

std::vector<AnnotatedSkeleton> parse_coco_keypoints(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("COCO file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") ||
      !doc.contains("categories")) {
    throw ParseError("COCO file needs images, annotations and categories");
  }

  std::map<std::int64_t, std::string> sample_of_image;
  for (const auto& img : doc.at("images")) {
    const auto id = required<std::int64_t>(img, "id", "image");
    const auto file = required<std::string>(img, "file_name", "image " + std::to_string(id));
    sample_of_image[id] = std::filesystem::path(file).stem().string();
  }
  std::map<std::int64_t, std::string> category_name;
  for (const auto& cat : doc.at("categories")) {
    const auto id = required<std::int64_t>(cat, "id", "category");
    category_name[id] = required<std::string>(cat, "name", "category " + std::to_string(id));
  }

  std::vector<AnnotatedSkeleton> out;
  for (const auto& ann : doc.at("annotations")) {
    const auto ann_id = required<std::int64_t>(ann, "id", "annotation");
    const std::string where = "annotation " + std::to_string(ann_id);
    const auto image_id = required<std::int64_t>(ann, "image_id", where);
    const auto cat_id = required<std::int64_t>(ann, "category_id", where);
    const auto values = required<std::vector<double>>(ann, "keypoints", where);

    if (!sample_of_image.count(image_id)) throw ParseError(where + ": unknown image_id");
    if (!category_name.count(cat_id)) throw ParseError(where + ": unknown category_id");

    const auto count = values.size();
    if (count % 3 != 0 || (count / 3 != 22 && count / 3 != 23)) {
      throw SchemaError(where + ": expected 66 or 69 keypoint values, got " +
                        std::to_string(count));
    }
    const Variant variant = variant_from_category(category_name[cat_id]);
    const int n = static_cast<int>(count / 3);
    if (n != keypoint_count(variant.rostrum)) {
      throw SchemaError(where + ": " + std::to_string(n) + " keypoints under category '" +
                        category_name[cat_id] + "'");
    }

    VirtualSkeleton skel;
    skel.view = variant.view;
    skel.rostrum = variant.rostrum;
    const int first = first_keypoint_index(variant.rostrum);
    for (int i = 0; i < n; ++i) {
      Keypoint kp;
      kp.index = first + i;
      kp.x = values[3 * i];
      kp.y = values[3 * i + 1];
      kp.visible = values[3 * i + 2] != 0.0;
      skel.keypoints.push_back(kp);
    }
    out.emplace_back(sample_of_image[image_id], std::move(skel));
  }
  return out;
}

std::vector<AnnotatedSkeleton> load_coco_keypoints(const std::filesystem::path& path) {
  return parse_coco_keypoints(read_text_file(path));
}

std::string format_coco_keypoints(const std::vector<AnnotatedSkeleton>& skeletons,
                                  int image_width, int image_height) {
  json images = json::array();
  json annotations = json::array();
  json categories = json::array();

  for (View view : {View::Lateral, View::Dorsal}) {
    for (RostrumState rostrum : {RostrumState::Intact, RostrumState::Broken}) {
      const Variant v{view, rostrum};
      json names = json::array();
      for (int i = first_keypoint_index(rostrum); i <= kMaxKeypoints; ++i) {
        names.push_back("kp" + std::to_string(i));
      }
      categories.push_back({{"id", category_id(v)},
                            {"name", variant_name(v)},
                            {"supercategory", "shrimp"},
                            {"keypoints", names}});
    }
  }

  std::int64_t next_id = 1;
  for (const auto& [sample_id, skel] : skeletons) {
    const auto id = next_id++;
    images.push_back({{"id", id},
                      {"file_name", sample_id + ".rgbd"},
                      {"width", image_width},
                      {"height", image_height}});
    json kps = json::array();
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool any = false;
    int labelled = 0;
    for (const auto& kp : skel.keypoints) {
      kps.push_back(kp.x);
      kps.push_back(kp.y);
      kps.push_back(kp.visible ? 2 : 0);
      if (!kp.visible) continue;
      ++labelled;
      if (!any) {
        x0 = x1 = kp.x;
        y0 = y1 = kp.y;
        any = true;
      }
      x0 = std::min(x0, kp.x);
      x1 = std::max(x1, kp.x);
      y0 = std::min(y0, kp.y);
      y1 = std::max(y1, kp.y);
    }
    annotations.push_back({{"id", id},
                           {"image_id", id},
                           {"category_id", category_id(variant_of(skel))},
                           {"keypoints", kps},
                           {"num_keypoints", labelled},
                           {"bbox", {x0, y0, x1 - x0, y1 - y0}},
                           {"area", (x1 - x0) * (y1 - y0)},
                           {"iscrowd", 0}});
  }

  json doc = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
  return doc.dump(1) + "\n";
}

void write_coco_keypoints(const std::vector<AnnotatedSkeleton>& skeletons, int image_width,
                          int image_height, const std::filesystem::path& path) {
  write_text_file(path, format_coco_keypoints(skeletons, image_width, image_height));
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::vector<std::string> text_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_number(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(where + ": bad number '" + cell + "'");
  return value;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace

std::map<std::string, MeasurementSet> parse_measurement_csv(const std::string& text) {
  const auto lines = text_lines(text);
  if (lines.empty()) throw ParseError("measurement CSV has no header");
  const auto header = split_csv_line(lines.front());
  if (header.empty() || header.front() != "sample_id") {
    throw ParseError("measurement CSV header must start with sample_id");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (!is_known_variable(header[c])) {
      throw UnknownVariable("unknown variable column '" + header[c] + "'");
    }
  }

  std::map<std::string, MeasurementSet> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = "measurement CSV line " + std::to_string(r + 1);
    if (cells.size() != header.size()) throw ParseError(where + ": wrong number of cells");
    if (cells[0].empty()) throw ParseError(where + ": empty sample_id");
    MeasurementSet set(Unit::Centimeters);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty()) continue;
      const double v = parse_number(cells[c], where);
      if (!std::isfinite(v) || v < 0.0) throw ParseError(where + ": negative measurement");
      set.set(header[c], v);
    }
    if (!rows.emplace(cells[0], std::move(set)).second) {
      throw ParseError(where + ": duplicate sample_id '" + cells[0] + "'");
    }
  }
  return rows;
}

std::map<std::string, MeasurementSet> load_measurement_csv(const std::filesystem::path& path) {
  return parse_measurement_csv(read_text_file(path));
}

std::string format_measurement_csv(const std::map<std::string, MeasurementSet>& rows) {
  std::string out = "sample_id";
  for (const auto& name : variable_names()) out += "," + name;
  out += "\n";
  for (const auto& [id, set] : rows) {
    out += id;
    for (const auto& name : variable_names()) {
      out += ",";
      if (const auto v = set.get(name)) out += format_number(*v);
    }
    out += "\n";
  }
  return out;
}

void write_measurement_csv(const std::map<std::string, MeasurementSet>& rows,
                           const std::filesystem::path& path) {
  write_text_file(path, format_measurement_csv(rows));
}

// ---------------------------------------------------------------------------
// Corpus directories

void save_corpus(const std::vector<SampleRecord>& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "rasters", ec);
  if (ec) throw IoError("cannot create " + (dir / "rasters").string() + ": " + ec.message());

  std::string meta = "sample_id,specimen_id,rotation_deg,human_view,human_rostrum,gt_view,gt_rostrum\n";
  std::vector<AnnotatedSkeleton> skeletons;
  std::map<std::string, MeasurementSet> measurements;
  int width = 0, height = 0;
  for (const auto& s : corpus) {
    meta += s.sample_id + "," + s.specimen_id + "," + std::to_string(s.rotation_deg) + "," +
            std::string(to_string(s.human_view)) + "," + std::string(to_string(s.human_rostrum)) +
            "," + std::string(to_string(s.gt_view)) + "," +
            std::string(to_string(s.gt_rostrum)) + "\n";
    write_raster(s.raster, dir / "rasters" / (s.sample_id + ".rgbd"));
    if (s.gt_skeleton) skeletons.emplace_back(s.sample_id, *s.gt_skeleton);
    if (s.gt_measurements_cm) measurements.emplace(s.sample_id, *s.gt_measurements_cm);
    width = s.raster.width;
    height = s.raster.height;
  }
  write_text_file(dir / "metadata.csv", meta);
  write_coco_keypoints(skeletons, width, height, dir / "annotations.json");
  write_measurement_csv(measurements, dir / "measurements.csv");
}

std::vector<SampleRecord> load_corpus(const std::filesystem::path& dir) {
  const auto lines = text_lines(read_text_file(dir / "metadata.csv"));
  if (lines.empty()) throw ParseError("metadata.csv has no header");

  std::map<std::string, VirtualSkeleton> skeletons;
  if (std::filesystem::exists(dir / "annotations.json")) {
    for (auto& [id, skel] : load_coco_keypoints(dir / "annotations.json")) {
      skeletons[id] = std::move(skel);
    }
  }
  std::map<std::string, MeasurementSet> measurements;
  if (std::filesystem::exists(dir / "measurements.csv")) {
    measurements = load_measurement_csv(dir / "measurements.csv");
  }

  std::vector<SampleRecord> corpus;
  std::set<std::string> ids;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = "metadata.csv line " + std::to_string(r + 1);
    if (cells.size() != 7) throw ParseError(where + ": expected 7 cells");
    SampleRecord s;
    s.sample_id = cells[0];
    if (!ids.insert(s.sample_id).second) throw ParseError(where + ": duplicate sample_id");
    s.specimen_id = cells[1];
    s.rotation_deg = static_cast<int>(parse_number(cells[2], where));
    if (s.rotation_deg % 90 != 0 || s.rotation_deg < 0 || s.rotation_deg > 270) {
      throw ParseError(where + ": rotation must be 0, 90, 180 or 270");
    }
    s.human_view = parse_view(cells[3]);
    s.human_rostrum = parse_rostrum(cells[4]);
    s.gt_view = parse_view(cells[5]);
    s.gt_rostrum = parse_rostrum(cells[6]);
    s.raster = read_raster(dir / "rasters" / (s.sample_id + ".rgbd"));
    if (auto it = skeletons.find(s.sample_id); it != skeletons.end()) s.gt_skeleton = it->second;
    if (auto it = measurements.find(s.sample_id); it != measurements.end()) {
      s.gt_measurements_cm = it->second;
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace shrimpmorph
