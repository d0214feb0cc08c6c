#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "shrimpmorph/raster.hpp"
#include "shrimpmorph/skeleton.hpp"

namespace shrimpmorph {

/// One captured specimen image with its labels and ground truth.
struct SampleRecord {
  std::string sample_id;
  std::string specimen_id;
  int rotation_deg = 0;  // 0, 90, 180 or 270
  RgbdRaster raster;
  View human_view = View::Lateral;
  RostrumState human_rostrum = RostrumState::Intact;
  std::optional<VirtualSkeleton> gt_skeleton;
  View gt_view = View::Lateral;
  RostrumState gt_rostrum = RostrumState::Intact;
  std::optional<MeasurementSet> gt_measurements_cm;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct CorpusSplit {
  std::set<std::string> train_ids;
  std::set<std::string> val_ids;
  std::set<std::string> test_ids;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Specimen-exclusive split: every sample of a specimen lands in the same
/// subset. Specimen counts per subset use largest-remainder rounding.
/// Throws EmptyCorpus, or InvalidArgument when fractions are not positive
/// or do not sum to 1 within 1e-9.
CorpusSplit make_split(const std::vector<SampleRecord>& corpus, SplitFractions fractions,
                       std::uint64_t seed);

// COCO keypoints. The category name carries the variant ("lateral-23", ...);
// each image's file_name stem is the sample id.
using AnnotatedSkeleton = std::pair<std::string, VirtualSkeleton>;
std::vector<AnnotatedSkeleton> parse_coco_keypoints(const std::string& json_text);
std::vector<AnnotatedSkeleton> load_coco_keypoints(const std::filesystem::path& path);
std::string format_coco_keypoints(const std::vector<AnnotatedSkeleton>& skeletons,
                                  int image_width, int image_height);
void write_coco_keypoints(const std::vector<AnnotatedSkeleton>& skeletons, int image_width,
                          int image_height, const std::filesystem::path& path);

// Ground-truth measurement table: header `sample_id,<var>,...`, blank cells
// for unmeasured variables.
std::map<std::string, MeasurementSet> parse_measurement_csv(const std::string& text);
std::map<std::string, MeasurementSet> load_measurement_csv(const std::filesystem::path& path);
std::string format_measurement_csv(const std::map<std::string, MeasurementSet>& rows);
void write_measurement_csv(const std::map<std::string, MeasurementSet>& rows,
                           const std::filesystem::path& path);

/// Corpus directory layout:
///   metadata.csv       sample/specimen ids, rotation, human and gt labels
///   annotations.json   COCO keypoints for samples with a gt skeleton
///   measurements.csv   centimetre ground truth
///   rasters/<id>.rgbd  RGB-D planes
void save_corpus(const std::vector<SampleRecord>& corpus, const std::filesystem::path& dir);
std::vector<SampleRecord> load_corpus(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace shrimpmorph
