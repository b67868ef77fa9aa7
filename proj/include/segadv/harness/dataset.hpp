#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "segadv/image.hpp"
#include "segadv/segnet/train.hpp"

namespace segadv::harness {

inline constexpr std::size_t kNumToyClasses = 8;
enum ToyClass : int {
  kRoad = 0,
  kSidewalk = 1,
  kBuilding = 2,
  kSky = 3,
  kCar = 4,
  kPedestrian = 5,
  kPole = 6,
  kVegetation = 7,
};

using Rgb = std::array<std::uint8_t, 3>;

const std::array<std::string_view, kNumToyClasses>& class_names();
// Display colours for rendered masks.
const std::array<Rgb, kNumToyClasses>& label_palette();
int parse_class(std::string_view name_or_id);

struct SceneParams {
  // Mean scene colour per class; each image shifts every class colour by a
  // uniform jitter and adds per-pixel Gaussian noise.
  std::array<Rgb, kNumToyClasses> base_colors{{
      {107, 103, 106},  // road
      {127, 118, 117},  // sidewalk
      {115, 107, 99},   // building
      {129, 140, 153},  // sky
      {90, 94, 125},    // car
      {141, 93, 89},    // pedestrian
      {133, 130, 107},  // pole
      {97, 115, 88},    // vegetation
  }};
  double color_jitter = 8.0;
  double global_jitter = 0.0;  // one shift per image and channel, shared by all classes
  double pixel_noise = 4.0;
  std::size_t min_cars = 1, max_cars = 3;
  std::size_t min_pedestrians = 0, max_pedestrians = 2;
  std::size_t min_poles = 0, max_poles = 3;
  std::size_t min_buildings = 2, max_buildings = 5;
  std::size_t min_trees = 1, max_trees = 3;
};

struct ToyDatasetSpec {
  std::size_t train_count = 160;
  std::size_t val_count = 64;
  std::size_t height = 64;
  std::size_t width = 128;
  SceneParams scene;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Split { kTrain = 0, kVal = 1 };
std::string_view to_string(Split split);

struct Dataset {
  std::vector<segnet::Sample> train;
  std::vector<segnet::Sample> val;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;

  const std::vector<segnet::Sample>& split(Split s) const { return s == Split::kTrain ? train : val; }
  const std::vector<std::string>& ids(Split s) const { return s == Split::kTrain ? train_ids : val_ids; }
};

// One scene, seeded by (spec.seed, split, index) so splits never share a draw.
segnet::Sample render_scene(const ToyDatasetSpec& spec, Split split, std::size_t index);
std::string sample_id(std::size_t index);

Dataset generate_in_memory(const ToyDatasetSpec& spec);
// Writes <dir>/{train,val}/NNNNNN_img.png (RGB) and NNNNNN_lbl.png (class ids).
void generate_toy_dataset(const ToyDatasetSpec& spec, const std::filesystem::path& dir);

// Reads a directory with train/ and val/ holding paired *_img.png / *_lbl.png,
// sorted by stem. Orphans raise DataError naming the stem.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t num_classes = kNumToyClasses);

Image render_mask(const LabelMask& mask);

std::vector<Image> images_of(const std::vector<segnet::Sample>& samples);

}  // namespace segadv::harness
