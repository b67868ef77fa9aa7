#include "segadv/harness/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "segadv/error.hpp"
#include "segadv/harness/png_io.hpp"

namespace segadv::harness {

namespace fs = std::filesystem;

const std::array<std::string_view, kNumToyClasses>& class_names() {
  static constexpr std::array<std::string_view, kNumToyClasses> kNames = {
      "road", "sidewalk", "building", "sky", "car", "pedestrian", "pole", "vegetation"};
  return kNames;
}

const std::array<Rgb, kNumToyClasses>& label_palette() {
  static constexpr std::array<Rgb, kNumToyClasses> kPalette = {{
      {128, 64, 128},
      {244, 35, 232},
      {70, 70, 70},
      {70, 130, 180},
      {0, 0, 142},
      {220, 20, 60},
      {153, 153, 153},
      {107, 142, 35},
  }};
  return kPalette;
}

int parse_class(std::string_view name_or_id) {
  const auto& names = class_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name_or_id) return static_cast<int>(i);
  }
  int id = -1;
  const auto [end, ec] = std::from_chars(name_or_id.data(), name_or_id.data() + name_or_id.size(), id);
  if (ec != std::errc() || end != name_or_id.data() + name_or_id.size() || id < 0 ||
      id >= static_cast<int>(kNumToyClasses)) {
    throw UsageError("unknown class '" + std::string(name_or_id) + "'");
  }
  return id;
}

void ToyDatasetSpec::validate() const {
  if (height < 16 || width < 16) throw UsageError("toy scenes need at least 16x16 pixels");
  if (scene.color_jitter < 0.0 || scene.global_jitter < 0.0 || scene.pixel_noise < 0.0) throw UsageError("scene noise levels must be >= 0");
  auto check_range = [](std::size_t lo, std::size_t hi, const char* what) {
    if (lo > hi) throw UsageError(std::string("scene ") + what + " range is inverted");
  };
  check_range(scene.min_cars, scene.max_cars, "car");
  check_range(scene.min_pedestrians, scene.max_pedestrians, "pedestrian");
  check_range(scene.min_poles, scene.max_poles, "pole");
  check_range(scene.min_buildings, scene.max_buildings, "building");
  check_range(scene.min_trees, scene.max_trees, "tree");
}

std::string_view to_string(Split split) { return split == Split::kTrain ? "train" : "val"; }

std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

namespace {

class SceneRng {
 public:
  SceneRng(std::uint64_t seed, Split split, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
    engine_.seed(seq);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(engine_); }
  std::size_t count(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }
  double normal(double sd) { return sd == 0.0 ? 0.0 : std::normal_distribution<double>(0.0, sd)(engine_); }

 private:
  std::mt19937_64 engine_;
};

struct Canvas {
  long h, w;
  LabelMask mask;
  std::vector<double> shade;  // additive brightness per pixel

  Canvas(long height, long width)
      : h(height), w(width), mask(static_cast<std::size_t>(height), static_cast<std::size_t>(width)),
        shade(static_cast<std::size_t>(height * width), 0.0) {}
  bool inside(long y, long x) const { return y >= 0 && y < h && x >= 0 && x < w; }
  int get(long y, long x) const { return mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)); }
  void set(long y, long x, int c) {
    if (inside(y, x)) mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = c;
  }
  double& shade_at(long y, long x) { return shade[static_cast<std::size_t>(y * w + x)]; }
};

}  // namespace

segnet::Sample render_scene(const ToyDatasetSpec& spec, Split split, std::size_t index) {
  spec.validate();
  const SceneParams& p = spec.scene;
  SceneRng rng(spec.seed, split, index);
  const long h = static_cast<long>(spec.height), w = static_cast<long>(spec.width);
  const double sy = static_cast<double>(h) / 64.0, sx = static_cast<double>(w) / 128.0;
  Canvas cv(h, w);

  const long horizon = rng.integer(static_cast<long>(0.34 * h), static_cast<long>(0.46 * h));
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) cv.set(y, x, y < horizon ? kSky : kSidewalk);
  }

  // Road trapezoid from a vanishing region at the horizon to the bottom edge.
  const double top_centre = rng.uniform(0.35 * w, 0.65 * w);
  const double bottom_centre = rng.uniform(0.4 * w, 0.6 * w);
  const double top_half = rng.uniform(4.0, 10.0) * sx;
  const double bottom_half = rng.uniform(0.3 * w, 0.45 * w);
  auto road_span = [&](long y, double& centre, double& half) {
    const double t = static_cast<double>(y - horizon) / static_cast<double>(std::max(1L, h - 1 - horizon));
    centre = top_centre + (bottom_centre - top_centre) * t;
    half = top_half + (bottom_half - top_half) * t;
  };
  for (long y = horizon; y < h; ++y) {
    double centre, half;
    road_span(y, centre, half);
    for (long x = 0; x < w; ++x) {
      if (std::abs(static_cast<double>(x) + 0.5 - centre) < half) cv.set(y, x, kRoad);
    }
  }

  // Building blocks against the sky, with darker window grids.
  const std::size_t buildings = rng.count(p.min_buildings, p.max_buildings);
  for (std::size_t b = 0; b < buildings; ++b) {
    const long x0 = rng.integer(-static_cast<long>(0.1 * w), w - 1);
    const long bw = rng.integer(static_cast<long>(0.12 * w), static_cast<long>(0.35 * w));
    const long top = rng.integer(static_cast<long>(0.06 * h), std::max(static_cast<long>(0.06 * h), horizon - 4));
    const long pitch = 4 + rng.integer(0, 2);
    for (long y = top; y < horizon; ++y) {
      for (long x = x0; x < x0 + bw; ++x) {
        if (!cv.inside(y, x)) continue;
        cv.set(y, x, kBuilding);
        const bool window = (y - top) % pitch >= 1 && (y - top) % pitch <= 2 && (x - x0) % pitch >= 1 &&
                            (x - x0) % pitch <= 2;
        cv.shade_at(y, x) = window ? -22.0 : 0.0;
      }
    }
  }

  // Tree crowns around the horizon line.
  const std::size_t trees = rng.count(p.min_trees, p.max_trees);
  for (std::size_t t = 0; t < trees; ++t) {
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(static_cast<double>(horizon) - 8.0 * sy, static_cast<double>(horizon));
    const double rx = rng.uniform(5.0, 12.0) * sx, ry = rng.uniform(4.0, 9.0) * sy;
    for (long y = static_cast<long>(cy - ry); y <= static_cast<long>(cy + ry) + 1; ++y) {
      for (long x = static_cast<long>(cx - rx); x <= static_cast<long>(cx + rx) + 1; ++x) {
        if (!cv.inside(y, x) || cv.get(y, x) == kRoad) continue;
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) cv.set(y, x, kVegetation);
      }
    }
  }

  // Poles standing on the sidewalk.
  const std::size_t poles = rng.count(p.min_poles, p.max_poles);
  for (std::size_t k = 0; k < poles; ++k) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      const long x = rng.integer(0, w - 2);
      const long bottom = rng.integer(horizon + 3, std::min(h - 1, horizon + static_cast<long>(20 * sy)));
      if (cv.get(bottom, x) != kSidewalk || cv.get(bottom, x + 1) != kSidewalk) continue;
      const long top = std::max(0L, horizon - rng.integer(static_cast<long>(6 * sy), static_cast<long>(16 * sy)));
      for (long y = top; y <= bottom; ++y) {
        cv.set(y, x, kPole);
        cv.set(y, x + 1, kPole);
      }
      break;
    }
  }

  // Cars on the road, far to near so nearer ones overlap.
  struct Box {
    long bottom;
    double centre, width, height;
  };
  std::vector<Box> cars;
  const std::size_t n_cars = rng.count(p.min_cars, p.max_cars);
  for (std::size_t k = 0; k < n_cars; ++k) {
    const long bottom = rng.integer(horizon + static_cast<long>(8 * sy), h - 2);
    double centre, half;
    road_span(bottom, centre, half);
    const double depth = static_cast<double>(bottom - horizon) / static_cast<double>(h - horizon);
    const double width = rng.uniform(14.0, 28.0) * sx * (0.5 + 0.5 * depth);
    const double height = width * rng.uniform(0.45, 0.6) * sy / sx;
    cars.push_back({bottom, centre + rng.uniform(-0.6, 0.6) * std::max(0.0, half - width / 2), width, height});
  }
  std::sort(cars.begin(), cars.end(), [](const Box& a, const Box& b) { return a.bottom < b.bottom; });
  for (const Box& car : cars) {
    const long top = car.bottom - static_cast<long>(std::lround(car.height)) + 1;
    const long roof = static_cast<long>(std::lround(car.height * 0.35));
    for (long y = top; y <= car.bottom; ++y) {
      // Narrower cabin on top, jittered flanks.
      const double inset = (y - top) < roof ? car.width * 0.18 : 0.0;
      const double jl = static_cast<double>(rng.integer(-1, 1)), jr = static_cast<double>(rng.integer(-1, 1));
      const long left = static_cast<long>(std::lround(car.centre - car.width / 2 + inset + jl));
      const long right = static_cast<long>(std::lround(car.centre + car.width / 2 - inset + jr));
      for (long x = left; x <= right; ++x) {
        if (!cv.inside(y, x)) continue;
        cv.set(y, x, kCar);
        cv.shade_at(y, x) = (y - top) < roof ? 18.0 : (y >= car.bottom - 1 ? -30.0 : 0.0);
      }
    }
  }

  // Pedestrians on the sidewalk.
  const std::size_t n_peds = rng.count(p.min_pedestrians, p.max_pedestrians);
  for (std::size_t k = 0; k < n_peds; ++k) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      const long bottom = rng.integer(horizon + static_cast<long>(6 * sy), h - 1);
      const long x = rng.integer(0, w - 1);
      if (cv.get(bottom, x) != kSidewalk) continue;
      const double depth = static_cast<double>(bottom - horizon) / static_cast<double>(h - horizon);
      const long ph = static_cast<long>(std::lround(rng.uniform(10.0, 18.0) * sy * (0.6 + 0.4 * depth)));
      const long pw = rng.integer(3, 5);
      for (long y = bottom - ph + 1; y <= bottom; ++y) {
        const long head = (y - (bottom - ph + 1)) < ph / 5 ? 1 : 0;
        for (long xx = x + head; xx < x + pw - head; ++xx) cv.set(y, xx, kPedestrian);
      }
      break;
    }
  }

  // Colours: per-image jitter of every class colour, vertical shading on sky
  // and road, per-pixel Gaussian noise.
  std::array<double, 3> cast{};
  for (double& v : cast) v = rng.uniform(-p.global_jitter, p.global_jitter);
  std::array<std::array<double, 3>, kNumToyClasses> colors{};
  for (std::size_t c = 0; c < kNumToyClasses; ++c) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      colors[c][ch] = p.base_colors[c][ch] + cast[ch] + rng.uniform(-p.color_jitter, p.color_jitter);
    }
  }
  Image img(spec.height, spec.width, 3);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const int cls = cv.get(y, x);
      double shade = cv.shade_at(y, x);
      if (cls == kSky) shade += 0.6 * static_cast<double>(horizon - y);
      if (cls == kRoad) shade += 0.25 * static_cast<double>(y - horizon);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = colors[static_cast<std::size_t>(cls)][static_cast<std::size_t>(ch)] + shade +
                         rng.normal(p.pixel_noise);
        img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), static_cast<std::size_t>(ch)) =
            quantize_gray(v);
      }
    }
  }
  return {std::move(img), std::move(cv.mask)};
}

Dataset generate_in_memory(const ToyDatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  for (std::size_t i = 0; i < spec.train_count; ++i) {
    ds.train.push_back(render_scene(spec, Split::kTrain, i));
    ds.train_ids.push_back(sample_id(i));
  }
  for (std::size_t i = 0; i < spec.val_count; ++i) {
    ds.val.push_back(render_scene(spec, Split::kVal, i));
    ds.val_ids.push_back(sample_id(i));
  }
  return ds;
}

void generate_toy_dataset(const ToyDatasetSpec& spec, const fs::path& dir) {
  const Dataset ds = generate_in_memory(spec);
  for (Split split : {Split::kTrain, Split::kVal}) {
    const fs::path sub = dir / std::string(to_string(split));
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw DataError("cannot create " + sub.string() + ": " + ec.message());
    const auto& samples = ds.split(split);
    const auto& ids = ds.ids(split);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      write_png(sub / (ids[i] + "_img.png"), samples[i].image);
      write_mask_png(sub / (ids[i] + "_lbl.png"), samples[i].mask);
    }
  }
}

namespace {

void load_split(const fs::path& dir, std::size_t num_classes, std::vector<segnet::Sample>& samples,
                std::vector<std::string>& ids) {
  if (!fs::is_directory(dir)) throw DataError("missing dataset directory " + dir.string());
  std::map<std::string, std::pair<bool, bool>> stems;  // (has image, has mask)
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    auto ends_with = [&](std::string_view suffix) {
      return name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with("_img.png")) {
      stems[name.substr(0, name.size() - 8)].first = true;
    } else if (ends_with("_lbl.png")) {
      stems[name.substr(0, name.size() - 8)].second = true;
    }
  }
  for (const auto& [stem, has] : stems) {
    if (!has.first) throw DataError("orphan mask: no image for stem '" + stem + "' in " + dir.string());
    if (!has.second) throw DataError("orphan image: no mask for stem '" + stem + "' in " + dir.string());
  }
  for (const auto& [stem, has] : stems) {
    segnet::Sample s{read_png_rgb(dir / (stem + "_img.png")), read_mask_png(dir / (stem + "_lbl.png"))};
    if (s.mask.height != s.image.height || s.mask.width != s.image.width) {
      throw DataError("image and mask sizes differ for stem '" + stem + "'");
    }
    try {
      validate_mask(s.mask, num_classes);
    } catch (const UsageError& e) {
      throw DataError("mask for stem '" + stem + "': " + e.what());
    }
    samples.push_back(std::move(s));
    ids.push_back(stem);
  }
}

}  // namespace

Dataset load_dataset(const fs::path& dir, std::size_t num_classes) {
  Dataset ds;
  load_split(dir / "train", num_classes, ds.train, ds.train_ids);
  load_split(dir / "val", num_classes, ds.val, ds.val_ids);
  return ds;
}

Image render_mask(const LabelMask& mask) {
  Image out(mask.height, mask.width, 3);
  const auto& palette = label_palette();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int c = mask.classes[i];
    const Rgb rgb = (c >= 0 && c < static_cast<int>(palette.size())) ? palette[static_cast<std::size_t>(c)]
                                                                      : Rgb{255, 255, 255};
    for (std::size_t ch = 0; ch < 3; ++ch) out.data[i * 3 + ch] = rgb[ch];
  }
  return out;
}

std::vector<Image> images_of(const std::vector<segnet::Sample>& samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

}  // namespace segadv::harness
