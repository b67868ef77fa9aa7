#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segadv/image.hpp"

namespace segadv::defenses {

inline constexpr char kPatchDbMagic[] = "SEGADVPD";
inline constexpr std::size_t kDefaultPatchSize = 5;
inline constexpr std::size_t kDefaultPatchCount = 50000;

struct PatchDatabase {
  std::size_t patch_h = kDefaultPatchSize;
  std::size_t patch_w = kDefaultPatchSize;
  std::size_t channels = 3;
  std::vector<std::uint8_t> data;  // count patches, each patch_h x patch_w x channels, row-major
  std::string source;              // in-memory provenance note, not serialised

  std::size_t patch_bytes() const { return patch_h * patch_w * channels; }
  std::size_t count() const { return patch_bytes() == 0 ? 0 : data.size() / patch_bytes(); }
  std::span<const std::uint8_t> patch(std::size_t i) const;
  void validate() const;
  bool operator==(const PatchDatabase& other) const;
};

// Uniformly random image and location per patch, seeded.
PatchDatabase build_patch_db(std::span<const Image> clean_images, std::size_t patch_size, std::size_t target_count,
                             std::uint64_t seed);

// Nearest-neighbour lookup over a fixed database. Candidates are visited in
// order of their region sum so the bound (sum a - sum b)^2 / n <= ||a - b||^2
// prunes most of the scan; results equal an exhaustive scan, ties resolved to
// the lowest index. Safe to share across threads.
class PatchIndex {
 public:
  explicit PatchIndex(const PatchDatabase& db);

  const PatchDatabase& database() const { return *db_; }
  // tile is valid_h x valid_w x C; matched against the top-left region of each patch.
  std::size_t nearest(std::span<const std::uint8_t> tile, std::size_t valid_h, std::size_t valid_w) const;

 private:
  struct Sorted {
    std::vector<std::int64_t> sums;      // ascending
    std::vector<std::uint32_t> indices;  // db index for each entry of sums
  };
  const Sorted& sorted_for(std::size_t valid_h, std::size_t valid_w) const;

  const PatchDatabase* db_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, std::size_t>, Sorted> cache_;
};

// Non-overlapping tiles replaced by their nearest database patch; remainder
// tiles at the right and bottom are matched on their valid region.
Image quilt(const Image& image, const PatchDatabase& db);
Image quilt(const Image& image, const PatchIndex& index);

void write_patch_db(std::ostream& out, const PatchDatabase& db);
PatchDatabase read_patch_db(std::istream& in);
void save_patch_db(const std::filesystem::path& path, const PatchDatabase& db);
PatchDatabase load_patch_db(const std::filesystem::path& path);

}  // namespace segadv::defenses
