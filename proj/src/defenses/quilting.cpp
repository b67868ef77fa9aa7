#include "segadv/defenses/quilting.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "segadv/binary_io.hpp"
#include "segadv/error.hpp"

namespace segadv::defenses {

std::span<const std::uint8_t> PatchDatabase::patch(std::size_t i) const {
  if (i >= count()) throw UsageError("patch index out of range");
  return std::span<const std::uint8_t>(data).subspan(i * patch_bytes(), patch_bytes());
}

void PatchDatabase::validate() const {
  if (patch_h == 0 || patch_w == 0 || channels == 0) throw DataError("patch database has a zero dimension");
  if (data.empty()) throw DataError("patch database is empty");
  if (data.size() % patch_bytes() != 0) throw DataError("patch database size is not a multiple of the patch size");
}

bool PatchDatabase::operator==(const PatchDatabase& other) const {
  return patch_h == other.patch_h && patch_w == other.patch_w && channels == other.channels && data == other.data;
}

PatchDatabase build_patch_db(std::span<const Image> clean_images, std::size_t patch_size, std::size_t target_count,
                             std::uint64_t seed) {
  if (clean_images.empty()) throw UsageError("build_patch_db needs at least one image");
  if (target_count == 0) throw UsageError("build_patch_db target_count must be >= 1");
  if (patch_size == 0) throw UsageError("patch size must be positive");
  const std::size_t channels = clean_images.front().channels;
  for (const Image& img : clean_images) {
    if (img.channels != channels) throw ShapeError("patch source images disagree on channel count");
    if (img.height < patch_size || img.width < patch_size) throw ShapeError("patch source image smaller than patch");
  }
  PatchDatabase db;
  db.patch_h = db.patch_w = patch_size;
  db.channels = channels;
  db.data.reserve(target_count * db.patch_bytes());
  db.source = std::to_string(clean_images.size()) + " images, seed " + std::to_string(seed);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_image(0, clean_images.size() - 1);
  for (std::size_t n = 0; n < target_count; ++n) {
    const Image& img = clean_images[pick_image(rng)];
    std::uniform_int_distribution<std::size_t> pick_y(0, img.height - patch_size);
    std::uniform_int_distribution<std::size_t> pick_x(0, img.width - patch_size);
    const std::size_t y0 = pick_y(rng);
    const std::size_t x0 = pick_x(rng);
    for (std::size_t y = 0; y < patch_size; ++y) {
      const auto row = img.data.begin() + static_cast<std::ptrdiff_t>(img.index(y0 + y, x0, 0));
      db.data.insert(db.data.end(), row, row + static_cast<std::ptrdiff_t>(patch_size * channels));
    }
  }
  return db;
}

PatchIndex::PatchIndex(const PatchDatabase& db) : db_(&db) {
  db.validate();
  if (db.count() > std::numeric_limits<std::uint32_t>::max()) throw UsageError("patch database too large");
  sorted_for(db.patch_h, db.patch_w);
}

const PatchIndex::Sorted& PatchIndex::sorted_for(std::size_t valid_h, std::size_t valid_w) const {
  const auto key = std::make_pair(valid_h, valid_w);
  // std::map references stay valid across later insertions.
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const PatchDatabase& db = *db_;
  const std::size_t n = db.count();
  std::vector<std::int64_t> sums(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = db.patch(i);
    std::int64_t s = 0;
    for (std::size_t y = 0; y < valid_h; ++y) {
      for (std::size_t k = 0; k < valid_w * db.channels; ++k) s += p[y * db.patch_w * db.channels + k];
    }
    sums[i] = s;
  }
  Sorted sorted;
  sorted.indices.resize(n);
  std::iota(sorted.indices.begin(), sorted.indices.end(), 0u);
  std::stable_sort(sorted.indices.begin(), sorted.indices.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return sums[a] < sums[b]; });
  sorted.sums.resize(n);
  for (std::size_t k = 0; k < n; ++k) sorted.sums[k] = sums[sorted.indices[k]];
  return cache_.emplace(key, std::move(sorted)).first->second;
}

std::size_t PatchIndex::nearest(std::span<const std::uint8_t> tile, std::size_t valid_h, std::size_t valid_w) const {
  const PatchDatabase& db = *db_;
  const std::size_t c = db.channels;
  if (valid_h == 0 || valid_w == 0 || valid_h > db.patch_h || valid_w > db.patch_w ||
      tile.size() != valid_h * valid_w * c) {
    throw ShapeError("quilt tile does not fit the database patch size");
  }
  const Sorted& sorted = sorted_for(valid_h, valid_w);
  const std::size_t n = sorted.sums.size();
  const auto elems = static_cast<std::int64_t>(valid_h * valid_w * c);
  const std::int64_t tile_sum = std::accumulate(tile.begin(), tile.end(), std::int64_t{0});

  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  std::size_t best_index = std::numeric_limits<std::size_t>::max();

  // Exact distance with early abandon once it exceeds the current best.
  auto consider = [&](std::size_t k) {
    const std::size_t idx = sorted.indices[k];
    const auto p = db.patch(idx);
    std::int64_t d = 0;
    for (std::size_t y = 0; y < valid_h && d <= best; ++y) {
      const std::uint8_t* a = tile.data() + y * valid_w * c;
      const std::uint8_t* b = p.data() + y * db.patch_w * c;
      for (std::size_t q = 0; q < valid_w * c; ++q) {
        const std::int64_t diff = static_cast<std::int64_t>(a[q]) - b[q];
        d += diff * diff;
      }
    }
    if (d < best || (d == best && idx < best_index)) {
      best = d;
      best_index = idx;
    }
  };
  // Candidate k can only win (or tie) when its lower bound does not exceed best.
  auto bound = [&](std::size_t k) {
    const std::int64_t gap = tile_sum - sorted.sums[k];
    return static_cast<double>(gap) * static_cast<double>(gap) / static_cast<double>(elems);
  };

  const auto start = static_cast<std::size_t>(
      std::lower_bound(sorted.sums.begin(), sorted.sums.end(), tile_sum) - sorted.sums.begin());
  std::size_t up = start;        // next candidate at or above
  std::ptrdiff_t down = static_cast<std::ptrdiff_t>(start) - 1;  // next candidate below
  while (true) {
    const bool up_ok = up < n && bound(up) <= static_cast<double>(best);
    const bool down_ok = down >= 0 && bound(static_cast<std::size_t>(down)) <= static_cast<double>(best);
    if (!up_ok && !down_ok) break;
    if (up_ok && (!down_ok || bound(up) <= bound(static_cast<std::size_t>(down)))) {
      consider(up++);
    } else {
      consider(static_cast<std::size_t>(down--));
    }
  }
  return best_index;
}

Image quilt(const Image& image, const PatchDatabase& db) { return quilt(image, PatchIndex(db)); }

Image quilt(const Image& image, const PatchIndex& index) {
  const PatchDatabase& db = index.database();
  if (image.channels != db.channels) throw ShapeError("image and patch database disagree on channel count");
  Image out = image;
  const std::size_t c = image.channels;
  std::vector<std::uint8_t> tile;
  for (std::size_t y0 = 0; y0 < image.height; y0 += db.patch_h) {
    const std::size_t vh = std::min(db.patch_h, image.height - y0);
    for (std::size_t x0 = 0; x0 < image.width; x0 += db.patch_w) {
      const std::size_t vw = std::min(db.patch_w, image.width - x0);
      tile.clear();
      for (std::size_t y = 0; y < vh; ++y) {
        const auto row = image.data.begin() + static_cast<std::ptrdiff_t>(image.index(y0 + y, x0, 0));
        tile.insert(tile.end(), row, row + static_cast<std::ptrdiff_t>(vw * c));
      }
      const auto best = db.patch(index.nearest(tile, vh, vw));
      for (std::size_t y = 0; y < vh; ++y) {
        std::copy_n(best.data() + y * db.patch_w * c, vw * c,
                    out.data.begin() + static_cast<std::ptrdiff_t>(out.index(y0 + y, x0, 0)));
      }
    }
  }
  return out;
}

void write_patch_db(std::ostream& out, const PatchDatabase& db) {
  db.validate();
  binary::write_magic(out, kPatchDbMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(db.patch_h));
  binary::write_u32(out, static_cast<std::uint32_t>(db.patch_w));
  binary::write_u32(out, static_cast<std::uint32_t>(db.channels));
  binary::write_u32(out, static_cast<std::uint32_t>(db.count()));
  out.write(reinterpret_cast<const char*>(db.data.data()), static_cast<std::streamsize>(db.data.size()));
  if (!out) throw DataError("failed writing patch database");
}

PatchDatabase read_patch_db(std::istream& in) {
  binary::expect_magic(in, kPatchDbMagic, "patch database");
  PatchDatabase db;
  db.patch_h = binary::read_u32(in, "patch database");
  db.patch_w = binary::read_u32(in, "patch database");
  db.channels = binary::read_u32(in, "patch database");
  const std::size_t count = binary::read_u32(in, "patch database");
  if (db.patch_h == 0 || db.patch_w == 0 || db.channels == 0 || count == 0) {
    throw DataError("patch database header has a zero field");
  }
  db.data.resize(count * db.patch_bytes());
  binary::read_exact(in, reinterpret_cast<char*>(db.data.data()), static_cast<std::streamsize>(db.data.size()), "patch database");
  binary::expect_end(in, "patch database");
  return db;
}

void save_patch_db(const std::filesystem::path& path, const PatchDatabase& db) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_patch_db(out, db);
}

PatchDatabase load_patch_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  PatchDatabase db = read_patch_db(in);
  db.source = path.string();
  return db;
}

}  // namespace segadv::defenses
