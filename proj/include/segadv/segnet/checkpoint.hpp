#pragma once

#include <filesystem>
#include <iosfwd>

#include "segadv/segnet/model.hpp"

// Checkpoint layout (all integers little-endian u32, reals little-endian f64):
//   "SEGADV01"
//   height width channels num_classes stem_channels feature_channels
//   parameter_count, then per parameter: rank, dims...
//   parameter values in declaration order
namespace segadv::segnet {

inline constexpr char kCheckpointMagic[] = "SEGADV01";

void write_checkpoint(std::ostream& out, const SegModel& model);
SegModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const SegModel& model);
SegModel load_checkpoint(const std::filesystem::path& path);

}  // namespace segadv::segnet
