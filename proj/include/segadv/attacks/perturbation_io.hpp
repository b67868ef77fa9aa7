#pragma once

#include <filesystem>
#include <iosfwd>

#include "segadv/attacks/attack_config.hpp"

// Perturbation file (little-endian):
//   "SEGADVR1", u32 height, u32 width, u32 channels, u32 norm (0 = inf, 2 = l2),
//   f64 epsilon, then height * width * channels f64 values.
namespace segadv::attacks {

inline constexpr char kPerturbationMagic[] = "SEGADVR1";

void write_perturbation(std::ostream& out, const Perturbation& perturbation);
Perturbation read_perturbation(std::istream& in);

void save_perturbation(const std::filesystem::path& path, const Perturbation& perturbation);
Perturbation load_perturbation(const std::filesystem::path& path);

}  // namespace segadv::attacks
