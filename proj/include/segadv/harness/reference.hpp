#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "segadv/harness/dataset.hpp"
#include "segadv/segnet/model.hpp"
#include "segadv/segnet/train.hpp"

namespace segadv::harness {

// Pinned dataset, initialisation and training settings behind the trained
// toy model used by the test and acceptance suites.
ToyDatasetSpec reference_dataset_spec();
segnet::TrainConfig reference_train_config();
inline constexpr std::uint64_t kReferenceInitSeed = 3;

// He initialisation with kReferenceInitSeed, class-balanced weights from the
// train split, then segnet::train.
segnet::TrainResult train_reference_model(const Dataset& data, const segnet::TrainConfig& config);

// FNV-1a over every train sample and the training settings.
std::string training_fingerprint(const Dataset& data, const segnet::TrainConfig& config);

// Loads <dir>/reference_<fingerprint>.ckpt when present, otherwise trains and
// stores it (written to a temporary name, then renamed).
segnet::SegModel load_or_train_reference(const std::filesystem::path& dir, const Dataset& data,
                                         const segnet::TrainConfig& config = reference_train_config());

}  // namespace segadv::harness
