#include "segadv/harness/reference.hpp"

#include <bit>
#include <cstdio>
#include <system_error>

#include <unistd.h>

#include "segadv/error.hpp"
#include "segadv/segnet/checkpoint.hpp"

namespace segadv::harness {

namespace fs = std::filesystem;

ToyDatasetSpec reference_dataset_spec() {
  ToyDatasetSpec spec;
  spec.train_count = 160;
  spec.val_count = 64;
  spec.seed = 1;
  return spec;
}

segnet::TrainConfig reference_train_config() {
  segnet::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  cfg.seed = 7;
  return cfg;
}

segnet::TrainResult train_reference_model(const Dataset& data, const segnet::TrainConfig& config) {
  segnet::TrainConfig cfg = config;
  if (cfg.class_weights.empty()) cfg.class_weights = segnet::balanced_class_weights(data.train, kNumToyClasses);
  return segnet::train(segnet::SegModel::he_initialized(segnet::Architecture{}, kReferenceInitSeed), data.train, cfg);
}

std::string training_fingerprint(const Dataset& data, const segnet::TrainConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& s : data.train) {
    mix(s.image.height);
    mix(s.image.width);
    for (std::uint8_t b : s.image.data) mix(b);
    for (int c : s.mask.classes) mix(static_cast<std::uint64_t>(c));
  }
  mix(config.epochs);
  mix(config.batch_size);
  mix(std::bit_cast<std::uint64_t>(config.learning_rate));
  mix(config.seed);
  for (double w : config.class_weights) mix(std::bit_cast<std::uint64_t>(w));
  mix(kReferenceInitSeed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

segnet::SegModel load_or_train_reference(const fs::path& dir, const Dataset& data,
                                         const segnet::TrainConfig& config) {
  const fs::path path = dir / ("reference_" + training_fingerprint(data, config) + ".ckpt");
  if (fs::exists(path)) return segnet::load_checkpoint(path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  segnet::SegModel model = train_reference_model(data, config).model;
  const fs::path tmp = path.string() + ".tmp" + std::to_string(std::hash<std::string>{}(path.string()) ^
                                                               static_cast<std::size_t>(::getpid()));
  segnet::save_checkpoint(tmp, model);
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot store " + path.string() + ": " + ec.message());
  return model;
}

}  // namespace segadv::harness
