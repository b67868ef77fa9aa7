#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segadv/defenses/nlm.hpp"
#include "segadv/defenses/quilting.hpp"
#include "segadv/image.hpp"

namespace segadv::defenses {

enum class DefenseStage { kNlm, kQuilt };

using Pipeline = std::vector<DefenseStage>;

// "nlm", "quilt" (alias "iq"), comma separated, applied left to right.
Pipeline parse_pipeline(std::string_view text);
std::string to_string(DefenseStage stage);
std::string to_string(std::span<const DefenseStage> pipeline);

struct DefenseContext {
  NlmConfig nlm;
  const PatchIndex* quilt_index = nullptr;  // required when the pipeline quilts
};

// Applies the stages in order; every stage returns a quantized image.
Image defend(const Image& image, std::span<const DefenseStage> pipeline, const DefenseContext& context);

}  // namespace segadv::defenses
