#pragma once

#include "segadv/image.hpp"
#include "segadv/segnet/model.hpp"

namespace segadv::attacks {

// Per-pixel argmin of the class probabilities, ties to the smallest index.
LabelMask least_likely_targets(const segnet::ScoreVolume& scores);

// Replaces every pixel of `objective_class` by the class of the Euclidean-
// nearest pixel (in pixel coordinates) that is not of that class. Equidistant
// donors resolve to the smallest row-major index. Throws UsageError when the
// whole mask is the objective class.
LabelMask build_dnnm_target(const LabelMask& mask, int objective_class);

}  // namespace segadv::attacks
