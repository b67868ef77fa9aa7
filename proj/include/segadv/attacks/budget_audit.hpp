#pragma once

#include <cstdint>

#include "segadv/image.hpp"

namespace segadv::attacks {

// Process-wide tally of l_inf budget checks on produced adversarial images.
// Every gradient attack and every universal-perturbation application
// records one check.
struct BudgetAudit {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
};

// Violation when max |adversarial - clean| exceeds floor(epsilon).
void record_budget_check(const Image& clean, const Image& adversarial, double epsilon);
BudgetAudit budget_audit();
void reset_budget_audit();

}  // namespace segadv::attacks
