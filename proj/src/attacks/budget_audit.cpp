#include "segadv/attacks/budget_audit.hpp"

#include <atomic>
#include <cmath>

namespace segadv::attacks {
namespace {

std::atomic<std::uint64_t> g_checks{0};
std::atomic<std::uint64_t> g_violations{0};

}  // namespace

void record_budget_check(const Image& clean, const Image& adversarial, double epsilon) {
  ++g_checks;
  if (linf_distance(adversarial, clean) > static_cast<int>(std::floor(epsilon))) ++g_violations;
}

BudgetAudit budget_audit() { return {g_checks.load(), g_violations.load()}; }

void reset_budget_audit() {
  g_checks = 0;
  g_violations = 0;
}

}  // namespace segadv::attacks
