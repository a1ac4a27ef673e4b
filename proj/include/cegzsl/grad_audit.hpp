#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cegzsl/grad_check.hpp"
#include "cegzsl/trainer.hpp"

namespace cegzsl {

// Gradient audit over every loss family and every mode's generator-side
// composite, each on freshly randomized small networks and batches.
struct AuditOptions {
  std::size_t instances = 10;
  std::uint64_t seed = 0;
  double tol = 1e-4;
  double tau_e = 0.1;
  double tau_s = 0.1;
  double margin_delta = 1.0;
  GradCheckOptions check{.eps = 1e-3, .abs_floor = 1e-6, .max_entries_per_block = 0, .five_point = true};
  // Test hook: negate the analytic gradient of this family before comparing.
  std::optional<std::string> flip_family;
};

struct AuditEntry {
  std::string family;
  std::size_t instance = 0;
  GradCheckReport report;
};

struct AuditResult {
  std::vector<AuditEntry> entries;
  double tol = 1e-4;

  bool passed() const;
  std::vector<AuditEntry> failures() const;
  // Worst entry per family, in family order.
  std::vector<AuditEntry> worst_by_family() const;
};

// ranking_real, ranking_sync, adversarial_discriminator,
// adversarial_generator, adversarial_generator_ns, instance_contrastive,
// class_contrastive, then composite_<mode> for every mode.
std::vector<std::string> audit_families();

AuditResult run_grad_audit(const AuditOptions& opt);

}  // namespace cegzsl
