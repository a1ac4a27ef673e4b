#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cegzsl/mlp.hpp"

namespace cegzsl {

struct GradCheckOptions {
  double eps = 1e-3;        // central-difference half step
  double abs_floor = 1e-6;  // denominator floor for near-zero gradients
  // Entries checked per parameter block; 0 checks all of them. Larger blocks
  // are sampled with a fixed stride so the audit stays deterministic.
  std::size_t max_entries_per_block = 0;
  // Five-point central stencil; truncation error drops from O(eps^2) to
  // O(eps^4), which matters for sharply curved losses at low temperature.
  bool five_point = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t flagged = 0;  // probes that straddled a kink and were excluded

  bool passed(double tol) const { return max_rel_error <= tol; }
  void merge(const GradCheckReport& other);
};

// A parameter block whose `grad` already holds the analytic gradient.
struct GradBlock {
  std::string name;
  Param<double>* param;
};

// Compares every block's analytic gradient against central differences of
// `loss`, which must be a deterministic function of the blocks' values.
// Forward passes inside `loss` are observed through a KinkProbe; a probe
// whose sign pattern differs from the unperturbed one is flagged, not scored.
GradCheckReport grad_check(std::span<const GradBlock> blocks,
                           const std::function<double()>& loss,
                           const GradCheckOptions& opt = {});

double relative_error(double analytic, double numeric, double abs_floor);

// Single-network convenience form. `loss_fn(out, grad)` must be callable as a
// generic lambda at double precision; when `grad` is non-null it receives
// d(loss)/d(out).
template <class LossFn>
GradCheckReport grad_check(const Mlp<float>& net, LossFn&& loss_fn, const Mat& input,
                           const GradCheckOptions& opt = {}) {
  Mlp<double> shadow = net.template cast<double>();
  const MatD x = input.template cast<double>();
  shadow.zero_grad();
  const MatD out = shadow.forward(x);
  MatD g;
  loss_fn(out, &g);
  shadow.backward(g);
  std::vector<GradBlock> blocks;
  for (std::size_t i = 0; i < shadow.params().size(); ++i) {
    blocks.push_back({"param" + std::to_string(i), &shadow.params()[i]});
  }
  return grad_check(blocks, [&] { return static_cast<double>(loss_fn(shadow.predict(x), nullptr)); },
                    opt);
}

}  // namespace cegzsl
