#include "cegzsl/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace cegzsl {

namespace {

struct Probed {
  double value;
  std::vector<std::int8_t> signs;
};

Probed evaluate(const std::function<double()>& loss) {
  KinkProbe probe;
  double v;
  {
    ScopedKinkProbe scope(probe);
    v = loss();
  }
  return {v, std::move(probe.signs)};
}

}  // namespace

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

void GradCheckReport::merge(const GradCheckReport& other) {
  checked += other.checked;
  flagged += other.flagged;
  if (other.max_rel_error > max_rel_error || (worst_block.empty() && !other.worst_block.empty())) {
    max_rel_error = std::max(max_rel_error, other.max_rel_error);
    worst_block = other.worst_block;
    worst_index = other.worst_index;
    worst_analytic = other.worst_analytic;
    worst_numeric = other.worst_numeric;
  }
}

GradCheckReport grad_check(std::span<const GradBlock> blocks,
                           const std::function<double()>& loss,
                           const GradCheckOptions& opt) {
  GradCheckReport report;
  const Probed base = evaluate(loss);
  if (!std::isfinite(base.value)) throw NumericsError("gradient check loss is not finite");

  for (const auto& block : blocks) {
    auto values = block.param->value.values();
    const auto grads = block.param->grad.values();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (opt.max_entries_per_block > 0 && n > opt.max_entries_per_block) {
      stride = (n + opt.max_entries_per_block - 1) / opt.max_entries_per_block;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        Probed p = evaluate(loss);
        values[i] = saved;
        return p;
      };
      const Probed plus = at(opt.eps);
      const Probed minus = at(-opt.eps);
      bool straddles = plus.signs != base.signs || minus.signs != base.signs;
      double numeric = (plus.value - minus.value) / (2.0 * opt.eps);
      if (opt.five_point && !straddles) {
        const Probed plus2 = at(2.0 * opt.eps);
        const Probed minus2 = at(-2.0 * opt.eps);
        straddles = plus2.signs != base.signs || minus2.signs != base.signs;
        numeric = (8.0 * (plus.value - minus.value) - (plus2.value - minus2.value)) / (12.0 * opt.eps);
      }
      if (straddles) {
        ++report.flagged;
        continue;
      }
      const double err = relative_error(grads[i], numeric, opt.abs_floor);
      ++report.checked;
      if (err > report.max_rel_error || report.worst_block.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_block = block.name;
        report.worst_index = i;
        report.worst_analytic = grads[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace cegzsl
