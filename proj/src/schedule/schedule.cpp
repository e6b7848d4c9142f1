#include "schedule/schedule.hpp"

#include <string>

namespace dynacl {

void SchedulePlan::validate() const {
  if (total_epochs < 1)
    throw ConfigError("schedule: total_epochs must be positive, got " +
                      std::to_string(total_epochs));
  if (decay_period < 1 || decay_period > total_epochs)
    throw ConfigError("schedule: decay_period must lie in [1, total_epochs], got " +
                      std::to_string(decay_period));
  if (reweighting_rate < 0.0 || reweighting_rate > 1.0)
    throw ConfigError("schedule: reweighting_rate must lie in [0, 1], got " +
                      std::to_string(reweighting_rate));
  if (kind == ScheduleKind::constant &&
      (constant_strength < 0.0 || constant_strength > 1.0))
    throw ConfigError("schedule: constant_strength must lie in [0, 1]");
}

static void check_epoch(const SchedulePlan& plan, int t) {
  if (t < 0 || t >= plan.total_epochs)
    throw ContractError("schedule: epoch " + std::to_string(t) +
                        " outside [0, " + std::to_string(plan.total_epochs - 1) +
                        "]");
}

double strength_at(const SchedulePlan& plan, int t) {
  plan.validate();
  check_epoch(plan, t);
  if (plan.kind == ScheduleKind::constant) return plan.constant_strength;

  const int block = t / plan.decay_period;
  // Integer numerator, single division: table values like 50/1000 come out as
  // the correctly rounded double 0.05.
  double s = double(plan.total_epochs - block * plan.decay_period) /
             double(plan.total_epochs);
  if (plan.floor_to_zero_final_block &&
      block == (plan.total_epochs - 1) / plan.decay_period)
    s = 0.0;
  if (plan.strength_threshold >= 0.0 && s < plan.strength_threshold)
    s = plan.strength_threshold;
  return s;
}

double weight_at(const SchedulePlan& plan, int t) {
  return plan.reweighting_rate * (1.0 - strength_at(plan, t));
}

std::pair<double, double> loss_coefficients(const SchedulePlan& plan, int t) {
  const double clean = 1.0 - weight_at(plan, t);
  return {clean, 2.0 - clean};
}

}  // namespace dynacl
