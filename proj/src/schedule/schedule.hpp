#pragma once

#include <utility>

#include "core/errors.hpp"

namespace dynacl {

enum class ScheduleKind {
  piecewise_decay,  // s(t) = 1 - floor(t/K) * K/T
  constant,         // s(t) = s0 for every epoch
};

// Augmentation-strength and loss-reweighting schedule. Pure value type; all
// queries are thread-safe.
struct SchedulePlan {
  int total_epochs = 0;        // T
  int decay_period = 1;        // K in [1, T]
  double reweighting_rate = 0; // lambda in [0, 1]
  ScheduleKind kind = ScheduleKind::piecewise_decay;
  double constant_strength = 1.0;  // used when kind == constant

  // The literal decay formula bottoms out at K/T, never 0. With this flag the
  // final block is forced to exactly 0 instead.
  bool floor_to_zero_final_block = false;

  // Experimental: clamp the decayed strength from below at this value
  // (constant-after-threshold). Negative disables.
  double strength_threshold = -1.0;

  void validate() const;
};

// s(t); piecewise constant over blocks of K epochs, non-increasing in t.
double strength_at(const SchedulePlan& plan, int t);

// w(t) = lambda * (1 - s(t)); non-decreasing in t.
double weight_at(const SchedulePlan& plan, int t);

// (1 - w(t), 1 + w(t)). The adversarial coefficient is computed as the exact
// complement so the pair always sums to 2 bitwise.
std::pair<double, double> loss_coefficients(const SchedulePlan& plan, int t);

}  // namespace dynacl
