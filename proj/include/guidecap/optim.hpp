#pragma once

#include <vector>

#include "guidecap/graph.hpp"

namespace guidecap::numeric {

// Step-decay schedule: lr(epoch) = base * factor^floor(epoch / period).
// Epochs are 0-based, so the first decay applies at epoch == period.
struct LrSchedule {
  double base = 1e-4;
  double factor = 0.1;
  int period = 20;

  double lr_at(int epoch) const;
};

// Bias-corrected Adam over a fixed parameter list. Slot order is bound at
// init() and must match every subsequent step() call.
struct AdamState {
  LrSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<Array> m;
  std::vector<Array> v;

  void init(const std::vector<Param*>& params);
};

// One Adam update from Param::grad at the given epoch's learning rate.
void adam_step(AdamState& state, const std::vector<Param*>& params, int epoch);

struct SgdState {
  LrSchedule schedule;
};

void sgd_step(const SgdState& state, const std::vector<Param*>& params, int epoch);

// Global-norm gradient clipping across the whole parameter list; returns the
// pre-clip norm. max_norm <= 0 disables clipping.
double clip_global_norm(const std::vector<Param*>& params, double max_norm);

}  // namespace guidecap::numeric
