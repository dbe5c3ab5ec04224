#pragma once

#include <functional>
#include <vector>

#include "udkit/nn/params.hpp"

namespace udkit::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = false;
};

// Adam / AMSGrad over a ParamCollection. Optimizer state lives in the params
// themselves (m, v, vhat, steps) so snapshots stay cheap.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamCollection& pc);
  void reset_state(ParamCollection& pc);

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  bool amsgrad() const { return cfg_.amsgrad; }
  void set_amsgrad(bool on) { cfg_.amsgrad = on; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
};

// Two-phase training schedule: plain Adam until the dev metric first
// decreases, then AMSGrad until `patience` steps pass without a new best.
// The metric is higher-better. Optimizer state is reset at the phase switch.
struct ScheduleConfig {
  AdamConfig adam;              // phase-1 settings
  int max_steps = 20000;
  int eval_interval = 100;      // dev eval cadence, in steps
  int eval_start = 0;           // evals begin after this many steps
  int patience = 3000;          // steps since best eval before stopping
  bool switch_to_amsgrad = true;
  double lr_decay_on_drop = 1.0;  // lr multiplier applied on each deterioration
};

struct ScheduleEvent {
  int step = 0;
  double metric = 0.0;
  int phase = 1;  // phase in effect after processing this eval
  double lr = 0.0;
};

struct ScheduleResult {
  double best_metric = 0.0;
  int best_step = 0;
  int steps_run = 0;
  std::vector<ScheduleEvent> log;
};

// train_step must accumulate gradients for one step (zero_grad is done
// here); dev_eval returns the current dev metric. On return the collection
// holds the best parameters seen.
ScheduleResult run_schedule(ParamCollection& pc, const ScheduleConfig& cfg,
                            const std::function<void(int)>& train_step,
                            const std::function<double()>& dev_eval);

}  // namespace udkit::nn
