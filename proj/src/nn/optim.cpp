#include "udkit/nn/optim.hpp"

#include <cmath>
#include <limits>

namespace udkit::nn {

void Adam::step(ParamCollection& pc) {
  for (Param* p : pc.all()) {
    if (!p->trainable) continue;
    if (p->m.size() == 0) {
      p->m = Mat::Zero(p->value.rows(), p->value.cols());
      p->v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    if (cfg_.amsgrad && p->vhat.size() == 0)
      p->vhat = Mat::Zero(p->value.rows(), p->value.cols());
    double t = static_cast<double>(++p->steps);
    p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
    p->v = cfg_.beta2 * p->v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
    double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    const Mat& second = cfg_.amsgrad ? (p->vhat = p->vhat.cwiseMax(p->v)) : p->v;
    p->value.array() -= cfg_.lr * (p->m.array() / bc1) /
                        ((second.array() / bc2).sqrt() + cfg_.eps);
  }
}

void Adam::reset_state(ParamCollection& pc) {
  for (Param* p : pc.all()) {
    p->m.resize(0, 0);
    p->v.resize(0, 0);
    p->vhat.resize(0, 0);
    p->steps = 0;
  }
}

ScheduleResult run_schedule(ParamCollection& pc, const ScheduleConfig& cfg,
                            const std::function<void(int)>& train_step,
                            const std::function<double()>& dev_eval) {
  Adam opt(cfg.adam);
  ScheduleResult res;
  res.best_metric = -std::numeric_limits<double>::infinity();
  res.best_step = 0;
  std::vector<Mat> best;
  double prev_metric = -std::numeric_limits<double>::infinity();
  int phase = 1;

  int step = 0;
  while (step < cfg.max_steps) {
    ++step;
    pc.zero_grad();
    train_step(step);
    opt.step(pc);

    if (step < cfg.eval_start || step % cfg.eval_interval != 0) continue;
    double metric = dev_eval();
    if (metric < prev_metric) {
      if (phase == 1 && cfg.switch_to_amsgrad) {
        phase = 2;
        opt.set_amsgrad(true);
        opt.reset_state(pc);
      }
      opt.set_lr(opt.lr() * cfg.lr_decay_on_drop);
    }
    res.log.push_back({step, metric, phase, opt.lr()});
    if (metric > res.best_metric) {
      res.best_metric = metric;
      res.best_step = step;
      best = pc.snapshot_values();
    }
    prev_metric = metric;
    if (step - res.best_step >= cfg.patience) break;
  }
  res.steps_run = step;
  if (!best.empty()) pc.restore_values(best);
  return res;
}

}  // namespace udkit::nn
