#pragma once

#include "hirs/tape.hpp"

#include <vector>

namespace hirs {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter.
struct AdamState {
  Tensor first;
  Tensor second;
  long step = 0;
  AdamOptions opt;

  AdamState() = default;
  AdamState(const Parameter& p, AdamOptions o)
      : first(Tensor::Zero(p.value.rows(), p.value.cols())),
        second(Tensor::Zero(p.value.rows(), p.value.cols())),
        opt(o) {}
};

/// Bias-corrected Adam update of `p` from `p.grad`, in place.
void adam_step(Parameter& p, AdamState& state);

/// Adam over a fixed list of parameters. Does not own the parameters.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamOptions opt);

  void zero_grad();
  void step();

  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }
  const AdamOptions& options() const { return opt_; }
  void set_lr(double lr);

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> states_;
  AdamOptions opt_;
};

}  // namespace hirs
