#include "hirs/adam.hpp"

#include <cmath>

namespace hirs {

void adam_step(Parameter& p, AdamState& s) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    throw ShapeError("adam_step(" + p.name + ")", p.value, p.grad);
  }
  if (s.first.rows() != p.value.rows() || s.first.cols() != p.value.cols()) {
    throw ShapeError("adam_step(" + p.name + ") moments", p.value, s.first);
  }
  const AdamOptions& o = s.opt;
  ++s.step;
  s.first = o.beta1 * s.first + (1.0 - o.beta1) * p.grad;
  s.second = o.beta2 * s.second + (1.0 - o.beta2) * p.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.step));
  p.value.array() -= o.lr * (s.first.array() / c1) / ((s.second.array() / c2).sqrt() + o.eps);
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
  states_.reserve(params_.size());
  for (Parameter* p : params_) states_.emplace_back(*p, opt_);
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i]);
}

void Adam::set_lr(double lr) {
  opt_.lr = lr;
  for (AdamState& s : states_) s.opt.lr = lr;
}

}  // namespace hirs
