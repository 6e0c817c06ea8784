#include "hirs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace hirs {

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_error << " coords=" << coords_checked;
  if (!worst_param.empty()) {
    os << " worst=" << worst_param << "[" << worst_row << "," << worst_col << "] analytic=" << worst_analytic
       << " numeric=" << worst_numeric;
  }
  return os.str();
}

namespace {

double eval_loss(const LossBuilder& loss) {
  Tape tape;
  return loss(tape).scalar();
}

}  // namespace

GradcheckReport gradcheck(const LossBuilder& loss, const std::vector<Parameter*>& params,
                          const GradcheckOptions& opt) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradcheckReport report;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    std::vector<Index> coords(static_cast<std::size_t>(p.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (opt.max_coords_per_param > 0 && p.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(opt.max_coords_per_param));
    }
    for (Index c : coords) {
      double& x = p.value.data()[c];
      const double saved = x;
      x = saved + opt.step;
      const double up = eval_loss(loss);
      x = saved - opt.step;
      const double down = eval_loss(loss);
      x = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[pi].data()[c];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      ++report.coords_checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_row = c / p.value.cols();
        report.worst_col = c % p.value.cols();
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace hirs
