#include "hirs/tape.hpp"

#include <cmath>

namespace hirs {

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("scalar: expected 1x1, got " + shape_str(v));
  return v(0, 0);
}

Var Tape::constant(Tensor value) { return record("constant", std::move(value), {}, nullptr); }

Var Tape::scalar(double v) {
  Tensor t(1, 1);
  t(0, 0) = v;
  return constant(std::move(t));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  Parameter* target = &p;
  n.fn = [target](Tape&, const Tensor& g) { target->grad += g; };
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward fn) {
  if (!value.allFinite()) throw NonFiniteError(std::string(op) + ": non-finite value produced");
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  if (n.requires_grad) n.fn = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record_leaf(const char* op, Tensor value, Backward fn) {
  if (!value.allFinite()) throw NonFiniteError(std::string(op) + ": non-finite value produced");
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.fn = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape_str(loss.value()));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  Node& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad = Tensor::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.fn || n.grad.size() == 0) continue;
    n.fn(*this, n.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void require_same(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(op, a.value(), b.value());
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul", a.value(), b.value());
  Tape& t = a.tape();
  int ia = a.id(), ib = b.id();
  Tensor out = a.value() * b.value();
  return t.record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var operator+(Var a, Var b) {
  require_same("add", a, b);
  int ia = a.id(), ib = b.id();
  return a.tape().record("add", a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var operator-(Var a, Var b) {
  require_same("sub", a, b);
  int ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  int ia = a.id(), ib = b.id();
  Tensor out = a.value().cwiseProduct(b.value());
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row", a.value(), row.value());
  int ia = a.id(), ir = row.id();
  Tensor out = a.value().rowwise() + row.value().row(0);
  return a.tape().record("add_row", std::move(out), {a, row}, [ia, ir](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  int ia = a.id();
  return a.tape().record("scale", a.value() * s, {a}, [ia, s](Tape& t, const Tensor& g) { t.accumulate(ia, g * s); });
}

Var add_scalar(Var a, double s) {
  int ia = a.id();
  Tensor out = a.value().array() + s;
  return a.tape().record("add_scalar", std::move(out), {a}, [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

Var add_const(Var a, const Tensor& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("add_const", a.value(), c);
  int ia = a.id();
  return a.tape().record("add_const", a.value() + c, {a}, [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols", a.value(), b.value());
  int ia = a.id(), ib = b.id();
  Index ca = a.cols(), cb = b.cols();
  Tensor out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, const Tensor& g) {
    t.accumulate(ia, g.leftCols(ca));
    t.accumulate(ib, g.rightCols(cb));
  });
}

Var sum(Var a) {
  int ia = a.id();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record("sum", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    const Tensor& v = t.value(ia);
    t.accumulate(ia, Tensor::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const Index n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
  int ia = a.id();
  Tensor out = a.value().rowwise().sum();
  return a.tape().record("row_sum", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    const Index c = t.value(ia).cols();
    t.accumulate(ia, g.replicate(1, c));
  });
}

Var sigmoid(Var a) {
  int ia = a.id();
  Tensor out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  Tensor y = out;
  return a.tape().record("sigmoid", std::move(out), {a}, [ia, y = std::move(y)](Tape& t, const Tensor& g) {
    t.accumulate(ia, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var relu(Var a) {
  int ia = a.id();
  Tensor out = a.value().cwiseMax(0.0);
  return a.tape().record("relu", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var clamp(Var a, double lo, double hi) {
  int ia = a.id();
  Tensor out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record("clamp", std::move(out), {a}, [ia, lo, hi](Tape& t, const Tensor& g) {
    const auto& x = t.value(ia).array();
    t.accumulate(ia, ((x > lo) && (x < hi)).select(g.array(), 0.0).matrix());
  });
}

Var log(Var a) {
  int ia = a.id();
  Tensor out = a.value().array().log().matrix();
  return a.tape().record("log", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, (g.array() / t.value(ia).array()).matrix());
  });
}

Var dropout(Var a, double p, Mode mode, std::mt19937_64& rng) {
  if (mode == Mode::Eval || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Tensor mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
  int ia = a.id();
  Tensor out = a.value().cwiseProduct(mask);
  return a.tape().record("dropout", std::move(out), {a}, [ia, mask = std::move(mask)](Tape& t, const Tensor& g) {
    t.accumulate(ia, g.cwiseProduct(mask));
  });
}

Var bilinear(Var left, Var w, Var right) {
  if (left.rows() != right.rows() || w.rows() != left.cols() || w.cols() != right.cols()) {
    throw ShapeError("bilinear", left.value(), right.value());
  }
  int il = left.id(), iw = w.id(), ir = right.id();
  Tensor lw = left.value() * w.value();
  Tensor out = lw.cwiseProduct(right.value()).rowwise().sum();
  return left.tape().record("bilinear", std::move(out), {left, w, right}, [il, iw, ir](Tape& t, const Tensor& g) {
    const Tensor& l = t.value(il);
    const Tensor& r = t.value(ir);
    const Tensor& wv = t.value(iw);
    // g is Nx1; broadcast over columns.
    if (t.requires_grad(il)) t.accumulate(il, (r * wv.transpose()).array().colwise() * g.col(0).array());
    if (t.requires_grad(ir)) t.accumulate(ir, (l * wv).array().colwise() * g.col(0).array());
    if (t.requires_grad(iw)) {
      Tensor lg = l.array().colwise() * g.col(0).array();
      t.accumulate(iw, lg.transpose() * r);
    }
  });
}

Var bce_with_logits(Var logits, std::span<const double> targets) {
  const Tensor& x = logits.value();
  if (x.cols() != 1 || x.rows() != static_cast<Index>(targets.size()) || x.rows() == 0) {
    throw ShapeError("bce_with_logits: logits " + shape_str(x) + " vs " + std::to_string(targets.size()) + " targets");
  }
  std::vector<double> y(targets.begin(), targets.end());
  const Index n = x.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double v = x(i, 0);
    total += std::max(v, 0.0) - v * y[i] + std::log1p(std::exp(-std::abs(v)));
  }
  Tensor out(1, 1);
  out(0, 0) = total / static_cast<double>(n);
  int ix = logits.id();
  return logits.tape().record("bce_with_logits", std::move(out), {logits}, [ix, y = std::move(y)](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ix);
    const Index n = x.rows();
    Tensor d(n, 1);
    for (Index i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x(i, 0)));
      d(i, 0) = (s - y[i]) * g(0, 0) / static_cast<double>(n);
    }
    t.accumulate(ix, d);
  });
}

Var mse(Var pred, std::span<const double> targets) {
  const Tensor& x = pred.value();
  if (x.cols() != 1 || x.rows() != static_cast<Index>(targets.size()) || x.rows() == 0) {
    throw ShapeError("mse: predictions " + shape_str(x) + " vs " + std::to_string(targets.size()) + " targets");
  }
  Tensor y = Eigen::Map<const Tensor>(targets.data(), x.rows(), 1);
  int ix = pred.id();
  Tensor out(1, 1);
  out(0, 0) = (x - y).squaredNorm() / static_cast<double>(x.rows());
  return pred.tape().record("mse", std::move(out), {pred}, [ix, y = std::move(y)](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ix);
    t.accumulate(ix, (x - y) * (2.0 * g(0, 0) / static_cast<double>(x.rows())));
  });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

Var gather_rows(Var a, std::span<const Index> rows) {
  const Tensor& v = a.value();
  Tensor out(static_cast<Index>(rows.size()), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= v.rows()) throw ShapeError("gather_rows: row index out of range for " + shape_str(v));
    out.row(static_cast<Index>(i)) = v.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  int ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {a}, [ia, idx = std::move(idx)](Tape& t, const Tensor& g) {
    const Tensor& v = t.value(ia);
    Tensor d = Tensor::Zero(v.rows(), v.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Index>(i));
    t.accumulate(ia, d);
  });
}

Var gather_rows(Tape& tape, Parameter& table, std::span<const Index> rows) {
  Tensor out(static_cast<Index>(rows.size()), table.value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.value.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(rows[i]) + " outside table " + table.name + " " +
                       shape_str(table.value));
    }
    out.row(static_cast<Index>(i)) = table.value.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  Parameter* p = &table;
  return tape.record_leaf("gather_rows", std::move(out), [p, idx = std::move(idx)](Tape&, const Tensor& g) {
    for (std::size_t i = 0; i < idx.size(); ++i) p->grad.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

Var scale_rows(Var a, std::span<const double> w) {
  if (static_cast<Index>(w.size()) != a.rows()) {
    throw ShapeError("scale_rows: " + shape_str(a.value()) + " vs " + std::to_string(w.size()) + " weights");
  }
  Eigen::Map<const VectorX<double>> wv(w.data(), a.rows());
  VectorX<double> wc = wv;
  int ia = a.id();
  Tensor out = a.value().array().colwise() * wc.array();
  return a.tape().record("scale_rows", std::move(out), {a}, [ia, wc = std::move(wc)](Tape& t, const Tensor& g) {
    t.accumulate(ia, g.array().colwise() * wc.array());
  });
}

Var div_rows(Var a, Var denom) {
  if (denom.cols() != 1 || denom.rows() != a.rows()) throw ShapeError("div_rows", a.value(), denom.value());
  int ia = a.id(), id = denom.id();
  Tensor out = a.value().array().colwise() / denom.value().col(0).array();
  return a.tape().record("div_rows", std::move(out), {a, denom}, [ia, id](Tape& t, const Tensor& g) {
    const auto d = t.value(id).col(0).array();
    if (t.requires_grad(ia)) t.accumulate(ia, g.array().colwise() / d);
    if (t.requires_grad(id)) {
      Tensor ga = g.cwiseProduct(t.value(ia)).rowwise().sum();
      t.accumulate(id, (-ga.col(0).array() / d.square()).matrix());
    }
  });
}

namespace {

void require_segments(const char* op, Var a, const Segments& seg) {
  if (seg.total() != a.rows()) {
    throw ShapeError(std::string(op) + ": segments cover " + std::to_string(seg.total()) + " rows, input is " +
                     shape_str(a.value()));
  }
}

}  // namespace

Var segment_sum(Var a, const Segments& seg) {
  require_segments("segment_sum", a, seg);
  const Tensor& v = a.value();
  Tensor out(seg.count(), v.cols());
  for (Index n = 0; n < seg.count(); ++n) out.row(n) = v.middleRows(seg.begin(n), seg.size(n)).colwise().sum();
  int ia = a.id();
  return a.tape().record("segment_sum", std::move(out), {a}, [ia, seg](Tape& t, const Tensor& g) {
    const Tensor& v = t.value(ia);
    Tensor d(v.rows(), v.cols());
    for (Index n = 0; n < seg.count(); ++n) d.middleRows(seg.begin(n), seg.size(n)).rowwise() = g.row(n);
    t.accumulate(ia, d);
  });
}

Var segment_mean(Var a, const Segments& seg) {
  require_segments("segment_mean", a, seg);
  std::vector<double> inv(static_cast<std::size_t>(seg.count()));
  for (Index n = 0; n < seg.count(); ++n) {
    if (seg.size(n) == 0) throw ShapeError("segment_mean: empty segment");
    inv[static_cast<std::size_t>(n)] = 1.0 / static_cast<double>(seg.size(n));
  }
  return scale_rows(segment_sum(a, seg), inv);
}

Var expand_segments(Var a, const Segments& seg) {
  if (a.rows() != seg.count()) {
    throw ShapeError("expand_segments: " + std::to_string(seg.count()) + " segments vs " + shape_str(a.value()));
  }
  const Tensor& v = a.value();
  Tensor out(seg.total(), v.cols());
  for (Index n = 0; n < seg.count(); ++n) out.middleRows(seg.begin(n), seg.size(n)).rowwise() = v.row(n);
  int ia = a.id();
  return a.tape().record("expand_segments", std::move(out), {a}, [ia, seg](Tape& t, const Tensor& g) {
    const Tensor& v = t.value(ia);
    Tensor d(v.rows(), v.cols());
    for (Index n = 0; n < seg.count(); ++n) d.row(n) = g.middleRows(seg.begin(n), seg.size(n)).colwise().sum();
    t.accumulate(ia, d);
  });
}

Var segment_tmatmul(Var g, Var x, const Segments& seg) {
  require_segments("segment_tmatmul", g, seg);
  if (g.rows() != x.rows()) throw ShapeError("segment_tmatmul", g.value(), x.value());
  const Index k = g.cols(), c = x.cols();
  Tensor out(seg.count() * k, c);
  for (Index n = 0; n < seg.count(); ++n) {
    out.middleRows(n * k, k).noalias() =
        g.value().middleRows(seg.begin(n), seg.size(n)).transpose() * x.value().middleRows(seg.begin(n), seg.size(n));
  }
  int ig = g.id(), ix = x.id();
  return g.tape().record("segment_tmatmul", std::move(out), {g, x}, [ig, ix, seg, k](Tape& t, const Tensor& go) {
    const Tensor& gv = t.value(ig);
    const Tensor& xv = t.value(ix);
    if (t.requires_grad(ig)) {
      Tensor d(gv.rows(), gv.cols());
      for (Index n = 0; n < seg.count(); ++n) {
        d.middleRows(seg.begin(n), seg.size(n)).noalias() =
            xv.middleRows(seg.begin(n), seg.size(n)) * go.middleRows(n * k, k).transpose();
      }
      t.accumulate(ig, d);
    }
    if (t.requires_grad(ix)) {
      Tensor d(xv.rows(), xv.cols());
      for (Index n = 0; n < seg.count(); ++n) {
        d.middleRows(seg.begin(n), seg.size(n)).noalias() =
            gv.middleRows(seg.begin(n), seg.size(n)) * go.middleRows(n * k, k);
      }
      t.accumulate(ix, d);
    }
  });
}

Var segment_matmul(Var g, Var h, const Segments& seg) {
  require_segments("segment_matmul", g, seg);
  const Index k = g.cols(), c = h.cols();
  if (h.rows() != seg.count() * k) throw ShapeError("segment_matmul", g.value(), h.value());
  Tensor out(seg.total(), c);
  for (Index n = 0; n < seg.count(); ++n) {
    out.middleRows(seg.begin(n), seg.size(n)).noalias() =
        g.value().middleRows(seg.begin(n), seg.size(n)) * h.value().middleRows(n * k, k);
  }
  int ig = g.id(), ih = h.id();
  return g.tape().record("segment_matmul", std::move(out), {g, h}, [ig, ih, seg, k](Tape& t, const Tensor& go) {
    const Tensor& gv = t.value(ig);
    const Tensor& hv = t.value(ih);
    if (t.requires_grad(ig)) {
      Tensor d(gv.rows(), gv.cols());
      for (Index n = 0; n < seg.count(); ++n) {
        d.middleRows(seg.begin(n), seg.size(n)).noalias() =
            go.middleRows(seg.begin(n), seg.size(n)) * hv.middleRows(n * k, k).transpose();
      }
      t.accumulate(ig, d);
    }
    if (t.requires_grad(ih)) {
      Tensor d(hv.rows(), hv.cols());
      for (Index n = 0; n < seg.count(); ++n) {
        d.middleRows(n * k, k).noalias() =
            gv.middleRows(seg.begin(n), seg.size(n)).transpose() * go.middleRows(seg.begin(n), seg.size(n));
      }
      t.accumulate(ih, d);
    }
  });
}

}  // namespace hirs
