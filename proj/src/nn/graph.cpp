#include "udkit/nn/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace udkit::nn {

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

Graph* same_graph(Expr a, Expr b) {
  if (a.g != b.g) throw std::logic_error("expressions belong to different graphs");
  return a.g;
}

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

}  // namespace

const Mat& Expr::val() const { return g->value(i); }
int Expr::rows() const { return static_cast<int>(val().rows()); }
int Expr::cols() const { return static_cast<int>(val().cols()); }

int Graph::push(Mat value, bool needs_grad, std::function<void(Graph&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Graph::gbuf(int i) {
  Node& n = nodes_[static_cast<size_t>(i)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Expr Graph::constant(Mat m) { return Expr{this, push(std::move(m), false, nullptr)}; }

Expr Graph::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Expr Graph::input(Mat m) { return Expr{this, push(std::move(m), true, nullptr)}; }

Expr Graph::param(Param& p) {
  for (const auto& [param, idx] : param_leaves_)
    if (param == &p) return Expr{this, idx};
  int idx = push(p.value, p.trainable, nullptr);
  param_leaves_.emplace_back(&p, idx);
  return Expr{this, idx};
}

Expr Graph::lookup(Param& table, const std::vector<int>& ids) {
  Mat out(table.value.cols(), static_cast<Eigen::Index>(ids.size()));
  for (size_t k = 0; k < ids.size(); ++k) {
    int id = ids[k];
    if (id < 0 || id >= table.rows())
      throw std::out_of_range("lookup index " + std::to_string(id) + " out of range for " +
                              table.name);
    out.col(static_cast<Eigen::Index>(k)) = table.value.row(id).transpose();
  }
  int idx = push(std::move(out), table.trainable, nullptr);
  lookup_leaves_.push_back({&table, idx, ids});
  return Expr{this, idx};
}

const Mat& Graph::grad_of(const Expr& e) const {
  return nodes_[static_cast<size_t>(e.i)].grad;
}

void Graph::backward(const Expr& loss) {
  if (backward_done_) throw std::logic_error("backward already run on this graph");
  backward_done_ = true;
  Node& ln = nodes_[static_cast<size_t>(loss.i)];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("backward target must be 1x1");
  gbuf(loss.i)(0, 0) = 1.0;
  for (int i = loss.i; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, i);
  }
  for (const auto& [param, idx] : param_leaves_) {
    const Node& n = nodes_[static_cast<size_t>(idx)];
    if (n.grad.size() != 0 && param->trainable) param->grad += n.grad;
  }
  for (const auto& leaf : lookup_leaves_) {
    const Node& n = nodes_[static_cast<size_t>(leaf.node)];
    if (n.grad.size() == 0 || !leaf.table->trainable) continue;
    for (size_t k = 0; k < leaf.ids.size(); ++k)
      leaf.table->grad.row(leaf.ids[k]) +=
          n.grad.col(static_cast<Eigen::Index>(k)).transpose();
  }
}

// --- ops ---

Expr matmul(Expr a, Expr b) {
  Graph* g = same_graph(a, b);
  if (a.val().cols() != b.val().rows())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  Mat y = a.val() * b.val();
  bool ng = g->wants(a.i) || g->wants(b.i);
  int ai = a.i, bi = b.i;
  return Expr{g, g->push(std::move(y), ng, [ai, bi](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                if (gr.wants(ai)) gr.gbuf(ai).noalias() += gy * gr.value(bi).transpose();
                if (gr.wants(bi)) gr.gbuf(bi).noalias() += gr.value(ai).transpose() * gy;
              })};
}

Expr transpose(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().transpose(), g->wants(ai), [ai](Graph& gr, int self) {
                gr.gbuf(ai) += gr.node(self).grad.transpose();
              })};
}

Expr add(Expr a, Expr b) {
  Graph* g = same_graph(a, b);
  check_same_shape(a.val(), b.val(), "add");
  int ai = a.i, bi = b.i;
  return Expr{g, g->push(a.val() + b.val(), g->wants(ai) || g->wants(bi),
                         [ai, bi](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           if (gr.wants(ai)) gr.gbuf(ai) += gy;
                           if (gr.wants(bi)) gr.gbuf(bi) += gy;
                         })};
}

Expr sub(Expr a, Expr b) {
  Graph* g = same_graph(a, b);
  check_same_shape(a.val(), b.val(), "sub");
  int ai = a.i, bi = b.i;
  return Expr{g, g->push(a.val() - b.val(), g->wants(ai) || g->wants(bi),
                         [ai, bi](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           if (gr.wants(ai)) gr.gbuf(ai) += gy;
                           if (gr.wants(bi)) gr.gbuf(bi) -= gy;
                         })};
}

Expr neg(Expr a) { return mul_scalar(a, -1.0); }

Expr add_colvec(Expr a, Expr bias) {
  Graph* g = same_graph(a, bias);
  if (bias.val().cols() != 1 || bias.val().rows() != a.val().rows())
    throw std::invalid_argument("add_colvec: bias must be (rows(a) x 1)");
  Mat y = a.val().colwise() + Eigen::VectorXd(bias.val().col(0));
  int ai = a.i, bi = bias.i;
  return Expr{g, g->push(std::move(y), g->wants(ai) || g->wants(bi),
                         [ai, bi](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           if (gr.wants(ai)) gr.gbuf(ai) += gy;
                           if (gr.wants(bi)) gr.gbuf(bi) += gy.rowwise().sum();
                         })};
}

Expr cmul(Expr a, Expr b) {
  Graph* g = same_graph(a, b);
  check_same_shape(a.val(), b.val(), "cmul");
  int ai = a.i, bi = b.i;
  return Expr{g, g->push(a.val().cwiseProduct(b.val()), g->wants(ai) || g->wants(bi),
                         [ai, bi](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           if (gr.wants(ai)) gr.gbuf(ai) += gy.cwiseProduct(gr.value(bi));
                           if (gr.wants(bi)) gr.gbuf(bi) += gy.cwiseProduct(gr.value(ai));
                         })};
}

Expr scale_cols(Expr a, Expr s) {
  Graph* g = same_graph(a, s);
  if (s.val().rows() != 1 || s.val().cols() != a.val().cols())
    throw std::invalid_argument("scale_cols: scale must be (1 x cols(a))");
  Mat y = a.val().array().rowwise() * s.val().row(0).array();
  int ai = a.i, si = s.i;
  return Expr{g, g->push(std::move(y), g->wants(ai) || g->wants(si),
                         [ai, si](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           if (gr.wants(ai))
                             gr.gbuf(ai).array() +=
                                 gy.array().rowwise() * gr.value(si).row(0).array();
                           if (gr.wants(si)) {
                             Mat& gs = gr.gbuf(si);
                             gs.row(0) += (gy.cwiseProduct(gr.value(ai))).colwise().sum();
                           }
                         })};
}

Expr mul_scalar(Expr a, double c) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val() * c, g->wants(ai), [ai, c](Graph& gr, int self) {
                gr.gbuf(ai) += gr.node(self).grad * c;
              })};
}

Expr add_scalar(Expr a, double c) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().array() + c, g->wants(ai), [ai](Graph& gr, int self) {
                gr.gbuf(ai) += gr.node(self).grad;
              })};
}

Expr concat_rows(const std::vector<Expr>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
  Graph* g = xs[0].g;
  Eigen::Index total = 0;
  bool ng = false;
  for (const Expr& x : xs) {
    same_graph(xs[0], x);
    if (x.val().cols() != xs[0].val().cols())
      throw std::invalid_argument("concat_rows: column mismatch");
    total += x.val().rows();
    ng = ng || g->wants(x.i);
  }
  Mat y(total, xs[0].val().cols());
  std::vector<int> idx;
  std::vector<Eigen::Index> sizes;
  Eigen::Index r = 0;
  for (const Expr& x : xs) {
    y.middleRows(r, x.val().rows()) = x.val();
    idx.push_back(x.i);
    sizes.push_back(x.val().rows());
    r += x.val().rows();
  }
  return Expr{g, g->push(std::move(y), ng, [idx, sizes](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                Eigen::Index r0 = 0;
                for (size_t k = 0; k < idx.size(); ++k) {
                  if (gr.wants(idx[k])) gr.gbuf(idx[k]) += gy.middleRows(r0, sizes[k]);
                  r0 += sizes[k];
                }
              })};
}

Expr concat_cols(const std::vector<Expr>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty list");
  Graph* g = xs[0].g;
  Eigen::Index total = 0;
  bool ng = false;
  for (const Expr& x : xs) {
    same_graph(xs[0], x);
    if (x.val().rows() != xs[0].val().rows())
      throw std::invalid_argument("concat_cols: row mismatch");
    total += x.val().cols();
    ng = ng || g->wants(x.i);
  }
  Mat y(xs[0].val().rows(), total);
  std::vector<int> idx;
  std::vector<Eigen::Index> sizes;
  Eigen::Index c = 0;
  for (const Expr& x : xs) {
    y.middleCols(c, x.val().cols()) = x.val();
    idx.push_back(x.i);
    sizes.push_back(x.val().cols());
    c += x.val().cols();
  }
  return Expr{g, g->push(std::move(y), ng, [idx, sizes](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                Eigen::Index c0 = 0;
                for (size_t k = 0; k < idx.size(); ++k) {
                  if (gr.wants(idx[k])) gr.gbuf(idx[k]) += gy.middleCols(c0, sizes[k]);
                  c0 += sizes[k];
                }
              })};
}

Expr rows(Expr a, int r0, int count) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().middleRows(r0, count), g->wants(ai),
                         [ai, r0, count](Graph& gr, int self) {
                           gr.gbuf(ai).middleRows(r0, count) += gr.node(self).grad;
                         })};
}

Expr colrange(Expr a, int c0, int count) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().middleCols(c0, count), g->wants(ai),
                         [ai, c0, count](Graph& gr, int self) {
                           gr.gbuf(ai).middleCols(c0, count) += gr.node(self).grad;
                         })};
}

Expr reshape(Expr a, int r, int c) {
  Graph* g = a.g;
  if (a.val().size() != static_cast<Eigen::Index>(r) * c)
    throw std::invalid_argument("reshape: size mismatch");
  Mat y = Eigen::Map<const Mat>(a.val().data(), r, c);
  int ai = a.i;
  return Expr{g, g->push(std::move(y), g->wants(ai), [ai](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                Mat& ga = gr.gbuf(ai);
                ga += Eigen::Map<const Mat>(gy.data(), ga.rows(), ga.cols());
              })};
}

Expr tanh_(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().array().tanh(), g->wants(ai), [ai](Graph& gr, int self) {
                const Graph::Node& n = gr.node(self);
                gr.gbuf(ai).array() +=
                    n.grad.array() * (1.0 - n.value.array() * n.value.array());
              })};
}

Expr sigmoid(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  Mat y = a.val().unaryExpr([](double x) { return sigmoid_scalar(x); });
  return Expr{g, g->push(std::move(y), g->wants(ai), [ai](Graph& gr, int self) {
                const Graph::Node& n = gr.node(self);
                gr.gbuf(ai).array() +=
                    n.grad.array() * n.value.array() * (1.0 - n.value.array());
              })};
}

Expr relu(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().cwiseMax(0.0), g->wants(ai), [ai](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                gr.gbuf(ai).array() +=
                    gy.array() * (gr.value(ai).array() > 0.0).cast<double>();
              })};
}

Expr softplus(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  Mat y = a.val().unaryExpr([](double x) { return softplus_scalar(x); });
  return Expr{g, g->push(std::move(y), g->wants(ai), [ai](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                gr.gbuf(ai).array() +=
                    gy.array() *
                    gr.value(ai).unaryExpr([](double x) { return sigmoid_scalar(x); }).array();
              })};
}

Expr exp_(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().array().exp(), g->wants(ai), [ai](Graph& gr, int self) {
                const Graph::Node& n = gr.node(self);
                gr.gbuf(ai).array() += n.grad.array() * n.value.array();
              })};
}

Expr log_(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().array().log(), g->wants(ai), [ai](Graph& gr, int self) {
                gr.gbuf(ai).array() += gr.node(self).grad.array() / gr.value(ai).array();
              })};
}

Expr square(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  return Expr{g, g->push(a.val().array().square(), g->wants(ai), [ai](Graph& gr, int self) {
                gr.gbuf(ai).array() +=
                    2.0 * gr.node(self).grad.array() * gr.value(ai).array();
              })};
}

Expr sum_all(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  Mat y(1, 1);
  y(0, 0) = a.val().sum();
  return Expr{g, g->push(std::move(y), g->wants(ai), [ai](Graph& gr, int self) {
                gr.gbuf(ai).array() += gr.node(self).grad(0, 0);
              })};
}

Expr sum_list(const std::vector<Expr>& xs) {
  if (xs.empty()) throw std::invalid_argument("sum_list: empty list");
  Expr acc = xs[0];
  for (size_t k = 1; k < xs.size(); ++k) acc = add(acc, xs[k]);
  return acc;
}

Expr softmax_cols(Expr a) {
  Graph* g = a.g;
  int ai = a.i;
  Mat y = a.val();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    Eigen::VectorXd c = y.col(j);
    double mx = c.maxCoeff();
    Eigen::VectorXd e = (c.array() - mx).exp();
    y.col(j) = e / e.sum();
  }
  return Expr{g, g->push(std::move(y), g->wants(ai), [ai](Graph& gr, int self) {
                const Graph::Node& n = gr.node(self);
                Mat& ga = gr.gbuf(ai);
                for (Eigen::Index j = 0; j < n.value.cols(); ++j) {
                  double dot = n.value.col(j).dot(n.grad.col(j));
                  ga.col(j).array() +=
                      n.value.col(j).array() * (n.grad.col(j).array() - dot);
                }
              })};
}

Expr nll_cols(Expr a, const std::vector<int>& targets) {
  Graph* g = a.g;
  int ai = a.i;
  const Mat& v = a.val();
  if (static_cast<Eigen::Index>(targets.size()) != v.cols())
    throw std::invalid_argument("nll_cols: one target per column required");
  Mat probs(v.rows(), v.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    int t = targets[static_cast<size_t>(j)];
    if (t < 0 || t >= v.rows()) throw std::out_of_range("nll_cols: target out of range");
    double mx = v.col(j).maxCoeff();
    Eigen::VectorXd e = (v.col(j).array() - mx).exp();
    double z = e.sum();
    probs.col(j) = e / z;
    total += std::log(z) + mx - v(t, j);
  }
  Mat y(1, 1);
  y(0, 0) = total;
  return Expr{g, g->push(std::move(y), g->wants(ai),
                         [ai, targets, probs](Graph& gr, int self) {
                           double gy = gr.node(self).grad(0, 0);
                           Mat& ga = gr.gbuf(ai);
                           ga += gy * probs;
                           for (Eigen::Index j = 0; j < ga.cols(); ++j)
                             ga(targets[static_cast<size_t>(j)], j) -= gy;
                         })};
}

Expr bce_logits(Expr scores, Mat targets) {
  Graph* g = scores.g;
  int si = scores.i;
  check_same_shape(scores.val(), targets, "bce_logits");
  Mat y = scores.val().unaryExpr([](double x) { return softplus_scalar(x); }) -
          scores.val().cwiseProduct(targets);
  return Expr{g, g->push(std::move(y), g->wants(si), [si, targets](Graph& gr, int self) {
                const Mat& gy = gr.node(self).grad;
                gr.gbuf(si).array() +=
                    gy.array() *
                    (gr.value(si).unaryExpr([](double x) { return sigmoid_scalar(x); }) -
                     targets)
                        .array();
              })};
}

Expr conv1d(Expr x, Expr w, int width) {
  Graph* g = same_graph(x, w);
  if (width % 2 != 1) throw std::invalid_argument("conv1d: width must be odd");
  Eigen::Index d = x.val().rows();
  Eigen::Index n = x.val().cols();
  if (w.val().cols() != d * width)
    throw std::invalid_argument("conv1d: filter shape must be (channels x d*width)");
  int half = width / 2;
  Mat y = Mat::Zero(w.val().rows(), n);
  for (int k = 0; k < width; ++k) {
    // Input column t + k - half contributes through filter block k.
    Eigen::Index lo = std::max<Eigen::Index>(0, half - k);
    Eigen::Index hi = std::min<Eigen::Index>(n, n + half - k);
    if (lo >= hi) continue;
    y.middleCols(lo, hi - lo).noalias() +=
        w.val().middleCols(k * d, d) * x.val().middleCols(lo + k - half, hi - lo);
  }
  int xi = x.i, wi = w.i;
  return Expr{g, g->push(std::move(y), g->wants(xi) || g->wants(wi),
                         [xi, wi, width, d, n](Graph& gr, int self) {
                           const Mat& gy = gr.node(self).grad;
                           int half = width / 2;
                           for (int k = 0; k < width; ++k) {
                             Eigen::Index lo = std::max<Eigen::Index>(0, half - k);
                             Eigen::Index hi = std::min<Eigen::Index>(n, n + half - k);
                             if (lo >= hi) continue;
                             if (gr.wants(wi))
                               gr.gbuf(wi).middleCols(k * d, d).noalias() +=
                                   gy.middleCols(lo, hi - lo) *
                                   gr.value(xi).middleCols(lo + k - half, hi - lo).transpose();
                             if (gr.wants(xi))
                               gr.gbuf(xi).middleCols(lo + k - half, hi - lo).noalias() +=
                                   gr.value(wi).middleCols(k * d, d).transpose() *
                                   gy.middleCols(lo, hi - lo);
                           }
                         })};
}

Mat dropout_mask(int rows, int cols, double p, Rng& rng) {
  if (p <= 0.0) return Mat::Ones(rows, cols);
  if (p >= 1.0) return Mat::Zero(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  Mat m(rows, cols);
  double scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace udkit::nn
