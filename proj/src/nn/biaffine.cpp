#include "udkit/nn/biaffine.hpp"

#include <stdexcept>

namespace udkit::nn {

namespace {

Expr fc_side(Graph& g, Param* w, Param* b, Expr x, const DropoutSpec& drop) {
  Expr h = relu(affine(g.param(*w), x, g.param(*b)));
  if (drop.train && drop.rng && drop.input > 0.0)
    h = cmul(h, g.constant(dropout_mask(h.rows(), h.cols(), drop.input, *drop.rng)));
  return h;
}

}  // namespace

DeepBiaffineParams make_deep_biaffine(ParamCollection& pc, const std::string& prefix,
                                      int in_dim, int fc_dim, int out, Rng& rng) {
  if (out < 1) throw std::invalid_argument("biaffine arity must be >= 1");
  DeepBiaffineParams p;
  p.fc_dim = fc_dim;
  p.out = out;
  p.fc_left_w = &pc.add(prefix + ".left.w", fc_dim, in_dim);
  p.fc_left_b = &pc.add(prefix + ".left.b", fc_dim, 1);
  p.fc_right_w = &pc.add(prefix + ".right.w", fc_dim, in_dim);
  p.fc_right_b = &pc.add(prefix + ".right.b", fc_dim, 1);
  p.u = &pc.add(prefix + ".u", out * (fc_dim + 1), fc_dim + 1);
  init_uniform_fan_in(p.fc_left_w->value, rng);
  init_uniform_fan_in(p.fc_right_w->value, rng);
  init_uniform_fan_in(p.u->value, rng);
  return p;
}

Expr append_ones_row(Graph& g, Expr x) {
  return concat_rows({x, g.constant(Mat::Ones(1, x.cols()))});
}

Expr bilinear_pairs(Graph& g, Expr u, Expr a, Expr b) {
  Expr a1 = append_ones_row(g, a);
  Expr b1 = append_ones_row(g, b);
  if (u.rows() != a1.rows() || u.cols() != b1.rows())
    throw std::invalid_argument("bilinear_pairs: u shape mismatch");
  return matmul(transpose(a1), matmul(u, b1));
}

Expr bilinear_vec(Graph& g, Expr u, Expr r, Expr l, int out) {
  if (r.cols() != 1 || l.cols() != 1)
    throw std::invalid_argument("bilinear_vec expects column vectors");
  Expr r1 = append_ones_row(g, r);
  Expr l1 = append_ones_row(g, l);
  if (u.rows() != out * r1.rows() || u.cols() != l1.rows())
    throw std::invalid_argument("bilinear_vec: u shape mismatch");
  Expr t = reshape(matmul(u, l1), r1.rows(), out);
  return matmul(transpose(t), r1);
}

Expr deep_biaffine(Graph& g, const DeepBiaffineParams& p, Expr left, Expr right,
                   const DropoutSpec& drop) {
  if (p.out != 1) throw std::invalid_argument("deep_biaffine requires out == 1");
  if (left.rows() != p.fc_left_w->cols() || right.rows() != p.fc_right_w->cols())
    throw std::invalid_argument("deep_biaffine: input dimension mismatch");
  Expr l1 = append_ones_row(g, fc_side(g, p.fc_left_w, p.fc_left_b, left, drop));
  Expr r1 = append_ones_row(g, fc_side(g, p.fc_right_w, p.fc_right_b, right, drop));
  return matmul(transpose(matmul(g.param(*p.u), l1)), r1);
}

std::vector<Expr> deep_biaffine_multi(Graph& g, const DeepBiaffineParams& p,
                                      Expr left, Expr right,
                                      const DropoutSpec& drop) {
  if (left.rows() != p.fc_left_w->cols() || right.rows() != p.fc_right_w->cols())
    throw std::invalid_argument("deep_biaffine: input dimension mismatch");
  Expr l1 = append_ones_row(g, fc_side(g, p.fc_left_w, p.fc_left_b, left, drop));
  Expr r1 = append_ones_row(g, fc_side(g, p.fc_right_w, p.fc_right_b, right, drop));
  Expr t = matmul(g.param(*p.u), l1);  // o*(d'+1) x n_left
  std::vector<Expr> out;
  out.reserve(static_cast<size_t>(left.cols()));
  Expr r1t = transpose(r1);
  for (int i = 0; i < left.cols(); ++i)
    out.push_back(matmul(r1t, reshape(col(t, i), p.fc_dim + 1, p.out)));
  return out;
}

}  // namespace udkit::nn
