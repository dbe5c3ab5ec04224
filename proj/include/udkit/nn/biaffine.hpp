#pragma once

#include <string>
#include <vector>

#include "udkit/nn/graph.hpp"
#include "udkit/nn/rnn.hpp"

namespace udkit::nn {

// Biaffine scorer with one FC+ReLU head per side and a stack of o bilinear
// forms. u holds the o blocks of (fc_dim+1) x (fc_dim+1) stacked vertically;
// the +1 coordinates carry the bias terms.
struct DeepBiaffineParams {
  Param* fc_left_w = nullptr;
  Param* fc_left_b = nullptr;
  Param* fc_right_w = nullptr;
  Param* fc_right_b = nullptr;
  Param* u = nullptr;
  int fc_dim = 0;
  int out = 1;
};

DeepBiaffineParams make_deep_biaffine(ParamCollection& pc, const std::string& prefix,
                                      int in_dim, int fc_dim, int out, Rng& rng);

Expr append_ones_row(Graph& g, Expr x);

// All-pairs bilinear form: result(i, j) = [a_i;1]^T u [b_j;1] for column
// vectors a_i of a and b_j of b; u is (rows(a)+1) x (rows(b)+1).
Expr bilinear_pairs(Graph& g, Expr u, Expr a, Expr b);

// Stacked bilinear forms for a single vector pair: result(k, 0) =
// [r;1]^T U_k [l;1], with u holding o vertically stacked blocks of
// (rows(r)+1) x (rows(l)+1).
Expr bilinear_vec(Graph& g, Expr u, Expr r, Expr l, int out);

// score(i, j) = [fc_right(right_j);1]^T U [fc_left(left_i);1]. Requires
// out == 1; result is n_left x n_right.
Expr deep_biaffine(Graph& g, const DeepBiaffineParams& p, Expr left, Expr right,
                   const DropoutSpec& drop = {});

// General arity: result[i](j, k) = [fc_right(right_j);1]^T U_k [fc_left(left_i);1].
std::vector<Expr> deep_biaffine_multi(Graph& g, const DeepBiaffineParams& p,
                                      Expr left, Expr right,
                                      const DropoutSpec& drop = {});

}  // namespace udkit::nn
