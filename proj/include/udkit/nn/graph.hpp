#pragma once

#include <functional>
#include <vector>

#include "udkit/nn/params.hpp"

namespace udkit::nn {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid as long as the graph
// lives.
struct Expr {
  Graph* g = nullptr;
  int i = -1;

  bool valid() const { return g != nullptr && i >= 0; }
  const Mat& val() const;
  int rows() const;
  int cols() const;
};

// Dynamically built computation tape. Nodes are appended in topological
// order; backward() walks the tape in reverse and scatters gradients into
// bound Params. One backward pass per graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Expr constant(Mat m);
  Expr scalar(double v);
  Expr input(Mat m);  // differentiable leaf (for gradient checks)
  Expr param(Param& p);
  // Embedding lookup: table is V x d, result is d x n (one column per id).
  Expr lookup(Param& table, const std::vector<int>& ids);

  void backward(const Expr& loss);

  const Mat& value(int i) const { return nodes_[static_cast<size_t>(i)].value; }
  const Mat& grad_of(const Expr& e) const;

  size_t size() const { return nodes_.size(); }

  // --- internal plumbing used by the op builders ---
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Graph&, int)> back;
  };
  int push(Mat value, bool needs_grad, std::function<void(Graph&, int)> back);
  Node& node(int i) { return nodes_[static_cast<size_t>(i)]; }
  Mat& gbuf(int i);  // lazily allocated gradient accumulator
  bool wants(int i) const { return nodes_[static_cast<size_t>(i)].needs_grad; }

 private:
  std::vector<Node> nodes_;
  std::vector<std::pair<Param*, int>> param_leaves_;
  struct LookupLeaf {
    Param* table;
    int node;
    std::vector<int> ids;
  };
  std::vector<LookupLeaf> lookup_leaves_;
  bool backward_done_ = false;
};

// --- operations ---
Expr matmul(Expr a, Expr b);
Expr transpose(Expr a);
Expr add(Expr a, Expr b);            // same shape
Expr sub(Expr a, Expr b);
Expr neg(Expr a);
Expr add_colvec(Expr a, Expr bias);  // bias (m x 1) broadcast over columns
Expr cmul(Expr a, Expr b);           // elementwise
Expr scale_cols(Expr a, Expr s);     // s (1 x n) scales each column of a
Expr mul_scalar(Expr a, double c);
Expr add_scalar(Expr a, double c);

Expr concat_rows(const std::vector<Expr>& xs);
Expr concat_cols(const std::vector<Expr>& xs);
Expr rows(Expr a, int r0, int count);
Expr colrange(Expr a, int c0, int count);
inline Expr col(Expr a, int j) { return colrange(a, j, 1); }
Expr reshape(Expr a, int r, int c);  // column-major relayout

Expr tanh_(Expr a);
Expr sigmoid(Expr a);
Expr relu(Expr a);
Expr softplus(Expr a);
Expr exp_(Expr a);
Expr log_(Expr a);
Expr square(Expr a);

Expr sum_all(Expr a);                    // 1 x 1
Expr sum_list(const std::vector<Expr>& xs);  // same-shape sum
Expr softmax_cols(Expr a);               // softmax over rows, per column

// Summed negative log softmax-likelihood: a holds one logit column per
// position, targets picks a row per column.
Expr nll_cols(Expr a, const std::vector<int>& targets);
// Elementwise binary cross entropy with logits; targets in {0,1} (constant).
Expr bce_logits(Expr scores, Mat targets);

// 1-D convolution over the column axis, zero-padded to keep length.
// x is d x n, w is c x (d*width), result c x n. width must be odd.
Expr conv1d(Expr x, Expr w, int width);

// affine(W, x, b) = W x + b with b broadcast over columns.
inline Expr affine(Expr w, Expr x, Expr b) { return add_colvec(matmul(w, x), b); }

// Inverted-dropout mask as a constant (entries 0 or 1/(1-p)).
Mat dropout_mask(int rows, int cols, double p, Rng& rng);

}  // namespace udkit::nn
