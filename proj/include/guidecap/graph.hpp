#pragma once

#include <functional>
#include <string>
#include <vector>

#include "guidecap/array.hpp"

namespace guidecap::numeric {

// Named trainable tensor. Gradients accumulate into `grad`; optimizers read
// (value, grad) pairs in place.
struct Param {
  std::string name;
  Array value;
  Array grad;

  Param() = default;
  Param(std::string n, Array v) : name(std::move(n)), value(std::move(v)) {}
};

class Graph;

// Lightweight handle into a Graph; valid until the graph is cleared.
struct Var {
  Graph* g = nullptr;
  int id = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is by
// construction a topological order; backward() walks it in reverse. Every op
// validates shapes before computing and rejects non-finite results.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Var param(Param& p);
  Var constant(Array v);

  // Primitives. matmul accepts [m,n]x[n] -> [m] and [m,n]x[n,k] -> [m,k];
  // matmul_tn computes transpose(a)*b for a [m,n], b [m] -> [n].
  Var matmul(Var a, Var b);
  Var matmul_tn(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(Var a, Var b);
  Var slice(Var a, int from, int len);
  Var embedding_lookup(Param& table, int row);
  Var softmax_cross_entropy(Var logits, int target);
  Var sigmoid_bce(Var logits, const Array& targets);
  Var sum(Var a);
  Var scale(Var a, double c);

  const Array& value(Var v) const;

  // Gradient of a node after backward(); zero-sized if the node was not on
  // any path to the loss.
  const Array& grad(Var v) const;

  // Seeds d(loss)=1 and accumulates into node grads and Param::grad. Zeroes
  // the grads of every Param registered on this graph first, so parameters
  // unreachable from the loss end with zero gradient. Loss must be scalar.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    Param* param = nullptr;  // set for param leaves only
    std::function<void(Graph&, int)> back;
  };

  int push(Array value, std::function<void(Graph&, int)> back);
  Array& grad_buf(int id);
  const Node& node(Var v) const;
  void register_param(Param* p);

  std::vector<Node> nodes_;
  std::vector<Param*> params_;

  friend struct Var;
};

// Numerically stable log-softmax over a rank-1 value array (no gradient);
// used by decoding, which only needs forward probabilities.
std::vector<double> log_softmax(const Array& logits);

}  // namespace guidecap::numeric
