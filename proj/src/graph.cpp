#include "guidecap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace guidecap::numeric {

namespace {

void check_same_graph(Var a, Var b, const char* op) {
  if (a.g == nullptr || a.g != b.g) {
    throw ContractError(std::string(op) + ": operands must live on the same graph");
  }
}

void check_rank1(const Array& a, const char* op) {
  if (a.rank() != 1) {
    throw DimensionError(std::string(op) + ": expected rank-1 operand, got " + shape_str(a.shape()));
  }
}

}  // namespace

int Graph::push(Array value, std::function<void(Graph&, int)> back) {
  nodes_.push_back(Node{std::move(value), Array{}, nullptr, std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.g != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError("stale or foreign Var handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Array& Graph::value(Var v) const { return node(v).value; }

const Array& Graph::grad(Var v) const { return node(v).grad; }

Array& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Array::zeros(n.value.shape());
  return n.grad;
}

void Graph::register_param(Param* p) {
  if (std::find(params_.begin(), params_.end(), p) == params_.end()) params_.push_back(p);
}

Var Graph::param(Param& p) {
  register_param(&p);
  const int id = push(p.value, {});
  nodes_.back().param = &p;
  return Var{this, id};
}

Var Graph::constant(Array v) {
  require_finite(v, "constant");
  return Var{this, push(std::move(v), {})};
}

Var Graph::matmul(Var a, Var b) {
  check_same_graph(a, b, "matmul");
  const Array& A = value(a);
  const Array& B = value(b);
  if (A.rank() != 2) throw DimensionError("matmul: left operand must be rank-2, got " + shape_str(A.shape()));
  const int m = A.dim(0), n = A.dim(1);
  if (B.rank() == 1) {
    if (B.dim(0) != n) {
      throw DimensionError("matmul: " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    Array y = Array::zeros({m});
    const double* ap = A.data();
    const double* bp = B.data();
    double* yp = y.data();
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* row = ap + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) acc += row[j] * bp[j];
      yp[i] = acc;
    }
    require_finite(y, "matmul");
    const int aid = a.id, bid = b.id;
    return Var{this, push(std::move(y), [aid, bid, m, n](Graph& g, int self) {
                 const Array& dy = g.nodes_[self].grad;
                 const Array& A2 = g.nodes_[aid].value;
                 const Array& B2 = g.nodes_[bid].value;
                 Array& da = g.grad_buf(aid);
                 Array& db = g.grad_buf(bid);
                 for (int i = 0; i < m; ++i) {
                   const double d = dy.at(i);
                   const double* brow = B2.data();
                   double* darow = da.data() + static_cast<std::size_t>(i) * n;
                   for (int j = 0; j < n; ++j) darow[j] += d * brow[j];
                 }
                 for (int j = 0; j < n; ++j) {
                   double acc = 0.0;
                   for (int i = 0; i < m; ++i) acc += A2.at(i, j) * dy.at(i);
                   db.at(j) += acc;
                 }
               })};
  }
  if (B.rank() == 2) {
    if (B.dim(0) != n) {
      throw DimensionError("matmul: " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    const int k = B.dim(1);
    Array y = Array::zeros({m, k});
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const double av = A.at(i, j);
        if (av == 0.0) continue;
        for (int c = 0; c < k; ++c) y.at(i, c) += av * B.at(j, c);
      }
    }
    require_finite(y, "matmul");
    const int aid = a.id, bid = b.id;
    return Var{this, push(std::move(y), [aid, bid, m, n, k](Graph& g, int self) {
                 const Array& dy = g.nodes_[self].grad;
                 const Array& A2 = g.nodes_[aid].value;
                 const Array& B2 = g.nodes_[bid].value;
                 Array& da = g.grad_buf(aid);
                 Array& db = g.grad_buf(bid);
                 // da = dy * B^T ; db = A^T * dy
                 for (int i = 0; i < m; ++i) {
                   for (int j = 0; j < n; ++j) {
                     double acc = 0.0;
                     for (int c = 0; c < k; ++c) acc += dy.at(i, c) * B2.at(j, c);
                     da.at(i, j) += acc;
                   }
                 }
                 for (int j = 0; j < n; ++j) {
                   for (int c = 0; c < k; ++c) {
                     double acc = 0.0;
                     for (int i = 0; i < m; ++i) acc += A2.at(i, j) * dy.at(i, c);
                     db.at(j, c) += acc;
                   }
                 }
               })};
  }
  throw DimensionError("matmul: right operand must be rank-1 or rank-2");
}

Var Graph::matmul_tn(Var a, Var b) {
  check_same_graph(a, b, "matmul_tn");
  const Array& A = value(a);
  const Array& B = value(b);
  if (A.rank() != 2 || B.rank() != 1 || B.dim(0) != A.dim(0)) {
    throw DimensionError("matmul_tn: " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  const int m = A.dim(0), n = A.dim(1);
  Array y = Array::zeros({n});
  for (int i = 0; i < m; ++i) {
    const double xv = B.at(i);
    if (xv == 0.0) continue;
    const double* row = A.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) y.at(j) += row[j] * xv;
  }
  require_finite(y, "matmul_tn");
  const int aid = a.id, bid = b.id;
  return Var{this, push(std::move(y), [aid, bid, m, n](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               const Array& A2 = g.nodes_[aid].value;
               const Array& B2 = g.nodes_[bid].value;
               Array& da = g.grad_buf(aid);
               Array& db = g.grad_buf(bid);
               for (int i = 0; i < m; ++i) {
                 const double xv = B2.at(i);
                 double acc = 0.0;
                 const double* arow = A2.data() + static_cast<std::size_t>(i) * n;
                 double* darow = da.data() + static_cast<std::size_t>(i) * n;
                 for (int j = 0; j < n; ++j) {
                   darow[j] += xv * dy.at(j);
                   acc += arow[j] * dy.at(j);
                 }
                 db.at(i) += acc;
               }
             })};
}

Var Graph::add(Var a, Var b) {
  check_same_graph(a, b, "add");
  const Array& A = value(a);
  const Array& B = value(b);
  if (!A.same_shape(B)) {
    throw DimensionError("add: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  }
  Array y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] += B.data()[i];
  require_finite(y, "add");
  const int aid = a.id, bid = b.id;
  return Var{this, push(std::move(y), [aid, bid](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               Array& da = g.grad_buf(aid);
               Array& db = g.grad_buf(bid);
               for (std::size_t i = 0; i < dy.numel(); ++i) {
                 da.data()[i] += dy.data()[i];
                 db.data()[i] += dy.data()[i];
               }
             })};
}

Var Graph::mul(Var a, Var b) {
  check_same_graph(a, b, "mul");
  const Array& A = value(a);
  const Array& B = value(b);
  if (!A.same_shape(B)) {
    throw DimensionError("mul: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  }
  Array y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] *= B.data()[i];
  require_finite(y, "mul");
  const int aid = a.id, bid = b.id;
  return Var{this, push(std::move(y), [aid, bid](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               const Array& A2 = g.nodes_[aid].value;
               const Array& B2 = g.nodes_[bid].value;
               Array& da = g.grad_buf(aid);
               Array& db = g.grad_buf(bid);
               for (std::size_t i = 0; i < dy.numel(); ++i) {
                 da.data()[i] += dy.data()[i] * B2.data()[i];
                 db.data()[i] += dy.data()[i] * A2.data()[i];
               }
             })};
}

Var Graph::sigmoid(Var a) {
  const Array& A = value(a);
  Array y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double x = y.data()[i];
    // Branch keeps exp() argument non-positive for stability at any magnitude.
    y.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  require_finite(y, "sigmoid");
  const int aid = a.id;
  return Var{this, push(std::move(y), [aid](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               const Array& Y = g.nodes_[self].value;
               Array& da = g.grad_buf(aid);
               for (std::size_t i = 0; i < dy.numel(); ++i) {
                 const double s = Y.data()[i];
                 da.data()[i] += dy.data()[i] * s * (1.0 - s);
               }
             })};
}

Var Graph::tanh(Var a) {
  const Array& A = value(a);
  Array y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] = std::tanh(y.data()[i]);
  require_finite(y, "tanh");
  const int aid = a.id;
  return Var{this, push(std::move(y), [aid](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               const Array& Y = g.nodes_[self].value;
               Array& da = g.grad_buf(aid);
               for (std::size_t i = 0; i < dy.numel(); ++i) {
                 const double t = Y.data()[i];
                 da.data()[i] += dy.data()[i] * (1.0 - t * t);
               }
             })};
}

Var Graph::concat(Var a, Var b) {
  check_same_graph(a, b, "concat");
  const Array& A = value(a);
  const Array& B = value(b);
  check_rank1(A, "concat");
  check_rank1(B, "concat");
  const int na = A.dim(0), nb = B.dim(0);
  Array y = Array::zeros({na + nb});
  for (int i = 0; i < na; ++i) y.at(i) = A.at(i);
  for (int i = 0; i < nb; ++i) y.at(na + i) = B.at(i);
  const int aid = a.id, bid = b.id;
  return Var{this, push(std::move(y), [aid, bid, na, nb](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               Array& da = g.grad_buf(aid);
               Array& db = g.grad_buf(bid);
               for (int i = 0; i < na; ++i) da.at(i) += dy.at(i);
               for (int i = 0; i < nb; ++i) db.at(i) += dy.at(na + i);
             })};
}

Var Graph::slice(Var a, int from, int len) {
  const Array& A = value(a);
  check_rank1(A, "slice");
  if (from < 0 || len <= 0 || from + len > A.dim(0)) {
    throw DimensionError("slice: range [" + std::to_string(from) + ", " + std::to_string(from + len) +
                         ") out of bounds for " + shape_str(A.shape()));
  }
  Array y = Array::zeros({len});
  for (int i = 0; i < len; ++i) y.at(i) = A.at(from + i);
  const int aid = a.id;
  return Var{this, push(std::move(y), [aid, from, len](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               Array& da = g.grad_buf(aid);
               for (int i = 0; i < len; ++i) da.at(from + i) += dy.at(i);
             })};
}

Var Graph::embedding_lookup(Param& table, int row) {
  if (table.value.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank-2, got " + shape_str(table.value.shape()));
  }
  if (row < 0 || row >= table.value.dim(0)) {
    throw DataError("embedding_lookup: row " + std::to_string(row) + " out of range for table " +
                    shape_str(table.value.shape()));
  }
  register_param(&table);
  const int cols = table.value.dim(1);
  Array y = Array::zeros({cols});
  for (int j = 0; j < cols; ++j) y.at(j) = table.value.at(row, j);
  require_finite(y, "embedding_lookup");
  Param* tp = &table;
  return Var{this, push(std::move(y), [tp, row, cols](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               if (tp->grad.numel() == 0) tp->grad = Array::zeros(tp->value.shape());
               for (int j = 0; j < cols; ++j) tp->grad.at(row, j) += dy.at(j);
             })};
}

Var Graph::softmax_cross_entropy(Var logits, int target) {
  const Array& L = value(logits);
  check_rank1(L, "softmax_cross_entropy");
  const int n = L.dim(0);
  if (target < 0 || target >= n) {
    throw DataError("softmax_cross_entropy: target " + std::to_string(target) + " out of range [0, " +
                    std::to_string(n) + ")");
  }
  double mx = L.at(0);
  for (int i = 1; i < n; ++i) mx = std::max(mx, L.at(i));
  std::vector<double> soft(static_cast<std::size_t>(n));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    soft[static_cast<std::size_t>(i)] = std::exp(L.at(i) - mx);
    z += soft[static_cast<std::size_t>(i)];
  }
  for (double& s : soft) s /= z;
  Array y = Array::from_vector({mx + std::log(z) - L.at(target)});
  require_finite(y, "softmax_cross_entropy");
  const int lid = logits.id;
  return Var{this, push(std::move(y), [lid, target, soft = std::move(soft)](Graph& g, int self) {
               const double d = g.nodes_[self].grad.at(0);
               Array& dl = g.grad_buf(lid);
               for (std::size_t i = 0; i < soft.size(); ++i) dl.data()[i] += d * soft[i];
               dl.at(target) -= d;
             })};
}

Var Graph::sigmoid_bce(Var logits, const Array& targets) {
  const Array& L = value(logits);
  check_rank1(L, "sigmoid_bce");
  if (!L.same_shape(targets)) {
    throw DimensionError("sigmoid_bce: shape mismatch " + shape_str(L.shape()) + " vs " +
                         shape_str(targets.shape()));
  }
  const int n = L.dim(0);
  double loss = 0.0;
  std::vector<double> sig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = L.at(i);
    const double t = targets.at(i);
    // softplus(z) - t*z, computed stably.
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))) - t * z;
    sig[static_cast<std::size_t>(i)] =
        z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  Array y = Array::from_vector({loss});
  require_finite(y, "sigmoid_bce");
  const int lid = logits.id;
  std::vector<double> tv(targets.data(), targets.data() + targets.numel());
  return Var{this, push(std::move(y), [lid, sig = std::move(sig), tv = std::move(tv)](Graph& g, int self) {
               const double d = g.nodes_[self].grad.at(0);
               Array& dl = g.grad_buf(lid);
               for (std::size_t i = 0; i < sig.size(); ++i) dl.data()[i] += d * (sig[i] - tv[i]);
             })};
}

Var Graph::sum(Var a) {
  const Array& A = value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) acc += A.data()[i];
  Array y = Array::from_vector({acc});
  require_finite(y, "sum");
  const int aid = a.id;
  return Var{this, push(std::move(y), [aid](Graph& g, int self) {
               const double d = g.nodes_[self].grad.at(0);
               Array& da = g.grad_buf(aid);
               for (std::size_t i = 0; i < da.numel(); ++i) da.data()[i] += d;
             })};
}

Var Graph::scale(Var a, double c) {
  const Array& A = value(a);
  Array y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] *= c;
  require_finite(y, "scale");
  const int aid = a.id;
  return Var{this, push(std::move(y), [aid, c](Graph& g, int self) {
               const Array& dy = g.nodes_[self].grad;
               Array& da = g.grad_buf(aid);
               for (std::size_t i = 0; i < dy.numel(); ++i) da.data()[i] += c * dy.data()[i];
             })};
}

void Graph::backward(Var loss) {
  const Array& lv = value(loss);
  if (lv.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(lv.shape()));
  }
  for (Param* p : params_) {
    if (p->grad.numel() == 0 || !p->grad.same_shape(p->value)) {
      p->grad = Array::zeros(p->value.shape());
    } else {
      p->grad.fill(0.0);
    }
  }
  grad_buf(loss.id).at(0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.numel() == 0) continue;  // not on a path to the loss
    if (n.param != nullptr) {
      for (std::size_t j = 0; j < n.grad.numel(); ++j) n.param->grad.data()[j] += n.grad.data()[j];
    }
    if (n.back) n.back(*this, i);
  }
}

void Graph::clear() {
  nodes_.clear();
  params_.clear();
}

std::vector<double> log_softmax(const Array& logits) {
  if (logits.rank() != 1) throw DimensionError("log_softmax: expected rank-1 logits");
  const int n = logits.dim(0);
  double mx = logits.at(0);
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.at(i));
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(logits.at(i) - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = logits.at(i) - lse;
  return out;
}

}  // namespace guidecap::numeric
