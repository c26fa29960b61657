#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ade/matrix.hpp"

namespace ade {

class Tape;

// Handle to a recorded node. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense double matrices.
//
// Every operation is evaluated eagerly and recorded. Backward passes are
// themselves expressed as tape operations, so gradients are ordinary nodes
// and can be differentiated again (grad-of-grad, BPTT through gradients).
class Tape {
  enum class Op : std::uint8_t {
    kLeaf,
    kConst,
    kAdd,
    kSub,
    kNeg,
    kMul,
    kDiv,
    kMatMul,
    kTranspose,
    kAddRow,         // (n x m) + broadcast (1 x m)
    kMulRow,         // (n x m) * broadcast (1 x m)
    kScale,          // * scalar constant
    kAddScalar,      // + scalar constant
    kExp,
    kLog,
    kTanh,
    kSigmoid,
    kSoftplus,
    kRelu,
    kSquare,
    kClip,           // clamp to [-s, s]; zero gradient outside the band
    kMulConst,       // elementwise product with a fixed matrix
    kSumAll,         // n x m -> 1 x 1
    kRowSum,         // n x m -> n x 1
    kColSum,         // n x m -> 1 x m
    kBroadcastAll,   // 1 x 1 -> i0 x i1
    kBroadcastRows,  // 1 x m -> i0 x m
    kBroadcastCols,  // n x 1 -> n x i0
    kConcatCols,
    kSliceCols,      // columns [i0, i0+i1)
    kPadCols,        // embed at column i0 of i1 zero columns
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double s = 0.0;
    int i0 = 0;
    int i1 = 0;
    Mat aux;    // payload for kMulConst
    Mat value;
  };

 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // Leaves are differentiable inputs (parameters, states); constants are not.
  Var leaf(Mat v) { return push({Op::kLeaf, -1, -1, 0.0, 0, 0, {}, std::move(v)}); }
  Var constant(Mat v) { return push({Op::kConst, -1, -1, 0.0, 0, 0, {}, std::move(v)}); }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    return push({Op::kAdd, a.id, b.id, 0.0, 0, 0, {}, val(a) + val(b)});
  }
  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    return push({Op::kSub, a.id, b.id, 0.0, 0, 0, {}, val(a) - val(b)});
  }
  Var neg(Var a) { return push({Op::kNeg, a.id, -1, 0.0, 0, 0, {}, -val(a)}); }
  Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    return push({Op::kMul, a.id, b.id, 0.0, 0, 0, {}, val(a).cwiseProduct(val(b))});
  }
  Var div(Var a, Var b) {
    same_shape(a, b, "div");
    return push({Op::kDiv, a.id, b.id, 0.0, 0, 0, {}, val(a).cwiseQuotient(val(b))});
  }
  Var matmul(Var a, Var b) {
    require(val(a).cols() == val(b).rows(), "matmul: inner dimensions differ");
    return push({Op::kMatMul, a.id, b.id, 0.0, 0, 0, {}, val(a) * val(b)});
  }
  Var transpose(Var a) {
    return push({Op::kTranspose, a.id, -1, 0.0, 0, 0, {}, val(a).transpose()});
  }
  Var add_row(Var a, Var r) {
    require(val(r).rows() == 1 && val(r).cols() == val(a).cols(), "add_row: want 1 x cols(a)");
    Mat out = val(a);
    out.rowwise() += val(r).row(0);
    return push({Op::kAddRow, a.id, r.id, 0.0, 0, 0, {}, std::move(out)});
  }
  Var mul_row(Var a, Var r) {
    require(val(r).rows() == 1 && val(r).cols() == val(a).cols(), "mul_row: want 1 x cols(a)");
    Mat out = val(a).array().rowwise() * val(r).array().row(0);
    return push({Op::kMulRow, a.id, r.id, 0.0, 0, 0, {}, std::move(out)});
  }
  Var scale(Var a, double s) {
    return push({Op::kScale, a.id, -1, s, 0, 0, {}, val(a) * s});
  }
  Var add_scalar(Var a, double s) {
    return push({Op::kAddScalar, a.id, -1, s, 0, 0, {}, val(a).array() + s});
  }
  Var exp(Var a) { return push({Op::kExp, a.id, -1, 0.0, 0, 0, {}, val(a).array().exp()}); }
  Var log(Var a) { return push({Op::kLog, a.id, -1, 0.0, 0, 0, {}, val(a).array().log()}); }
  Var tanh(Var a) { return push({Op::kTanh, a.id, -1, 0.0, 0, 0, {}, val(a).array().tanh()}); }
  Var sigmoid(Var a) {
    Mat out = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push({Op::kSigmoid, a.id, -1, 0.0, 0, 0, {}, std::move(out)});
  }
  Var softplus(Var a) {
    Mat out = val(a).unaryExpr([](double x) {
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    });
    return push({Op::kSoftplus, a.id, -1, 0.0, 0, 0, {}, std::move(out)});
  }
  Var relu(Var a) { return push({Op::kRelu, a.id, -1, 0.0, 0, 0, {}, val(a).cwiseMax(0.0)}); }
  Var square(Var a) {
    return push({Op::kSquare, a.id, -1, 0.0, 0, 0, {}, val(a).array().square()});
  }
  Var clip(Var a, double bound) {
    require(bound > 0.0, "clip: bound must be positive");
    return push({Op::kClip, a.id, -1, bound, 0, 0, {}, val(a).cwiseMax(-bound).cwiseMin(bound)});
  }
  Var mul_const(Var a, Mat c) {
    require(c.rows() == val(a).rows() && c.cols() == val(a).cols(), "mul_const: shape mismatch");
    Mat out = val(a).cwiseProduct(c);
    return push({Op::kMulConst, a.id, -1, 0.0, 0, 0, std::move(c), std::move(out)});
  }
  Var sum_all(Var a) {
    Mat out(1, 1);
    out(0, 0) = val(a).sum();
    return push({Op::kSumAll, a.id, -1, 0.0, 0, 0, {}, std::move(out)});
  }
  Var row_sum(Var a) {
    Mat out = val(a).rowwise().sum();
    return push({Op::kRowSum, a.id, -1, 0.0, 0, 0, {}, std::move(out)});
  }
  Var col_sum(Var a) {
    Mat out = val(a).colwise().sum();
    return push({Op::kColSum, a.id, -1, 0.0, 0, 0, {}, std::move(out)});
  }
  Var broadcast_all(Var a, int rows, int cols) {
    require(val(a).size() == 1, "broadcast_all: source must be 1 x 1");
    Mat out = Mat::Constant(rows, cols, val(a)(0, 0));
    return push({Op::kBroadcastAll, a.id, -1, 0.0, rows, cols, {}, std::move(out)});
  }
  Var broadcast_rows(Var a, int rows) {
    require(val(a).rows() == 1, "broadcast_rows: source must be a row vector");
    Mat out = val(a).replicate(rows, 1);
    return push({Op::kBroadcastRows, a.id, -1, 0.0, rows, 0, {}, std::move(out)});
  }
  Var broadcast_cols(Var a, int cols) {
    require(val(a).cols() == 1, "broadcast_cols: source must be a column vector");
    Mat out = val(a).replicate(1, cols);
    return push({Op::kBroadcastCols, a.id, -1, 0.0, cols, 0, {}, std::move(out)});
  }
  Var concat_cols(Var a, Var b) {
    require(val(a).rows() == val(b).rows(), "concat_cols: row counts differ");
    Mat out(val(a).rows(), val(a).cols() + val(b).cols());
    out << val(a), val(b);
    return push({Op::kConcatCols, a.id, b.id, 0.0, 0, 0, {}, std::move(out)});
  }
  Var slice_cols(Var a, int start, int len) {
    require(start >= 0 && len >= 1 && start + len <= val(a).cols(), "slice_cols: out of range");
    Mat out = val(a).middleCols(start, len);
    return push({Op::kSliceCols, a.id, -1, 0.0, start, len, {}, std::move(out)});
  }

  Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(val(a).size())); }

  // Adjoints of `wrt` with respect to a scalar `loss`, emitted as new nodes.
  // Nodes the loss does not reach get explicit zero constants.
  std::vector<Var> gradients(Var loss, std::span<const Var> wrt) {
    require(loss.tape == this, "gradients: loss from another tape");
    require(val(loss).size() == 1, "gradients: loss must be scalar");
    const int n = loss.id + 1;
    std::vector<int> adj(static_cast<std::size_t>(n), -1);
    adj[static_cast<std::size_t>(loss.id)] = constant(Mat::Ones(1, 1)).id;

    for (int i = loss.id; i >= 0; --i) {
      const int g = adj[static_cast<std::size_t>(i)];
      if (g < 0) continue;
      emit_backward(i, Var{this, g}, adj);
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (Var w : wrt) {
      require(w.tape == this, "gradients: wrt from another tape");
      if (w.id < n && adj[static_cast<std::size_t>(w.id)] >= 0) {
        out.push_back(Var{this, adj[static_cast<std::size_t>(w.id)]});
      } else {
        out.push_back(constant(Mat::Zero(val(w).rows(), val(w).cols())));
      }
    }
    return out;
  }

  Var gradient(Var loss, Var wrt) {
    const Var w[] = {wrt};
    return gradients(loss, w)[0];
  }

  // Recompute every node from its inputs, in order. Leaves and constants keep
  // their stored values. Used to check record/replay determinism.
  void replay() {
    for (auto& n : nodes_) {
      if (n.op == Op::kLeaf || n.op == Op::kConst) continue;
      n.value = eval(n);
    }
  }

 private:
  std::vector<Node> nodes_;

  const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Mat& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  void same_shape(Var a, Var b, const char* what) const {
    require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
            std::string(what) + ": shape mismatch");
  }

  void accumulate(std::vector<int>& adj, int target, Var grad) {
    int& slot = adj[static_cast<std::size_t>(target)];
    slot = slot < 0 ? grad.id : add(Var{this, slot}, grad).id;
  }

  // Header of a node, copied out before emission: pushing backward nodes may
  // reallocate nodes_, so references into it must not be held across pushes.
  struct NodeHead {
    Op op;
    int a, b;
    double s;
    int i0, i1;
  };

  // Append the backward expression of node i given its output adjoint g.
  void emit_backward(int i, Var g, std::vector<int>& adj) {
    const NodeHead n = [&] {
      const Node& src = nodes_[static_cast<std::size_t>(i)];
      return NodeHead{src.op, src.a, src.b, src.s, src.i0, src.i1};
    }();
    const Var a{this, n.a};
    const Var b{this, n.b};
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        accumulate(adj, n.a, g);
        accumulate(adj, n.b, g);
        break;
      case Op::kSub:
        accumulate(adj, n.a, g);
        accumulate(adj, n.b, neg(g));
        break;
      case Op::kNeg:
        accumulate(adj, n.a, neg(g));
        break;
      case Op::kMul:
        accumulate(adj, n.a, mul(g, b));
        accumulate(adj, n.b, mul(g, a));
        break;
      case Op::kDiv: {
        accumulate(adj, n.a, div(g, b));
        accumulate(adj, n.b, neg(div(mul(g, Var{this, i}), b)));
        break;
      }
      case Op::kMatMul:
        accumulate(adj, n.a, matmul(g, transpose(b)));
        accumulate(adj, n.b, matmul(transpose(a), g));
        break;
      case Op::kTranspose:
        accumulate(adj, n.a, transpose(g));
        break;
      case Op::kAddRow:
        accumulate(adj, n.a, g);
        accumulate(adj, n.b, col_sum(g));
        break;
      case Op::kMulRow:
        accumulate(adj, n.a, mul_row(g, b));
        accumulate(adj, n.b, col_sum(mul(g, a)));
        break;
      case Op::kScale:
        accumulate(adj, n.a, scale(g, n.s));
        break;
      case Op::kAddScalar:
        accumulate(adj, n.a, g);
        break;
      case Op::kExp:
        accumulate(adj, n.a, mul(g, Var{this, i}));
        break;
      case Op::kLog:
        accumulate(adj, n.a, div(g, a));
        break;
      case Op::kTanh: {
        Var one_minus_sq = add_scalar(neg(square(Var{this, i})), 1.0);
        accumulate(adj, n.a, mul(g, one_minus_sq));
        break;
      }
      case Op::kSigmoid: {
        Var y{this, i};
        accumulate(adj, n.a, mul(mul(g, y), add_scalar(neg(y), 1.0)));
        break;
      }
      case Op::kSoftplus:
        accumulate(adj, n.a, mul(g, sigmoid(a)));
        break;
      case Op::kRelu: {
        Mat mask = (val(a).array() > 0.0).cast<double>();
        accumulate(adj, n.a, mul_const(g, std::move(mask)));
        break;
      }
      case Op::kSquare:
        accumulate(adj, n.a, scale(mul(g, a), 2.0));
        break;
      case Op::kClip: {
        Mat mask = (val(a).array().abs() < n.s).cast<double>();
        accumulate(adj, n.a, mul_const(g, std::move(mask)));
        break;
      }
      case Op::kMulConst: {
        Mat aux = nodes_[static_cast<std::size_t>(i)].aux;
        accumulate(adj, n.a, mul_const(g, std::move(aux)));
        break;
      }
      case Op::kSumAll:
        accumulate(adj, n.a,
                   broadcast_all(g, static_cast<int>(val(a).rows()), static_cast<int>(val(a).cols())));
        break;
      case Op::kRowSum:
        accumulate(adj, n.a, broadcast_cols(g, static_cast<int>(val(a).cols())));
        break;
      case Op::kColSum:
        accumulate(adj, n.a, broadcast_rows(g, static_cast<int>(val(a).rows())));
        break;
      case Op::kBroadcastAll:
        accumulate(adj, n.a, sum_all(g));
        break;
      case Op::kBroadcastRows:
        accumulate(adj, n.a, col_sum(g));
        break;
      case Op::kBroadcastCols:
        accumulate(adj, n.a, row_sum(g));
        break;
      case Op::kConcatCols:
        accumulate(adj, n.a, slice_cols(g, 0, static_cast<int>(val(a).cols())));
        accumulate(adj, n.b,
                   slice_cols(g, static_cast<int>(val(a).cols()), static_cast<int>(val(b).cols())));
        break;
      case Op::kSliceCols:
        accumulate(adj, n.a, pad_cols(g, n.i0, static_cast<int>(val(a).cols())));
        break;
      case Op::kPadCols:
        accumulate(adj, n.a, slice_cols(g, n.i0, static_cast<int>(val(a).cols())));
        break;
    }
  }

  Var pad_cols(Var a, int start, int total) {
    require(start >= 0 && start + val(a).cols() <= total, "pad_cols: out of range");
    Mat out = Mat::Zero(val(a).rows(), total);
    out.middleCols(start, val(a).cols()) = val(a);
    return push({Op::kPadCols, a.id, -1, 0.0, start, total, {}, std::move(out)});
  }

  Mat eval(const Node& n) const {
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        return n.value;
      case Op::kAdd:
        return val(n.a) + val(n.b);
      case Op::kSub:
        return val(n.a) - val(n.b);
      case Op::kNeg:
        return -val(n.a);
      case Op::kMul:
        return val(n.a).cwiseProduct(val(n.b));
      case Op::kDiv:
        return val(n.a).cwiseQuotient(val(n.b));
      case Op::kMatMul:
        return val(n.a) * val(n.b);
      case Op::kTranspose:
        return val(n.a).transpose();
      case Op::kAddRow: {
        Mat out = val(n.a);
        out.rowwise() += val(n.b).row(0);
        return out;
      }
      case Op::kMulRow:
        return val(n.a).array().rowwise() * val(n.b).array().row(0);
      case Op::kScale:
        return val(n.a) * n.s;
      case Op::kAddScalar:
        return val(n.a).array() + n.s;
      case Op::kExp:
        return val(n.a).array().exp();
      case Op::kLog:
        return val(n.a).array().log();
      case Op::kTanh:
        return val(n.a).array().tanh();
      case Op::kSigmoid:
        return val(n.a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
      case Op::kSoftplus:
        return val(n.a).unaryExpr([](double x) {
          return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        });
      case Op::kRelu:
        return val(n.a).cwiseMax(0.0);
      case Op::kSquare:
        return val(n.a).array().square();
      case Op::kClip:
        return val(n.a).cwiseMax(-n.s).cwiseMin(n.s);
      case Op::kMulConst:
        return val(n.a).cwiseProduct(n.aux);
      case Op::kSumAll: {
        Mat out(1, 1);
        out(0, 0) = val(n.a).sum();
        return out;
      }
      case Op::kRowSum:
        return val(n.a).rowwise().sum();
      case Op::kColSum:
        return val(n.a).colwise().sum();
      case Op::kBroadcastAll:
        return Mat::Constant(n.i0, n.i1, val(n.a)(0, 0));
      case Op::kBroadcastRows:
        return val(n.a).replicate(n.i0, 1);
      case Op::kBroadcastCols:
        return val(n.a).replicate(1, n.i0);
      case Op::kConcatCols: {
        Mat out(val(n.a).rows(), val(n.a).cols() + val(n.b).cols());
        out << val(n.a), val(n.b);
        return out;
      }
      case Op::kSliceCols:
        return val(n.a).middleCols(n.i0, n.i1);
      case Op::kPadCols: {
        Mat out = Mat::Zero(val(n.a).rows(), n.i1);
        out.middleCols(n.i0, val(n.a).cols()) = val(n.a);
        return out;
      }
    }
    throw ContractViolation("eval: unknown op");
  }
};

inline const Mat& Var::value() const { return tape->value(id); }

}  // namespace ade
