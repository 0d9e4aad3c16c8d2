#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmo::diffkit {

// Everything in the toolkit runs on dense 64-bit tensors of rank <= 2.
// A vector is an n x 1 matrix; a scalar is 1 x 1.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline void check_finite(const Mat& m, const char* where) {
  if (!m.allFinite())
    throw std::runtime_error(std::string("non-finite values in ") + where);
}

// Trainable tensor: value, accumulated gradient, and Adam moment buffers.
struct Param {
  Mat value;
  Mat grad;
  Mat m;  // first moment
  Mat v;  // second moment

  explicit Param(Mat init)
      : value(std::move(init)),
        grad(Mat::Zero(value.rows(), value.cols())),
        m(Mat::Zero(value.rows(), value.cols())),
        v(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
  Index size() const { return value.size(); }
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

enum class EwOp { Tanh, Relu, Exp, Log, Add, Sub, Mul, Square };

// Reverse-mode tape. Values are computed eagerly as ops are recorded; nodes
// are created in topological order, so backward() is a single reverse sweep.
// One tape per loss evaluation; backward() leaves the tape cleared.
class Tape {
 public:
  Var input(Mat v) {
    check_finite(v, "input");
    return push(std::move(v), nullptr, nullptr);
  }

  Var param(Param& p) { return push(p.value, nullptr, &p); }

  const Mat& value(Var v) const { return at(v).val; }
  const Mat& grad(Var v) const { return at(v).grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    const Mat& A = at(a).val;
    const Mat& B = at(b).val;
    if (A.cols() != B.rows())
      throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(A) + " x " +
                                  shape_str(B));
    Mat out = A * B;
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
      t.node(a).grad.noalias() += n.grad * t.node(b).val.transpose();
      t.node(b).grad.noalias() += t.node(a).val.transpose() * n.grad;
    });
  }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Mat out = at(a).val + at(b).val;
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
      t.node(a).grad += n.grad;
      t.node(b).grad += n.grad;
    });
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Mat out = at(a).val - at(b).val;
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
      t.node(a).grad += n.grad;
      t.node(b).grad -= n.grad;
    });
  }

  Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Mat out = at(a).val.cwiseProduct(at(b).val);
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
      t.node(a).grad += n.grad.cwiseProduct(t.node(b).val);
      t.node(b).grad += n.grad.cwiseProduct(t.node(a).val);
    });
  }

  Var square(Var a) {
    Mat out = at(a).val.array().square();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad += 2.0 * n.grad.cwiseProduct(t.node(a).val);
    });
  }

  Var tanh(Var a) {
    Mat out = at(a).val.array().tanh();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.array() += n.grad.array() * (1.0 - n.val.array().square());
    });
  }

  Var relu(Var a) {
    Mat out = at(a).val.cwiseMax(0.0);
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.array() +=
          n.grad.array() * (t.node(a).val.array() > 0.0).cast<double>();
    });
  }

  Var exp(Var a) {
    Mat out = at(a).val.array().exp();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.array() += n.grad.array() * n.val.array();
    });
  }

  Var log(Var a) {
    if ((at(a).val.array() <= 0.0).any())
      throw std::invalid_argument("log: non-positive input");
    Mat out = at(a).val.array().log();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.array() += n.grad.array() / t.node(a).val.array();
    });
  }

  // scalar-with-tensor broadcasting; the only broadcasting the kit supports
  Var add_scalar(Var a, double c) {
    Mat out = at(a).val.array() + c;
    return push(std::move(out),
                [a](Tape& t, const Node& n) { t.node(a).grad += n.grad; });
  }

  Var mul_scalar(Var a, double c) {
    Mat out = at(a).val * c;
    return push(std::move(out),
                [a, c](Tape& t, const Node& n) { t.node(a).grad += c * n.grad; });
  }

  // a: B x N, row: 1 x N  ->  B x N (bias add over a batch)
  Var add_rowvec(Var a, Var row) {
    const Mat& A = at(a).val;
    const Mat& R = at(row).val;
    if (R.rows() != 1 || R.cols() != A.cols())
      throw std::invalid_argument("add_rowvec: want 1x" + std::to_string(A.cols()) + ", got " +
                                  shape_str(R));
    Mat out = A.rowwise() + R.row(0);
    return push(std::move(out), [a, row](Tape& t, const Node& n) {
      t.node(a).grad += n.grad;
      t.node(row).grad += n.grad.colwise().sum();
    });
  }

  Var repeat_rows(Var row, Index n_rows) {
    const Mat& R = at(row).val;
    if (R.rows() != 1) throw std::invalid_argument("repeat_rows: input must be 1 x N");
    Mat out = R.replicate(n_rows, 1);
    return push(std::move(out), [row](Tape& t, const Node& n) {
      t.node(row).grad += n.grad.colwise().sum();
    });
  }

  Var concat_cols(Var a, Var b) {
    const Mat& A = at(a).val;
    const Mat& B = at(b).val;
    if (A.rows() != B.rows())
      throw std::invalid_argument("concat_cols: row counts differ, " + shape_str(A) + " vs " +
                                  shape_str(B));
    Mat out(A.rows(), A.cols() + B.cols());
    out << A, B;
    const Index ca = A.cols();
    return push(std::move(out), [a, b, ca](Tape& t, const Node& n) {
      t.node(a).grad += n.grad.leftCols(ca);
      t.node(b).grad += n.grad.rightCols(n.grad.cols() - ca);
    });
  }

  // selects rows of m; rows may repeat (gradient scatters with accumulation)
  Var gather_rows(Var m, std::vector<int> idx) {
    const Mat& M = at(m).val;
    Mat out(static_cast<Index>(idx.size()), M.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= M.rows())
        throw std::invalid_argument("gather_rows: index out of range");
      out.row(static_cast<Index>(i)) = M.row(idx[i]);
    }
    return push(std::move(out), [m, idx = std::move(idx)](Tape& t, const Node& n) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        t.node(m).grad.row(idx[i]) += n.grad.row(static_cast<Index>(i));
    });
  }

  // pass-through gradient on [lo, hi] (inclusive), zero outside
  Var clamp(Var a, double lo, double hi) {
    Mat out = at(a).val.cwiseMax(lo).cwiseMin(hi);
    return push(std::move(out), [a, lo, hi](Tape& t, const Node& n) {
      const auto& x = t.node(a).val.array();
      t.node(a).grad.array() += n.grad.array() * (x >= lo && x <= hi).cast<double>();
    });
  }

  // elementwise minimum; ties route the gradient to a
  Var min(Var a, Var b) {
    require_same_shape(a, b, "min");
    Mat out = at(a).val.cwiseMin(at(b).val);
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
      const auto a_wins = (t.node(a).val.array() <= t.node(b).val.array()).cast<double>();
      t.node(a).grad.array() += n.grad.array() * a_wins;
      t.node(b).grad.array() += n.grad.array() * (1.0 - a_wins);
    });
  }

  Var sum(Var a) {
    Mat out(1, 1);
    out(0, 0) = at(a).val.sum();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.array() += n.grad(0, 0);
    });
  }

  Var mean(Var a) {
    const double inv = 1.0 / static_cast<double>(at(a).val.size());
    Mat out(1, 1);
    out(0, 0) = at(a).val.sum() * inv;
    return push(std::move(out), [a, inv](Tape& t, const Node& n) {
      t.node(a).grad.array() += n.grad(0, 0) * inv;
    });
  }

  Var row_sum(Var a) {
    Mat out = at(a).val.rowwise().sum();
    return push(std::move(out), [a](Tape& t, const Node& n) {
      t.node(a).grad.colwise() += n.grad.col(0);
    });
  }

  // mean of squared differences over all entries
  Var mse(Var pred, Var target) {
    require_same_shape(pred, target, "mse");
    const double inv = 1.0 / static_cast<double>(at(pred).val.size());
    Mat diff = at(pred).val - at(target).val;
    Mat out(1, 1);
    out(0, 0) = diff.squaredNorm() * inv;
    return push(std::move(out), [pred, target, inv](Tape& t, const Node& n) {
      const Mat d = t.node(pred).val - t.node(target).val;
      t.node(pred).grad += (2.0 * inv * n.grad(0, 0)) * d;
      t.node(target).grad -= (2.0 * inv * n.grad(0, 0)) * d;
    });
  }

  // Reverse sweep from a scalar loss node. Gradients of param leaves are
  // accumulated into their Param::grad, then the tape is cleared for reuse.
  void backward(Var loss) {
    Node& ln = at(loss);
    if (ln.val.rows() != 1 || ln.val.cols() != 1)
      throw std::invalid_argument("backward: loss must be a 1x1 scalar node");
    ln.grad(0, 0) = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back) n.back(*this, n);
      if (n.bound) n.bound->grad += n.grad;
    }
    clear();
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Tape&, const Node&)> back;
    Param* bound = nullptr;
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  Node& at(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("invalid Var handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& at(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("invalid Var handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  static std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

  void require_same_shape(Var a, Var b, const char* op) const {
    const Mat& A = at(a).val;
    const Mat& B = at(b).val;
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw std::invalid_argument(std::string(op) + ": shape mismatch, " + shape_str(A) +
                                  " vs " + shape_str(B));
  }

  Var push(Mat val, std::function<void(Tape&, const Node&)> back, Param* bound = nullptr) {
    check_finite(val, "op output");
    Node n;
    n.grad = Mat::Zero(val.rows(), val.cols());
    n.val = std::move(val);
    n.back = std::move(back);
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
};

// Enum-dispatched elementwise entry point; unary ops ignore b.
inline Var elementwise(Tape& t, EwOp op, Var a, Var b = {}) {
  switch (op) {
    case EwOp::Tanh: return t.tanh(a);
    case EwOp::Relu: return t.relu(a);
    case EwOp::Exp: return t.exp(a);
    case EwOp::Log: return t.log(a);
    case EwOp::Add: return t.add(a, b);
    case EwOp::Sub: return t.sub(a, b);
    case EwOp::Mul: return t.mul(a, b);
    case EwOp::Square: return t.square(a);
  }
  throw std::invalid_argument("elementwise: unknown op");
}

}  // namespace lmo::diffkit
