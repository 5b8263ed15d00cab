#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/mat.hpp"
#include "mmbeam/core/params.hpp"

namespace mmbeam {

// Reverse-mode autodiff over row-major matrices. A Tape records one forward
// pass as a DAG of primitive ops; backward() walks the nodes in reverse
// creation order and accumulates parameter gradients into a GradBuffer.
// Tapes are cheap, single-use and not thread-safe; build one per sample.
template <typename T>
class Tape {
 public:
  enum class Op : uint8_t {
    kLeaf,
    kMatmul,
    kAdd,
    kAddRowVec,
    kScale,
    kRelu,
    kSoftmaxRows,
    kLogSoftmaxRows,
    kLayerNormRows,
    kRowGather,
    kSliceRows,
    kSliceCols,
    kReshape,
    kConcatRows,
    kConcatCols,
    kTranspose,
    kMeanRows,
    kSumAll,
    kSegmentMean,
    kSegmentMax,
    kL2NormalizeRows,
    kDiag,
    kRowSelect,
    kMulByScalarNode,
  };

  explicit Tape(const ParamStore<T>* store = nullptr) : store_(store) {
    nodes_.reserve(256);
  }

  // ---- leaves ----

  // Borrowing leaf: caller keeps `v` alive for the tape's lifetime.
  int input(const Mat<T>& v) {
    Node n;
    n.op = Op::kLeaf;
    n.ext = &v;
    return push(std::move(n));
  }

  int input_owned(Mat<T> v) {
    Node n;
    n.op = Op::kLeaf;
    n.val = std::move(v);
    return push(std::move(n));
  }

  int param(int pid) {
    if (store_ == nullptr) throw std::logic_error("tape has no param store");
    Node n;
    n.op = Op::kLeaf;
    n.ext = &store_->value(pid);
    n.pid = pid;
    return push(std::move(n));
  }

  int param(const std::string& name) { return param(store_->id(name)); }

  // ---- primitive ops ----

  int matmul(int a, int b) {
    const Mat<T>& A = value(a);
    const Mat<T>& B = value(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: dim mismatch");
    Node n;
    n.op = Op::kMatmul;
    n.a = a;
    n.b = b;
    n.val = A * B;
    return push(std::move(n));
  }

  int add(int a, int b) {
    const Mat<T>& A = value(a);
    const Mat<T>& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw std::invalid_argument("add: shape mismatch");
    Node n;
    n.op = Op::kAdd;
    n.a = a;
    n.b = b;
    n.val = A + B;
    return push(std::move(n));
  }

  // X [r x c] + broadcast row vector [1 x c]
  int add_rowvec(int a, int b) {
    const Mat<T>& A = value(a);
    const Mat<T>& B = value(b);
    if (B.rows() != 1 || A.cols() != B.cols())
      throw std::invalid_argument("add_rowvec: shape mismatch");
    Node n;
    n.op = Op::kAddRowVec;
    n.a = a;
    n.b = b;
    n.val = A.rowwise() + B.row(0);
    return push(std::move(n));
  }

  int scale(int a, T s) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.scalar = s;
    n.val = value(a) * s;
    return push(std::move(n));
  }

  int relu(int a) {
    Node n;
    n.op = Op::kRelu;
    n.a = a;
    n.val = value(a).cwiseMax(T(0));
    return push(std::move(n));
  }

  int softmax_rows(int a) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kSoftmaxRows;
    n.a = a;
    n.val.resize(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      T mx = X.row(i).maxCoeff();
      auto e = (X.row(i).array() - mx).exp();
      n.val.row(i) = (e / e.sum()).matrix();
    }
    return push(std::move(n));
  }

  int log_softmax_rows(int a) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kLogSoftmaxRows;
    n.a = a;
    n.val.resize(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      T mx = X.row(i).maxCoeff();
      auto sh = X.row(i).array() - mx;
      T lse = std::log(sh.exp().sum());
      n.val.row(i) = (sh - lse).matrix();
    }
    return push(std::move(n));
  }

  // Per-row layer norm with affine params gamma, beta (both [1 x c]).
  int layer_norm_rows(int a, int gamma, int beta, T eps = T(1e-5)) {
    const Mat<T>& X = value(a);
    const Mat<T>& G = value(gamma);
    const Mat<T>& B = value(beta);
    if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() ||
        B.cols() != X.cols())
      throw std::invalid_argument("layer_norm: shape mismatch");
    Node n;
    n.op = Op::kLayerNormRows;
    n.a = a;
    n.b = gamma;
    n.c = beta;
    n.scalar = eps;
    n.val.resize(X.rows(), X.cols());
    n.cache.resize(X.rows(), X.cols());  // xhat
    n.cache2.resize(X.rows(), 1);        // inv std
    const T invc = T(1) / static_cast<T>(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      T mu = X.row(i).mean();
      T var = (X.row(i).array() - mu).square().sum() * invc;
      T r = T(1) / std::sqrt(var + eps);
      n.cache.row(i) = ((X.row(i).array() - mu) * r).matrix();
      n.cache2(i, 0) = r;
      n.val.row(i) =
          (n.cache.row(i).array() * G.row(0).array() + B.row(0).array())
              .matrix();
    }
    return push(std::move(n));
  }

  // Gather whole rows; index -1 yields a zero row (used for conv padding).
  int row_gather(int a, std::vector<int> idx) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kRowGather;
    n.a = a;
    n.val.setZero(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) n.val.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
    }
    n.idx = std::move(idx);
    return push(std::move(n));
  }

  int slice_rows(int a, Eigen::Index start, Eigen::Index len) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kSliceRows;
    n.a = a;
    n.i0 = start;
    n.i1 = len;
    n.val = X.middleRows(start, len);
    return push(std::move(n));
  }

  int slice_cols(int a, Eigen::Index start, Eigen::Index len) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.i0 = start;
    n.i1 = len;
    n.val = X.middleCols(start, len);
    return push(std::move(n));
  }

  // Row-major reinterpretation to [r x c]; element order is preserved.
  int reshape(int a, Eigen::Index r, Eigen::Index c) {
    const Mat<T>& X = value(a);
    if (X.size() != r * c) throw std::invalid_argument("reshape: size mismatch");
    Node n;
    n.op = Op::kReshape;
    n.a = a;
    n.val = Mat<T>(Eigen::Map<const Mat<T>>(X.data(), r, c));
    return push(std::move(n));
  }

  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    Eigen::Index rows = 0, cols = value(parts[0]).cols();
    for (int p : parts) {
      if (value(p).cols() != cols)
        throw std::invalid_argument("concat_rows: col mismatch");
      rows += value(p).rows();
    }
    Node n;
    n.op = Op::kConcatRows;
    n.args = parts;
    n.val.resize(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      n.val.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    return push(std::move(n));
  }

  int concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    Eigen::Index cols = 0, rows = value(parts[0]).rows();
    for (int p : parts) {
      if (value(p).rows() != rows)
        throw std::invalid_argument("concat_cols: row mismatch");
      cols += value(p).cols();
    }
    Node n;
    n.op = Op::kConcatCols;
    n.args = parts;
    n.val.resize(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      n.val.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    return push(std::move(n));
  }

  int transpose(int a) {
    Node n;
    n.op = Op::kTranspose;
    n.a = a;
    n.val = value(a).transpose();
    return push(std::move(n));
  }

  int mean_rows(int a) {
    Node n;
    n.op = Op::kMeanRows;
    n.a = a;
    n.val = value(a).colwise().mean();
    return push(std::move(n));
  }

  int sum_all(int a) {
    Node n;
    n.op = Op::kSumAll;
    n.a = a;
    n.val.resize(1, 1);
    n.val(0, 0) = value(a).sum();
    return push(std::move(n));
  }

  // Per-segment mean of rows; rows of empty segments are exactly zero.
  int segment_mean(int a, std::vector<int> seg, int n_segments) {
    const Mat<T>& X = value(a);
    if (static_cast<Eigen::Index>(seg.size()) != X.rows())
      throw std::invalid_argument("segment_mean: seg size mismatch");
    Node n;
    n.op = Op::kSegmentMean;
    n.a = a;
    n.i0 = n_segments;
    n.val.setZero(n_segments, X.cols());
    n.counts.assign(n_segments, 0);
    for (size_t i = 0; i < seg.size(); ++i) {
      n.val.row(seg[i]) += X.row(static_cast<Eigen::Index>(i));
      n.counts[seg[i]]++;
    }
    for (int s = 0; s < n_segments; ++s)
      if (n.counts[s] > 0) n.val.row(s) /= static_cast<T>(n.counts[s]);
    n.idx = std::move(seg);
    return push(std::move(n));
  }

  // Per-segment max of rows; empty segments are exactly zero. Ties resolve to
  // the first row in input order.
  int segment_max(int a, std::vector<int> seg, int n_segments) {
    const Mat<T>& X = value(a);
    if (static_cast<Eigen::Index>(seg.size()) != X.rows())
      throw std::invalid_argument("segment_max: seg size mismatch");
    Node n;
    n.op = Op::kSegmentMax;
    n.a = a;
    n.i0 = n_segments;
    n.val.setZero(n_segments, X.cols());
    n.argmax.setConstant(n_segments, X.cols(), -1);
    std::vector<char> seen(static_cast<size_t>(n_segments), 0);
    for (size_t i = 0; i < seg.size(); ++i) {
      int s = seg[i];
      for (Eigen::Index c = 0; c < X.cols(); ++c) {
        T v = X(static_cast<Eigen::Index>(i), c);
        if (!seen[s] || v > n.val(s, c)) {
          n.val(s, c) = v;
          n.argmax(s, c) = static_cast<int>(i);
        }
      }
      seen[s] = 1;
    }
    n.idx = std::move(seg);
    return push(std::move(n));
  }

  // Rows scaled to unit L2 norm. Zero rows are rejected.
  int l2_normalize_rows(int a, T min_norm = T(1e-12)) {
    const Mat<T>& X = value(a);
    Node n;
    n.op = Op::kL2NormalizeRows;
    n.a = a;
    n.val.resize(X.rows(), X.cols());
    n.cache2.resize(X.rows(), 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      T norm = X.row(i).norm();
      if (norm < min_norm)
        throw std::invalid_argument("l2_normalize_rows: zero-norm row " +
                                    std::to_string(i));
      n.cache2(i, 0) = T(1) / norm;
      n.val.row(i) = X.row(i) * n.cache2(i, 0);
    }
    return push(std::move(n));
  }

  // [n x n] -> [n x 1] diagonal.
  int diag(int a) {
    const Mat<T>& X = value(a);
    if (X.rows() != X.cols()) throw std::invalid_argument("diag: not square");
    Node n;
    n.op = Op::kDiag;
    n.a = a;
    n.val = X.diagonal();
    return push(std::move(n));
  }

  // Pick one element per row: out[i,0] = X[i, cols[i]].
  int row_select(int a, std::vector<int> cols) {
    const Mat<T>& X = value(a);
    if (static_cast<Eigen::Index>(cols.size()) != X.rows())
      throw std::invalid_argument("row_select: size mismatch");
    Node n;
    n.op = Op::kRowSelect;
    n.a = a;
    n.val.resize(X.rows(), 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) n.val(i, 0) = X(i, cols[i]);
    n.idx = std::move(cols);
    return push(std::move(n));
  }

  // out = A * s where s is a [1 x 1] node.
  int mul_by_scalar_node(int a, int s) {
    const Mat<T>& S = value(s);
    if (S.rows() != 1 || S.cols() != 1)
      throw std::invalid_argument("mul_by_scalar_node: s must be 1x1");
    Node n;
    n.op = Op::kMulByScalarNode;
    n.a = a;
    n.b = s;
    n.val = value(a) * S(0, 0);
    return push(std::move(n));
  }

  // ---- composites ----

  // y = x W + b with W [in x out], b [1 x out].
  int linear(int x, int w_pid, int b_pid) {
    return add_rowvec(matmul(x, param(w_pid)), param(b_pid));
  }

  // ---- access ----

  const Mat<T>& value(int id) const {
    const Node& n = nodes_[id];
    return n.ext != nullptr ? *n.ext : n.val;
  }

  T scalar_value(int id) const { return value(id)(0, 0); }

  // ---- backward ----

  // Seeds d(root)/d(root) = seed and accumulates parameter gradients into
  // `sink`. Gradients w.r.t. non-param leaves are retrievable via leaf_grad.
  void backward(int root, const Mat<T>& seed, GradBuffer<T>* sink) {
    grads_.assign(nodes_.size(), Mat<T>());
    add_grad(root, seed);
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      if (grads_[id].size() == 0) continue;
      dispatch(id, grads_[id], sink);
    }
  }

  void backward_scalar(int root, GradBuffer<T>* sink) {
    Mat<T> seed(1, 1);
    seed(0, 0) = T(1);
    backward(root, seed, sink);
  }

  // Gradient w.r.t. a leaf node (after backward); zero matrix if untouched.
  Mat<T> leaf_grad(int id) const {
    if (grads_.empty() || grads_[id].size() == 0) {
      const Mat<T>& v = value(id);
      return Mat<T>::Zero(v.rows(), v.cols());
    }
    return grads_[id];
  }

 private:
  struct Node {
    Op op = Op::kLeaf;
    int a = -1, b = -1, c = -1;
    std::vector<int> args;
    Mat<T> val;
    const Mat<T>* ext = nullptr;
    int pid = -1;
    T scalar = T(0);
    Eigen::Index i0 = 0, i1 = 0;
    std::vector<int> idx;
    std::vector<int> counts;
    Mat<T> cache;   // layer norm xhat
    Mat<T> cache2;  // per-row scalars (inv std / inv norm)
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
  };

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void add_grad(int id, const Mat<T>& g) {
    if (grads_[id].size() == 0) {
      grads_[id] = g;
    } else {
      grads_[id] += g;
    }
  }

  void dispatch(int id, const Mat<T>& g, GradBuffer<T>* sink) {
    Node& n = nodes_[id];
    switch (n.op) {
      case Op::kLeaf:
        if (n.pid >= 0 && sink != nullptr) sink->accumulate(n.pid, g);
        break;
      case Op::kMatmul:
        add_grad(n.a, g * value(n.b).transpose());
        add_grad(n.b, value(n.a).transpose() * g);
        break;
      case Op::kAdd:
        add_grad(n.a, g);
        add_grad(n.b, g);
        break;
      case Op::kAddRowVec:
        add_grad(n.a, g);
        add_grad(n.b, g.colwise().sum());
        break;
      case Op::kScale:
        add_grad(n.a, g * n.scalar);
        break;
      case Op::kRelu: {
        Mat<T> gx = (n.val.array() > T(0)).template cast<T>() * g.array();
        add_grad(n.a, gx);
        break;
      }
      case Op::kSoftmaxRows: {
        Mat<T> gx(n.val.rows(), n.val.cols());
        for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
          T dot = g.row(i).dot(n.val.row(i));
          gx.row(i) =
              (n.val.row(i).array() * (g.row(i).array() - dot)).matrix();
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kLogSoftmaxRows: {
        Mat<T> gx(n.val.rows(), n.val.cols());
        for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
          T gsum = g.row(i).sum();
          gx.row(i) =
              (g.row(i).array() - n.val.row(i).array().exp() * gsum).matrix();
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kLayerNormRows: {
        const Mat<T>& gamma = value(n.b);
        Mat<T> gx(n.val.rows(), n.val.cols());
        Mat<T> dgamma = Mat<T>::Zero(1, n.val.cols());
        Mat<T> dbeta = Mat<T>::Zero(1, n.val.cols());
        const T invc = T(1) / static_cast<T>(n.val.cols());
        for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
          auto xhat = n.cache.row(i).array();
          auto dy = g.row(i).array();
          dbeta.row(0).array() += dy;
          dgamma.row(0).array() += dy * xhat;
          auto dxhat = dy * gamma.row(0).array();
          T m1 = dxhat.sum() * invc;
          T m2 = (dxhat * xhat).sum() * invc;
          gx.row(i) = (n.cache2(i, 0) * (dxhat - m1 - xhat * m2)).matrix();
        }
        add_grad(n.a, gx);
        add_grad(n.b, dgamma);
        add_grad(n.c, dbeta);
        break;
      }
      case Op::kRowGather: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        for (size_t i = 0; i < n.idx.size(); ++i)
          if (n.idx[i] >= 0)
            gx.row(n.idx[i]) += g.row(static_cast<Eigen::Index>(i));
        add_grad(n.a, gx);
        break;
      }
      case Op::kSliceRows: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        gx.middleRows(n.i0, n.i1) = g;
        add_grad(n.a, gx);
        break;
      }
      case Op::kSliceCols: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        gx.middleCols(n.i0, n.i1) = g;
        add_grad(n.a, gx);
        break;
      }
      case Op::kReshape: {
        const Mat<T>& X = value(n.a);
        add_grad(n.a, Mat<T>(Eigen::Map<const Mat<T>>(g.data(), X.rows(),
                                                      X.cols())));
        break;
      }
      case Op::kConcatRows: {
        Eigen::Index at = 0;
        for (int p : n.args) {
          Eigen::Index r = value(p).rows();
          add_grad(p, g.middleRows(at, r));
          at += r;
        }
        break;
      }
      case Op::kConcatCols: {
        Eigen::Index at = 0;
        for (int p : n.args) {
          Eigen::Index c = value(p).cols();
          add_grad(p, g.middleCols(at, c));
          at += c;
        }
        break;
      }
      case Op::kTranspose:
        add_grad(n.a, g.transpose());
        break;
      case Op::kMeanRows: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = g.replicate(X.rows(), 1) / static_cast<T>(X.rows());
        add_grad(n.a, gx);
        break;
      }
      case Op::kSumAll: {
        const Mat<T>& X = value(n.a);
        add_grad(n.a, Mat<T>::Constant(X.rows(), X.cols(), g(0, 0)));
        break;
      }
      case Op::kSegmentMean: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx(X.rows(), X.cols());
        for (size_t i = 0; i < n.idx.size(); ++i) {
          int s = n.idx[i];
          gx.row(static_cast<Eigen::Index>(i)) =
              g.row(s) / static_cast<T>(n.counts[s]);
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kSegmentMax: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        for (Eigen::Index s = 0; s < n.val.rows(); ++s)
          for (Eigen::Index c = 0; c < n.val.cols(); ++c)
            if (n.argmax(s, c) >= 0) gx(n.argmax(s, c), c) += g(s, c);
        add_grad(n.a, gx);
        break;
      }
      case Op::kL2NormalizeRows: {
        Mat<T> gx(n.val.rows(), n.val.cols());
        for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
          T dot = g.row(i).dot(n.val.row(i));
          gx.row(i) =
              ((g.row(i).array() - n.val.row(i).array() * dot) * n.cache2(i, 0))
                  .matrix();
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kDiag: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        for (Eigen::Index i = 0; i < X.rows(); ++i) gx(i, i) = g(i, 0);
        add_grad(n.a, gx);
        break;
      }
      case Op::kRowSelect: {
        const Mat<T>& X = value(n.a);
        Mat<T> gx = Mat<T>::Zero(X.rows(), X.cols());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          gx(i, n.idx[i]) += g(i, 0);
        add_grad(n.a, gx);
        break;
      }
      case Op::kMulByScalarNode: {
        const Mat<T>& A = value(n.a);
        T s = value(n.b)(0, 0);
        add_grad(n.a, Mat<T>(g * s));
        Mat<T> gs(1, 1);
        gs(0, 0) = (g.array() * A.array()).sum();
        add_grad(n.b, gs);
        break;
      }
    }
  }

  const ParamStore<T>* store_;
  std::vector<Node> nodes_;
  std::vector<Mat<T>> grads_;
};

}  // namespace mmbeam
