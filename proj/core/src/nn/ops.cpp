// Copyright 2026 The GestureLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gesturelm/nn/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gesturelm::nn {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }

}  // namespace

SeqLayout SeqLayout::uniform(Index count, Index length) {
  SeqLayout l;
  l.offsets.resize(count);
  l.lengths.assign(count, length);
  for (Index i = 0; i < count; ++i) l.offsets[i] = i * length;
  return l;
}

SeqLayout SeqLayout::from_lengths(std::span<const Index> lengths) {
  SeqLayout l;
  Index off = 0;
  for (Index len : lengths) {
    l.offsets.push_back(off);
    l.lengths.push_back(len);
    off += len;
  }
  return l;
}

Index SeqLayout::total_rows() const {
  return lengths.empty() ? 0 : offsets.back() + lengths.back();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out;
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    const Matrix& A = n.inputs[0]->value;
    const Matrix& B = n.inputs[1]->value;
    if (wants(n, 0)) n.inputs[0]->grad_buffer().noalias() += n.grad * B.transpose();
    if (wants(n, 1)) n.inputs[1]->grad_buffer().noalias() += A.transpose() * n.grad;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.cols() == w.rows(), "linear: input width does not match weight");
  Matrix out;
  out.noalias() = x.value() * w.value();
  if (b.defined()) {
    require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape");
    out.rowwise() += b.value().row(0);
    return make_result(std::move(out), {x, w, b}, [](Node& n) {
      if (wants(n, 0)) n.inputs[0]->grad_buffer().noalias() += n.grad * n.inputs[1]->value.transpose();
      if (wants(n, 1)) n.inputs[1]->grad_buffer().noalias() += n.inputs[0]->value.transpose() * n.grad;
      if (wants(n, 2)) n.inputs[2]->grad_buffer() += n.grad.colwise().sum();
    });
  }
  return make_result(std::move(out), {x, w}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->grad_buffer().noalias() += n.grad * n.inputs[1]->value.transpose();
    if (wants(n, 1)) n.inputs[1]->grad_buffer().noalias() += n.inputs[0]->value.transpose() * n.grad;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (wants(n, 1)) n.inputs[1]->accumulate(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (wants(n, 1)) n.inputs[1]->accumulate(-n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad.cwiseProduct(n.inputs[1]->value));
    if (wants(n, 1)) n.inputs[1]->accumulate(n.grad.cwiseProduct(n.inputs[0]->value));
  });
}

Tensor scale(const Tensor& a, Real s) {
  return make_result(a.value() * s, {a}, [s](Node& n) { n.inputs[0]->accumulate(n.grad * s); });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == x.cols(), "add_bias: bias shape");
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {x, bias}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (wants(n, 1)) n.inputs[1]->grad_buffer() += n.grad.colwise().sum();
  });
}

Tensor gelu(const Tensor& x) {
  constexpr Real kInvSqrt2 = 0.70710678118654752440;
  const Matrix& v = x.value();
  Matrix out = v.unaryExpr([](Real t) { return 0.5 * t * (1.0 + std::erf(t * kInvSqrt2)); });
  return make_result(std::move(out), {x}, [](Node& n) {
    constexpr Real kInvSqrt2Pi = 0.39894228040143267794;
    const Matrix& v = n.inputs[0]->value;
    Matrix d = v.unaryExpr([](Real t) {
      return 0.5 * (1.0 + std::erf(t * kInvSqrt2)) + t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
    });
    n.inputs[0]->accumulate(n.grad.cwiseProduct(d));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  const Index rows = x.rows();
  const Index cols = x.cols();
  require(gamma.cols() == cols && beta.cols() == cols, "layer_norm: parameter width");
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const auto row = x.value().row(r);
    const Real mu = row.mean();
    const Real var = (row.array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mu) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                       const Matrix& g = n.grad;
                       if (wants(n, 1)) n.inputs[1]->grad_buffer() += g.cwiseProduct(xhat).colwise().sum();
                       if (wants(n, 2)) n.inputs[2]->grad_buffer() += g.colwise().sum();
                       if (!wants(n, 0)) return;
                       Matrix dxhat = g;
                       dxhat.array().rowwise() *= n.inputs[1]->value.row(0).array();
                       const Index cols = g.cols();
                       Matrix dx(g.rows(), cols);
                       for (Index r = 0; r < g.rows(); ++r) {
                         const Real m1 = dxhat.row(r).mean();
                         const Real m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<Real>(cols);
                         dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                       }
                       n.inputs[0]->accumulate(dx);
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    }
    out.row(static_cast<Index>(i)) = table.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {table}, [idx = std::move(idx)](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Tensor select_cols(const Tensor& x, std::span<const Index> cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= x.cols()) throw std::out_of_range("select_cols: column out of range");
    out.col(static_cast<Index>(j)) = x.value().col(cols[j]);
  }
  std::vector<Index> idx(cols.begin(), cols.end());
  return make_result(std::move(out), {x}, [idx = std::move(idx)](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (std::size_t j = 0; j < idx.size(); ++j) g.col(idx[j]) += n.grad.col(static_cast<Index>(j));
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Index total = 0;
  const Index cols = parts.front().cols();
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: width mismatch");
    total += p.rows();
  }
  Matrix out(total, cols);
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return make_result(std::move(out), parts, [](Node& n) {
    Index off = 0;
    for (auto& in : n.inputs) {
      const Index r = in->value.rows();
      if (in->requires_grad) in->grad_buffer() += n.grad.middleRows(off, r);
      off += r;
    }
  });
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), "slice_rows: range out of bounds");
  return make_result(x.value().middleRows(begin, count), {x}, [begin, count](Node& n) {
    n.inputs[0]->grad_buffer().middleRows(begin, count) += n.grad;
  });
}

Tensor reshape(const Tensor& x, Index rows, Index cols) {
  require(rows * cols == x.rows() * x.cols(), "reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return make_result(std::move(out), {x}, [](Node& n) {
    const auto& in = n.inputs[0]->value;
    n.inputs[0]->accumulate(Eigen::Map<const Matrix>(n.grad.data(), in.rows(), in.cols()));
  });
}

Tensor assemble_rows(const std::vector<Tensor>& sources, std::span<const RowRef> refs) {
  require(!sources.empty(), "assemble_rows: no sources");
  const Index cols = sources.front().cols();
  for (const auto& s : sources) require(s.cols() == cols, "assemble_rows: width mismatch");
  Matrix out(static_cast<Index>(refs.size()), cols);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    require(ref.source < sources.size(), "assemble_rows: bad source index");
    require(ref.row >= 0 && ref.row < sources[ref.source].rows(), "assemble_rows: row out of range");
    out.row(static_cast<Index>(i)) = sources[ref.source].value().row(ref.row);
  }
  std::vector<RowRef> copy(refs.begin(), refs.end());
  return make_result(std::move(out), sources, [copy = std::move(copy)](Node& n) {
    for (std::size_t i = 0; i < copy.size(); ++i) {
      auto& in = n.inputs[copy[i].source];
      if (in->requires_grad) in->grad_buffer().row(copy[i].row) += n.grad.row(static_cast<Index>(i));
    }
  });
}

Tensor repeat_rows(const Tensor& x, Index times) {
  require(times >= 1, "repeat_rows: times must be positive");
  Matrix out(x.rows() * times, x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index t = 0; t < times; ++t) out.row(r * times + t) = x.value().row(r);
  }
  return make_result(std::move(out), {x}, [times](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (Index r = 0; r < g.rows(); ++r) {
      for (Index t = 0; t < times; ++t) g.row(r) += n.grad.row(r * times + t);
    }
  });
}

Tensor mean_pool_rows(const Tensor& x, Index group) {
  require(group >= 1 && x.rows() % group == 0, "mean_pool_rows: rows not divisible by group");
  const Index out_rows = x.rows() / group;
  Matrix out = Matrix::Zero(out_rows, x.cols());
  for (Index r = 0; r < x.rows(); ++r) out.row(r / group) += x.value().row(r);
  out /= static_cast<Real>(group);
  return make_result(std::move(out), {x}, [group](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    const Real inv = 1.0 / static_cast<Real>(group);
    for (Index r = 0; r < g.rows(); ++r) g.row(r) += n.grad.row(r / group) * inv;
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const SeqLayout& layout, int heads,
                 std::span<const std::uint8_t> key_valid) {
  const Index width = q.cols();
  require(k.cols() == width && v.cols() == width, "attention: width mismatch");
  require(q.rows() == k.rows() && q.rows() == v.rows(), "attention: row mismatch");
  require(layout.total_rows() == q.rows(), "attention: layout does not cover input");
  require(heads >= 1 && width % heads == 0, "attention: width not divisible by heads");
  require(key_valid.empty() || static_cast<Index>(key_valid.size()) == q.rows(), "attention: key mask size");
  const Index dh = width / heads;
  const Real inv_sqrt = 1.0 / std::sqrt(static_cast<Real>(dh));

  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(q.rows(), width);
  std::vector<Matrix> probs;
  probs.reserve(layout.size() * static_cast<std::size_t>(heads));

  for (std::size_t s = 0; s < layout.size(); ++s) {
    const Index off = layout.offsets[s];
    const Index len = layout.lengths[s];
    for (int h = 0; h < heads; ++h) {
      const Index c0 = h * dh;
      Matrix S;
      S.noalias() = Q.block(off, c0, len, dh) * K.block(off, c0, len, dh).transpose();
      S *= inv_sqrt;
      for (Index i = 0; i < len; ++i) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (Index j = 0; j < len; ++j) {
          if (!key_valid.empty() && !key_valid[off + j]) {
            S(i, j) = -std::numeric_limits<Real>::infinity();
          } else {
            mx = std::max(mx, S(i, j));
          }
        }
        if (!std::isfinite(mx)) {
          S.row(i).setZero();
          continue;
        }
        Real z = 0;
        for (Index j = 0; j < len; ++j) {
          const Real e = std::isinf(S(i, j)) ? 0.0 : std::exp(S(i, j) - mx);
          S(i, j) = e;
          z += e;
        }
        S.row(i) /= z;
      }
      out.block(off, c0, len, dh).noalias() = S * V.block(off, c0, len, dh);
      probs.push_back(std::move(S));
    }
  }

  return make_result(std::move(out), {q, k, v},
                     [probs = std::move(probs), layout, heads, dh, inv_sqrt](Node& n) {
                       const Matrix& Q = n.inputs[0]->value;
                       const Matrix& K = n.inputs[1]->value;
                       const Matrix& V = n.inputs[2]->value;
                       Matrix* dQ = wants(n, 0) ? &n.inputs[0]->grad_buffer() : nullptr;
                       Matrix* dK = wants(n, 1) ? &n.inputs[1]->grad_buffer() : nullptr;
                       Matrix* dV = wants(n, 2) ? &n.inputs[2]->grad_buffer() : nullptr;
                       std::size_t p = 0;
                       for (std::size_t s = 0; s < layout.size(); ++s) {
                         const Index off = layout.offsets[s];
                         const Index len = layout.lengths[s];
                         for (int h = 0; h < heads; ++h, ++p) {
                           const Index c0 = h * dh;
                           const Matrix& P = probs[p];
                           const auto dO = n.grad.block(off, c0, len, dh);
                           if (dV) dV->block(off, c0, len, dh).noalias() += P.transpose() * dO;
                           if (!dQ && !dK) continue;
                           Matrix dP;
                           dP.noalias() = dO * V.block(off, c0, len, dh).transpose();
                           Eigen::VectorXd rowdot = dP.cwiseProduct(P).rowwise().sum();
                           Matrix dS = P.cwiseProduct(dP.colwise() - rowdot);
                           dS *= inv_sqrt;
                           if (dQ) dQ->block(off, c0, len, dh).noalias() += dS * K.block(off, c0, len, dh);
                           if (dK) dK->block(off, c0, len, dh).noalias() += dS.transpose() * Q.block(off, c0, len, dh);
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  return make_result(Matrix::Constant(1, 1, x.value().sum()), {x}, [](Node& n) {
    const auto& in = n.inputs[0]->value;
    n.inputs[0]->accumulate(Matrix::Constant(in.rows(), in.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  const Real count = static_cast<Real>(x.value().size());
  require(count > 0, "mean: empty tensor");
  return make_result(Matrix::Constant(1, 1, x.value().sum() / count), {x}, [count](Node& n) {
    const auto& in = n.inputs[0]->value;
    n.inputs[0]->accumulate(Matrix::Constant(in.rows(), in.cols(), n.grad(0, 0) / count));
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  const Real count = static_cast<Real>(a.value().size());
  require(count > 0, "mse: empty tensor");
  Matrix diff = a.value() - b.value();
  const Real loss = diff.squaredNorm() / count;
  return make_result(Matrix::Constant(1, 1, loss), {a, b}, [diff = std::move(diff), count](Node& n) {
    const Real g = 2.0 * n.grad(0, 0) / count;
    if (wants(n, 0)) n.inputs[0]->accumulate(diff * g);
    if (wants(n, 1)) n.inputs[1]->accumulate(diff * (-g));
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const Real mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Tensor cross_entropy(const Tensor& logits, std::span<const Index> targets) {
  require(static_cast<Index>(targets.size()) == logits.rows(), "cross_entropy: target count");
  if (targets.empty()) return Tensor::scalar(0.0);
  Matrix p = softmax_rows(logits.value());
  Real loss = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Index t = targets[i];
    if (t < 0 || t >= logits.cols()) throw std::out_of_range("cross_entropy: target out of range");
    const auto row = logits.value().row(static_cast<Index>(i));
    const Real mx = row.maxCoeff();
    const Real lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row(t);
  }
  const Real n_rows = static_cast<Real>(targets.size());
  loss /= n_rows;
  std::vector<Index> tgt(targets.begin(), targets.end());
  return make_result(Matrix::Constant(1, 1, loss), {logits},
                     [p = std::move(p), tgt = std::move(tgt), n_rows](Node& n) {
                       Matrix g = p;
                       for (std::size_t i = 0; i < tgt.size(); ++i) g(static_cast<Index>(i), tgt[i]) -= 1.0;
                       n.inputs[0]->accumulate(g * (n.grad(0, 0) / n_rows));
                     });
}

}  // namespace gesturelm::nn
