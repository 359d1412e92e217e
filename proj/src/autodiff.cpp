#include "fairtext/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "fairtext/errors.hpp"

namespace fairtext {

namespace {
constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}

Tape::NodeId Tape::push(Eigen::MatrixXd value,
                        std::function<void(Tape&, Node&)> back,
                        Tensor* param) {
  nodes_.push_back(Node{std::move(value), {}, std::move(back), param});
  return static_cast<NodeId>(nodes_.size()) - 1;
}

double Tape::scalar(NodeId id) const {
  const auto& v = nodes_[id].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar() on a non 1x1 node");
  }
  return v(0, 0);
}

Tape::NodeId Tape::param(Tensor& t) {
  return push(t.value, {}, &t);
}

Tape::NodeId Tape::constant(const Eigen::MatrixXd& m) {
  return push(m, {});
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto& av = nodes_[a].value;
  const auto& bv = nodes_[b].value;
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dim mismatch");
  return push(av * bv, [a, b](Tape& t, Node& n) {
    t.node(a).grad.noalias() += n.grad * t.node(b).value.transpose();
    t.node(b).grad.noalias() += t.node(a).value.transpose() * n.grad;
  });
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const auto& av = nodes_[a].value;
  const auto& bv = nodes_[b].value;
  if (av.cols() != bv.cols()) throw ShapeError("matmul_nt: inner dim mismatch");
  return push(av * bv.transpose(), [a, b](Tape& t, Node& n) {
    t.node(a).grad.noalias() += n.grad * t.node(b).value;
    t.node(b).grad.noalias() += n.grad.transpose() * t.node(a).value;
  });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const auto& av = nodes_[a].value;
  const auto& bv = nodes_[b].value;
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("add: shape mismatch");
  }
  return push(av + bv, [a, b](Tape& t, Node& n) {
    t.node(a).grad += n.grad;
    t.node(b).grad += n.grad;
  });
}

Tape::NodeId Tape::add_rowvec(NodeId a, NodeId b) {
  const auto& av = nodes_[a].value;
  const auto& bv = nodes_[b].value;
  if (bv.rows() != 1 || av.cols() != bv.cols()) {
    throw ShapeError("add_rowvec: broadcast mismatch");
  }
  Eigen::MatrixXd out = av.rowwise() + bv.row(0);
  return push(std::move(out), [a, b](Tape& t, Node& n) {
    t.node(a).grad += n.grad;
    t.node(b).grad += n.grad.colwise().sum();
  });
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  return push(nodes_[a].value * c, [a, c](Tape& t, Node& n) {
    t.node(a).grad += c * n.grad;
  });
}

Tape::NodeId Tape::tanh(NodeId a) {
  Eigen::MatrixXd y = nodes_[a].value.array().tanh();
  return push(std::move(y), [a](Tape& t, Node& n) {
    t.node(a).grad.array() +=
        n.grad.array() * (1.0 - n.value.array().square());
  });
}

Tape::NodeId Tape::gelu(NodeId a) {
  auto normal_cdf = [](double v) {
    return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
  };
  const auto& x = nodes_[a].value;
  Eigen::MatrixXd y =
      (x.array() * x.array().unaryExpr(normal_cdf)).matrix();
  return push(std::move(y), [a, normal_cdf](Tape& t, Node& n) {
    const auto& x = t.node(a).value.array();
    auto cdf = x.unaryExpr(normal_cdf);
    auto pdf = (-0.5 * x.square()).exp() * kInvSqrt2Pi;
    t.node(a).grad.array() += n.grad.array() * (cdf + x * pdf);
  });
}

Tape::NodeId Tape::leaky_relu(NodeId a, double slope) {
  const auto& x = nodes_[a].value;
  Eigen::MatrixXd y = x.array().max(x.array() * slope).matrix();
  return push(std::move(y), [a, slope](Tape& t, Node& n) {
    const auto& x = t.node(a).value.array();
    t.node(a).grad.array() +=
        n.grad.array() * (x > 0.0).select(
            Eigen::ArrayXXd::Ones(x.rows(), x.cols()),
            Eigen::ArrayXXd::Constant(x.rows(), x.cols(), slope));
  });
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  const auto& x = nodes_[a].value;
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd e = (x.row(r).array() - x.row(r).maxCoeff()).exp();
    y.row(r) = e / e.sum();
  }
  return push(std::move(y), [a](Tape& t, Node& n) {
    for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
      Eigen::ArrayXd yr = n.value.row(r).array();
      Eigen::ArrayXd gr = n.grad.row(r).array();
      double dot = (yr * gr).sum();
      t.node(a).grad.row(r).array() += yr * (gr - dot);
    }
  });
}

Tape::NodeId Tape::layer_norm(NodeId a, NodeId gain, NodeId bias) {
  const auto& x = nodes_[a].value;
  const auto& g = nodes_[gain].value;
  const auto& b = nodes_[bias].value;
  if (g.rows() != 1 || b.rows() != 1 || g.cols() != x.cols() ||
      b.cols() != x.cols()) {
    throw ShapeError("layer_norm: affine params must be 1xN");
  }
  const double n_cols = static_cast<double>(x.cols());
  Eigen::MatrixXd xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().sum() / n_cols;
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Eigen::MatrixXd y =
      (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  return push(std::move(y),
              [a, gain, bias, xhat, inv_std](Tape& t, Node& n) {
                const auto& g = t.node(gain).value;
                const double n_cols = static_cast<double>(n.value.cols());
                t.node(gain).grad.row(0).array() +=
                    (n.grad.array() * xhat.array()).colwise().sum();
                t.node(bias).grad.row(0).array() +=
                    n.grad.array().colwise().sum();
                for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
                  Eigen::ArrayXd dxh =
                      n.grad.row(r).array() * g.row(0).array();
                  Eigen::ArrayXd xh = xhat.row(r).array();
                  double m1 = dxh.sum() / n_cols;
                  double m2 = (dxh * xh).sum() / n_cols;
                  t.node(a).grad.row(r).array() +=
                      inv_std(r) * (dxh - m1 - xh * m2);
                }
              });
}

Tape::NodeId Tape::mean_rows(NodeId a) {
  const auto& x = nodes_[a].value;
  Eigen::MatrixXd y = x.colwise().mean();
  const double inv_l = 1.0 / static_cast<double>(x.rows());
  return push(std::move(y), [a, inv_l](Tape& t, Node& n) {
    t.node(a).grad.array().rowwise() += inv_l * n.grad.row(0).array();
  });
}

Tape::NodeId Tape::row(NodeId a, Eigen::Index i) {
  return push(nodes_[a].value.row(i), [a, i](Tape& t, Node& n) {
    t.node(a).grad.row(i) += n.grad.row(0);
  });
}

Tape::NodeId Tape::cols(NodeId a, Eigen::Index start, Eigen::Index n_cols) {
  return push(nodes_[a].value.middleCols(start, n_cols),
              [a, start, n_cols](Tape& t, Node& n) {
                t.node(a).grad.middleCols(start, n_cols) += n.grad;
              });
}

Tape::NodeId Tape::hcat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("hcat: empty part list");
  Eigen::Index rows = nodes_[parts[0]].value.rows();
  Eigen::Index total = 0;
  for (NodeId p : parts) total += nodes_[p].value.cols();
  Eigen::MatrixXd out(rows, total);
  Eigen::Index off = 0;
  for (NodeId p : parts) {
    out.middleCols(off, nodes_[p].value.cols()) = nodes_[p].value;
    off += nodes_[p].value.cols();
  }
  return push(std::move(out), [parts](Tape& t, Node& n) {
    Eigen::Index off = 0;
    for (NodeId p : parts) {
      Eigen::Index w = t.node(p).value.cols();
      t.node(p).grad += n.grad.middleCols(off, w);
      off += w;
    }
  });
}

Tape::NodeId Tape::embed_rows(Tensor& table, const std::vector<int>& ids) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()),
                      table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      throw ShapeError("embed_rows: id out of range in " + table.name);
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  Tensor* tp = &table;
  return push(std::move(out), [tp, ids](Tape&, Node& n) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Tape::NodeId Tape::abs(NodeId a) {
  return push(nodes_[a].value.array().abs().matrix(), [a](Tape& t, Node& n) {
    t.node(a).grad.array() += n.grad.array() * t.node(a).value.array().sign();
  });
}

Tape::NodeId Tape::square(NodeId a) {
  return push(nodes_[a].value.array().square().matrix(),
              [a](Tape& t, Node& n) {
    t.node(a).grad.array() += 2.0 * n.grad.array() * t.node(a).value.array();
  });
}

Tape::NodeId Tape::sqrt(NodeId a) {
  return push(nodes_[a].value.array().sqrt().matrix(), [a](Tape& t, Node& n) {
    t.node(a).grad.array() +=
        n.grad.array() * 0.5 / n.value.array().max(1e-12);
  });
}

Tape::NodeId Tape::sum(NodeId a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = nodes_[a].value.sum();
  return push(std::move(out), [a](Tape& t, Node& n) {
    t.node(a).grad.array() += n.grad(0, 0);
  });
}

Tape::NodeId Tape::cross_entropy(NodeId logits, int label) {
  const auto& x = nodes_[logits].value;
  if (x.rows() != 1) throw ShapeError("cross_entropy: logits must be 1xK");
  if (label < 0 || label >= x.cols()) {
    throw ParameterError("cross_entropy: label out of range");
  }
  double mx = x.maxCoeff();
  double lse = mx + std::log((x.array() - mx).exp().sum());
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = lse - x(0, label);
  return push(std::move(out), [logits, label, lse](Tape& t, Node& n) {
    const auto& x = t.node(logits).value;
    Eigen::ArrayXXd p = (x.array() - lse).exp();
    p(0, label) -= 1.0;
    t.node(logits).grad.array() += n.grad(0, 0) * p;
  });
}

void Tape::backward(NodeId root) {
  if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1) {
    throw ShapeError("backward: root must be a 1x1 node");
  }
  for (auto& n : nodes_) {
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[root].grad(0, 0) = 1.0;
  for (NodeId i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, n);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace fairtext
