#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fairtext/params.hpp"

namespace fairtext {

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records one forward computation as a sequence of nodes; backward()
// walks the sequence in reverse and accumulates gradients.  Leaf nodes may
// reference Tensors in a ParameterStore, in which case their gradients are
// flushed into Tensor::grad at the end of backward().
//
// Vectors are represented as 1xN row matrices throughout.
class Tape {
 public:
  using NodeId = int;

  // Leaves.
  NodeId param(Tensor& t);                     // gradient flows into t.grad
  NodeId constant(const Eigen::MatrixXd& m);   // no gradient

  // Core ops.
  NodeId matmul(NodeId a, NodeId b);            // A * B
  NodeId matmul_nt(NodeId a, NodeId b);         // A * B^T
  NodeId add(NodeId a, NodeId b);               // same shape
  NodeId add_rowvec(NodeId a, NodeId b);        // A (LxN) + broadcast b (1xN)
  NodeId scale(NodeId a, double c);
  NodeId tanh(NodeId a);
  NodeId gelu(NodeId a);
  NodeId leaky_relu(NodeId a, double slope);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm(NodeId a, NodeId gain, NodeId bias);  // per-row, 1xN affine
  NodeId mean_rows(NodeId a);                   // LxN -> 1xN
  NodeId row(NodeId a, Eigen::Index i);         // 1xN view of row i
  NodeId cols(NodeId a, Eigen::Index start, Eigen::Index n);
  NodeId hcat(const std::vector<NodeId>& parts);
  NodeId embed_rows(Tensor& table, const std::vector<int>& ids);
  NodeId abs(NodeId a);                         // elementwise |x|
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);                        // elementwise, x >= 0
  NodeId sum(NodeId a);                         // all entries -> 1x1

  // -log softmax(logits)[label]; logits is 1xK.  Returns a 1x1 node.
  NodeId cross_entropy(NodeId logits, int label);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const { return nodes_[id].grad; }
  double scalar(NodeId id) const;

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and accumulates gradients
  // into every reachable node and referenced parameter tensor.
  void backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&, Node&)> back;  // empty for leaves/constants
    Tensor* param = nullptr;
  };

  NodeId push(Eigen::MatrixXd value, std::function<void(Tape&, Node&)> back,
              Tensor* param = nullptr);
  Node& node(NodeId id) { return nodes_[id]; }

  std::vector<Node> nodes_;
};

}  // namespace fairtext
