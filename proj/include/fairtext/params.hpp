#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairtext {

enum class ParamGroup { kEncoder, kGenerator, kDiscriminator, kTaskHead };

const char* param_group_name(ParamGroup g);
ParamGroup param_group_from_name(const std::string& name);

// A named trainable tensor with its gradient buffer and owning group.
struct Tensor {
  std::string name;
  ParamGroup group;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

// Flat store of all trainable tensors of a model.  Tensors are addressed by
// name; references returned by add()/at() stay valid for the lifetime of the
// store (backed by a deque).
class ParameterStore {
 public:
  Tensor& add(const std::string& name, ParamGroup group, Eigen::Index rows,
              Eigen::Index cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Tensor*> group_tensors(ParamGroup group);
  std::vector<const Tensor*> group_tensors(ParamGroup group) const;

  void zero_grads();
  // Plain SGD: value -= lr * grad for every tensor in `group`.
  void sgd_step(ParamGroup group, double lr);

  // FNV-1a over the raw bytes of every tensor value in the group, in
  // insertion order.  Used by the alternation-partition checks.
  std::uint64_t group_hash(ParamGroup group) const;

  std::size_t parameter_count() const;
  std::size_t parameter_count(ParamGroup group) const;

  std::deque<Tensor>& tensors() { return tensors_; }
  const std::deque<Tensor>& tensors() const { return tensors_; }

 private:
  std::deque<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fairtext
