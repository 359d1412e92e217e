#include "fairtext/params.hpp"

#include <cstring>

#include "fairtext/errors.hpp"

namespace fairtext {

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kEncoder:
      return "encoder";
    case ParamGroup::kGenerator:
      return "generator";
    case ParamGroup::kDiscriminator:
      return "discriminator";
    case ParamGroup::kTaskHead:
      return "task_head";
  }
  return "unknown";
}

ParamGroup param_group_from_name(const std::string& name) {
  if (name == "encoder") return ParamGroup::kEncoder;
  if (name == "generator") return ParamGroup::kGenerator;
  if (name == "discriminator") return ParamGroup::kDiscriminator;
  if (name == "task_head") return ParamGroup::kTaskHead;
  throw ParameterError("unknown parameter group: " + name);
}

Tensor& ParameterStore::add(const std::string& name, ParamGroup group,
                            Eigen::Index rows, Eigen::Index cols) {
  if (index_.count(name)) {
    throw ParameterError("duplicate tensor name: " + name);
  }
  index_[name] = tensors_.size();
  tensors_.push_back(Tensor{name, group, Eigen::MatrixXd::Zero(rows, cols),
                            Eigen::MatrixXd::Zero(rows, cols)});
  return tensors_.back();
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("no such tensor: " + name);
  return tensors_[it->second];
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("no such tensor: " + name);
  return tensors_[it->second];
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

std::vector<Tensor*> ParameterStore::group_tensors(ParamGroup group) {
  std::vector<Tensor*> out;
  for (auto& t : tensors_) {
    if (t.group == group) out.push_back(&t);
  }
  return out;
}

std::vector<const Tensor*> ParameterStore::group_tensors(
    ParamGroup group) const {
  std::vector<const Tensor*> out;
  for (const auto& t : tensors_) {
    if (t.group == group) out.push_back(&t);
  }
  return out;
}

void ParameterStore::zero_grads() {
  for (auto& t : tensors_) t.grad.setZero();
}

void ParameterStore::sgd_step(ParamGroup group, double lr) {
  for (auto& t : tensors_) {
    if (t.group == group) t.value -= lr * t.grad;
  }
}

std::uint64_t ParameterStore::group_hash(ParamGroup group) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : tensors_) {
    if (t.group != group) continue;
    mix(t.name.data(), t.name.size());
    mix(t.value.data(), sizeof(double) * t.value.size());
  }
  return h;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::size_t ParameterStore::parameter_count(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (t.group == group) n += static_cast<std::size_t>(t.value.size());
  }
  return n;
}

}  // namespace fairtext
