#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "transmot/tensor.hpp"

namespace transmot {

/// Ordered name -> parameter registry for a model instance.
class ParameterStore {
 public:
  /// Registers a tensor under a unique name and returns it.
  Tensor add(const std::string& name, Tensor t);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t total_scalars() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Textual checkpoint container: metadata lines plus one block per
/// parameter (name, shape, hexfloat values). Hexfloat keeps save/load
/// bit-exact for every finite double.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> params;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

Checkpoint checkpoint_from_store(const ParameterStore& store,
                                 std::map<std::string, std::string> meta);

/// Copies checkpoint values into the registered tensors; names and shapes
/// must match exactly.
void restore_into_store(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace transmot
