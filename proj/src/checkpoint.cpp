#include "transmot/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace transmot {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("parameter name must be non-empty and whitespace-free: '" + name + "'");
  }
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

std::size_t ParameterStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "transmot-checkpoint 1\n";
  for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
  char buf[64];
  for (const auto& [name, t] : params) {
    out << "param " << name << " " << t.dim();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
    const auto& v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", v[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == v.size() ? "\n" : " ");
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "transmot-checkpoint" || version != 1) {
    throw std::runtime_error("not a transmot checkpoint: " + path);
  }
  Checkpoint ckpt;
  std::string tag;
  while (in >> tag) {
    if (tag == "end") return ckpt;
    if (tag == "meta") {
      std::string key;
      in >> key;
      std::string rest;
      std::getline(in, rest);
      const auto pos = rest.find_first_not_of(" \t");
      ckpt.meta[key] = (pos == std::string::npos) ? "" : rest.substr(pos);
    } else if (tag == "param") {
      std::string name;
      int ndim = 0;
      in >> name >> ndim;
      std::vector<int> shape(ndim);
      for (auto& d : shape) in >> d;
      const std::size_t n = shape_numel(shape);
      std::vector<double> values(n);
      std::string tok;
      for (auto& v : values) {
        if (!(in >> tok)) throw std::runtime_error("checkpoint truncated in " + name);
        v = std::strtod(tok.c_str(), nullptr);
      }
      ckpt.params.emplace_back(name, Tensor::from(std::move(shape), std::move(values)));
    } else {
      throw std::runtime_error("unexpected checkpoint token: " + tag);
    }
  }
  throw std::runtime_error("checkpoint missing end marker: " + path);
}

Checkpoint checkpoint_from_store(const ParameterStore& store,
                                 std::map<std::string, std::string> meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  ckpt.params = store.entries();
  return ckpt;
}

void restore_into_store(const Checkpoint& ckpt, ParameterStore& store) {
  if (ckpt.params.size() != store.entries().size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.params.size()) +
                             " parameters, model expects " + std::to_string(store.entries().size()));
  }
  for (const auto& [name, saved] : ckpt.params) {
    Tensor target = store.get(name);
    if (!shapes_equal(saved.shape(), target.shape())) {
      throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                               shape_str(saved.shape()) + " vs " + shape_str(target.shape()));
    }
    target.mutable_values() = saved.values();
  }
}

}  // namespace transmot
