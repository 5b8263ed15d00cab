#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmbeam/core/mat.hpp"

namespace mmbeam {

// Named collection of trainable matrices plus AdamW moment state.
// Registration order is part of the model's determinism contract: parameter
// initialization draws from one RNG stream in registration order.
template <typename T>
class ParamStore {
 public:
  int add(const std::string& name, Mat<T> init) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate param " + name);
    Entry e;
    e.name = name;
    e.m = Mat<T>::Zero(init.rows(), init.cols());
    e.v = Mat<T>::Zero(init.rows(), init.cols());
    e.value = std::move(init);
    by_name_[name] = static_cast<int>(entries_.size());
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  int id(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::invalid_argument("unknown param " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  const Mat<T>& value(int pid) const { return entries_[pid].value; }
  Mat<T>& value(int pid) { return entries_[pid].value; }
  const Mat<T>& value(const std::string& name) const { return value(id(name)); }
  Mat<T>& value(const std::string& name) { return value(id(name)); }

  const std::string& name(int pid) const { return entries_[pid].name; }
  int size() const { return static_cast<int>(entries_.size()); }

  Mat<T>& moment1(int pid) { return entries_[pid].m; }
  Mat<T>& moment2(int pid) { return entries_[pid].v; }

  bool all_finite() const {
    for (const Entry& e : entries_)
      if (!e.value.allFinite()) return false;
    return true;
  }

 private:
  struct Entry {
    std::string name;
    Mat<T> value, m, v;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

// Per-worker gradient accumulator aligned with a ParamStore.
template <typename T>
class GradBuffer {
 public:
  explicit GradBuffer(const ParamStore<T>& store) : store_(&store) {
    grads_.resize(store.size());
    set_.assign(store.size(), false);
  }

  void accumulate(int pid, const Mat<T>& g) {
    if (!set_[pid]) {
      grads_[pid] = g;
      set_[pid] = true;
    } else {
      grads_[pid] += g;
    }
  }

  // Merge another buffer (deterministic reduction; call in fixed order).
  void merge(const GradBuffer<T>& other) {
    for (size_t i = 0; i < grads_.size(); ++i)
      if (other.set_[i]) accumulate(static_cast<int>(i), other.grads_[i]);
  }

  void scale(T s) {
    for (size_t i = 0; i < grads_.size(); ++i)
      if (set_[i]) grads_[i] *= s;
  }

  void clear() {
    set_.assign(set_.size(), false);
  }

  bool is_set(int pid) const { return set_[pid]; }

  const Mat<T>& grad(int pid) const {
    if (!set_[pid]) throw std::logic_error("grad not set");
    return grads_[pid];
  }

  bool all_finite() const {
    for (size_t i = 0; i < grads_.size(); ++i)
      if (set_[i] && !grads_[i].allFinite()) return false;
    return true;
  }

 private:
  const ParamStore<T>* store_;
  std::vector<Mat<T>> grads_;
  std::vector<bool> set_;
};

// AdamW with decoupled weight decay. `trainable` selects which parameters a
// training phase owns; unselected parameters are neither stepped nor decayed.
template <typename T>
struct AdamW {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(0);
  long step_count = 0;

  void step(ParamStore<T>& store, const GradBuffer<T>& grads,
            const std::function<bool(const std::string&)>& trainable) {
    ++step_count;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step_count));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step_count));
    for (int pid = 0; pid < store.size(); ++pid) {
      if (!trainable(store.name(pid))) continue;
      Mat<T>& w = store.value(pid);
      Mat<T> g = grads.is_set(pid) ? grads.grad(pid)
                                   : Mat<T>::Zero(w.rows(), w.cols());
      Mat<T>& m = store.moment1(pid);
      Mat<T>& v = store.moment2(pid);
      m = beta1 * m + (T(1) - beta1) * g;
      v = (beta2 * v.array() + (T(1) - beta2) * g.array().square()).matrix();
      auto mhat = m.array() / bc1;
      auto vhat = v.array() / bc2;
      w.array() -= lr * (mhat / (vhat.sqrt() + eps) + weight_decay * w.array());
    }
  }
};

}  // namespace mmbeam
