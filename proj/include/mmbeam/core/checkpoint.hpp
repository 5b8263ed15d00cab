#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/mat.hpp"
#include "mmbeam/core/params.hpp"

namespace mmbeam {

// Binary checkpoint: little-endian, raw IEEE parameter payloads so that
// load(save(params)) round-trips bit-exactly. A free-form JSON string carries
// the model configuration alongside the weights.
namespace ckpt {

constexpr uint32_t kMagic = 0x4d4d4243;  // "MMBC"
constexpr uint32_t kVersion = 1;

namespace detail {
template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}
template <typename U>
U get(std::istream& is) {
  U v;
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
}  // namespace detail

template <typename T>
void save(const ParamStore<T>& store, const std::string& config_json,
          const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  detail::put<uint32_t>(os, kMagic);
  detail::put<uint32_t>(os, kVersion);
  detail::put<uint8_t>(os, static_cast<uint8_t>(sizeof(T)));
  detail::put<uint64_t>(os, config_json.size());
  os.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  detail::put<uint64_t>(os, static_cast<uint64_t>(store.size()));
  for (int pid = 0; pid < store.size(); ++pid) {
    const std::string& name = store.name(pid);
    const Mat<T>& w = store.value(pid);
    detail::put<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<uint64_t>(os, static_cast<uint64_t>(w.rows()));
    detail::put<uint64_t>(os, static_cast<uint64_t>(w.cols()));
    os.write(reinterpret_cast<const char*>(w.data()),
             static_cast<std::streamsize>(sizeof(T) * w.size()));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

template <typename T>
struct Loaded {
  std::string config_json;
  std::map<std::string, Mat<T>> tensors;
};

template <typename T>
Loaded<T> load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  if (detail::get<uint32_t>(is) != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (detail::get<uint32_t>(is) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  if (detail::get<uint8_t>(is) != sizeof(T))
    throw std::runtime_error("checkpoint: scalar width mismatch in " + path);
  Loaded<T> out;
  uint64_t jlen = detail::get<uint64_t>(is);
  out.config_json.resize(jlen);
  is.read(out.config_json.data(), static_cast<std::streamsize>(jlen));
  uint64_t n = detail::get<uint64_t>(is);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t nlen = detail::get<uint32_t>(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    uint64_t rows = detail::get<uint64_t>(is);
    uint64_t cols = detail::get<uint64_t>(is);
    Mat<T> w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(T) * rows * cols));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor in " + path);
    out.tensors.emplace(std::move(name), std::move(w));
  }
  return out;
}

// Copy tensors whose name passes `filter` into `store`; shapes must match.
template <typename T, typename Pred>
int apply(ParamStore<T>& store, const Loaded<T>& loaded, Pred filter) {
  int applied = 0;
  for (const auto& [name, w] : loaded.tensors) {
    if (!filter(name)) continue;
    if (!store.has(name))
      throw std::runtime_error("checkpoint: unexpected tensor " + name);
    Mat<T>& dst = store.value(name);
    if (dst.rows() != w.rows() || dst.cols() != w.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    dst = w;
    ++applied;
  }
  return applied;
}

}  // namespace ckpt
}  // namespace mmbeam
