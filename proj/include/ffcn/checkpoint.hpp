#pragma once

#include "ffcn/param_store.hpp"
#include "ffcn/tensor.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffcn {

// Checkpoint container layout (all integers little-endian):
//   magic "FFCN" | u32 version | u64 entry count
//   per entry: u32 path length | path bytes | u8 dtype | u32 rank | u64 extents[rank] | raw values
// dtype tags: 1 = f32, 2 = f64, 3 = u8.
// Optimizer state lives under reserved "opt/" paths; run metadata under "meta/".

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2, u8 = 3 };

template <class S>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
  return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
  return DType::f64;
}
template <>
constexpr DType dtype_of<std::uint8_t>() {
  return DType::u8;
}

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
  }
  throw std::runtime_error("checkpoint: unknown dtype tag");
}

struct CkptEntry {
  DType dtype = DType::f32;
  Shape shape;
  std::vector<unsigned char> bytes;

  template <class S>
  Tensor<S> as() const {
    if (dtype != dtype_of<S>()) throw std::runtime_error("checkpoint entry dtype mismatch");
    Tensor<S> t;
    t.shape = shape;
    t.data.resize(bytes.size() / sizeof(S));
    std::memcpy(t.data.data(), bytes.data(), bytes.size());
    return t;
  }

  template <class S>
  static CkptEntry of(const Tensor<S>& t) {
    CkptEntry e;
    e.dtype = dtype_of<S>();
    e.shape = t.shape;
    e.bytes.resize(t.data.size() * sizeof(S));
    std::memcpy(e.bytes.data(), t.data.data(), e.bytes.size());
    return e;
  }

  static CkptEntry of_text(const std::string& text) {
    CkptEntry e;
    e.dtype = DType::u8;
    e.shape = {std::max<long>(1, static_cast<long>(text.size()))};
    e.bytes.assign(text.begin(), text.end());
    if (e.bytes.empty()) e.bytes.push_back(0);
    return e;
  }

  std::string text() const { return std::string(bytes.begin(), bytes.end()); }
};

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& file,
                             const std::vector<std::pair<std::string, CkptEntry>>& entries) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + file);
  os.write("FFCN", 4);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint64_t>(os, entries.size());
  for (const auto& [path, e] : entries) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(e.dtype));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(e.shape.size()));
    for (long ext : e.shape) detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(ext));
    os.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + file);
}

inline std::map<std::string, CkptEntry> read_checkpoint(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + file);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FFCN", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + file);
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  const auto count = detail::get<std::uint64_t>(is);
  std::map<std::string, CkptEntry> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto plen = detail::get<std::uint32_t>(is);
    std::string path(plen, '\0');
    is.read(path.data(), plen);
    CkptEntry e;
    e.dtype = static_cast<DType>(detail::get<std::uint8_t>(is));
    const auto rank = detail::get<std::uint32_t>(is);
    e.shape.resize(rank);
    for (auto& ext : e.shape) ext = static_cast<long>(detail::get<std::uint64_t>(is));
    e.bytes.resize(static_cast<std::size_t>(numel(e.shape)) * dtype_size(e.dtype));
    is.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated entry " + path);
    out.emplace(std::move(path), std::move(e));
  }
  return out;
}

/// Serializes parameters, velocity buffers, step count, and run metadata.
template <class S>
void save_train_state(const std::string& file, const ParameterStore<S>& store,
                      const std::string& config_text, long epoch) {
  std::vector<std::pair<std::string, CkptEntry>> entries;
  entries.reserve(store.size() * 2 + 3);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(static_cast<int>(i));
    entries.emplace_back(e.path, CkptEntry::of(e.value));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(static_cast<int>(i));
    entries.emplace_back("opt/vel/" + e.path, CkptEntry::of(e.velocity));
  }
  entries.emplace_back("opt/step", CkptEntry::of(Tensor<double>::scalar(static_cast<double>(store.step_count()))));
  entries.emplace_back("meta/epoch", CkptEntry::of(Tensor<double>::scalar(static_cast<double>(epoch))));
  entries.emplace_back("meta/config", CkptEntry::of_text(config_text));
  write_checkpoint(file, entries);
}

/// Loads parameters and optimizer state into a store built with matching paths.
template <class S>
long load_train_state(const std::string& file, ParameterStore<S>& store) {
  const auto entries = read_checkpoint(file);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(static_cast<int>(i));
    auto it = entries.find(e.path);
    if (it == entries.end()) throw std::runtime_error("checkpoint: missing parameter " + e.path);
    Tensor<S> v = it->second.template as<S>();
    if (v.shape != e.value.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + e.path + ": stored " +
                               shape_str(v.shape) + ", model expects " + shape_str(e.value.shape));
    e.value = std::move(v);
    auto vit = entries.find("opt/vel/" + e.path);
    if (vit != entries.end()) e.velocity = vit->second.template as<S>();
  }
  if (auto it = entries.find("opt/step"); it != entries.end())
    store.set_step_count(static_cast<long>(it->second.template as<double>().item()));
  long epoch = 0;
  if (auto it = entries.find("meta/epoch"); it != entries.end())
    epoch = static_cast<long>(it->second.template as<double>().item());
  return epoch;
}

inline std::string checkpoint_config_text(const std::string& file) {
  const auto entries = read_checkpoint(file);
  auto it = entries.find("meta/config");
  if (it == entries.end()) throw std::runtime_error("checkpoint: no embedded config in " + file);
  return it->second.text();
}

}  // namespace ffcn
