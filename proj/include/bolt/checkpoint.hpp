// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/model.hpp"
#include "bolt/optim.hpp"

namespace bolt {

// Checkpoint layout (all integers little-endian):
//   magic "BOLT" | u32 version | u64 step | u64 opt_steps | u32 tensor count
//   per tensor: u32 name length | name bytes | u8 dtype (0 = f32)
//               | u32 rank | u32 dims[rank]
//   payload: row-major f32 entries for each tensor, manifest order
//   trailer: u32 CRC32 (IEEE) of the payload region

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::uint32_t crc32(const unsigned char* data, std::size_t len,
                           std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return ~crc;
}

template <class V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& in, const std::string& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw IoError("truncated checkpoint file " + path);
  return v;
}

}  // namespace detail

struct CheckpointFile {
  std::uint64_t step = 0;
  std::uint64_t opt_steps = 0;
  std::vector<std::pair<std::string, Mat<float>>> tensors;

  const Mat<float>* find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return &m;
    return nullptr;
  }
};

inline void write_checkpoint(
    const std::string& path, std::uint64_t step, std::uint64_t opt_steps,
    const std::vector<std::pair<std::string, const Mat<float>*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write("BOLT", 4);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  detail::write_pod<std::uint64_t>(out, step);
  detail::write_pod<std::uint64_t>(out, opt_steps);
  detail::write_pod<std::uint32_t>(out,
                                   static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, mat] : tensors) {
    detail::write_pod<std::uint32_t>(out,
                                     static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint8_t>(out, 0);  // f32
    detail::write_pod<std::uint32_t>(out, 2);
    detail::write_pod<std::uint32_t>(out,
                                     static_cast<std::uint32_t>(mat->rows()));
    detail::write_pod<std::uint32_t>(out,
                                     static_cast<std::uint32_t>(mat->cols()));
  }
  std::uint32_t crc = 0;
  for (const auto& [name, mat] : tensors) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(mat->data());
    const std::size_t len = static_cast<std::size_t>(mat->size()) * 4;
    out.write(reinterpret_cast<const char*>(bytes),
              static_cast<std::streamsize>(len));
    crc = detail::crc32(bytes, len, crc);
  }
  detail::write_pod<std::uint32_t>(out, crc);
  if (!out) throw IoError("failed writing checkpoint " + path);
}

inline CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BOLT", 4) != 0)
    throw IoError("bad checkpoint magic in " + path);
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  " in " + path);
  CheckpointFile file;
  file.step = detail::read_pod<std::uint64_t>(in, path);
  file.opt_steps = detail::read_pod<std::uint64_t>(in, path);
  const auto count = detail::read_pod<std::uint32_t>(in, path);
  std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>>
      manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("truncated checkpoint file " + path);
    const auto dtype = detail::read_pod<std::uint8_t>(in, path);
    if (dtype != 0)
      throw IoError("unsupported dtype for tensor " + name + " in " + path);
    const auto rank = detail::read_pod<std::uint32_t>(in, path);
    if (rank != 2)
      throw IoError("unsupported rank for tensor " + name + " in " + path);
    const auto rows = detail::read_pod<std::uint32_t>(in, path);
    const auto cols = detail::read_pod<std::uint32_t>(in, path);
    manifest.emplace_back(std::move(name), std::make_pair(rows, cols));
  }
  std::uint32_t crc = 0;
  for (auto& [name, shape] : manifest) {
    Mat<float> mat(shape.first, shape.second);
    const std::size_t len = static_cast<std::size_t>(mat.size()) * 4;
    in.read(reinterpret_cast<char*>(mat.data()),
            static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in.gcount()) != len)
      throw IoError("truncated checkpoint file " + path);
    crc = detail::crc32(reinterpret_cast<const unsigned char*>(mat.data()),
                        len, crc);
    file.tensors.emplace_back(std::move(name), std::move(mat));
  }
  const auto stored_crc = detail::read_pod<std::uint32_t>(in, path);
  if (stored_crc != crc)
    throw IoError("checksum failure in checkpoint " + path);
  return file;
}

/// Copies file tensors named `prefix + registry name` into the registry.
/// Missing tensors and shape mismatches are structural errors naming the
/// offending tensor.
template <class T>
void restore_tensors(const CheckpointFile& file, const std::string& prefix,
                     const std::vector<NamedTensor<T>>& registry) {
  for (const auto& entry : registry) {
    const Mat<float>* stored = file.find(prefix + entry.name);
    if (!stored)
      throw ShapeError("checkpoint is missing tensor " + prefix + entry.name);
    if (stored->rows() != entry.mat->rows() ||
        stored->cols() != entry.mat->cols())
      throw ShapeError("structural mismatch for tensor " + prefix +
                       entry.name + ": expected " +
                       std::to_string(entry.mat->rows()) + "x" +
                       std::to_string(entry.mat->cols()) + ", file has " +
                       std::to_string(stored->rows()) + "x" +
                       std::to_string(stored->cols()));
    *entry.mat = stored->template cast<T>();
  }
}

/// Full training-state checkpoint: online branch, target branch and the
/// optimizer moments.
inline void save_checkpoint(const std::string& path,
                            OnlineBranch<float>& online,
                            TargetBranch<float>& target, AdamW<float>& opt,
                            std::uint64_t step) {
  std::vector<std::pair<std::string, const Mat<float>*>> entries;
  auto online_reg = named_tensors(online);
  auto target_reg = named_tensors(target);
  opt.ensure_state(online_reg);
  for (const auto& t : online_reg) entries.emplace_back("online." + t.name,
                                                        t.mat);
  for (const auto& t : target_reg) entries.emplace_back("target." + t.name,
                                                        t.mat);
  for (std::size_t i = 0; i < online_reg.size(); ++i) {
    entries.emplace_back("opt.m." + online_reg[i].name, &opt.m[i]);
    entries.emplace_back("opt.v." + online_reg[i].name, &opt.v[i]);
  }
  write_checkpoint(path, step, static_cast<std::uint64_t>(opt.t), entries);
}

/// Restores a full training state; branches must be pre-built with the same
/// architecture. Returns the stored step.
inline std::uint64_t load_checkpoint(const std::string& path,
                                     OnlineBranch<float>& online,
                                     TargetBranch<float>& target,
                                     AdamW<float>* opt = nullptr) {
  const CheckpointFile file = read_checkpoint(path);
  restore_tensors(file, "online.", named_tensors(online));
  restore_tensors(file, "target.", named_tensors(target));
  const std::size_t expected =
      3 * named_tensors(online).size() + named_tensors(target).size();
  if (file.tensors.size() != expected)
    throw ShapeError("checkpoint tensor count mismatch: expected " +
                     std::to_string(expected) + ", file has " +
                     std::to_string(file.tensors.size()));
  if (opt) {
    auto reg = named_tensors(online);
    opt->ensure_state(reg);
    std::vector<NamedTensor<float>> m_reg, v_reg;
    for (std::size_t i = 0; i < reg.size(); ++i) {
      m_reg.push_back({reg[i].name, &opt->m[i]});
      v_reg.push_back({reg[i].name, &opt->v[i]});
    }
    restore_tensors(file, "opt.m.", m_reg);
    restore_tensors(file, "opt.v.", v_reg);
    opt->t = static_cast<std::int64_t>(file.opt_steps);
  }
  return file.step;
}

/// Restores just the online branch (enough for probing / finetuning).
inline std::uint64_t load_online_branch(const std::string& path,
                                        OnlineBranch<float>& online) {
  const CheckpointFile file = read_checkpoint(path);
  restore_tensors(file, "online.", named_tensors(online));
  return file.step;
}

}  // namespace bolt
